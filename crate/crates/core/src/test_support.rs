//! Shared builders for unit tests: compact constructors for addresses,
//! transactions, blocks and assembled snapshots.

use crate::chain_model::{
    Address, Block, ChainSnapshot, ExecutionTrace, InternalTransfer, PriceTable, TraceTerminal,
    Transaction, TransferEvent, TxHash, TxStatus,
};
use num_bigint::BigUint;
use std::collections::BTreeMap;

pub fn addr(byte: u8) -> Address {
    Address([byte; 20])
}

pub fn hash(byte: u8) -> TxHash {
    TxHash([byte; 32])
}

/// Builder for a [`Transaction`] with innocuous defaults; only the fields a
/// test cares about need to be spelled out.
pub struct TxBuilder {
    tx: Transaction,
}

pub fn tx(hash_byte: u8) -> TxBuilder {
    TxBuilder {
        tx: Transaction {
            hash: hash(hash_byte),
            block_number: 0,
            tx_index: 0,
            sender: addr(0xAA),
            receiver: Some(addr(0xBB)),
            value: 0,
            gas_limit: 100_000,
            gas_used: 21_000,
            gas_price: 1_000_000_000,
            input: Vec::new(),
            status: TxStatus::Success,
        },
    }
}

impl TxBuilder {
    pub fn sender(mut self, a: Address) -> Self {
        self.tx.sender = a;
        self
    }
    pub fn receiver(mut self, a: Address) -> Self {
        self.tx.receiver = Some(a);
        self
    }
    pub fn value(mut self, v: u128) -> Self {
        self.tx.value = v;
        self
    }
    pub fn gas_limit(mut self, g: u64) -> Self {
        self.tx.gas_limit = g;
        self
    }
    pub fn gas_used(mut self, g: u64) -> Self {
        self.tx.gas_used = g;
        self
    }
    pub fn gas_price(mut self, p: u128) -> Self {
        self.tx.gas_price = p;
        self
    }
    pub fn input(mut self, bytes: &[u8]) -> Self {
        self.tx.input = bytes.to_vec();
        self
    }
    pub fn build(self) -> Transaction {
        self.tx
    }
}

/// A block at `number` holding `txs`; indices and block numbers are filled in
/// positionally so tests never have to keep them consistent by hand.
pub fn block(number: u64, txs: Vec<Transaction>) -> Block {
    let transactions = txs
        .into_iter()
        .enumerate()
        .map(|(i, mut t)| {
            t.block_number = number;
            t.tx_index = i as u32;
            t
        })
        .collect();
    Block {
        number,
        timestamp: 1_600_000_000 + number * 13,
        miner: addr(0x99),
        gas_limit: 12_000_000,
        gas_used: 0,
        transactions,
    }
}

pub fn price_table_400() -> PriceTable {
    PriceTable::from_csv_str("date,eth_usd\n2020-01-01,400\n").unwrap()
}

pub struct SnapshotBuilder {
    blocks: Vec<Block>,
    events: Vec<TransferEvent>,
    internals: Vec<InternalTransfer>,
    codes: BTreeMap<Address, Vec<u8>>,
    traces: Vec<ExecutionTrace>,
    prices: PriceTable,
}

pub fn snapshot(blocks: Vec<Block>) -> SnapshotBuilder {
    SnapshotBuilder {
        blocks,
        events: Vec::new(),
        internals: Vec::new(),
        codes: BTreeMap::new(),
        traces: Vec::new(),
        prices: price_table_400(),
    }
}

impl SnapshotBuilder {
    pub fn event(mut self, ev: TransferEvent) -> Self {
        self.events.push(ev);
        self
    }
    pub fn internal(mut self, parent: TxHash, from: Address, to: Address, value: u128) -> Self {
        self.internals.push(InternalTransfer {
            parent_tx: parent,
            from,
            to,
            value,
        });
        self
    }
    pub fn code(mut self, a: Address, bytes: &[u8]) -> Self {
        self.codes.insert(a, bytes.to_vec());
        self
    }
    pub fn trace(mut self, h: TxHash, opcodes: &[&str], terminal: TraceTerminal) -> Self {
        self.traces.push(ExecutionTrace {
            tx_hash: h,
            opcodes: opcodes.iter().map(|s| s.to_string()).collect(),
            terminal,
        });
        self
    }
    /// Attaches the canonical stuffing trace — eleven clean repetitions of
    /// the gas-check loop — to transaction `h`.
    pub fn gas_loop_trace(self, h: TxHash) -> Self {
        let ops: Vec<String> = std::iter::repeat_n(["GAS", "GT", "ISZERO", "JUMPI"], 11)
            .flatten()
            .map(str::to_string)
            .collect();
        let refs: Vec<&str> = ops.iter().map(String::as_str).collect();
        self.trace(h, &refs, TraceTerminal::Normal)
    }
    pub fn build(self) -> ChainSnapshot {
        ChainSnapshot::assemble(
            self.blocks,
            self.events,
            self.internals,
            self.codes,
            self.traces,
            self.prices,
        )
        .expect("test snapshot must assemble")
    }
}

/// Convenience for an ERC-20 transfer event observed in `tx`.
#[allow(clippy::too_many_arguments)]
pub fn transfer_in(
    t: &Transaction,
    log_index: u32,
    token: Address,
    from: Address,
    to: Address,
    amount: u128,
) -> TransferEvent {
    TransferEvent {
        token,
        sender: from,
        receiver: to,
        amount: BigUint::from(amount),
        tx_hash: t.hash,
        block_number: t.block_number,
        tx_index: t.tx_index,
        log_index,
        gas_price: t.gas_price,
    }
}
