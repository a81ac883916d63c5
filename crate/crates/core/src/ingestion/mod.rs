//! Chain-data ingestion: fixture files, remote sources, event decoding.
//!
//! Everything the detectors consume arrives through the [`DataSource`] trait —
//! blocks, raw logs, bytecode, traces, internal transfers — so the same scan
//! code runs against a newline-delimited JSON fixture ([`FixtureSource`]) or a
//! JSON-RPC archive node ([`JsonRpcSource`]). [`load_snapshot`] pulls a block
//! range through a source, decodes token-transfer logs, cross-checks every
//! reference, and hands back an immutable [`ChainSnapshot`].

mod fixture;
mod hex_fields;
mod rpc;

pub use fixture::{
    read_records, write_records, BlockRecord, CodeRecord, FixtureSource, InternalRecord, LogRecord,
    Record, TraceRecord, TxRecord,
};
pub use rpc::JsonRpcSource;

use std::collections::BTreeMap;
use std::sync::OnceLock;

use num_bigint::BigUint;
use sha3::{Digest, Keccak256};

use crate::chain_model::{
    Address, Block, ChainSnapshot, ExecutionTrace, InternalTransfer, PriceTable, Transaction,
    TransferEvent, TxHash,
};
use crate::{Error, Result};

/// An undecoded contract log, as served by a node or fixture.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RawLog {
    /// Transaction that emitted the log.
    pub tx_hash: TxHash,
    pub block_number: u64,
    /// Position in the block's log stream.
    pub log_index: u32,
    /// Emitting contract.
    pub address: Address,
    /// Indexed topics; `topics[0]` is the event signature.
    pub topics: Vec<[u8; 32]>,
    /// Unindexed payload.
    pub data: Vec<u8>,
}

/// Anything that can serve chain history for a snapshot load.
///
/// Implementations must be read-only and repeatable: two identical calls see
/// the same history. The engine holds the source only while loading; scans
/// run entirely against the resulting snapshot.
pub trait DataSource {
    /// The block at `number`, or `None` if the source does not have it.
    fn block(&self, number: u64) -> Result<Option<Block>>;

    /// All logs emitted in blocks `from..=to`.
    fn logs(&self, from: u64, to: u64) -> Result<Vec<RawLog>>;

    /// Deployed bytecode at `address`, or `None` for plain accounts.
    fn code(&self, address: &Address) -> Result<Option<Vec<u8>>>;

    /// Executed-opcode trace of `tx`, if the source keeps traces.
    fn trace(&self, tx: &TxHash) -> Result<Option<ExecutionTrace>>;

    /// Internal (message-call) ether transfers produced by `tx`.
    fn internal_transfers(&self, tx: &TxHash) -> Result<Vec<InternalTransfer>>;
}

/// The `Transfer(address,address,uint256)` event signature topic.
///
/// Computed (once) by hashing the canonical signature string with Keccak-256
/// rather than pasted in as a constant, so the decoder and the hash
/// implementation can never drift apart.
pub fn transfer_signature_topic() -> &'static [u8; 32] {
    static TOPIC: OnceLock<[u8; 32]> = OnceLock::new();
    TOPIC.get_or_init(|| {
        let digest = Keccak256::digest(b"Transfer(address,address,uint256)");
        digest.into()
    })
}

/// Decode `log` as an ERC-20 `Transfer`, if it is one.
///
/// Returns `Ok(None)` for logs that are simply not token transfers (different
/// signature, or an anonymous/malformed topic count), and an error for logs
/// that claim to be transfers but carry a payload that is not a single 32-byte
/// amount word. The sender/recipient are the rightmost 20 bytes of topics 1
/// and 2; the amount is the full big-endian data word.
pub fn decode_transfer_event(log: &RawLog, tx: &Transaction) -> Result<Option<TransferEvent>> {
    if log.topics.len() != 3 || &log.topics[0] != transfer_signature_topic() {
        return Ok(None);
    }
    if log.data.len() != 32 {
        return Err(Error::MalformedTransferLog(format!(
            "expected 32-byte amount word, got {} bytes (tx {}, log {})",
            log.data.len(),
            log.tx_hash,
            log.log_index
        )));
    }
    let take_address = |topic: &[u8; 32]| {
        let mut a = [0u8; 20];
        a.copy_from_slice(&topic[12..]);
        Address(a)
    };
    Ok(Some(TransferEvent {
        token: log.address,
        sender: take_address(&log.topics[1]),
        receiver: take_address(&log.topics[2]),
        amount: BigUint::from_bytes_be(&log.data),
        tx_hash: log.tx_hash,
        block_number: log.block_number,
        tx_index: tx.tx_index,
        log_index: log.log_index,
        gas_price: tx.gas_price,
    }))
}

/// Load and validate blocks `from..=to` into a [`ChainSnapshot`].
///
/// Fails fast on the first missing block, undecodable transfer log, or
/// dangling cross-reference. Traces and internal transfers are fetched for
/// every transaction in range; bytecode for every distinct receiver.
pub fn load_snapshot(
    source: &dyn DataSource,
    from: u64,
    to: u64,
    prices: PriceTable,
) -> Result<ChainSnapshot> {
    if from > to {
        return Err(Error::InvalidParameter(format!(
            "block range is inverted: {from} > {to}"
        )));
    }

    let mut blocks = Vec::with_capacity((to - from + 1) as usize);
    for number in from..=to {
        match source.block(number)? {
            Some(block) => blocks.push(block),
            None => return Err(Error::MissingBlock(number)),
        }
    }

    // Index transactions so logs can be joined to their emitters.
    let mut tx_by_hash: BTreeMap<TxHash, &Transaction> = BTreeMap::new();
    for block in &blocks {
        for tx in &block.transactions {
            tx_by_hash.insert(tx.hash, tx);
        }
    }

    let mut transfer_events = Vec::new();
    for log in source.logs(from, to)? {
        let tx = tx_by_hash
            .get(&log.tx_hash)
            .ok_or_else(|| Error::Data(format!("log references unknown tx {}", log.tx_hash)))?;
        if let Some(event) = decode_transfer_event(&log, tx)? {
            transfer_events.push(event);
        }
    }

    let mut codes = BTreeMap::new();
    for block in &blocks {
        for tx in &block.transactions {
            let Some(receiver) = tx.receiver else {
                continue;
            };
            if codes.contains_key(&receiver) {
                continue;
            }
            if let Some(code) = source.code(&receiver)? {
                if !code.is_empty() {
                    codes.insert(receiver, code);
                }
            }
        }
    }

    let mut traces = Vec::new();
    let mut internal_transfers = Vec::new();
    for block in &blocks {
        for tx in &block.transactions {
            if let Some(trace) = source.trace(&tx.hash)? {
                traces.push(trace);
            }
            internal_transfers.extend(source.internal_transfers(&tx.hash)?);
        }
    }

    ChainSnapshot::assemble(
        blocks,
        transfer_events,
        internal_transfers,
        codes,
        traces,
        prices,
    )
}
