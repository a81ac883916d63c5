//! Newline-delimited JSON fixture files.
//!
//! A fixture is a flat stream of self-describing records — one JSON object per
//! line, discriminated by a `kind` field — carrying everything a snapshot
//! needs: blocks (with embedded transactions), raw logs, contract bytecode,
//! execution traces, and internal transfers. Numeric fields are 0x-prefixed
//! hex strings; see [`super::hex_fields`].
//!
//! The exact field layout is part of the tool's external contract and is
//! pinned by golden-file tests: changing a name or reordering fields breaks
//! every stored fixture.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::hex_fields::{hex_bytes, hex_u128, hex_u32, hex_u64, hex_words};
use super::{DataSource, RawLog};
use crate::chain_model::{
    Address, Block, ExecutionTrace, InternalTransfer, TraceTerminal, Transaction, TxHash, TxStatus,
};
use crate::{Error, Result};

/// One fixture line.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Record {
    Block(BlockRecord),
    Log(LogRecord),
    Code(CodeRecord),
    Trace(TraceRecord),
    Internal(InternalRecord),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockRecord {
    #[serde(with = "hex_u64")]
    pub number: u64,
    #[serde(with = "hex_u64")]
    pub timestamp: u64,
    pub miner: Address,
    #[serde(with = "hex_u64")]
    pub gas_limit: u64,
    #[serde(with = "hex_u64")]
    pub gas_used: u64,
    pub transactions: Vec<TxRecord>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TxRecord {
    pub hash: TxHash,
    #[serde(with = "hex_u32")]
    pub tx_index: u32,
    pub sender: Address,
    /// `null` for contract creation.
    pub receiver: Option<Address>,
    #[serde(with = "hex_u128")]
    pub value: u128,
    #[serde(with = "hex_u64")]
    pub gas_limit: u64,
    #[serde(with = "hex_u64")]
    pub gas_used: u64,
    #[serde(with = "hex_u128")]
    pub gas_price: u128,
    #[serde(with = "hex_bytes")]
    pub input: Vec<u8>,
    pub status: TxStatus,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogRecord {
    pub tx_hash: TxHash,
    #[serde(with = "hex_u64")]
    pub block_number: u64,
    #[serde(with = "hex_u32")]
    pub log_index: u32,
    pub address: Address,
    #[serde(with = "hex_words")]
    pub topics: Vec<[u8; 32]>,
    #[serde(with = "hex_bytes")]
    pub data: Vec<u8>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeRecord {
    pub address: Address,
    #[serde(with = "hex_bytes")]
    pub bytecode: Vec<u8>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub tx_hash: TxHash,
    pub opcodes: Vec<String>,
    pub terminal: TraceTerminal,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InternalRecord {
    pub parent_tx: TxHash,
    pub from: Address,
    pub to: Address,
    #[serde(with = "hex_u128")]
    pub value: u128,
}

impl BlockRecord {
    pub fn from_block(block: &Block) -> Self {
        BlockRecord {
            number: block.number,
            timestamp: block.timestamp,
            miner: block.miner,
            gas_limit: block.gas_limit,
            gas_used: block.gas_used,
            transactions: block
                .transactions
                .iter()
                .map(|tx| TxRecord {
                    hash: tx.hash,
                    tx_index: tx.tx_index,
                    sender: tx.sender,
                    receiver: tx.receiver,
                    value: tx.value,
                    gas_limit: tx.gas_limit,
                    gas_used: tx.gas_used,
                    gas_price: tx.gas_price,
                    input: tx.input.clone(),
                    status: tx.status,
                })
                .collect(),
        }
    }

    pub fn into_block(self) -> Block {
        let number = self.number;
        Block {
            number,
            timestamp: self.timestamp,
            miner: self.miner,
            gas_limit: self.gas_limit,
            gas_used: self.gas_used,
            transactions: self
                .transactions
                .into_iter()
                .map(|tx| Transaction {
                    hash: tx.hash,
                    block_number: number,
                    tx_index: tx.tx_index,
                    sender: tx.sender,
                    receiver: tx.receiver,
                    value: tx.value,
                    gas_limit: tx.gas_limit,
                    gas_used: tx.gas_used,
                    gas_price: tx.gas_price,
                    input: tx.input,
                    status: tx.status,
                })
                .collect(),
        }
    }
}

impl LogRecord {
    pub fn into_raw_log(self) -> RawLog {
        RawLog {
            tx_hash: self.tx_hash,
            block_number: self.block_number,
            log_index: self.log_index,
            address: self.address,
            topics: self.topics,
            data: self.data,
        }
    }

    pub fn from_raw_log(log: &RawLog) -> Self {
        LogRecord {
            tx_hash: log.tx_hash,
            block_number: log.block_number,
            log_index: log.log_index,
            address: log.address,
            topics: log.topics.clone(),
            data: log.data.clone(),
        }
    }
}

/// Parse a fixture file into records, reporting the file and line on failure.
pub fn read_records(path: &Path) -> Result<Vec<Record>> {
    let file = std::fs::File::open(path)?;
    let reader = BufReader::new(file);
    let mut records = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            line: idx as u64 + 1,
            message: e.to_string(),
        })?;
        records.push(record);
    }
    Ok(records)
}

/// Write records as one JSON object per line.
pub fn write_records<W: Write>(mut writer: W, records: &[Record]) -> Result<()> {
    for record in records {
        let line = serde_json::to_string(record)
            .map_err(|e| Error::Internal(format!("record serialization failed: {e}")))?;
        writer.write_all(line.as_bytes())?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

/// In-memory [`DataSource`] backed by a parsed fixture.
#[derive(Clone, Debug, Default)]
pub struct FixtureSource {
    blocks: BTreeMap<u64, Block>,
    logs_by_block: BTreeMap<u64, Vec<RawLog>>,
    codes: BTreeMap<Address, Vec<u8>>,
    traces: BTreeMap<TxHash, ExecutionTrace>,
    internals: BTreeMap<TxHash, Vec<InternalTransfer>>,
}

impl FixtureSource {
    pub fn from_records(records: Vec<Record>) -> Result<Self> {
        let mut source = FixtureSource::default();
        for record in records {
            match record {
                Record::Block(b) => {
                    let block = b.into_block();
                    if source.blocks.insert(block.number, block.clone()).is_some() {
                        return Err(Error::Data(format!(
                            "fixture repeats block {}",
                            block.number
                        )));
                    }
                }
                Record::Log(l) => {
                    let log = l.into_raw_log();
                    source
                        .logs_by_block
                        .entry(log.block_number)
                        .or_default()
                        .push(log);
                }
                Record::Code(c) => {
                    source.codes.insert(c.address, c.bytecode);
                }
                Record::Trace(t) => {
                    source.traces.insert(
                        t.tx_hash,
                        ExecutionTrace {
                            tx_hash: t.tx_hash,
                            opcodes: t.opcodes,
                            terminal: t.terminal,
                        },
                    );
                }
                Record::Internal(i) => {
                    source
                        .internals
                        .entry(i.parent_tx)
                        .or_default()
                        .push(InternalTransfer {
                            parent_tx: i.parent_tx,
                            from: i.from,
                            to: i.to,
                            value: i.value,
                        });
                }
            }
        }
        for logs in source.logs_by_block.values_mut() {
            logs.sort_by_key(|l| l.log_index);
        }
        Ok(source)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        FixtureSource::from_records(read_records(path)?)
    }

    /// Lowest and highest block number present, if any.
    pub fn block_range(&self) -> Option<(u64, u64)> {
        let first = self.blocks.keys().next()?;
        let last = self.blocks.keys().next_back()?;
        Some((*first, *last))
    }
}

impl DataSource for FixtureSource {
    fn block(&self, number: u64) -> Result<Option<Block>> {
        Ok(self.blocks.get(&number).cloned())
    }

    fn logs(&self, from: u64, to: u64) -> Result<Vec<RawLog>> {
        Ok(self
            .logs_by_block
            .range(from..=to)
            .flat_map(|(_, logs)| logs.iter().cloned())
            .collect())
    }

    fn code(&self, address: &Address) -> Result<Option<Vec<u8>>> {
        Ok(self.codes.get(address).cloned())
    }

    fn trace(&self, tx: &TxHash) -> Result<Option<ExecutionTrace>> {
        Ok(self.traces.get(tx).cloned())
    }

    fn internal_transfers(&self, tx: &TxHash) -> Result<Vec<InternalTransfer>> {
        Ok(self.internals.get(tx).cloned().unwrap_or_default())
    }
}
