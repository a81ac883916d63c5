//! Chain data model: the immutable facts every detector reads.
//!
//! A [`ChainSnapshot`] is a fully indexed, validated slice of chain history:
//! contiguous blocks with their transactions, decoded token-transfer events,
//! internal (message-call) value transfers, contract bytecode, and execution
//! traces. Detectors never mutate it and never reach around it to a data
//! source, which is what makes scans reproducible byte for byte.
//!
//! Money is integer wei end to end. Fees are exact products, profits are
//! signed wei, and US-dollar figures only appear at the reporting boundary via
//! [`wei_to_usd`], so no float drift can creep into the accounting.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, NaiveDate, Utc};
use num_bigint::BigUint;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::{Error, Result};

/// Intrinsic gas of a plain value transfer; the floor any real call exceeds.
pub const BASE_TX_GAS: u64 = 21_000;

/// Upper bound accepted for a transaction's gas price, in wei.
///
/// Generous by five orders of magnitude over anything ever mined, but tight
/// enough that `gas_used x gas_price` provably fits in a `u128`.
pub const MAX_GAS_PRICE_WEI: u128 = 1 << 80;

/// Upper bound accepted for gas limits and gas used (per tx and per block).
pub const MAX_GAS: u64 = 1 << 40;

/// Upper bound accepted for a single ether amount (tx value or internal
/// transfer), in wei. Roughly 1.7e36 wei; total ether issuance is ~1.2e26.
pub const MAX_WEI_AMOUNT: u128 = 1 << 120;

// ---------------------------------------------------------------------------
// Addresses and hashes
// ---------------------------------------------------------------------------

/// 20-byte account or contract address.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Address(pub [u8; 20]);

/// 32-byte transaction hash.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct TxHash(pub [u8; 32]);

impl Address {
    /// The all-zero address, used by miners-as-validators and as a burn sink.
    pub const ZERO: Address = Address([0; 20]);

    pub fn is_zero(&self) -> bool {
        self.0 == [0; 20]
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }
}

impl TxHash {
    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }
}

fn parse_prefixed_hex<const N: usize>(s: &str) -> std::result::Result<[u8; N], String> {
    let body = s
        .strip_prefix("0x")
        .ok_or_else(|| format!("expected 0x-prefixed hex, got {s:?}"))?;
    if body.len() != 2 * N {
        return Err(format!(
            "expected {} hex digits, got {} in {s:?}",
            2 * N,
            body.len()
        ));
    }
    let mut out = [0u8; N];
    hex::decode_to_slice(body, &mut out).map_err(|e| format!("bad hex in {s:?}: {e}"))?;
    Ok(out)
}

macro_rules! hex_newtype_impls {
    ($ty:ident, $n:expr) => {
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "0x{}", hex::encode(self.0))
            }
        }

        impl fmt::Debug for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                fmt::Display::fmt(self, f)
            }
        }

        impl FromStr for $ty {
            type Err = String;

            fn from_str(s: &str) -> std::result::Result<Self, String> {
                parse_prefixed_hex::<$n>(s).map($ty)
            }
        }

        impl Serialize for $ty {
            fn serialize<S: Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
                ser.collect_str(self)
            }
        }

        impl<'de> Deserialize<'de> for $ty {
            fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
                let s = String::deserialize(de)?;
                s.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

hex_newtype_impls!(Address, 20);
hex_newtype_impls!(TxHash, 32);

// ---------------------------------------------------------------------------
// Transactions, blocks, traces
// ---------------------------------------------------------------------------

/// Outcome of a mined transaction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TxStatus {
    /// Ran to completion; state changes kept.
    Success,
    /// Explicitly reverted; unused gas refunded.
    Reverted,
    /// Failed on an invalid-state check; all supplied gas consumed.
    AssertFailed,
    /// Ran out of gas mid-execution.
    OutOfGas,
}

/// A mined transaction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Transaction {
    pub hash: TxHash,
    pub block_number: u64,
    /// Position inside the block; the miner's chosen execution order.
    pub tx_index: u32,
    pub sender: Address,
    /// `None` for contract-creation transactions.
    pub receiver: Option<Address>,
    /// Ether carried, in wei.
    pub value: u128,
    pub gas_limit: u64,
    pub gas_used: u64,
    /// Price bid per gas unit, in wei.
    pub gas_price: u128,
    /// Call payload.
    pub input: Vec<u8>,
    pub status: TxStatus,
}

impl Transaction {
    /// Exact transaction fee in wei: `gas_used x gas_price`, no rounding.
    ///
    /// Ingestion bounds gas at [`MAX_GAS`] and price at [`MAX_GAS_PRICE_WEI`],
    /// so the product always fits in a `u128`.
    pub fn fee(&self) -> u128 {
        (self.gas_used as u128)
            .checked_mul(self.gas_price)
            .expect("fee exceeds 128 bits; ingestion bounds violated")
    }
}

/// A mined block and its transactions in execution order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Block {
    pub number: u64,
    /// Seconds since the Unix epoch, UTC.
    pub timestamp: u64,
    pub miner: Address,
    pub gas_limit: u64,
    pub gas_used: u64,
    pub transactions: Vec<Transaction>,
}

impl Block {
    pub fn utc(&self) -> DateTime<Utc> {
        DateTime::<Utc>::from_timestamp(self.timestamp as i64, 0)
            .expect("block timestamp out of chrono range")
    }
}

/// How an execution trace ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceTerminal {
    Normal,
    Revert,
    Assert,
    OutOfGas,
}

/// Sequence of executed opcode mnemonics for one transaction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExecutionTrace {
    pub tx_hash: TxHash,
    pub opcodes: Vec<String>,
    pub terminal: TraceTerminal,
}

/// Serde adapter: `BigUint` token amounts as decimal strings.
pub mod biguint_string {
    use num_bigint::BigUint;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &BigUint, ser: S) -> Result<S::Ok, S::Error> {
        ser.collect_str(v)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<BigUint, D::Error> {
        let s = String::deserialize(de)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A decoded ERC-20 `Transfer` event.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransferEvent {
    /// Token contract that emitted the event.
    pub token: Address,
    /// Token sender (`from` topic).
    pub sender: Address,
    /// Token recipient (`to` topic).
    pub receiver: Address,
    /// Token amount in base units; a full 256-bit word.
    #[serde(with = "biguint_string")]
    pub amount: BigUint,
    /// Transaction the log was emitted in.
    pub tx_hash: TxHash,
    pub block_number: u64,
    /// Index of the emitting transaction inside its block.
    pub tx_index: u32,
    /// Position of the log within the block's log stream.
    pub log_index: u32,
    /// Gas price of the emitting transaction, in wei.
    #[serde(with = "wei_string")]
    pub gas_price: u128,
}

/// An internal (message-call) ether transfer observed during execution.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InternalTransfer {
    /// Transaction whose execution produced this transfer.
    pub parent_tx: TxHash,
    pub from: Address,
    pub to: Address,
    /// Wei moved; always positive.
    pub value: u128,
}

// ---------------------------------------------------------------------------
// Price table and USD conversion
// ---------------------------------------------------------------------------

/// Exact decimal exchange rate, e.g. `123.46` as `mantissa=12346, scale=2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PriceQuote {
    pub mantissa: u128,
    pub scale: u32,
}

impl FromStr for PriceQuote {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let (int_part, frac_part) = match s.split_once('.') {
            Some((i, f)) => (i, f),
            None => (s, ""),
        };
        if int_part.is_empty() && frac_part.is_empty() {
            return Err(format!("empty price {s:?}"));
        }
        if !int_part.chars().all(|c| c.is_ascii_digit())
            || !frac_part.chars().all(|c| c.is_ascii_digit())
        {
            return Err(format!("non-digit character in price {s:?}"));
        }
        let digits = format!("{int_part}{frac_part}");
        let mantissa: u128 = digits
            .parse()
            .map_err(|e| format!("price {s:?} out of range: {e}"))?;
        let mut quote = PriceQuote {
            mantissa,
            scale: frac_part.len() as u32,
        };
        // Normalize to at least two fractional digits so cents-level reporting
        // never needs to re-scale upward.
        while quote.scale < 2 {
            quote.mantissa = quote
                .mantissa
                .checked_mul(10)
                .ok_or_else(|| format!("price {s:?} out of range"))?;
            quote.scale += 1;
        }
        Ok(quote)
    }
}

impl fmt::Display for PriceQuote {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let div = 10u128.pow(self.scale);
        write!(
            f,
            "{}.{:0width$}",
            self.mantissa / div,
            self.mantissa % div,
            width = self.scale as usize
        )
    }
}

/// One day's closing ETH/USD rate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PricePoint {
    pub date: NaiveDate,
    pub eth_usd: PriceQuote,
}

/// Daily ETH/USD rates, strictly ascending by date.
///
/// Lookups resolve to the latest entry at or before the query date, matching
/// daily-granularity historical price feeds.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PriceTable {
    points: Vec<PricePoint>,
}

impl PriceTable {
    pub fn new(points: Vec<PricePoint>) -> Result<Self> {
        for pair in points.windows(2) {
            if pair[1].date <= pair[0].date {
                return Err(Error::Data(format!(
                    "price table dates not strictly ascending: {} then {}",
                    pair[0].date, pair[1].date
                )));
            }
        }
        Ok(PriceTable { points })
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[PricePoint] {
        &self.points
    }

    /// Latest quote dated at or before `date`, if any.
    pub fn quote_at(&self, date: NaiveDate) -> Option<&PriceQuote> {
        let idx = self.points.partition_point(|p| p.date <= date);
        idx.checked_sub(1).map(|i| &self.points[i].eth_usd)
    }

    /// Parse `date,eth_usd` CSV lines (header row optional).
    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut points = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || (lineno == 0 && line.eq_ignore_ascii_case("date,eth_usd")) {
                continue;
            }
            let (date_s, price_s) = line.split_once(',').ok_or_else(|| {
                Error::Data(format!(
                    "price table line {}: expected `date,eth_usd`, got {line:?}",
                    lineno + 1
                ))
            })?;
            let date = NaiveDate::parse_from_str(date_s.trim(), "%Y-%m-%d")
                .map_err(|e| Error::Data(format!("price table line {}: {e}", lineno + 1)))?;
            let eth_usd = price_s
                .trim()
                .parse()
                .map_err(|e| Error::Data(format!("price table line {}: {e}", lineno + 1)))?;
            points.push(PricePoint { date, eth_usd });
        }
        PriceTable::new(points)
    }

    pub fn from_csv_path(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        PriceTable::from_csv_str(&text)
    }

    /// Render as the same CSV accepted by [`PriceTable::from_csv_str`].
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("date,eth_usd\n");
        for p in &self.points {
            out.push_str(&format!("{},{}\n", p.date, p.eth_usd));
        }
        out
    }
}

/// US-dollar amount held as integer cents.
///
/// Produced only at the reporting boundary; everything upstream stays in wei.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Default)]
pub struct Usd(i128);

impl Usd {
    pub const ZERO: Usd = Usd(0);

    pub fn from_cents(cents: i128) -> Usd {
        Usd(cents)
    }

    pub fn cents(&self) -> i128 {
        self.0
    }

    pub fn checked_add(self, other: Usd) -> Option<Usd> {
        self.0.checked_add(other.0).map(Usd)
    }

    /// Lossy view for distribution statistics.
    pub fn to_f64(self) -> f64 {
        self.0 as f64 / 100.0
    }
}

impl fmt::Display for Usd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let abs = self.0.unsigned_abs();
        write!(f, "{sign}{}.{:02}", abs / 100, abs % 100)
    }
}

impl Serialize for Usd {
    fn serialize<S: Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        ser.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Usd {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(de)?;
        let (sign, body) = match s.strip_prefix('-') {
            Some(rest) => (-1i128, rest),
            None => (1i128, s.as_str()),
        };
        let (units, frac) = body
            .split_once('.')
            .ok_or_else(|| serde::de::Error::custom(format!("expected `d.dd`, got {s:?}")))?;
        if frac.len() != 2 {
            return Err(serde::de::Error::custom(format!(
                "expected exactly two decimal places in {s:?}"
            )));
        }
        let units: i128 = units.parse().map_err(serde::de::Error::custom)?;
        let cents: i128 = frac.parse().map_err(serde::de::Error::custom)?;
        Ok(Usd(sign * (units * 100 + cents)))
    }
}

fn wei_times_quote_to_cents(amount_wei: u128, quote: &PriceQuote) -> i128 {
    // cents = round_half_up(amount_wei * mantissa * 100 / 10^(scale + 18)).
    // Done in big integers: the intermediate product can exceed 128 bits.
    let numerator = BigUint::from(amount_wei) * BigUint::from(quote.mantissa) * 100u32;
    let denominator = BigUint::from(10u32).pow(quote.scale + 18);
    let rounded = (numerator + &denominator / 2u32) / denominator;
    i128::try_from(&rounded).expect("usd cents exceed 128 bits")
}

/// Convert a wei amount to US dollars at the rate in force at `timestamp`.
///
/// The rate is the latest daily quote at or before the timestamp's UTC date.
/// Rounds half-up to whole cents; this is the only place dollar rounding
/// happens. Fails with [`Error::NoPrice`] when the timestamp precedes the
/// first table entry.
pub fn wei_to_usd(amount_wei: u128, timestamp: u64, prices: &PriceTable) -> Result<Usd> {
    let quote = quote_for(timestamp, prices)?;
    Ok(Usd(wei_times_quote_to_cents(amount_wei, &quote)))
}

/// Signed variant of [`wei_to_usd`] for profits, which may be negative.
///
/// Rounds the magnitude half-up (i.e. half away from zero).
pub fn wei_to_usd_signed(amount_wei: i128, timestamp: u64, prices: &PriceTable) -> Result<Usd> {
    let quote = quote_for(timestamp, prices)?;
    let cents = wei_times_quote_to_cents(amount_wei.unsigned_abs(), &quote);
    Ok(Usd(if amount_wei < 0 { -cents } else { cents }))
}

fn quote_for(timestamp: u64, prices: &PriceTable) -> Result<PriceQuote> {
    let date = DateTime::<Utc>::from_timestamp(timestamp as i64, 0)
        .ok_or_else(|| Error::Data(format!("timestamp {timestamp} out of range")))?
        .date_naive();
    prices
        .quote_at(date)
        .copied()
        .ok_or(Error::NoPrice(timestamp))
}

/// `gain − cost` as a signed wei amount, rejecting values outside `i128`.
pub fn signed_difference(gain: u128, cost: u128) -> Result<i128> {
    let gain = i128::try_from(gain)
        .map_err(|_| Error::Data("gain exceeds signed 128-bit range".into()))?;
    let cost = i128::try_from(cost)
        .map_err(|_| Error::Data("cost exceeds signed 128-bit range".into()))?;
    // Both operands are non-negative i128, so the subtraction cannot wrap.
    Ok(gain - cost)
}

/// Serde adapter: `u128` wei as a decimal string.
///
/// Emitted as strings because many JSON consumers silently round integers
/// wider than 53 bits; wei amounts routinely are.
pub mod wei_string {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &u128, ser: S) -> Result<S::Ok, S::Error> {
        ser.collect_str(v)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<u128, D::Error> {
        let s = String::deserialize(de)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Serde adapter: signed `i128` wei (profits) as a decimal string.
pub mod wei_string_signed {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &i128, ser: S) -> Result<S::Ok, S::Error> {
        ser.collect_str(v)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<i128, D::Error> {
        let s = String::deserialize(de)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

// ---------------------------------------------------------------------------
// Snapshot
// ---------------------------------------------------------------------------

/// Fully indexed, validated slice of chain history.
#[derive(Clone, Debug, Default)]
pub struct ChainSnapshot {
    pub from_block: u64,
    pub to_block: u64,
    blocks: Vec<Block>,
    /// hash -> (block number, tx index)
    tx_locations: BTreeMap<TxHash, (u64, u32)>,
    /// block number -> events sorted by (tx index, log index)
    transfer_events: BTreeMap<u64, Vec<TransferEvent>>,
    internal_transfers: BTreeMap<TxHash, Vec<InternalTransfer>>,
    codes: BTreeMap<Address, Vec<u8>>,
    traces: BTreeMap<TxHash, ExecutionTrace>,
    pub prices: PriceTable,
}

impl ChainSnapshot {
    /// Assemble and validate a snapshot from its parts.
    ///
    /// Enforces: contiguous ascending blocks, dense tx indices, per-field
    /// bounds (gas, prices, amounts), `gas_used <= gas_limit`, and that every
    /// event, trace, and internal transfer references a transaction that is
    /// actually present.
    pub fn assemble(
        blocks: Vec<Block>,
        transfer_events: Vec<TransferEvent>,
        internal_transfers: Vec<InternalTransfer>,
        codes: BTreeMap<Address, Vec<u8>>,
        traces: Vec<ExecutionTrace>,
        prices: PriceTable,
    ) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::Data("snapshot contains no blocks".into()));
        }
        let from_block = blocks[0].number;
        let to_block = blocks[blocks.len() - 1].number;

        let mut tx_locations = BTreeMap::new();
        for (offset, block) in blocks.iter().enumerate() {
            let expected = from_block + offset as u64;
            if block.number != expected {
                return Err(Error::MissingBlock(expected));
            }
            if block.gas_limit > MAX_GAS || block.gas_used > MAX_GAS {
                return Err(Error::Data(format!(
                    "block {}: gas fields exceed bound {MAX_GAS}",
                    block.number
                )));
            }
            for (i, tx) in block.transactions.iter().enumerate() {
                if tx.tx_index != i as u32 {
                    return Err(Error::Data(format!(
                        "block {}: tx index {} at position {i}",
                        block.number, tx.tx_index
                    )));
                }
                if tx.block_number != block.number {
                    return Err(Error::Data(format!(
                        "tx {} claims block {} but sits in block {}",
                        tx.hash, tx.block_number, block.number
                    )));
                }
                if tx.gas_limit > MAX_GAS || tx.gas_used > MAX_GAS {
                    return Err(Error::Data(format!("tx {}: gas exceeds bound", tx.hash)));
                }
                if tx.gas_used > tx.gas_limit {
                    return Err(Error::Data(format!(
                        "tx {}: gas_used {} > gas_limit {}",
                        tx.hash, tx.gas_used, tx.gas_limit
                    )));
                }
                if tx.gas_price > MAX_GAS_PRICE_WEI {
                    return Err(Error::Data(format!(
                        "tx {}: gas price exceeds bound",
                        tx.hash
                    )));
                }
                if tx.value > MAX_WEI_AMOUNT {
                    return Err(Error::Data(format!("tx {}: value exceeds bound", tx.hash)));
                }
                if tx_locations
                    .insert(tx.hash, (block.number, tx.tx_index))
                    .is_some()
                {
                    return Err(Error::Data(format!("duplicate tx hash {}", tx.hash)));
                }
            }
        }

        let mut events_by_block: BTreeMap<u64, Vec<TransferEvent>> = BTreeMap::new();
        for ev in transfer_events {
            match tx_locations.get(&ev.tx_hash) {
                None => {
                    return Err(Error::Data(format!(
                        "transfer event references unknown tx {}",
                        ev.tx_hash
                    )))
                }
                Some(&(block, idx)) => {
                    if ev.block_number != block || ev.tx_index != idx {
                        return Err(Error::Data(format!(
                            "transfer event for tx {} mislocated (block {}, index {})",
                            ev.tx_hash, ev.block_number, ev.tx_index
                        )));
                    }
                }
            }
            events_by_block.entry(ev.block_number).or_default().push(ev);
        }
        for events in events_by_block.values_mut() {
            events.sort_by_key(|e| (e.tx_index, e.log_index));
        }

        let mut internals: BTreeMap<TxHash, Vec<InternalTransfer>> = BTreeMap::new();
        for tr in internal_transfers {
            if !tx_locations.contains_key(&tr.parent_tx) {
                return Err(Error::Data(format!(
                    "internal transfer references unknown tx {}",
                    tr.parent_tx
                )));
            }
            if tr.value == 0 || tr.value > MAX_WEI_AMOUNT {
                return Err(Error::Data(format!(
                    "internal transfer in tx {} has out-of-range value {}",
                    tr.parent_tx, tr.value
                )));
            }
            internals.entry(tr.parent_tx).or_default().push(tr);
        }

        let mut trace_map = BTreeMap::new();
        for trace in traces {
            let Some(&(bn, idx)) = tx_locations.get(&trace.tx_hash) else {
                return Err(Error::Data(format!(
                    "trace references unknown tx {}",
                    trace.tx_hash
                )));
            };
            let tx = &blocks[(bn - from_block) as usize].transactions[idx as usize];
            if trace.opcodes.is_empty() && tx.gas_used > BASE_TX_GAS {
                return Err(Error::Data(format!(
                    "empty trace for tx {} which burned {} gas",
                    trace.tx_hash, tx.gas_used
                )));
            }
            if trace_map.insert(trace.tx_hash, trace).is_some() {
                return Err(Error::Data("duplicate trace for one tx".into()));
            }
        }

        Ok(ChainSnapshot {
            from_block,
            to_block,
            blocks,
            tx_locations,
            transfer_events: events_by_block,
            internal_transfers: internals,
            codes,
            traces: trace_map,
            prices,
        })
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn block(&self, number: u64) -> Option<&Block> {
        let offset = number.checked_sub(self.from_block)? as usize;
        self.blocks.get(offset)
    }

    pub fn tx(&self, hash: &TxHash) -> Option<&Transaction> {
        let &(block, idx) = self.tx_locations.get(hash)?;
        Some(&self.block(block)?.transactions[idx as usize])
    }

    /// All transactions in mined order (block ascending, index ascending).
    pub fn txs(&self) -> impl Iterator<Item = &Transaction> {
        self.blocks.iter().flat_map(|b| b.transactions.iter())
    }

    /// Transfer events of one block, sorted by (tx index, log index).
    pub fn events_in(&self, block_number: u64) -> &[TransferEvent] {
        self.transfer_events
            .get(&block_number)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn internal_transfers_of(&self, tx: &TxHash) -> &[InternalTransfer] {
        self.internal_transfers
            .get(tx)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn code(&self, address: &Address) -> Option<&[u8]> {
        self.codes.get(address).map(Vec::as_slice)
    }

    /// True when `address` carries nonempty bytecode in this snapshot.
    pub fn is_contract(&self, address: &Address) -> bool {
        self.code(address).map(|c| !c.is_empty()).unwrap_or(false)
    }

    pub fn codes(&self) -> &BTreeMap<Address, Vec<u8>> {
        &self.codes
    }

    pub fn trace(&self, tx: &TxHash) -> Option<&ExecutionTrace> {
        self.traces.get(tx)
    }

    pub fn timestamp_of_block(&self, number: u64) -> Option<u64> {
        self.block(number).map(|b| b.timestamp)
    }
}

// ---------------------------------------------------------------------------
