//! Seeded ground-truth chain generator.
//!
//! Fabricates a complete, snapshot-compatible fixture: benign background
//! traffic, constant-product exchanges with planted sandwiches, prize
//! contracts with planted displacement pairs, and lottery flows with planted
//! stuffing campaigns. Alongside the chain it emits a
//! [`GroundTruthManifest`] naming every planted attack and its exact
//! expected accounting, so scanner output can be scored for precision and
//! recall.
//!
//! Two properties make the fixtures useful as oracles:
//!
//! * **Determinism** — a 64-bit seed fully determines every byte of the
//!   output, so golden tests and CI runs are reproducible.
//! * **Sharp negatives** — optional near-miss decoys each violate exactly
//!   one detection rule (amount similarity, gas ordering, token identity,
//!   payload ratio, order interference, gas ratio, block adjacency), so a
//!   scanner only reaches precision 1.0 by enforcing every rule.
//!
//! Contract "bytecode" is an opaque byte string. Two magic prefixes give the
//! replay oracle enough semantics for order-dependence checks:
//! `0xFE "1ST"` marks a first-caller-wins prize contract (followed by the
//! winner's and loser's instruction counts), and `0xFE "FWD"` marks a
//! forwarder (followed by the 20-byte target address). Everything else
//! replays its recorded trace length regardless of ordering.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write as _;
use std::path::Path;

use chrono::Days;
use num_bigint::BigUint;
use num_traits::{One, Zero};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::attacker_graph::AttackKind;
use crate::chain_model::{
    wei_string, wei_string_signed, Address, Block, ChainSnapshot, PricePoint, PriceTable,
    TraceTerminal, Transaction, TxHash, TxStatus,
};
use crate::displacement::ExecutionOracle;
use crate::ingestion::{
    load_snapshot, transfer_signature_topic, write_records, BlockRecord, CodeRecord, FixtureSource,
    InternalRecord, LogRecord, Record, TraceRecord,
};
use crate::suppression::{AttackStatus, SuppressionStrategy};
use crate::{Error, Result};

/// Wei per ether.
pub const WEI_PER_ETH: u128 = 1_000_000_000_000_000_000;

const GWEI: u128 = 1_000_000_000;

// ---------------------------------------------------------------------------
// Constant-product pool
// ---------------------------------------------------------------------------

/// A two-reserve constant-product market maker.
///
/// `reserve_x` is the ether side (wei), `reserve_y` the token side. The
/// product invariant `k` is fixed at construction; swaps round in the pool's
/// favor, so after any fee-free swap sequence
/// `|reserve_x · reserve_y − k| ≤ reserve_x + reserve_y`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CpmmPool {
    reserve_x: BigUint,
    reserve_y: BigUint,
    k: BigUint,
}

fn ceil_div(n: &BigUint, d: &BigUint) -> BigUint {
    (n + d - BigUint::one()) / d
}

impl CpmmPool {
    pub fn new(reserve_x: BigUint, reserve_y: BigUint) -> Result<CpmmPool> {
        if reserve_x.is_zero() || reserve_y.is_zero() {
            return Err(Error::InvalidParameter(
                "pool reserves must both be positive".into(),
            ));
        }
        let k = &reserve_x * &reserve_y;
        Ok(CpmmPool {
            reserve_x,
            reserve_y,
            k,
        })
    }

    pub fn from_wei(reserve_x: u128, reserve_y: u128) -> Result<CpmmPool> {
        CpmmPool::new(BigUint::from(reserve_x), BigUint::from(reserve_y))
    }

    pub fn reserves(&self) -> (&BigUint, &BigUint) {
        (&self.reserve_x, &self.reserve_y)
    }

    /// Buy tokens with `dx` wei. Returns the token units paid out, floored.
    pub fn swap_x_for_y(&mut self, dx: &BigUint) -> Result<BigUint> {
        if dx.is_zero() {
            return Err(Error::InvalidParameter(
                "swap input must be positive".into(),
            ));
        }
        let new_x = &self.reserve_x + dx;
        let new_y = ceil_div(&self.k, &new_x);
        if new_y > self.reserve_y {
            return Err(Error::Internal("pool reserve underflow on buy".into()));
        }
        let dy = &self.reserve_y - &new_y;
        self.reserve_x = new_x;
        self.reserve_y = new_y;
        Ok(dy)
    }

    /// Sell `dy` token units back into the pool. Returns wei out, floored.
    pub fn swap_y_for_x(&mut self, dy: &BigUint) -> Result<BigUint> {
        if dy.is_zero() {
            return Err(Error::InvalidParameter(
                "swap input must be positive".into(),
            ));
        }
        let new_y = &self.reserve_y + dy;
        let new_x = ceil_div(&self.k, &new_y);
        if new_x > self.reserve_x {
            return Err(Error::Internal("pool reserve underflow on sell".into()));
        }
        let dx = &self.reserve_x - &new_x;
        self.reserve_y = new_y;
        self.reserve_x = new_x;
        Ok(dx)
    }

    /// `|reserve_x · reserve_y − k|` — how far integer rounding has drifted
    /// the product from its ideal.
    pub fn product_drift(&self) -> BigUint {
        let product = &self.reserve_x * &self.reserve_y;
        if product >= self.k {
            product - &self.k
        } else {
            &self.k - product
        }
    }
}

/// Runs the three-swap sandwich (attacker buy, victim buy, attacker
/// sell-all) on a fresh pool and returns
/// `(attacker tokens, victim tokens, attacker resale wei)`.
///
/// `victim_dx` may be zero (the victim leg is skipped), which models a
/// sandwich around nothing: resale then recovers roughly the attacker's own
/// outlay, minus rounding.
pub fn sandwich_outcome(
    reserve_x: u128,
    reserve_y: u128,
    attacker_dx: u128,
    victim_dx: u128,
) -> Result<(BigUint, BigUint, u128)> {
    let mut pool = CpmmPool::from_wei(reserve_x, reserve_y)?;
    let dy_attacker = pool.swap_x_for_y(&BigUint::from(attacker_dx))?;
    let dy_victim = if victim_dx == 0 {
        BigUint::zero()
    } else {
        pool.swap_x_for_y(&BigUint::from(victim_dx))?
    };
    let resale = pool.swap_y_for_x(&dy_attacker)?;
    let resale = u128::try_from(resale)
        .map_err(|_| Error::Internal("pool resale exceeds 128 bits".into()))?;
    Ok((dy_attacker, dy_victim, resale))
}

// ---------------------------------------------------------------------------
// Marker bytecodes and the replay oracle
// ---------------------------------------------------------------------------

/// First four bytes of a first-caller-wins prize contract.
pub const PRIZE_MARKER: [u8; 4] = [0xFE, b'1', b'S', b'T'];
/// First four bytes of a call-forwarding contract.
pub const FORWARDER_MARKER: [u8; 4] = [0xFE, b'F', b'W', b'D'];

/// Bytecode for a prize contract: the first caller executes `winner_len`
/// instructions (and wins), every later caller executes `loser_len`.
pub fn prize_bytecode(winner_len: u32, loser_len: u32) -> Vec<u8> {
    let mut code = PRIZE_MARKER.to_vec();
    code.extend_from_slice(&winner_len.to_be_bytes());
    code.extend_from_slice(&loser_len.to_be_bytes());
    code
}

/// Bytecode for a bot that forwards every call to `target`.
pub fn forwarder_bytecode(target: Address) -> Vec<u8> {
    let mut code = FORWARDER_MARKER.to_vec();
    code.extend_from_slice(target.as_bytes());
    code
}

/// Deterministic [`ExecutionOracle`] over a snapshot's recorded traces.
///
/// Ordinary transactions replay their recorded instruction count no matter
/// where they sit in the ordering, so reordering them shows no interference.
/// Calls that resolve (through forwarders) to a prize contract are
/// order-dependent: within one simulated ordering the first caller gets the
/// winner count, later callers the loser count.
pub struct ReplayOracle {
    prizes: BTreeMap<Address, (u64, u64)>,
    forwarders: BTreeMap<Address, Address>,
    trace_lengths: BTreeMap<TxHash, u64>,
}

/// Instruction count assumed for transactions with no recorded trace.
const UNTRACED_LEN: u64 = 2;

impl ReplayOracle {
    pub fn from_snapshot(snapshot: &ChainSnapshot) -> ReplayOracle {
        let mut prizes = BTreeMap::new();
        let mut forwarders = BTreeMap::new();
        for (address, code) in snapshot.codes() {
            if code.len() == 12 && code[..4] == PRIZE_MARKER {
                let winner = u32::from_be_bytes(code[4..8].try_into().expect("4 bytes"));
                let loser = u32::from_be_bytes(code[8..12].try_into().expect("4 bytes"));
                prizes.insert(*address, (winner as u64, loser as u64));
            } else if code.len() == 24 && code[..4] == FORWARDER_MARKER {
                let mut target = [0u8; 20];
                target.copy_from_slice(&code[4..24]);
                forwarders.insert(*address, Address(target));
            }
        }
        let mut trace_lengths = BTreeMap::new();
        for block in snapshot.blocks() {
            for tx in &block.transactions {
                if let Some(trace) = snapshot.trace(&tx.hash) {
                    trace_lengths.insert(tx.hash, trace.opcodes.len() as u64);
                }
            }
        }
        ReplayOracle {
            prizes,
            forwarders,
            trace_lengths,
        }
    }

    fn resolve(&self, mut address: Address) -> Address {
        for _ in 0..8 {
            match self.forwarders.get(&address) {
                Some(next) => address = *next,
                None => break,
            }
        }
        address
    }
}

impl ExecutionOracle for ReplayOracle {
    fn execute(&self, ordering: &[&Transaction], _block_number: u64) -> Result<Vec<u64>> {
        let mut claimed: BTreeSet<Address> = BTreeSet::new();
        Ok(ordering
            .iter()
            .map(|tx| {
                let Some(receiver) = tx.receiver else {
                    return UNTRACED_LEN;
                };
                let target = self.resolve(receiver);
                if let Some(&(winner, loser)) = self.prizes.get(&target) {
                    if claimed.insert(target) {
                        winner
                    } else {
                        loser
                    }
                } else {
                    self.trace_lengths
                        .get(&tx.hash)
                        .copied()
                        .unwrap_or(UNTRACED_LEN)
                }
            })
            .collect())
    }
}

// ---------------------------------------------------------------------------
// Ground-truth manifest
// ---------------------------------------------------------------------------

/// One planted suppression round, mirroring the detector's round record.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlantedRound {
    pub investment_tx: TxHash,
    pub stuffing_txs: Vec<TxHash>,
    pub status: AttackStatus,
    #[serde(with = "wei_string")]
    pub prize_wei: u128,
}

/// One planted attack and its exact expected accounting.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlantedAttack {
    pub kind: AttackKind,
    /// Displacement: `[attacker, victim]`. Insertion: `[buy, victim, sell]`.
    /// Suppression: investments, stuffing, and the prize-claim carrier, in
    /// chain order.
    pub txs: Vec<TxHash>,
    pub victim_contract: Option<Address>,
    pub bot_contract: Option<Address>,
    #[serde(with = "wei_string")]
    pub expected_cost_wei: u128,
    #[serde(with = "wei_string_signed")]
    pub expected_profit_wei: i128,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub rounds: Option<Vec<PlantedRound>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub strategy: Option<SuppressionStrategy>,
}

/// Everything a scorer needs to grade a scan of the generated chain.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruthManifest {
    pub seed: u64,
    pub blocks: u64,
    pub planted: Vec<PlantedAttack>,
    /// Human-readable descriptions of the planted near-miss decoys, which
    /// must NOT be detected.
    pub controls: Vec<String>,
}

impl GroundTruthManifest {
    pub fn of_kind(&self, kind: AttackKind) -> impl Iterator<Item = &PlantedAttack> {
        self.planted.iter().filter(move |p| p.kind == kind)
    }

    pub fn to_json_string(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Internal(format!("manifest serialization failed: {e}")))?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json_str(text: &str) -> Result<GroundTruthManifest> {
        serde_json::from_str(text).map_err(|e| Error::Data(format!("manifest parse failed: {e}")))
    }

    pub fn from_path(path: &Path) -> Result<GroundTruthManifest> {
        GroundTruthManifest::from_json_str(&std::fs::read_to_string(path)?)
    }
}

// ---------------------------------------------------------------------------
// Generator configuration
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub seed: u64,
    /// Chain length; blocks are numbered `0..blocks`.
    pub blocks: u64,
    pub insertions: u32,
    pub displacements: u32,
    pub suppressions: u32,
    /// Plant one near-miss decoy of every kind.
    pub negative_controls: bool,
    /// Benign transfers added to every block.
    pub noise_txs_per_block: u32,
    /// Timestamp of block 0; successors tick 13 s apart.
    pub base_timestamp: u64,
    pub block_gas_limit: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            seed: 0,
            blocks: 200,
            insertions: 5,
            displacements: 3,
            suppressions: 1,
            negative_controls: true,
            noise_txs_per_block: 2,
            base_timestamp: 1_600_000_000,
            block_gas_limit: 10_000_000,
        }
    }
}

/// Blocks reserved per planted scenario.
const SLOT_BLOCKS: u64 = 10;
/// Distinct near-miss decoy kinds planted when controls are enabled.
const CONTROL_KINDS: usize = 8;
/// Seconds between consecutive blocks.
const BLOCK_INTERVAL: u64 = 13;

// ---------------------------------------------------------------------------
// Chain builder (pre-index form)
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
struct PlannedTx {
    hash: TxHash,
    sender: Address,
    receiver: Option<Address>,
    value: u128,
    gas_limit: u64,
    gas_used: u64,
    gas_price: u128,
    input: Vec<u8>,
    status: TxStatus,
    /// `(token, from, to, amount)` transfer events emitted by this tx.
    events: Vec<(Address, Address, Address, BigUint)>,
    /// `(from, to, value)` internal ether transfers.
    internals: Vec<(Address, Address, u128)>,
    trace: Option<(Vec<String>, TraceTerminal)>,
}

#[derive(Clone, Debug, Default)]
struct PlannedBlock {
    txs: Vec<PlannedTx>,
}

struct ChainBuilder {
    blocks: Vec<PlannedBlock>,
    codes: BTreeMap<Address, Vec<u8>>,
}

impl ChainBuilder {
    fn new(blocks: u64) -> ChainBuilder {
        ChainBuilder {
            blocks: vec![PlannedBlock::default(); blocks as usize],
            codes: BTreeMap::new(),
        }
    }

    fn push_tx(&mut self, block: u64, tx: PlannedTx) {
        self.blocks[block as usize].txs.push(tx);
    }

    fn set_code(&mut self, address: Address, code: Vec<u8>) {
        self.codes.insert(address, code);
    }

    fn finalize(self, cfg: &GeneratorConfig) -> Result<Vec<Record>> {
        let miner = tagged_address(0x99, 0);
        let mut blocks = Vec::with_capacity(self.blocks.len());
        let mut logs = Vec::new();
        let mut traces = Vec::new();
        let mut internals = Vec::new();

        for (number, planned) in self.blocks.into_iter().enumerate() {
            let number = number as u64;
            let mut txs = Vec::with_capacity(planned.txs.len());
            let mut log_index: u32 = 0;
            let mut gas_used_total: u64 = 0;
            for (idx, ptx) in planned.txs.into_iter().enumerate() {
                gas_used_total = gas_used_total.saturating_add(ptx.gas_used);
                for (token, from, to, amount) in &ptx.events {
                    logs.push(Record::Log(LogRecord {
                        tx_hash: ptx.hash,
                        block_number: number,
                        log_index,
                        address: *token,
                        topics: vec![
                            *transfer_signature_topic(),
                            pad_address(*from),
                            pad_address(*to),
                        ],
                        data: amount_word(amount)?,
                    }));
                    log_index += 1;
                }
                for (from, to, value) in &ptx.internals {
                    internals.push(Record::Internal(InternalRecord {
                        parent_tx: ptx.hash,
                        from: *from,
                        to: *to,
                        value: *value,
                    }));
                }
                if let Some((opcodes, terminal)) = ptx.trace {
                    traces.push(Record::Trace(TraceRecord {
                        tx_hash: ptx.hash,
                        opcodes,
                        terminal,
                    }));
                }
                txs.push(Transaction {
                    hash: ptx.hash,
                    block_number: number,
                    tx_index: idx as u32,
                    sender: ptx.sender,
                    receiver: ptx.receiver,
                    value: ptx.value,
                    gas_limit: ptx.gas_limit,
                    gas_used: ptx.gas_used,
                    gas_price: ptx.gas_price,
                    input: ptx.input,
                    status: ptx.status,
                });
            }
            blocks.push(Block {
                number,
                timestamp: cfg.base_timestamp + number * BLOCK_INTERVAL,
                miner,
                gas_limit: cfg.block_gas_limit.max(gas_used_total),
                gas_used: gas_used_total,
                transactions: txs,
            });
        }

        let mut records = Vec::new();
        records.extend(
            blocks
                .iter()
                .map(|b| Record::Block(BlockRecord::from_block(b))),
        );
        records.extend(logs);
        records.extend(
            self.codes
                .into_iter()
                .map(|(address, bytecode)| Record::Code(CodeRecord { address, bytecode })),
        );
        records.extend(traces);
        records.extend(internals);
        Ok(records)
    }
}

fn pad_address(a: Address) -> [u8; 32] {
    let mut word = [0u8; 32];
    word[12..].copy_from_slice(a.as_bytes());
    word
}

fn amount_word(amount: &BigUint) -> Result<Vec<u8>> {
    let bytes = amount.to_bytes_be();
    if bytes.len() > 32 {
        return Err(Error::Internal("token amount exceeds 256 bits".into()));
    }
    let mut word = vec![0u8; 32];
    word[32 - bytes.len()..].copy_from_slice(&bytes);
    Ok(word)
}

/// Deterministic unique identifiers: a role tag byte plus a counter.
#[derive(Default)]
struct Ids {
    hashes: u64,
    accounts: u64,
    contracts: u64,
    tokens: u64,
    secrets: u32,
}

fn tagged_address(tag: u8, n: u64) -> Address {
    let mut bytes = [0u8; 20];
    bytes[0] = tag;
    bytes[12..].copy_from_slice(&n.to_be_bytes());
    Address(bytes)
}

impl Ids {
    fn tx_hash(&mut self) -> TxHash {
        self.hashes += 1;
        let mut bytes = [0u8; 32];
        bytes[0] = 0xF1;
        bytes[24..].copy_from_slice(&self.hashes.to_be_bytes());
        TxHash(bytes)
    }

    fn account(&mut self) -> Address {
        self.accounts += 1;
        tagged_address(0xA1, self.accounts)
    }

    fn contract(&mut self) -> Address {
        self.contracts += 1;
        tagged_address(0xC1, self.contracts)
    }

    fn token(&mut self) -> Address {
        self.tokens += 1;
        tagged_address(0x71, self.tokens)
    }

    /// A unique byte payload: 4 counter bytes then seeded-random filler.
    fn payload(&mut self, rng: &mut ChaCha20Rng, len: usize) -> Vec<u8> {
        self.secrets += 1;
        let mut bytes = vec![0u8; len.max(4)];
        bytes[..4].copy_from_slice(&self.secrets.to_be_bytes());
        rng.fill(&mut bytes[4..]);
        bytes
    }
}

fn generic_trace(len: usize, terminal: TraceTerminal) -> (Vec<String>, TraceTerminal) {
    // A rotation free of the stuffing-loop opcode patterns.
    const OPS: [&str; 6] = ["PUSH1", "DUP1", "MSTORE", "SLOAD", "CALL", "POP"];
    let opcodes = (0..len.max(1))
        .map(|i| OPS[i % OPS.len()].to_string())
        .collect();
    (opcodes, terminal)
}

fn loop_trace(
    pattern: [&str; 4],
    repeats: usize,
    terminal: TraceTerminal,
) -> (Vec<String>, TraceTerminal) {
    let opcodes = std::iter::repeat(pattern)
        .take(repeats)
        .flatten()
        .map(str::to_string)
        .collect();
    (opcodes, terminal)
}

fn plain_tx(
    ids: &mut Ids,
    sender: Address,
    receiver: Address,
    value: u128,
    gas: (u64, u64, u128),
) -> PlannedTx {
    PlannedTx {
        hash: ids.tx_hash(),
        sender,
        receiver: Some(receiver),
        value,
        gas_limit: gas.0,
        gas_used: gas.1,
        gas_price: gas.2,
        input: Vec::new(),
        status: TxStatus::Success,
        events: Vec::new(),
        internals: Vec::new(),
        trace: None,
    }
}

// ---------------------------------------------------------------------------
// Insertion scenario
// ---------------------------------------------------------------------------

struct InsertionParams {
    reserve_x: u128,
    reserve_y: u128,
    attacker_dx: u128,
    victim_dx: u128,
    /// Wei per gas for the buy, the victim trade, and the sell.
    gas_prices: (u128, u128, u128),
    /// Route the attacker's legs through a bot contract, or call the
    /// exchange directly.
    use_bot: bool,
}

const BUY_GAS: u64 = 120_000;
const VICTIM_GAS: u64 = 110_000;
const SELL_GAS: u64 = 90_000;

fn plant_insertion(
    builder: &mut ChainBuilder,
    ids: &mut Ids,
    block: u64,
    p: &InsertionParams,
) -> Result<PlantedAttack> {
    if p.attacker_dx == 0 {
        return Err(Error::InvalidParameter(
            "sandwich needs a positive attacker buy".into(),
        ));
    }
    let (g_buy, g_victim, g_sell) = p.gas_prices;
    if !(g_buy > g_victim && g_victim >= g_sell) {
        return Err(Error::InvalidParameter(
            "sandwich gas prices must satisfy buy > victim >= sell".into(),
        ));
    }

    let (dy_attacker, dy_victim, resale) =
        sandwich_outcome(p.reserve_x, p.reserve_y, p.attacker_dx, p.victim_dx)?;

    let exchange = ids.contract();
    builder.set_code(
        exchange,
        [&[0xC1][..], &ids.contracts.to_be_bytes()].concat(),
    );
    let token = ids.token();
    let attacker = ids.account();
    let victim = ids.account();
    let (holder, bot) = if p.use_bot {
        let bot = ids.contract();
        builder.set_code(bot, [&[0xB0][..], &ids.contracts.to_be_bytes()].concat());
        (bot, Some(bot))
    } else {
        (attacker, None)
    };
    let entry = bot.unwrap_or(exchange);

    // Buy leg: ether in, tokens out to the holding account.
    let mut t_buy = plain_tx(
        ids,
        attacker,
        entry,
        p.attacker_dx,
        (150_000, BUY_GAS, g_buy),
    );
    t_buy
        .events
        .push((token, exchange, holder, dy_attacker.clone()));
    if let Some(bot) = bot {
        t_buy.internals.push((bot, exchange, p.attacker_dx));
    }

    // Victim's own buy, mined between the attacker's legs.
    let mut t_victim = plain_tx(
        ids,
        victim,
        exchange,
        p.victim_dx,
        (140_000, VICTIM_GAS, g_victim),
    );
    t_victim.events.push((token, exchange, victim, dy_victim));

    // Sell leg: all bought tokens back, proceeds home to the attacker.
    let mut t_sell = plain_tx(ids, attacker, entry, 0, (120_000, SELL_GAS, g_sell));
    t_sell.events.push((token, holder, exchange, dy_attacker));
    if let Some(bot) = bot {
        t_sell.internals.push((exchange, bot, resale));
        t_sell.internals.push((bot, attacker, resale));
    } else {
        t_sell.internals.push((exchange, attacker, resale));
    }

    let fee_buy = BUY_GAS as u128 * g_buy;
    let fee_sell = SELL_GAS as u128 * g_sell;
    let cost = p.attacker_dx + fee_buy + fee_sell;
    let profit = resale as i128 - cost as i128;

    let planted = PlantedAttack {
        kind: AttackKind::Insertion,
        txs: vec![t_buy.hash, t_victim.hash, t_sell.hash],
        victim_contract: None,
        bot_contract: bot,
        expected_cost_wei: cost,
        expected_profit_wei: profit,
        rounds: None,
        strategy: None,
    };
    builder.push_tx(block, t_buy);
    builder.push_tx(block, t_victim);
    builder.push_tx(block, t_sell);
    Ok(planted)
}

/// Which single rule an insertion decoy violates.
#[derive(Clone, Copy)]
enum InsertionFlaw {
    /// Sell amount 5% short of the buy.
    AmountMismatch,
    /// Buy does not outbid the victim.
    EqualGas,
    /// Sell moves a different token.
    WrongToken,
}

fn control_insertion(
    builder: &mut ChainBuilder,
    ids: &mut Ids,
    rng: &mut ChaCha20Rng,
    block: u64,
    flaw: InsertionFlaw,
) -> String {
    let exchange = ids.contract();
    builder.set_code(
        exchange,
        [&[0xC1][..], &ids.contracts.to_be_bytes()].concat(),
    );
    let token = ids.token();
    let attacker = ids.account();
    let victim = ids.account();
    let attacker_dx = rng.gen_range(2..=20) * WEI_PER_ETH;
    let victim_dx = rng.gen_range(20..=60) * WEI_PER_ETH;
    let g_victim = gwei_price(rng, 20, 60);
    let g_buy = match flaw {
        InsertionFlaw::EqualGas => g_victim,
        _ => g_victim + GWEI * rng.gen_range(1..=10) as u128,
    };
    let g_sell = g_victim - GWEI * rng.gen_range(1..=10) as u128;

    let (dy_attacker, dy_victim, resale) = sandwich_outcome(
        1000 * WEI_PER_ETH,
        1000 * WEI_PER_ETH,
        attacker_dx,
        victim_dx,
    )
    .expect("positive swap amounts");

    let sell_amount = match flaw {
        // 5% below the buy: similarity 0.05, well past the 1% gate.
        InsertionFlaw::AmountMismatch => &dy_attacker * 95u32 / 100u32,
        _ => dy_attacker.clone(),
    };
    let sell_token = match flaw {
        InsertionFlaw::WrongToken => ids.token(),
        _ => token,
    };

    let mut t_buy = plain_tx(
        ids,
        attacker,
        exchange,
        attacker_dx,
        (150_000, BUY_GAS, g_buy),
    );
    t_buy.events.push((token, exchange, attacker, dy_attacker));
    let mut t_victim = plain_tx(
        ids,
        victim,
        exchange,
        victim_dx,
        (140_000, VICTIM_GAS, g_victim),
    );
    t_victim.events.push((token, exchange, victim, dy_victim));
    let mut t_sell = plain_tx(ids, attacker, exchange, 0, (120_000, SELL_GAS, g_sell));
    t_sell
        .events
        .push((sell_token, attacker, exchange, sell_amount));
    t_sell.internals.push((exchange, attacker, resale));

    builder.push_tx(block, t_buy);
    builder.push_tx(block, t_victim);
    builder.push_tx(block, t_sell);
    let label = match flaw {
        InsertionFlaw::AmountMismatch => "amount-mismatch",
        InsertionFlaw::EqualGas => "equal-gas",
        InsertionFlaw::WrongToken => "wrong-token",
    };
    format!("insertion decoy ({label}) at block {block}")
}

// ---------------------------------------------------------------------------
// Displacement scenario
// ---------------------------------------------------------------------------

struct DisplacementParams {
    reward: u128,
    gas_attacker: u128,
    gas_victim: u128,
    /// 4-byte chunks of camouflage around the copied payload; the copied
    /// 32-byte payload itself is 8 chunks.
    extra_chunks: usize,
    winner_len: u32,
    loser_len: u32,
}

const ATTACKER_GAS: u64 = 100_000;
const VICTIM_CALL_GAS: u64 = 80_000;

fn displacement_inputs(
    ids: &mut Ids,
    rng: &mut ChaCha20Rng,
    extra_chunks: usize,
) -> (Vec<u8>, Vec<u8>) {
    let secret = ids.payload(rng, 32);
    let prefix_chunks = extra_chunks / 2;
    let suffix_chunks = extra_chunks - prefix_chunks;
    let mut attacker_input = vec![0u8; prefix_chunks * 4];
    rng.fill(&mut attacker_input[..]);
    attacker_input.extend_from_slice(&secret);
    let mut suffix = vec![0u8; suffix_chunks * 4];
    rng.fill(&mut suffix[..]);
    attacker_input.extend_from_slice(&suffix);
    (secret, attacker_input)
}

fn plant_displacement(
    builder: &mut ChainBuilder,
    ids: &mut Ids,
    rng: &mut ChaCha20Rng,
    block: u64,
    p: &DisplacementParams,
) -> Result<PlantedAttack> {
    if p.gas_attacker <= p.gas_victim {
        return Err(Error::InvalidParameter(
            "displacement attacker must outbid the victim".into(),
        ));
    }
    if p.winner_len == p.loser_len {
        return Err(Error::InvalidParameter(
            "prize contract must run different winner and loser paths".into(),
        ));
    }
    let prize = ids.contract();
    builder.set_code(prize, prize_bytecode(p.winner_len, p.loser_len));
    let bot = ids.contract();
    builder.set_code(bot, forwarder_bytecode(prize));
    let attacker = ids.account();
    let victim = ids.account();
    let (secret, attacker_input) = displacement_inputs(ids, rng, p.extra_chunks);

    let mut t_attacker = plain_tx(
        ids,
        attacker,
        bot,
        0,
        (130_000, ATTACKER_GAS, p.gas_attacker),
    );
    t_attacker.input = attacker_input;
    t_attacker.trace = Some(generic_trace(p.winner_len as usize, TraceTerminal::Normal));
    t_attacker.internals.push((prize, bot, p.reward));
    t_attacker.internals.push((bot, attacker, p.reward));

    let mut t_victim = plain_tx(
        ids,
        victim,
        prize,
        0,
        (110_000, VICTIM_CALL_GAS, p.gas_victim),
    );
    t_victim.input = secret;
    t_victim.trace = Some(generic_trace(p.loser_len as usize, TraceTerminal::Normal));

    let fee = ATTACKER_GAS as u128 * p.gas_attacker;
    let planted = PlantedAttack {
        kind: AttackKind::Displacement,
        txs: vec![t_attacker.hash, t_victim.hash],
        victim_contract: Some(prize),
        bot_contract: Some(bot),
        expected_cost_wei: fee,
        expected_profit_wei: p.reward as i128 - fee as i128,
        rounds: None,
        strategy: None,
    };
    builder.push_tx(block, t_attacker);
    builder.push_tx(block, t_victim);
    Ok(planted)
}

#[derive(Clone, Copy)]
enum DisplacementFlaw {
    /// Copied payload is under a quarter of the attacker's input.
    LowPayloadRatio,
    /// Receivers are order-independent contracts: reordering changes nothing.
    NoInterference,
    /// Nobody frontran this transaction at all.
    VictimOnly,
}

fn control_displacement(
    builder: &mut ChainBuilder,
    ids: &mut Ids,
    rng: &mut ChaCha20Rng,
    block: u64,
    flaw: DisplacementFlaw,
) -> String {
    let gas_victim = gwei_price(rng, 20, 60);
    let gas_attacker = gas_victim + GWEI * rng.gen_range(2..=12) as u128;
    match flaw {
        DisplacementFlaw::LowPayloadRatio => {
            // 8 payload chunks inside 8 + 28 = 36 total: ratio 2/9 < 1/4.
            let prize = ids.contract();
            builder.set_code(prize, prize_bytecode(44, 23));
            let bot = ids.contract();
            builder.set_code(bot, forwarder_bytecode(prize));
            let attacker = ids.account();
            let victim = ids.account();
            let (secret, attacker_input) = displacement_inputs(ids, rng, 28);
            let reward = rng.gen_range(1..=4) * WEI_PER_ETH;
            let mut t_attacker =
                plain_tx(ids, attacker, bot, 0, (130_000, ATTACKER_GAS, gas_attacker));
            t_attacker.input = attacker_input;
            t_attacker.trace = Some(generic_trace(44, TraceTerminal::Normal));
            t_attacker.internals.push((prize, bot, reward));
            t_attacker.internals.push((bot, attacker, reward));
            let mut t_victim = plain_tx(
                ids,
                victim,
                prize,
                0,
                (110_000, VICTIM_CALL_GAS, gas_victim),
            );
            t_victim.input = secret;
            t_victim.trace = Some(generic_trace(23, TraceTerminal::Normal));
            builder.push_tx(block, t_attacker);
            builder.push_tx(block, t_victim);
            format!("displacement decoy (payload ratio below threshold) at block {block}")
        }
        DisplacementFlaw::NoInterference => {
            let c_attacker = ids.contract();
            builder.set_code(
                c_attacker,
                [&[0xCC][..], &ids.contracts.to_be_bytes()].concat(),
            );
            let c_victim = ids.contract();
            builder.set_code(
                c_victim,
                [&[0xCD][..], &ids.contracts.to_be_bytes()].concat(),
            );
            let attacker = ids.account();
            let victim = ids.account();
            let (secret, attacker_input) = displacement_inputs(ids, rng, 8);
            let mut t_attacker = plain_tx(
                ids,
                attacker,
                c_attacker,
                0,
                (130_000, ATTACKER_GAS, gas_attacker),
            );
            t_attacker.input = attacker_input;
            t_attacker.trace = Some(generic_trace(37, TraceTerminal::Normal));
            let mut t_victim = plain_tx(
                ids,
                victim,
                c_victim,
                0,
                (110_000, VICTIM_CALL_GAS, gas_victim),
            );
            t_victim.input = secret;
            t_victim.trace = Some(generic_trace(29, TraceTerminal::Normal));
            builder.push_tx(block, t_attacker);
            builder.push_tx(block, t_victim);
            format!("displacement decoy (order-independent pair) at block {block}")
        }
        DisplacementFlaw::VictimOnly => {
            let prize = ids.contract();
            builder.set_code(prize, prize_bytecode(41, 19));
            let victim = ids.account();
            let secret = ids.payload(rng, 32);
            let mut t_victim = plain_tx(
                ids,
                victim,
                prize,
                0,
                (110_000, VICTIM_CALL_GAS, gas_victim),
            );
            t_victim.input = secret;
            t_victim.trace = Some(generic_trace(41, TraceTerminal::Normal));
            builder.push_tx(block, t_victim);
            format!("displacement decoy (victim only, nobody frontran) at block {block}")
        }
    }
}

// ---------------------------------------------------------------------------
// Suppression scenario
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug)]
enum PlannedOutcome {
    /// The round runs to the prize claim. Only valid as the last round.
    Success,
    /// An outsider reaches the lottery before the attacker cashes out.
    Interrupted,
}

struct SuppressionPlan {
    rounds: Vec<PlannedOutcome>,
    strategy: SuppressionStrategy,
    stuff_blocks_per_round: u64,
    stuff_txs_per_block: u32,
    prize: u128,
}

const STUFF_GAS_LIMIT: u64 = 3_000_000;
const INVEST_GAS: (u64, u64) = (60_000, 42_000);
const CLAIM_GAS: (u64, u64) = (60_000, 30_000);

fn stuffing_trace(strategy: SuppressionStrategy) -> ((Vec<String>, TraceTerminal), TxStatus) {
    match strategy {
        SuppressionStrategy::ControlledGasLoop => (
            loop_trace(["GAS", "GT", "ISZERO", "JUMPI"], 12, TraceTerminal::Normal),
            TxStatus::Success,
        ),
        SuppressionStrategy::UncontrolledGasLoop => (
            loop_trace(
                ["SLOAD", "TIMESTAMP", "ADD", "SSTORE"],
                12,
                TraceTerminal::Revert,
            ),
            TxStatus::Reverted,
        ),
        SuppressionStrategy::Assert => (
            generic_trace(31, TraceTerminal::Assert),
            TxStatus::AssertFailed,
        ),
    }
}

fn plant_suppression(
    builder: &mut ChainBuilder,
    ids: &mut Ids,
    rng: &mut ChaCha20Rng,
    slot_start: u64,
    plan: &SuppressionPlan,
) -> Result<PlantedAttack> {
    if plan.rounds.is_empty() {
        return Err(Error::InvalidParameter("lottery plan needs rounds".into()));
    }
    if plan
        .rounds
        .iter()
        .take(plan.rounds.len() - 1)
        .any(|r| matches!(r, PlannedOutcome::Success))
    {
        return Err(Error::InvalidParameter(
            "only the final lottery round can succeed".into(),
        ));
    }
    let span = plan.rounds.len() as u64 * (plan.stuff_blocks_per_round + 1) + 1;
    if span + 1 > SLOT_BLOCKS {
        return Err(Error::InvalidParameter(
            "lottery plan does not fit its block slot".into(),
        ));
    }

    let lottery = ids.contract();
    builder.set_code(
        lottery,
        [&[0x4C][..], &ids.contracts.to_be_bytes()].concat(),
    );
    let bot = ids.contract();
    builder.set_code(bot, [&[0xB5][..], &ids.contracts.to_be_bytes()].concat());
    let attacker = ids.account();
    let gas_price = gwei_price(rng, 30, 70);

    let mut txs = Vec::new();
    let mut rounds = Vec::new();
    let mut total_cost: u128 = 0;
    let mut block = slot_start + 1;
    for (i, outcome) in plan.rounds.iter().enumerate() {
        // Open the round with an investment into the lottery.
        let investment = rng.gen_range(1..=3) * WEI_PER_ETH;
        let t_invest = plain_tx(
            ids,
            attacker,
            lottery,
            investment,
            (INVEST_GAS.0, INVEST_GAS.1, gas_price),
        );
        let investment_tx = t_invest.hash;
        total_cost += investment + t_invest.gas_used as u128 * gas_price;
        txs.push(t_invest.hash);
        builder.push_tx(block, t_invest);

        // Stuff the following blocks.
        let mut stuffing_txs = Vec::new();
        for b in block + 1..=block + plan.stuff_blocks_per_round {
            for _ in 0..plan.stuff_txs_per_block {
                let gas_used = STUFF_GAS_LIMIT - rng.gen_range(3_000..24_000);
                let mut t_stuff = plain_tx(
                    ids,
                    attacker,
                    bot,
                    0,
                    (STUFF_GAS_LIMIT, gas_used, gas_price),
                );
                let (trace, status) = stuffing_trace(plan.strategy);
                t_stuff.trace = Some(trace);
                t_stuff.status = status;
                total_cost += gas_used as u128 * gas_price;
                stuffing_txs.push(t_stuff.hash);
                txs.push(t_stuff.hash);
                builder.push_tx(b, t_stuff);
            }
        }
        block += plan.stuff_blocks_per_round + 1;

        match outcome {
            PlannedOutcome::Success => {
                // Cash out: a claim call carrying the prize back home.
                let mut t_claim = plain_tx(
                    ids,
                    attacker,
                    lottery,
                    0,
                    (CLAIM_GAS.0, CLAIM_GAS.1, gas_price),
                );
                t_claim.internals.push((lottery, attacker, plan.prize));
                txs.push(t_claim.hash);
                builder.push_tx(block, t_claim);
                rounds.push(PlantedRound {
                    investment_tx,
                    stuffing_txs,
                    status: AttackStatus::Success,
                    prize_wei: plan.prize,
                });
            }
            PlannedOutcome::Interrupted => {
                // An outsider reaches the lottery first; their stake ends the
                // round. The outsider goes in ahead of any follow-up
                // investment in the same block.
                let outsider = ids.account();
                let stake = rng.gen_range(1..=2) * WEI_PER_ETH;
                let t_outsider = plain_tx(
                    ids,
                    outsider,
                    lottery,
                    stake,
                    (INVEST_GAS.0, INVEST_GAS.1, gas_price),
                );
                builder.push_tx(block, t_outsider);
                rounds.push(PlantedRound {
                    investment_tx,
                    stuffing_txs,
                    status: AttackStatus::Failure,
                    prize_wei: 0,
                });
            }
        }

        if i + 1 == plan.rounds.len() {
            break;
        }
    }

    let profit = match rounds.last().map(|r| r.status) {
        Some(AttackStatus::Success) => plan.prize as i128 - total_cost as i128,
        _ => -(total_cost as i128),
    };
    Ok(PlantedAttack {
        kind: AttackKind::Suppression,
        txs,
        victim_contract: Some(lottery),
        bot_contract: Some(bot),
        expected_cost_wei: total_cost,
        expected_profit_wei: profit,
        rounds: Some(rounds),
        strategy: Some(plan.strategy),
    })
}

#[derive(Clone, Copy)]
enum SuppressionFlaw {
    /// Heavy transactions that still leave more than 1% of their gas unused.
    LowGasRatio,
    /// A single stuffed block with no stuffed neighbor.
    SingleBlock,
}

fn control_suppression(
    builder: &mut ChainBuilder,
    ids: &mut Ids,
    rng: &mut ChaCha20Rng,
    slot_start: u64,
    flaw: SuppressionFlaw,
) -> String {
    let lottery = ids.contract();
    builder.set_code(
        lottery,
        [&[0x4C][..], &ids.contracts.to_be_bytes()].concat(),
    );
    let bot = ids.contract();
    builder.set_code(bot, [&[0xB5][..], &ids.contracts.to_be_bytes()].concat());
    let attacker = ids.account();
    let gas_price = gwei_price(rng, 30, 70);

    let investment = rng.gen_range(1..=3) * WEI_PER_ETH;
    let t_invest = plain_tx(
        ids,
        attacker,
        lottery,
        investment,
        (INVEST_GAS.0, INVEST_GAS.1, gas_price),
    );
    builder.push_tx(slot_start + 1, t_invest);

    let (blocks, gas_used_of): (u64, fn(&mut ChaCha20Rng) -> u64) = match flaw {
        // 95% of the limit: heavy, but under the stuffing bar.
        SuppressionFlaw::LowGasRatio => (2, |_| STUFF_GAS_LIMIT / 100 * 95),
        SuppressionFlaw::SingleBlock => (1, |rng| STUFF_GAS_LIMIT - rng.gen_range(3_000..24_000)),
    };
    for b in slot_start + 2..slot_start + 2 + blocks {
        for _ in 0..3 {
            let gas_used = gas_used_of(rng);
            let mut t_stuff = plain_tx(
                ids,
                attacker,
                bot,
                0,
                (STUFF_GAS_LIMIT, gas_used, gas_price),
            );
            let (trace, status) = stuffing_trace(SuppressionStrategy::ControlledGasLoop);
            t_stuff.trace = Some(trace);
            t_stuff.status = status;
            builder.push_tx(b, t_stuff);
        }
    }
    let label = match flaw {
        SuppressionFlaw::LowGasRatio => "gas ratio under threshold",
        SuppressionFlaw::SingleBlock => "single stuffed block",
    };
    format!("suppression decoy ({label}) at block {}", slot_start + 2)
}

// ---------------------------------------------------------------------------
// Generation driver
// ---------------------------------------------------------------------------

fn gwei_price(rng: &mut ChaCha20Rng, lo: u64, hi: u64) -> u128 {
    rng.gen_range(lo..=hi) as u128 * GWEI
}

enum Scenario {
    Insertion { index: u32 },
    Displacement,
    Suppression { index: u32 },
    InsertionControl(InsertionFlaw),
    DisplacementControl(DisplacementFlaw),
    SuppressionControl(SuppressionFlaw),
}

/// A generated chain: fixture records, its price table, and the manifest.
#[derive(Clone, Debug)]
pub struct GeneratedChain {
    pub records: Vec<Record>,
    pub prices: PriceTable,
    pub manifest: GroundTruthManifest,
}

impl GeneratedChain {
    /// Assemble the generated records into a validated snapshot, exactly as
    /// reading them back from disk would.
    pub fn snapshot(&self) -> Result<ChainSnapshot> {
        let source = FixtureSource::from_records(self.records.clone())?;
        load_snapshot(&source, 0, self.manifest.blocks - 1, self.prices.clone())
    }

    /// Write `chain.ndjson`, `prices.csv`, and `manifest.json` into `dir`.
    pub fn write_to_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let file = std::fs::File::create(dir.join("chain.ndjson"))?;
        let mut writer = std::io::BufWriter::new(file);
        write_records(&mut writer, &self.records)?;
        writer.flush()?;
        std::fs::write(dir.join("prices.csv"), self.prices.to_csv_string())?;
        std::fs::write(dir.join("manifest.json"), self.manifest.to_json_string()?)?;
        Ok(())
    }
}

/// Generate a chain per `cfg`. The same config yields the same bytes.
pub fn generate(cfg: &GeneratorConfig) -> Result<GeneratedChain> {
    if cfg.blocks == 0 {
        return Err(Error::InvalidParameter(
            "chain needs at least one block".into(),
        ));
    }
    if cfg.block_gas_limit < STUFF_GAS_LIMIT {
        return Err(Error::InvalidParameter(format!(
            "block gas limit must be at least {STUFF_GAS_LIMIT}"
        )));
    }

    let mut scenarios = Vec::new();
    for index in 0..cfg.insertions {
        scenarios.push(Scenario::Insertion { index });
    }
    for _ in 0..cfg.displacements {
        scenarios.push(Scenario::Displacement);
    }
    for index in 0..cfg.suppressions {
        scenarios.push(Scenario::Suppression { index });
    }
    if cfg.negative_controls {
        scenarios.push(Scenario::InsertionControl(InsertionFlaw::AmountMismatch));
        scenarios.push(Scenario::InsertionControl(InsertionFlaw::EqualGas));
        scenarios.push(Scenario::InsertionControl(InsertionFlaw::WrongToken));
        scenarios.push(Scenario::DisplacementControl(
            DisplacementFlaw::LowPayloadRatio,
        ));
        scenarios.push(Scenario::DisplacementControl(
            DisplacementFlaw::NoInterference,
        ));
        scenarios.push(Scenario::DisplacementControl(DisplacementFlaw::VictimOnly));
        scenarios.push(Scenario::SuppressionControl(SuppressionFlaw::LowGasRatio));
        scenarios.push(Scenario::SuppressionControl(SuppressionFlaw::SingleBlock));
        debug_assert_eq!(
            scenarios.len(),
            CONTROL_KINDS + (cfg.insertions + cfg.displacements + cfg.suppressions) as usize
        );
    }

    let slots_available = cfg.blocks / SLOT_BLOCKS;
    if scenarios.len() as u64 > slots_available {
        return Err(Error::InvalidParameter(format!(
            "{} scenarios need {} blocks, but only {} were requested",
            scenarios.len(),
            scenarios.len() as u64 * SLOT_BLOCKS,
            cfg.blocks
        )));
    }

    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
    let mut slots: Vec<u64> = (0..slots_available).collect();
    slots.shuffle(&mut rng);

    let mut builder = ChainBuilder::new(cfg.blocks);
    let mut ids = Ids::default();
    let mut planted = Vec::new();
    let mut controls = Vec::new();

    for (scenario, slot) in scenarios.iter().zip(&slots) {
        let slot_start = slot * SLOT_BLOCKS;
        match scenario {
            Scenario::Insertion { index } => {
                // The first sandwich uses fixed reference parameters so the
                // manifest carries a closed-form-checkable profit.
                let params = if *index == 0 {
                    InsertionParams {
                        reserve_x: 1000 * WEI_PER_ETH,
                        reserve_y: 1000 * WEI_PER_ETH,
                        attacker_dx: 10 * WEI_PER_ETH,
                        victim_dx: 50 * WEI_PER_ETH,
                        gas_prices: (60 * GWEI, 50 * GWEI, 40 * GWEI),
                        use_bot: true,
                    }
                } else {
                    let g_victim = gwei_price(&mut rng, 20, 60);
                    InsertionParams {
                        reserve_x: 1000 * WEI_PER_ETH,
                        reserve_y: 1000 * WEI_PER_ETH,
                        attacker_dx: rng.gen_range(2..=30) * WEI_PER_ETH,
                        victim_dx: rng.gen_range(20..=90) * WEI_PER_ETH,
                        gas_prices: (
                            g_victim + GWEI * rng.gen_range(1..=15) as u128,
                            g_victim,
                            g_victim - GWEI * rng.gen_range(0..=10) as u128,
                        ),
                        use_bot: index % 3 != 2,
                    }
                };
                planted.push(plant_insertion(
                    &mut builder,
                    &mut ids,
                    slot_start + 2,
                    &params,
                )?);
            }
            Scenario::Displacement => {
                let gas_victim = gwei_price(&mut rng, 20, 60);
                let winner_len = rng.gen_range(30..=50);
                let params = DisplacementParams {
                    reward: rng.gen_range(1..=5) * WEI_PER_ETH,
                    gas_attacker: gas_victim + GWEI * rng.gen_range(2..=12) as u128,
                    gas_victim,
                    extra_chunks: rng.gen_range(0..=12),
                    winner_len,
                    loser_len: winner_len + rng.gen_range(5..=15),
                };
                planted.push(plant_displacement(
                    &mut builder,
                    &mut ids,
                    &mut rng,
                    slot_start + 2,
                    &params,
                )?);
            }
            Scenario::Suppression { index } => {
                let (rounds, txs_per_block) = match index % 3 {
                    // Two rounds: a spoiled first attempt, then the win.
                    0 => (
                        vec![PlannedOutcome::Interrupted, PlannedOutcome::Success],
                        3,
                    ),
                    // The minimal winning shape: one round over two blocks.
                    1 => (vec![PlannedOutcome::Success], 2),
                    // A campaign that never pays out.
                    _ => (vec![PlannedOutcome::Interrupted], 3),
                };
                let plan = SuppressionPlan {
                    rounds,
                    strategy: [
                        SuppressionStrategy::ControlledGasLoop,
                        SuppressionStrategy::UncontrolledGasLoop,
                        SuppressionStrategy::Assert,
                    ][(*index % 3) as usize],
                    stuff_blocks_per_round: 2,
                    stuff_txs_per_block: txs_per_block,
                    prize: rng.gen_range(50..=150) * WEI_PER_ETH,
                };
                planted.push(plant_suppression(
                    &mut builder,
                    &mut ids,
                    &mut rng,
                    slot_start,
                    &plan,
                )?);
            }
            Scenario::InsertionControl(flaw) => {
                controls.push(control_insertion(
                    &mut builder,
                    &mut ids,
                    &mut rng,
                    slot_start + 2,
                    *flaw,
                ));
            }
            Scenario::DisplacementControl(flaw) => {
                controls.push(control_displacement(
                    &mut builder,
                    &mut ids,
                    &mut rng,
                    slot_start + 2,
                    *flaw,
                ));
            }
            Scenario::SuppressionControl(flaw) => {
                controls.push(control_suppression(
                    &mut builder,
                    &mut ids,
                    &mut rng,
                    slot_start,
                    *flaw,
                ));
            }
        }
    }

    // Benign background traffic: plain transfers between fresh accounts, and
    // an occasional single-token transfer event nothing can pair with.
    for block in 0..cfg.blocks {
        for n in 0..cfg.noise_txs_per_block {
            let sender = {
                ids.accounts += 1;
                tagged_address(0xA2, ids.accounts)
            };
            let receiver = {
                ids.accounts += 1;
                tagged_address(0xA3, ids.accounts)
            };
            let value = rng.gen_range(1_000_000_000_000_000u128..=WEI_PER_ETH);
            let mut tx = plain_tx(
                &mut ids,
                sender,
                receiver,
                value,
                (30_000, 21_000, gwei_price(&mut rng, 10, 100)),
            );
            if n == 0 && block % 3 == 0 {
                let token = ids.token();
                tx.events.push((
                    token,
                    sender,
                    receiver,
                    BigUint::from(rng.gen_range(1u64..=1_000_000)),
                ));
            }
            builder.push_tx(block, tx);
        }
    }

    let records = builder.finalize(cfg)?;
    let prices = price_table_for(cfg)?;
    let manifest = GroundTruthManifest {
        seed: cfg.seed,
        blocks: cfg.blocks,
        planted,
        controls,
    };
    Ok(GeneratedChain {
        records,
        prices,
        manifest,
    })
}

fn price_table_for(cfg: &GeneratorConfig) -> Result<PriceTable> {
    let start = chrono::DateTime::from_timestamp(cfg.base_timestamp as i64, 0)
        .ok_or_else(|| Error::InvalidParameter("base timestamp out of range".into()))?
        .date_naive();
    let day_before = start
        .checked_sub_days(Days::new(1))
        .ok_or_else(|| Error::InvalidParameter("base timestamp out of range".into()))?;
    let day_after = start
        .checked_add_days(Days::new(1))
        .ok_or_else(|| Error::InvalidParameter("base timestamp out of range".into()))?;
    PriceTable::new(vec![
        PricePoint {
            date: day_before,
            eth_usd: "380.00".parse().map_err(Error::Data)?,
        },
        PricePoint {
            date: start,
            eth_usd: "400.00".parse().map_err(Error::Data)?,
        },
        PricePoint {
            date: day_after,
            eth_usd: "412.50".parse().map_err(Error::Data)?,
        },
    ])
}
