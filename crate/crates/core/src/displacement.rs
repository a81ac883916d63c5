//! Displacement detection.
//!
//! A displacement attack copies a pending transaction's payload, resubmits it
//! from a different account at a higher gas price, and gets mined first, so
//! the original sender pays for a call whose reward was already taken.  The
//! scanner looks for exactly that footprint in mined history:
//!
//! 1. slide a window over the block range and fingerprint every transaction
//!    input as its set of distinct 4-byte n-grams,
//! 2. flag a pair when an earlier transaction's payload contains (nearly) all
//!    of a later one's grams — the earlier copy is the suspected attacker,
//!    the later original the suspected victim,
//! 3. keep the pair only if account/gas/payload-size heuristics hold, and
//! 4. confirm by re-executing the two transactions in both orders: a real
//!    displacement changes what the victim's call does.
//!
//! Candidate screening uses a Bloom filter per window so the exhaustive
//! gram-set comparison only runs for transactions that already look like
//! copies.

use crate::bloom_ngram::{distinct_grams, BloomFilter, GRAM_SIZE};
use crate::chain_model::{
    wei_string, wei_string_signed, Address, ChainSnapshot, Transaction, TxHash, Usd,
};
use crate::{Error, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

/// Tuning knobs for the displacement scanner.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DisplacementConfig {
    /// Width of the sliding block window.
    pub window_blocks: u64,
    /// Distance between consecutive window starts.
    pub window_stride: u64,
    /// Fraction of a victim's distinct grams that must appear in the
    /// suspected copy before the pair is considered a match.
    pub match_threshold: f64,
    /// Minimum victim/attacker ratio of whole 4-byte payload chunks.
    pub input_ratio: f64,
    /// Capacity hint for the per-window Bloom filter.
    pub bloom_capacity: u64,
    /// Target false-positive rate for the per-window Bloom filter.
    pub bloom_fp_rate: f64,
}

impl Default for DisplacementConfig {
    fn default() -> Self {
        DisplacementConfig {
            window_blocks: 100,
            window_stride: 20,
            match_threshold: 0.95,
            input_ratio: 0.25,
            bloom_capacity: 1_000_000,
            bloom_fp_rate: 0.01,
        }
    }
}

/// Re-executes transactions to decide whether their order matters.
///
/// `execute` runs `ordering` against the state of `block_number` and returns
/// one executed-instruction count per transaction, in the given order.  The
/// engine only compares counts between orderings, so any deterministic
/// executor — a full EVM or a replay stub — can back this trait.
pub trait ExecutionOracle: Sync {
    fn execute(&self, ordering: &[&Transaction], block_number: u64) -> Result<Vec<u64>>;
}

/// A confirmed displacement pair with its cost accounting.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DisplacementAttack {
    pub attacker_tx: TxHash,
    pub victim_tx: TxHash,
    pub attacker_account: Address,
    pub victim_account: Address,
    /// Receiver of the attacker transaction when it is a deployed contract.
    pub bot_contract: Option<Address>,
    pub attacker_block: u64,
    pub victim_block: u64,
    /// Blocks between the attacker's and the victim's inclusion.
    pub block_delta: u64,
    /// How much more per gas unit the attacker paid.
    #[serde(with = "wei_string")]
    pub gas_price_delta: u128,
    /// Internal transfers the attacker transaction paid back to its sender.
    #[serde(with = "wei_string")]
    pub gain_wei: u128,
    /// Fee of the attacker transaction.
    #[serde(with = "wei_string")]
    pub cost_wei: u128,
    #[serde(with = "wei_string_signed")]
    pub profit_wei: i128,
    pub cost_usd: Usd,
    pub profit_usd: Usd,
}

/// Scanner output: confirmed attacks plus volume counters for diagnostics.
#[derive(Clone, Debug, Default, Serialize)]
pub struct DisplacementScan {
    pub attacks: Vec<DisplacementAttack>,
    pub windows_scanned: u64,
    /// Pairs that passed the Bloom pre-screen and were compared exactly.
    pub pairs_compared: u64,
    /// Pairs that reached the re-execution stage.
    pub simulations_run: u64,
}

/// Account/gas/payload checks applied to a candidate (attacker, victim) pair.
///
/// The attacker must already be mined strictly before the victim.  Senders
/// and receivers must both differ (the same account resubmitting, or two
/// calls into unrelated copies of one router, is not a displacement), the
/// attacker must have bid a strictly higher gas price, and the victim's
/// payload must be a meaningful fraction of the attacker's: at least
/// `input_ratio` when both are measured in whole 4-byte chunks, with at
/// least one whole chunk on each side.
pub fn check_displacement_heuristics(
    attacker: &Transaction,
    victim: &Transaction,
    cfg: &DisplacementConfig,
) -> bool {
    if (attacker.block_number, attacker.tx_index) >= (victim.block_number, victim.tx_index) {
        return false;
    }
    let distinct_accounts =
        attacker.sender != victim.sender && attacker.receiver != victim.receiver;
    if !distinct_accounts {
        return false;
    }
    if attacker.gas_price <= victim.gas_price {
        return false;
    }
    let attacker_chunks = attacker.input.len() / GRAM_SIZE;
    let victim_chunks = victim.input.len() / GRAM_SIZE;
    if attacker_chunks == 0 || victim_chunks == 0 {
        return false;
    }
    victim_chunks as f64 >= cfg.input_ratio * attacker_chunks as f64
}

/// Runs the pair in both orders at the attacker's block and reports whether
/// the orderings interfere, i.e. produce different instruction counts for at
/// least one of the two transactions.
pub fn validate_by_simulation(
    oracle: &dyn ExecutionOracle,
    attacker: &Transaction,
    victim: &Transaction,
) -> Result<bool> {
    let block = attacker.block_number;
    let forward = oracle.execute(&[attacker, victim], block)?;
    let reversed = oracle.execute(&[victim, attacker], block)?;
    if forward.len() != 2 || reversed.len() != 2 {
        return Err(Error::Internal(format!(
            "execution oracle returned {} and {} counts for 2 transactions",
            forward.len(),
            reversed.len()
        )));
    }
    // forward = [attacker, victim], reversed = [victim, attacker].
    Ok(forward[0] != reversed[1] || forward[1] != reversed[0])
}

/// Fills in the accounting for a confirmed pair.
///
/// Gain is the sum of internal transfers the attacker transaction sent back
/// to its own sender; cost is that transaction's fee.  Dollar figures use the
/// price in effect at the attacker's block.
pub fn compute_displacement_result(
    snapshot: &ChainSnapshot,
    attacker: &Transaction,
    victim: &Transaction,
) -> Result<DisplacementAttack> {
    let mut gain: u128 = 0;
    for t in snapshot.internal_transfers_of(&attacker.hash) {
        if t.to == attacker.sender {
            gain = gain
                .checked_add(t.value)
                .ok_or_else(|| Error::Data("internal transfer total overflows".into()))?;
        }
    }
    let cost = attacker.fee();
    let profit = crate::chain_model::signed_difference(gain, cost)?;
    let ts = snapshot
        .timestamp_of_block(attacker.block_number)
        .ok_or(Error::MissingBlock(attacker.block_number))?;
    let cost_usd = crate::chain_model::wei_to_usd(cost, ts, &snapshot.prices)?;
    let profit_usd = crate::chain_model::wei_to_usd_signed(profit, ts, &snapshot.prices)?;
    let bot_contract = attacker.receiver.filter(|r| snapshot.is_contract(r));
    Ok(DisplacementAttack {
        attacker_tx: attacker.hash,
        victim_tx: victim.hash,
        attacker_account: attacker.sender,
        victim_account: victim.sender,
        bot_contract,
        attacker_block: attacker.block_number,
        victim_block: victim.block_number,
        block_delta: victim.block_number - attacker.block_number,
        gas_price_delta: attacker.gas_price - victim.gas_price,
        gain_wei: gain,
        cost_wei: cost,
        profit_wei: profit,
        cost_usd,
        profit_usd,
    })
}

struct WindowScan {
    attacks: Vec<DisplacementAttack>,
    pairs_compared: u64,
    simulations_run: u64,
}

fn scan_window(
    snapshot: &ChainSnapshot,
    oracle: &dyn ExecutionOracle,
    cfg: &DisplacementConfig,
    start: u64,
) -> Result<WindowScan> {
    let end = (start + cfg.window_blocks - 1).min(snapshot.to_block);
    let mut filter = BloomFilter::with_rate(cfg.bloom_capacity, cfg.bloom_fp_rate)?;
    // Earlier transactions of this window with their gram fingerprints.
    let mut seen: Vec<(&Transaction, BTreeSet<[u8; GRAM_SIZE]>)> = Vec::new();
    let mut out = WindowScan {
        attacks: Vec::new(),
        pairs_compared: 0,
        simulations_run: 0,
    };
    for number in start..=end {
        let block = snapshot.block(number).ok_or(Error::MissingBlock(number))?;
        for tx in &block.transactions {
            let grams = distinct_grams(&tx.input);
            if grams.is_empty() {
                continue; // payload too short to fingerprint
            }
            let needed = cfg.match_threshold * grams.len() as f64;
            let screened = grams.iter().filter(|g| filter.contains(&g[..])).count();
            if screened as f64 >= needed {
                // The filter says almost every gram was seen before in this
                // window; find out which earlier transaction really holds
                // them.  `tx` is the victim (mined later), the earlier
                // transaction the suspected pre-emptive copy.
                for (earlier, earlier_grams) in &seen {
                    out.pairs_compared += 1;
                    let contained = grams.intersection(earlier_grams).count();
                    if (contained as f64) < needed {
                        continue;
                    }
                    if !check_displacement_heuristics(earlier, tx, cfg) {
                        continue;
                    }
                    out.simulations_run += 1;
                    if !validate_by_simulation(oracle, earlier, tx)? {
                        continue;
                    }
                    out.attacks
                        .push(compute_displacement_result(snapshot, earlier, tx)?);
                }
            }
            for gram in &grams {
                filter.insert(&gram[..]);
            }
            seen.push((tx, grams));
        }
    }
    Ok(out)
}

/// Scans the whole snapshot for displacement attacks.
///
/// Windows overlap (stride < width) so pairs near window edges are still seen
/// together at least once; a pair confirmed in several windows is reported
/// once.  Windows are scanned in parallel and merged in ascending start
/// order, so the result is deterministic for a given snapshot and config.
pub fn scan_displacement(
    snapshot: &ChainSnapshot,
    oracle: &dyn ExecutionOracle,
    cfg: &DisplacementConfig,
) -> Result<DisplacementScan> {
    if cfg.window_blocks == 0 || cfg.window_stride == 0 {
        return Err(Error::InvalidParameter(
            "window width and stride must be positive".into(),
        ));
    }
    if !(cfg.match_threshold > 0.0 && cfg.match_threshold <= 1.0) {
        return Err(Error::InvalidParameter(
            "match threshold must be in (0, 1]".into(),
        ));
    }
    let mut starts = Vec::new();
    let mut s = snapshot.from_block;
    loop {
        starts.push(s);
        match s.checked_add(cfg.window_stride) {
            Some(next) if next <= snapshot.to_block => s = next,
            _ => break,
        }
    }
    let per_window: Result<Vec<WindowScan>> = starts
        .par_iter()
        .map(|&start| scan_window(snapshot, oracle, cfg, start))
        .collect();
    let per_window = per_window?;

    let mut scan = DisplacementScan {
        windows_scanned: starts.len() as u64,
        ..DisplacementScan::default()
    };
    let mut reported: BTreeSet<(TxHash, TxHash)> = BTreeSet::new();
    // Sort key: mined position of attacker, then victim.
    let mut keyed: BTreeMap<(u64, u32, u64, u32), DisplacementAttack> = BTreeMap::new();
    for window in per_window {
        scan.pairs_compared += window.pairs_compared;
        scan.simulations_run += window.simulations_run;
        for attack in window.attacks {
            if !reported.insert((attack.attacker_tx, attack.victim_tx)) {
                continue;
            }
            let a = snapshot
                .tx(&attack.attacker_tx)
                .ok_or_else(|| Error::Internal("attack references unknown tx".into()))?;
            let v = snapshot
                .tx(&attack.victim_tx)
                .ok_or_else(|| Error::Internal("attack references unknown tx".into()))?;
            keyed.insert(
                (a.block_number, a.tx_index, v.block_number, v.tx_index),
                attack,
            );
        }
    }
    scan.attacks = keyed.into_values().collect();
    Ok(scan)
}
