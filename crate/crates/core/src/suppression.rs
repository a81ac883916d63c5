//! Suppression (block-stuffing) detection.
//!
//! A suppression attack keeps a victim contract from receiving transactions
//! — typically to freeze a last-bidder-wins lottery until its payout timer
//! expires — by filling consecutive blocks with gas-burning calls to a bot
//! contract.  The on-chain footprint is a run of blocks in which several
//! transactions to one receiver each consume almost their entire gas limit.
//!
//! The scanner proceeds in four stages:
//!
//! 1. per block, cluster transactions by receiver and keep clusters whose
//!    members all burn more than a base-transfer's gas at a used/limit ratio
//!    above the stuffing threshold,
//! 2. chain qualifying clusters of one receiver across consecutive blocks
//!    (tolerating a small gap) and require at least one directly adjacent
//!    pair of stuffed blocks,
//! 3. infer the victim: the contract that attacker accounts paid ether into
//!    right before and during the stuffing, and
//! 4. segment the attack into rounds — each opened by an attacker investment
//!    into the victim, closed by an outsider's counter-investment (failure)
//!    or by a prize payout back to an attacker account (success) — and
//!    account for every wei invested, burned, and won.
//!
//! The stuffing *strategy* is read off the execution trace of the attack's
//! first stuffing transaction: a gas-checking loop that exits cleanly, an
//! unconditional storage-write loop that runs out of gas and reverts, or an
//! assertion failure (which consumes all gas by design).

use crate::chain_model::{
    wei_string, wei_string_signed, Address, Block, ChainSnapshot, ExecutionTrace, TraceTerminal,
    TxHash, Usd, BASE_TX_GAS,
};
use crate::{Error, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

/// Tuning knobs for the suppression scanner.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuppressionConfig {
    /// Gas a transaction must exceed to count as stuffing (a plain transfer
    /// burns exactly this much).
    pub base_tx_gas: u64,
    /// Minimum gas_used/gas_limit ratio (exclusive) for stuffing members.
    pub gas_ratio: f64,
    /// A loop pattern must occur strictly more often than this in the trace
    /// to classify the strategy.
    pub loop_repeats: u64,
    /// Non-qualifying blocks allowed inside one attack's block run.
    pub gap_tolerance: u64,
    /// Blocks before the first stuffed block searched for the opening
    /// investment.
    pub investment_lookback: u64,
    /// Blocks after the last stuffed block searched for the prize claim.
    pub claim_tail: u64,
}

impl Default for SuppressionConfig {
    fn default() -> Self {
        SuppressionConfig {
            base_tx_gas: BASE_TX_GAS,
            gas_ratio: 0.99,
            loop_repeats: 10,
            gap_tolerance: 1,
            investment_lookback: 2,
            claim_tail: 2,
        }
    }
}

/// One block's worth of stuffing: >1 transactions to one receiver, each
/// burning nearly its whole gas limit.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct StuffingCluster {
    pub block_number: u64,
    /// The stuffed bot contract.
    pub receiver: Address,
    pub txs: Vec<TxHash>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackStatus {
    Success,
    Failure,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SuppressionStrategy {
    /// Loop that checks remaining gas and exits cleanly.
    ControlledGasLoop,
    /// Storage-write loop that runs until out of gas and reverts.
    UncontrolledGasLoop,
    /// Deliberate assertion failure, consuming all gas.
    Assert,
}

/// One investment round of a suppression attack.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuppressionRound {
    /// Attacker transaction that paid into the victim contract.
    pub investment_tx: TxHash,
    /// Stuffing transactions mined between this round's opening and the
    /// next (stuffing that precedes the first investment counts into the
    /// first round).
    pub stuffing_txs: Vec<TxHash>,
    pub status: AttackStatus,
    /// Ether paid from the victim contract back to an attacker account;
    /// zero unless the round succeeded.
    #[serde(with = "wei_string")]
    pub prize_claimed: u128,
}

/// A confirmed block-stuffing campaign with its rounds and accounting.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuppressionAttack {
    pub victim_contract: Address,
    pub bot_contracts: BTreeSet<Address>,
    /// Accounts that sent stuffing transactions.
    pub attacker_accounts: BTreeSet<Address>,
    pub rounds: Vec<SuppressionRound>,
    /// `None` when the first stuffing trace matches no known pattern.
    pub strategy: Option<SuppressionStrategy>,
    pub first_block: u64,
    pub last_block: u64,
    /// Distinct blocks containing stuffing transactions.
    pub blocks_stuffed: u64,
    /// Investments plus stuffing transactions (prize claims excluded).
    pub tx_count: u64,
    /// Σ investments + Σ fees of investments and stuffing.
    #[serde(with = "wei_string")]
    pub cost_wei: u128,
    #[serde(with = "wei_string_signed")]
    pub profit_wei: i128,
    pub cost_usd: Usd,
    pub profit_usd: Usd,
    /// The last round's status.
    pub status: AttackStatus,
}

/// Scanner output plus non-fatal diagnostics (rejected chains, unclassified
/// strategies, missing traces).
#[derive(Clone, Debug, Default, Serialize)]
pub struct SuppressionScan {
    pub attacks: Vec<SuppressionAttack>,
    pub clusters_found: u64,
    pub warnings: Vec<String>,
}

/// `used / limit > ratio`, evaluated in integers (parts per billion) so the
/// boundary is exact.
fn exceeds_ratio(used: u64, limit: u64, ratio: f64) -> bool {
    const SCALE: u128 = 1_000_000_000;
    let scaled = (ratio * SCALE as f64).round() as u128;
    (used as u128) * SCALE > (limit as u128) * scaled
}

/// Groups one block's transactions by receiver and keeps the groups in which
/// every member looks like stuffing: more than one transaction, each burning
/// more than `base_tx_gas` at a used/limit ratio above `gas_ratio`.
pub fn find_stuffing_clusters(block: &Block, cfg: &SuppressionConfig) -> Vec<StuffingCluster> {
    let mut groups: BTreeMap<Address, Vec<&crate::chain_model::Transaction>> = BTreeMap::new();
    for tx in &block.transactions {
        if let Some(receiver) = tx.receiver {
            groups.entry(receiver).or_default().push(tx);
        }
    }
    groups
        .into_iter()
        .filter(|(_, txs)| {
            txs.len() > 1
                && txs.iter().all(|t| {
                    t.gas_used > cfg.base_tx_gas
                        && exceeds_ratio(t.gas_used, t.gas_limit, cfg.gas_ratio)
                })
        })
        .map(|(receiver, txs)| StuffingCluster {
            block_number: block.number,
            receiver,
            txs: txs.iter().map(|t| t.hash).collect(),
        })
        .collect()
}

/// True when block b−1 or b+1 also holds a qualifying cluster with the same
/// receiver.  Blocks outside the snapshot count as non-qualifying.
pub fn confirm_neighbors(
    snapshot: &ChainSnapshot,
    cluster: &StuffingCluster,
    cfg: &SuppressionConfig,
) -> bool {
    let qualifies = |number: u64| {
        snapshot.block(number).is_some_and(|b| {
            find_stuffing_clusters(b, cfg)
                .iter()
                .any(|c| c.receiver == cluster.receiver)
        })
    };
    let b = cluster.block_number;
    (b > 0 && qualifies(b - 1)) || qualifies(b + 1)
}

fn count_pattern(opcodes: &[String], pattern: [&str; 4]) -> u64 {
    opcodes
        .windows(pattern.len())
        .filter(|w| w.iter().zip(pattern).all(|(op, want)| op == want))
        .count() as u64
}

/// Reads the stuffing strategy off a trace; `None` when it matches no known
/// pattern.
pub fn classify_strategy(
    trace: &ExecutionTrace,
    cfg: &SuppressionConfig,
) -> Option<SuppressionStrategy> {
    match trace.terminal {
        TraceTerminal::Normal => (count_pattern(&trace.opcodes, ["GAS", "GT", "ISZERO", "JUMPI"])
            > cfg.loop_repeats)
            .then_some(SuppressionStrategy::ControlledGasLoop),
        TraceTerminal::Revert => {
            (count_pattern(&trace.opcodes, ["SLOAD", "TIMESTAMP", "ADD", "SSTORE"])
                > cfg.loop_repeats)
                .then_some(SuppressionStrategy::UncontrolledGasLoop)
        }
        TraceTerminal::Assert => Some(SuppressionStrategy::Assert),
        TraceTerminal::OutOfGas => None,
    }
}

/// Picks the victim contract for a stuffing chain: the deployed contract
/// (other than the stuffed bot) that most often received ether from the
/// attacker accounts between shortly before the chain and its end.  Ties go
/// to the smallest address; `None` when no such payment exists.
pub fn infer_victim(
    snapshot: &ChainSnapshot,
    chain_start: u64,
    chain_end: u64,
    attacker_accounts: &BTreeSet<Address>,
    bot: &Address,
    cfg: &SuppressionConfig,
) -> Option<Address> {
    let from = chain_start
        .saturating_sub(cfg.investment_lookback)
        .max(snapshot.from_block);
    let to = chain_end.min(snapshot.to_block);
    let mut votes: BTreeMap<Address, u64> = BTreeMap::new();
    for number in from..=to {
        for tx in &snapshot.block(number)?.transactions {
            let Some(receiver) = tx.receiver else {
                continue;
            };
            if tx.value > 0
                && receiver != *bot
                && attacker_accounts.contains(&tx.sender)
                && snapshot.is_contract(&receiver)
            {
                *votes.entry(receiver).or_insert(0) += 1;
            }
        }
    }
    // BTreeMap iterates in address order, so on equal counts the smallest
    // address is kept.
    votes
        .into_iter()
        .fold(None, |best: Option<(Address, u64)>, (addr, n)| match best {
            Some((_, m)) if m >= n => best,
            _ => Some((addr, n)),
        })
        .map(|(addr, _)| addr)
}

/// Splits an attack's window into rounds.
///
/// Walking transactions in mined order: an attacker payment into the victim
/// opens a round (closing any still-open one as a failure); an outsider
/// payment closes the open round as a failure; an internal transfer from the
/// victim back to an attacker account closes it as a success and records the
/// prize.  Stuffing transactions attach to the most recently opened round —
/// stuffing seen before any investment attaches to the first round.  A round
/// still open at the end of the window closes as a failure.
pub fn segment_rounds(
    snapshot: &ChainSnapshot,
    victim: &Address,
    attacker_accounts: &BTreeSet<Address>,
    stuffing: &BTreeSet<TxHash>,
    window: (u64, u64),
) -> Vec<SuppressionRound> {
    let mut rounds: Vec<SuppressionRound> = Vec::new();
    let mut open = false;
    let mut orphan_stuffing: Vec<TxHash> = Vec::new();

    for number in window.0..=window.1 {
        let Some(block) = snapshot.block(number) else {
            continue;
        };
        for tx in &block.transactions {
            // A payout can ride on any transaction, including the one that
            // opens the next round, so it is settled first.
            let prize: u128 = snapshot
                .internal_transfers_of(&tx.hash)
                .iter()
                .filter(|t| t.from == *victim && attacker_accounts.contains(&t.to))
                .map(|t| t.value)
                .sum();
            if prize > 0 && open {
                let round = rounds.last_mut().expect("open implies a round exists");
                round.status = AttackStatus::Success;
                round.prize_claimed = prize;
                open = false;
            }

            if tx.value > 0 && tx.receiver == Some(*victim) {
                if attacker_accounts.contains(&tx.sender) {
                    if open {
                        let round = rounds.last_mut().expect("open implies a round exists");
                        round.status = AttackStatus::Failure;
                    }
                    rounds.push(SuppressionRound {
                        investment_tx: tx.hash,
                        stuffing_txs: std::mem::take(&mut orphan_stuffing),
                        status: AttackStatus::Failure,
                        prize_claimed: 0,
                    });
                    open = true;
                } else if open {
                    let round = rounds.last_mut().expect("open implies a round exists");
                    round.status = AttackStatus::Failure;
                    open = false;
                }
            }

            if stuffing.contains(&tx.hash) {
                match rounds.last_mut() {
                    Some(round) => round.stuffing_txs.push(tx.hash),
                    None => orphan_stuffing.push(tx.hash),
                }
            }
        }
    }
    // Stuffing without any investment at all leaves no rounds; the caller
    // rejects the chain.  (An open round at window end stays a failure.)
    rounds
}

/// Fills in the accounting for a segmented attack.
///
/// Cost sums the round investments and the fees of investments and stuffing
/// (prize-claim transactions cost nothing here — they are not part of the
/// attack's transaction set).  Profit is the last round's prize, if any,
/// minus cost.  Dollar figures use the price at the first stuffed block.
pub fn compute_suppression_result(
    snapshot: &ChainSnapshot,
    victim_contract: Address,
    bot: Address,
    strategy: Option<SuppressionStrategy>,
    rounds: Vec<SuppressionRound>,
) -> Result<SuppressionAttack> {
    if rounds.is_empty() {
        return Err(Error::Internal(
            "suppression accounting requires at least one round".into(),
        ));
    }
    let overflow = || Error::Data("attack accounting overflows".into());
    let lookup = |h: &TxHash| {
        snapshot
            .tx(h)
            .ok_or_else(|| Error::Internal(format!("round references unknown tx {h}")))
    };

    let mut attacker_accounts = BTreeSet::new();
    let mut stuffed_blocks = BTreeSet::new();
    let mut investment_blocks = BTreeSet::new();
    let mut cost: u128 = 0;
    let mut tx_count: u64 = 0;
    for round in &rounds {
        let invest = lookup(&round.investment_tx)?;
        investment_blocks.insert(invest.block_number);
        cost = cost
            .checked_add(invest.value)
            .and_then(|c| c.checked_add(invest.fee()))
            .ok_or_else(overflow)?;
        tx_count += 1;
        for h in &round.stuffing_txs {
            let tx = lookup(h)?;
            attacker_accounts.insert(tx.sender);
            stuffed_blocks.insert(tx.block_number);
            cost = cost.checked_add(tx.fee()).ok_or_else(overflow)?;
            tx_count += 1;
        }
    }

    let status = rounds.last().expect("non-empty").status;
    let prize = match status {
        AttackStatus::Success => rounds.last().expect("non-empty").prize_claimed,
        AttackStatus::Failure => 0,
    };
    let profit = crate::chain_model::signed_difference(prize, cost)?;

    let first_block = *stuffed_blocks
        .first()
        .or(investment_blocks.first())
        .expect("at least one round with an investment");
    let last_block = *stuffed_blocks
        .last()
        .or(investment_blocks.last())
        .expect("at least one round with an investment");
    let ts = snapshot
        .timestamp_of_block(first_block)
        .ok_or(Error::MissingBlock(first_block))?;
    let cost_usd = crate::chain_model::wei_to_usd(cost, ts, &snapshot.prices)?;
    let profit_usd = crate::chain_model::wei_to_usd_signed(profit, ts, &snapshot.prices)?;

    Ok(SuppressionAttack {
        victim_contract,
        bot_contracts: BTreeSet::from([bot]),
        attacker_accounts,
        rounds,
        strategy,
        first_block,
        last_block,
        blocks_stuffed: stuffed_blocks.len() as u64,
        tx_count,
        cost_wei: cost,
        profit_wei: profit,
        cost_usd,
        profit_usd,
        status,
    })
}

/// Scans the whole snapshot for suppression attacks.
///
/// Cluster discovery runs per block in parallel; chaining, victim inference,
/// and round segmentation are a sequential pass over the sorted cluster
/// stream, so the output is deterministic.
pub fn scan_suppression(
    snapshot: &ChainSnapshot,
    cfg: &SuppressionConfig,
) -> Result<SuppressionScan> {
    if !(cfg.gas_ratio > 0.0 && cfg.gas_ratio < 1.0) {
        return Err(Error::InvalidParameter(
            "stuffing gas ratio must be in (0, 1)".into(),
        ));
    }
    let numbers: Vec<u64> = (snapshot.from_block..=snapshot.to_block).collect();
    let per_block: Result<Vec<Vec<StuffingCluster>>> = numbers
        .par_iter()
        .map(|&n| {
            let block = snapshot.block(n).ok_or(Error::MissingBlock(n))?;
            Ok(find_stuffing_clusters(block, cfg))
        })
        .collect();

    let mut by_receiver: BTreeMap<Address, Vec<StuffingCluster>> = BTreeMap::new();
    let mut clusters_found = 0u64;
    for clusters in per_block? {
        for cluster in clusters {
            clusters_found += 1;
            by_receiver
                .entry(cluster.receiver)
                .or_default()
                .push(cluster);
        }
    }

    let mut scan = SuppressionScan {
        clusters_found,
        ..SuppressionScan::default()
    };
    for (receiver, clusters) in by_receiver {
        // Per-block discovery emits at most one cluster per receiver, in
        // ascending block order here.
        let mut chains: Vec<Vec<&StuffingCluster>> = Vec::new();
        for cluster in &clusters {
            match chains.last_mut() {
                Some(chain)
                    if cluster.block_number - chain.last().unwrap().block_number
                        <= cfg.gap_tolerance + 1 =>
                {
                    chain.push(cluster);
                }
                _ => chains.push(vec![cluster]),
            }
        }
        for chain in chains {
            if !chain.iter().any(|c| confirm_neighbors(snapshot, c, cfg)) {
                continue; // no two adjacent stuffed blocks anywhere
            }
            let chain_start = chain.first().unwrap().block_number;
            let chain_end = chain.last().unwrap().block_number;
            let mut attacker_accounts = BTreeSet::new();
            let mut stuffing = BTreeSet::new();
            for cluster in &chain {
                for h in &cluster.txs {
                    stuffing.insert(*h);
                    if let Some(tx) = snapshot.tx(h) {
                        attacker_accounts.insert(tx.sender);
                    }
                }
            }
            let Some(victim) = infer_victim(
                snapshot,
                chain_start,
                chain_end,
                &attacker_accounts,
                &receiver,
                cfg,
            ) else {
                scan.warnings.push(format!(
                    "stuffing chain on {receiver} (blocks {chain_start}-{chain_end}): \
                     no attacker investment found, chain dropped"
                ));
                continue;
            };
            let window = (
                chain_start
                    .saturating_sub(cfg.investment_lookback)
                    .max(snapshot.from_block),
                chain_end
                    .saturating_add(cfg.claim_tail)
                    .min(snapshot.to_block),
            );
            let rounds = segment_rounds(snapshot, &victim, &attacker_accounts, &stuffing, window);
            if rounds.is_empty() {
                scan.warnings.push(format!(
                    "stuffing chain on {receiver} (blocks {chain_start}-{chain_end}): \
                     no round could be segmented, chain dropped"
                ));
                continue;
            }
            let first_stuffing_tx = &chain.first().unwrap().txs[0];
            let strategy = match snapshot.trace(first_stuffing_tx) {
                Some(trace) => {
                    let s = classify_strategy(trace, cfg);
                    if s.is_none() {
                        scan.warnings.push(format!(
                            "unclassified strategy for stuffing tx {first_stuffing_tx}"
                        ));
                    }
                    s
                }
                None => {
                    scan.warnings.push(format!(
                        "no execution trace for stuffing tx {first_stuffing_tx}"
                    ));
                    None
                }
            };
            scan.attacks.push(compute_suppression_result(
                snapshot, victim, receiver, strategy, rounds,
            )?);
        }
    }
    scan.attacks
        .sort_by_key(|a| (a.first_block, *a.bot_contracts.first().expect("one bot")));
    Ok(scan)
}
