//! Insertion (sandwich) detection.
//!
//! An insertion attack brackets a victim's automated-market-maker trade with
//! two transactions from the attacker: a buy mined just before the victim
//! (at a higher gas price) and a sell mined just after (at a lower one).
//! The victim's trade moves the price between the two, so the attacker sells
//! what they bought at a premium.
//!
//! Detection works on decoded ERC-20 `Transfer` events, block by block: a
//! triple (buy event, victim event, sell event) is an attack when
//!
//! 1. all three trades touch the same market — the buy and the victim
//!    receive tokens from one address (the exchange) and the sell returns
//!    tokens to it, with the sell's source being the buy's destination,
//! 2. the bought and resold amounts differ by at most a similarity
//!    threshold (attackers dump their whole position),
//! 3. all three events move the same token,
//! 4. the three carrier transactions are pairwise distinct,
//! 5. they were mined in buy < victim < sell order inside one block, and
//! 6. gas prices are consistent with engineered ordering: the buy bids
//!    strictly above the victim, the sell at or below.
//!
//! Cross-block sandwiches are out of scope: each block is scanned
//! independently (and therefore in parallel).

use crate::chain_model::{
    wei_string, wei_string_signed, Address, ChainSnapshot, Transaction, TransferEvent, TxHash, Usd,
};
use crate::{Error, Result};
use num_bigint::BigUint;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::str::FromStr;

/// Well-known gas-token contracts plus any custom deployments to match.
///
/// Gas tokens are minted when gas is cheap and destroyed during an attack to
/// subsidize its fees; recognizing them explains otherwise impossible
/// effective gas prices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GasTokenConfig {
    pub gst2: Address,
    pub chi: Address,
    /// Further token contracts to treat as gas tokens of kind `Custom`.
    #[serde(default)]
    pub custom: Vec<Address>,
}

impl Default for GasTokenConfig {
    fn default() -> Self {
        GasTokenConfig {
            gst2: Address::from_str("0x0000000000b3f879cb30fe243b4dfee438691c04")
                .expect("valid address literal"),
            chi: Address::from_str("0x0000000000004946c0e9f43f4dee607b0ef1fa1c")
                .expect("valid address literal"),
            custom: Vec::new(),
        }
    }
}

/// Tuning knobs for the insertion scanner.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InsertionConfig {
    /// Maximum relative difference between bought and resold amounts,
    /// `|a1 − a2| / max(a1, a2)`.
    pub amount_similarity: f64,
    pub gas_tokens: GasTokenConfig,
}

impl Default for InsertionConfig {
    fn default() -> Self {
        InsertionConfig {
            amount_similarity: 0.01,
            gas_tokens: GasTokenConfig::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GasTokenUsage {
    None,
    FirstOnly,
    SecondOnly,
    Both,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GasTokenKind {
    Gst2,
    Chi,
    Custom,
}

/// Which attacker transactions burned gas tokens, and which token.
///
/// When the two transactions used different kinds, `kind` reports the first
/// transaction's.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GasTokenUse {
    pub usage: GasTokenUsage,
    pub kind: Option<GasTokenKind>,
}

impl GasTokenUse {
    pub const NONE: GasTokenUse = GasTokenUse {
        usage: GasTokenUsage::None,
        kind: None,
    };
}

/// A confirmed sandwich with its cost accounting.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InsertionAttack {
    pub block_number: u64,
    /// Attacker's buy: tokens leave the exchange toward the attacker.
    pub e_a1: TransferEvent,
    /// Victim's trade.
    pub e_v: TransferEvent,
    /// Attacker's sell: tokens return to the exchange.
    pub e_a2: TransferEvent,
    pub attacker_buy_tx: TxHash,
    pub victim_tx: TxHash,
    pub attacker_sell_tx: TxHash,
    /// Market both sides traded against (token source of the buy).
    pub exchange: Address,
    pub token: Address,
    /// Senders of the two attacker transactions.
    pub attacker_accounts: BTreeSet<Address>,
    /// Contract the buy transaction called, when it is neither the exchange
    /// itself nor an externally-owned account; absent for direct attacks.
    pub bot_contract: Option<Address>,
    /// Ether spent in the buy plus both attacker fees.
    #[serde(with = "wei_string")]
    pub cost_wei: u128,
    /// Ether returned to the attacker accounts by the sell.
    #[serde(with = "wei_string")]
    pub gain_wei: u128,
    #[serde(with = "wei_string_signed")]
    pub profit_wei: i128,
    pub cost_usd: Usd,
    pub profit_usd: Usd,
    /// gas_price(buy) − gas_price(victim); strictly positive.
    #[serde(with = "wei_string")]
    pub gas_price_delta1: u128,
    /// gas_price(victim) − gas_price(sell); non-negative.
    #[serde(with = "wei_string")]
    pub gas_price_delta2: u128,
    pub gas_token_usage: GasTokenUse,
}

/// Relative-difference test on token amounts: `|a1 − a2| ≤ t · max(a1, a2)`.
///
/// Evaluated in scaled integer arithmetic (parts per billion) so 256-bit
/// amounts never round through floats.
pub fn amounts_similar(a1: &BigUint, a2: &BigUint, threshold: f64) -> bool {
    const SCALE: u64 = 1_000_000_000;
    if !(0.0..=1.0).contains(&threshold) {
        return false;
    }
    let scaled = (threshold * SCALE as f64).round() as u64;
    let (hi, lo) = if a1 >= a2 { (a1, a2) } else { (a2, a1) };
    let diff = hi - lo;
    diff * BigUint::from(SCALE) <= hi * BigUint::from(scaled)
}

/// The six structural checks on a candidate (buy, victim, sell) triple, in
/// the order described in the module docs.  All three events must come from
/// the same block.
pub fn check_insertion_heuristics(
    e_a1: &TransferEvent,
    e_v: &TransferEvent,
    e_a2: &TransferEvent,
    cfg: &InsertionConfig,
) -> bool {
    if e_a1.block_number != e_v.block_number || e_v.block_number != e_a2.block_number {
        return false;
    }
    // 1: one market, attacker ends where they started.
    if !(e_a1.sender == e_v.sender && e_v.sender == e_a2.receiver && e_a1.receiver == e_a2.sender) {
        return false;
    }
    // 2: bought and resold amounts nearly equal.
    if !amounts_similar(&e_a1.amount, &e_a2.amount, cfg.amount_similarity) {
        return false;
    }
    // 3: one token throughout.
    if !(e_a1.token == e_v.token && e_v.token == e_a2.token) {
        return false;
    }
    // 4: three distinct carrier transactions.
    if e_a1.tx_hash == e_v.tx_hash || e_v.tx_hash == e_a2.tx_hash || e_a1.tx_hash == e_a2.tx_hash {
        return false;
    }
    // 5: mined buy < victim < sell.
    if !(e_a1.tx_index < e_v.tx_index && e_v.tx_index < e_a2.tx_index) {
        return false;
    }
    // 6: gas prices consistent with engineered ordering.
    e_a1.gas_price > e_v.gas_price && e_v.gas_price >= e_a2.gas_price
}

/// Finds attack triples among one block's events.
///
/// Candidate (buy, victim) pairs are processed in (tx index, log index)
/// lexicographic order; each takes the lowest-indexed sell event that
/// completes it and consumes that event, so one sell never settles two
/// sandwiches.  Input order does not matter — events are sorted internally.
fn block_attack_triples<'a>(
    events: &[&'a TransferEvent],
    cfg: &InsertionConfig,
) -> Vec<(&'a TransferEvent, &'a TransferEvent, &'a TransferEvent)> {
    let mut sorted: Vec<&TransferEvent> = events.to_vec();
    sorted.sort_by_key(|e| (e.tx_index, e.log_index));
    let mut consumed: BTreeSet<(u32, u32)> = BTreeSet::new();
    let mut triples = Vec::new();
    for (i, &e_a1) in sorted.iter().enumerate() {
        for &e_v in &sorted[i + 1..] {
            // Cheap pair-local screens; the full check runs on the triple.
            if e_a1.token != e_v.token
                || e_a1.sender != e_v.sender
                || e_a1.tx_index >= e_v.tx_index
                || e_a1.gas_price <= e_v.gas_price
            {
                continue;
            }
            for &e_a2 in &sorted {
                if consumed.contains(&(e_a2.tx_index, e_a2.log_index)) {
                    continue;
                }
                if check_insertion_heuristics(e_a1, e_v, e_a2, cfg) {
                    consumed.insert((e_a2.tx_index, e_a2.log_index));
                    triples.push((e_a1, e_v, e_a2));
                    break;
                }
            }
        }
    }
    triples
}

fn contains_address(code: &[u8], needle: &Address) -> bool {
    code.windows(20).any(|w| w == needle.0)
}

/// Classifies one attacker transaction's gas-token use, if any.
///
/// A direct call into a configured gas-token contract is decisive.  Failing
/// that, a self-destruct in the trace marks the refund pattern; the token
/// kind then comes from a configured address embedded in the called
/// contract's code, defaulting to a custom implementation.
fn classify_gas_token(
    snapshot: &ChainSnapshot,
    tx: &Transaction,
    cfg: &GasTokenConfig,
) -> Option<GasTokenKind> {
    if let Some(receiver) = tx.receiver {
        if receiver == cfg.gst2 {
            return Some(GasTokenKind::Gst2);
        }
        if receiver == cfg.chi {
            return Some(GasTokenKind::Chi);
        }
        if cfg.custom.contains(&receiver) {
            return Some(GasTokenKind::Custom);
        }
    }
    let trace = snapshot.trace(&tx.hash)?;
    if !trace.opcodes.iter().any(|op| op == "SELFDESTRUCT") {
        return None;
    }
    if let Some(code) = tx.receiver.and_then(|r| snapshot.code(&r)) {
        if contains_address(code, &cfg.gst2) {
            return Some(GasTokenKind::Gst2);
        }
        if contains_address(code, &cfg.chi) {
            return Some(GasTokenKind::Chi);
        }
    }
    Some(GasTokenKind::Custom)
}

/// Combines the per-transaction classifications of the two attacker
/// transactions into a single usage tag.
pub fn tag_gas_token_usage(
    snapshot: &ChainSnapshot,
    t_a1: &Transaction,
    t_a2: &Transaction,
    cfg: &GasTokenConfig,
) -> GasTokenUse {
    let first = classify_gas_token(snapshot, t_a1, cfg);
    let second = classify_gas_token(snapshot, t_a2, cfg);
    match (first, second) {
        (None, None) => GasTokenUse::NONE,
        (Some(k), None) => GasTokenUse {
            usage: GasTokenUsage::FirstOnly,
            kind: Some(k),
        },
        (None, Some(k)) => GasTokenUse {
            usage: GasTokenUsage::SecondOnly,
            kind: Some(k),
        },
        (Some(k1), Some(_)) => GasTokenUse {
            usage: GasTokenUsage::Both,
            kind: Some(k1),
        },
    }
}

/// Fills in the accounting for a confirmed triple.
///
/// Cost is everything the attacker put in: the buy transaction's value, any
/// internal ether it moved from an attacker account into the exchange, and
/// both attacker fees.  Gain is the ether the sell transaction returned to
/// the attacker accounts, at the top level or internally; proceeds parked in
/// a bot contract do not count until they reach an attacker account.
pub fn compute_insertion_result(
    snapshot: &ChainSnapshot,
    e_a1: &TransferEvent,
    e_v: &TransferEvent,
    e_a2: &TransferEvent,
    cfg: &InsertionConfig,
) -> Result<InsertionAttack> {
    let lookup = |h: &TxHash| {
        snapshot
            .tx(h)
            .ok_or_else(|| Error::Internal(format!("event references unknown tx {h}")))
    };
    let t_a1 = lookup(&e_a1.tx_hash)?;
    let t_v = lookup(&e_v.tx_hash)?;
    let t_a2 = lookup(&e_a2.tx_hash)?;

    let exchange = e_a1.sender;
    let token = e_a1.token;
    let attacker_accounts: BTreeSet<Address> = [t_a1.sender, t_a2.sender].into_iter().collect();
    let bot_contract = t_a1
        .receiver
        .filter(|r| *r != exchange && snapshot.is_contract(r));

    let overflow = || Error::Data("attack accounting overflows".into());
    let mut value_spent = t_a1.value;
    for t in snapshot.internal_transfers_of(&t_a1.hash) {
        if attacker_accounts.contains(&t.from) && t.to == exchange {
            value_spent = value_spent.checked_add(t.value).ok_or_else(overflow)?;
        }
    }
    let fees = t_a1.fee().checked_add(t_a2.fee()).ok_or_else(overflow)?;
    let cost = value_spent.checked_add(fees).ok_or_else(overflow)?;

    let mut gain = match t_a2.receiver {
        Some(r) if attacker_accounts.contains(&r) => t_a2.value,
        _ => 0,
    };
    for t in snapshot.internal_transfers_of(&t_a2.hash) {
        if attacker_accounts.contains(&t.to) {
            gain = gain.checked_add(t.value).ok_or_else(overflow)?;
        }
    }
    let profit = crate::chain_model::signed_difference(gain, cost)?;

    let ts = snapshot
        .timestamp_of_block(e_a1.block_number)
        .ok_or(Error::MissingBlock(e_a1.block_number))?;
    let cost_usd = crate::chain_model::wei_to_usd(cost, ts, &snapshot.prices)?;
    let profit_usd = crate::chain_model::wei_to_usd_signed(profit, ts, &snapshot.prices)?;

    Ok(InsertionAttack {
        block_number: e_a1.block_number,
        e_a1: e_a1.clone(),
        e_v: e_v.clone(),
        e_a2: e_a2.clone(),
        attacker_buy_tx: t_a1.hash,
        victim_tx: t_v.hash,
        attacker_sell_tx: t_a2.hash,
        exchange,
        token,
        attacker_accounts,
        bot_contract,
        cost_wei: cost,
        gain_wei: gain,
        profit_wei: profit,
        cost_usd,
        profit_usd,
        gas_price_delta1: t_a1.gas_price - t_v.gas_price,
        gas_price_delta2: t_v.gas_price - t_a2.gas_price,
        gas_token_usage: tag_gas_token_usage(snapshot, t_a1, t_a2, &cfg.gas_tokens),
    })
}

/// Scans every block of the snapshot for sandwiches.
///
/// Blocks are independent and processed in parallel; results are merged in
/// block order and sorted by (block, buy position, victim position), so the
/// output is deterministic.
pub fn scan_insertion(
    snapshot: &ChainSnapshot,
    cfg: &InsertionConfig,
) -> Result<Vec<InsertionAttack>> {
    if !(cfg.amount_similarity >= 0.0 && cfg.amount_similarity <= 1.0) {
        return Err(Error::InvalidParameter(
            "amount similarity must be in [0, 1]".into(),
        ));
    }
    let numbers: Vec<u64> = (snapshot.from_block..=snapshot.to_block).collect();
    let per_block: Result<Vec<Vec<InsertionAttack>>> = numbers
        .par_iter()
        .map(|&n| {
            let events: Vec<&TransferEvent> = snapshot.events_in(n).iter().collect();
            block_attack_triples(&events, cfg)
                .into_iter()
                .map(|(e1, ev, e2)| compute_insertion_result(snapshot, e1, ev, e2, cfg))
                .collect()
        })
        .collect();
    let mut attacks: Vec<InsertionAttack> = per_block?.into_iter().flatten().collect();
    attacks.sort_by_key(|a| {
        (
            a.block_number,
            a.e_a1.tx_index,
            a.e_a1.log_index,
            a.e_v.tx_index,
            a.e_v.log_index,
        )
    });
    Ok(attacks)
}

/// A set of sandwiches fighting over one victim trade.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CompetitionGroup {
    pub block_number: u64,
    pub victim_tx: TxHash,
    pub token: Address,
    /// Buy transactions of the competing attacks, in detection order.
    pub attacker_buy_txs: Vec<TxHash>,
    /// True when at least two competing attacks map to the same attacker
    /// cluster — an operation racing against itself.
    pub self_interference: bool,
}

/// Groups attacks that share (block, victim transaction, token) and reports
/// the groups with at least two members.  `cluster_ids[i]` is the attacker
/// cluster of `attacks[i]`, when known; two members in one cluster flag the
/// group as self-interference.
pub fn detect_competition(
    attacks: &[InsertionAttack],
    cluster_ids: &[Option<u64>],
) -> Result<Vec<CompetitionGroup>> {
    if attacks.len() != cluster_ids.len() {
        return Err(Error::InvalidParameter(format!(
            "{} attacks but {} cluster assignments",
            attacks.len(),
            cluster_ids.len()
        )));
    }
    let mut groups: BTreeMap<(u64, TxHash, Address), Vec<usize>> = BTreeMap::new();
    for (i, attack) in attacks.iter().enumerate() {
        groups
            .entry((attack.block_number, attack.victim_tx, attack.token))
            .or_default()
            .push(i);
    }
    let mut out = Vec::new();
    for ((block_number, victim_tx, token), members) in groups {
        if members.len() < 2 {
            continue;
        }
        let mut seen_clusters = BTreeSet::new();
        let mut self_interference = false;
        for &i in &members {
            if let Some(id) = cluster_ids[i] {
                if !seen_clusters.insert(id) {
                    self_interference = true;
                }
            }
        }
        out.push(CompetitionGroup {
            block_number,
            victim_tx,
            token,
            attacker_buy_txs: members
                .iter()
                .map(|&i| attacks[i].attacker_buy_tx)
                .collect(),
            self_interference,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain_model::TraceTerminal;
    use crate::test_support::{addr, block, hash, snapshot, transfer_in, tx};

    const EXCHANGE: u8 = 0xE0;
    const TOKEN: u8 = 0x70;
    const ATTACKER: u8 = 0x01;
    const VICTIM: u8 = 0x02;

    fn ev(
        tx_hash: u8,
        tx_index: u32,
        log_index: u32,
        from: u8,
        to: u8,
        amount: u128,
        gas_price: u128,
    ) -> TransferEvent {
        TransferEvent {
            token: addr(TOKEN),
            sender: addr(from),
            receiver: addr(to),
            amount: BigUint::from(amount),
            tx_hash: hash(tx_hash),
            block_number: 1,
            tx_index,
            log_index,
            gas_price,
        }
    }

    /// (buy, victim, sell) with textbook shape: attacker buys 10_000 at
    /// 60 gwei, victim buys at 50, attacker sells 10_000 back at 40.
    fn canonical_triple() -> (TransferEvent, TransferEvent, TransferEvent) {
        let e_a1 = ev(0xA1, 0, 0, EXCHANGE, ATTACKER, 10_000, 60_000_000_000);
        let e_v = ev(0xB1, 1, 1, EXCHANGE, VICTIM, 7_000, 50_000_000_000);
        let e_a2 = ev(0xA2, 2, 2, ATTACKER, EXCHANGE, 10_000, 40_000_000_000);
        (e_a1, e_v, e_a2)
    }

    #[test]
    fn heuristics_accept_canonical_triple() {
        let (e_a1, e_v, e_a2) = canonical_triple();
        assert!(check_insertion_heuristics(
            &e_a1,
            &e_v,
            &e_a2,
            &InsertionConfig::default()
        ));
    }

    #[test]
    fn amount_similarity_boundaries() {
        let cfg = InsertionConfig::default();
        let (e_a1, e_v, mut e_a2) = canonical_triple();
        // Exact resale: ratio 0.
        assert!(check_insertion_heuristics(&e_a1, &e_v, &e_a2, &cfg));
        // 9_899 vs 10_000: ratio 0.0101, over the 1% threshold.
        e_a2.amount = BigUint::from(9_899u32);
        assert!(!check_insertion_heuristics(&e_a1, &e_v, &e_a2, &cfg));
        // 9_900 vs 10_000: ratio exactly 0.01, inclusive boundary.
        e_a2.amount = BigUint::from(9_900u32);
        assert!(check_insertion_heuristics(&e_a1, &e_v, &e_a2, &cfg));
    }

    #[test]
    fn amount_similarity_handles_huge_amounts_exactly() {
        // 2^200 and 2^200 − 1 are well within 1% of each other; a float
        // round-trip would not even represent them.
        let big = BigUint::from(1u8) << 200;
        let near = &big - 1u8;
        assert!(amounts_similar(&big, &near, 0.01));
        assert!(amounts_similar(&big, &big, 0.0));
        let half = &big >> 1;
        assert!(!amounts_similar(&big, &half, 0.01));
    }

    #[test]
    fn gas_price_ordering_is_strict_then_inclusive() {
        let cfg = InsertionConfig::default();
        let (mut e_a1, e_v, mut e_a2) = canonical_triple();
        // Buy must outbid the victim strictly.
        e_a1.gas_price = e_v.gas_price;
        assert!(!check_insertion_heuristics(&e_a1, &e_v, &e_a2, &cfg));
        e_a1.gas_price = e_v.gas_price + 1;
        assert!(check_insertion_heuristics(&e_a1, &e_v, &e_a2, &cfg));
        // Sell may tie the victim.
        e_a2.gas_price = e_v.gas_price;
        assert!(check_insertion_heuristics(&e_a1, &e_v, &e_a2, &cfg));
        e_a2.gas_price = e_v.gas_price + 1;
        assert!(!check_insertion_heuristics(&e_a1, &e_v, &e_a2, &cfg));
    }

    #[test]
    fn heuristics_reject_broken_triples() {
        let cfg = InsertionConfig::default();
        let (e_a1, e_v, e_a2) = canonical_triple();

        // Different token on the sell.
        let mut bad = e_a2.clone();
        bad.token = addr(0x71);
        assert!(!check_insertion_heuristics(&e_a1, &e_v, &bad, &cfg));

        // Sell and buy carried by the same transaction.
        let mut bad = e_a2.clone();
        bad.tx_hash = e_a1.tx_hash;
        assert!(!check_insertion_heuristics(&e_a1, &e_v, &bad, &cfg));

        // Sell mined before the victim.
        let mut bad = e_a2.clone();
        bad.tx_index = e_v.tx_index;
        assert!(!check_insertion_heuristics(&e_a1, &e_v, &bad, &cfg));

        // Sell returns tokens somewhere other than the exchange.
        let mut bad = e_a2.clone();
        bad.receiver = addr(0x55);
        assert!(!check_insertion_heuristics(&e_a1, &e_v, &bad, &cfg));

        // Victim trades on a different market.
        let mut bad_v = e_v.clone();
        bad_v.sender = addr(0x55);
        assert!(!check_insertion_heuristics(&e_a1, &bad_v, &e_a2, &cfg));

        // Triple spread over two blocks.
        let mut bad = e_a2.clone();
        bad.block_number = 2;
        assert!(!check_insertion_heuristics(&e_a1, &e_v, &bad, &cfg));
    }

    /// Snapshot with one planted direct sandwich: buy 10_000 tokens for
    /// 2 ETH, victim trade, sell back for 2.2 ETH returned internally.
    fn sandwich_snapshot() -> crate::chain_model::ChainSnapshot {
        let buy = tx(0xA1)
            .sender(addr(ATTACKER))
            .receiver(addr(EXCHANGE))
            .value(2_000_000_000_000_000_000)
            .gas_price(60_000_000_000)
            .gas_used(100_000)
            .build();
        let victim = tx(0xB1)
            .sender(addr(VICTIM))
            .receiver(addr(EXCHANGE))
            .value(1_000_000_000_000_000_000)
            .gas_price(50_000_000_000)
            .build();
        let sell = tx(0xA2)
            .sender(addr(ATTACKER))
            .receiver(addr(EXCHANGE))
            .gas_price(40_000_000_000)
            .gas_used(80_000)
            .build();
        let b = block(1, vec![buy, victim, sell]);
        let (e_a1, e_v, e_a2) = canonical_triple();
        snapshot(vec![b])
            .code(addr(EXCHANGE), &[0xFA])
            .event(e_a1)
            .event(e_v)
            .event(e_a2)
            .internal(
                hash(0xA2),
                addr(EXCHANGE),
                addr(ATTACKER),
                2_200_000_000_000_000_000,
            )
            .build()
    }

    #[test]
    fn scan_finds_planted_sandwich_and_accounts_for_it() {
        let snap = sandwich_snapshot();
        let attacks = scan_insertion(&snap, &InsertionConfig::default()).unwrap();
        assert_eq!(attacks.len(), 1);
        let a = &attacks[0];
        assert_eq!(a.attacker_buy_tx, hash(0xA1));
        assert_eq!(a.victim_tx, hash(0xB1));
        assert_eq!(a.attacker_sell_tx, hash(0xA2));
        assert_eq!(a.exchange, addr(EXCHANGE));
        assert_eq!(a.token, addr(TOKEN));
        assert_eq!(a.attacker_accounts.len(), 1);
        assert!(a.attacker_accounts.contains(&addr(ATTACKER)));
        // Direct attack: the buy calls the exchange itself.
        assert_eq!(a.bot_contract, None);
        // Cost: 2 ETH + 100_000·60 gwei + 80_000·40 gwei = 2.0092 ETH.
        assert_eq!(a.cost_wei, 2_009_200_000_000_000_000);
        assert_eq!(a.gain_wei, 2_200_000_000_000_000_000);
        assert_eq!(a.profit_wei, 190_800_000_000_000_000);
        // At 400 USD/ETH.
        assert_eq!(a.cost_usd.to_string(), "803.68");
        assert_eq!(a.profit_usd.to_string(), "76.32");
        assert_eq!(a.gas_price_delta1, 10_000_000_000);
        assert_eq!(a.gas_price_delta2, 10_000_000_000);
        assert_eq!(a.gas_token_usage, GasTokenUse::NONE);
    }

    #[test]
    fn attack_record_serializes_amounts_as_decimal_strings() {
        let snap = sandwich_snapshot();
        let attacks = scan_insertion(&snap, &InsertionConfig::default()).unwrap();
        let json = serde_json::to_string(&attacks[0]).unwrap();
        assert!(json.contains("\"cost_wei\":\"2009200000000000000\""));
        assert!(json.contains("\"amount\":\"10000\""));
        let back: InsertionAttack = serde_json::from_str(&json).unwrap();
        assert_eq!(back, attacks[0]);
    }

    #[test]
    fn bot_contract_reported_when_buy_goes_through_deployed_code() {
        let bot = addr(0xB0);
        let buy = tx(0xA1)
            .sender(addr(ATTACKER))
            .receiver(bot)
            .value(2_000_000_000_000_000_000)
            .gas_price(60_000_000_000)
            .build();
        let victim = tx(0xB1)
            .sender(addr(VICTIM))
            .receiver(addr(EXCHANGE))
            .gas_price(50_000_000_000)
            .build();
        let sell = tx(0xA2)
            .sender(addr(ATTACKER))
            .receiver(bot)
            .gas_price(40_000_000_000)
            .build();
        let b = block(1, vec![buy, victim, sell]);
        let (mut e_a1, e_v, mut e_a2) = canonical_triple();
        e_a1.receiver = bot; // bot holds the position
        e_a2.sender = bot;
        let snap = snapshot(vec![b])
            .code(addr(EXCHANGE), &[0xFA])
            .code(bot, &[0x60, 0x60])
            .event(e_a1)
            .event(e_v)
            .event(e_a2)
            .build();
        let attacks = scan_insertion(&snap, &InsertionConfig::default()).unwrap();
        assert_eq!(attacks.len(), 1);
        assert_eq!(attacks[0].bot_contract, Some(bot));
        // Nothing reached an attacker account: bot-held proceeds are not gain.
        assert_eq!(attacks[0].gain_wei, 0);
        assert!(attacks[0].profit_wei < 0);
    }

    fn exchange_tx(h: u8, sender: u8, gas: u128) -> Transaction {
        tx(h)
            .sender(addr(sender))
            .receiver(addr(EXCHANGE))
            .gas_price(gas)
            .build()
    }

    #[test]
    fn pairing_consumes_sells_in_index_order() {
        // Two buys for the same holder, one victim, two equivalent sells:
        // the earlier (buy, victim) pair takes the earlier sell.  The second
        // buy outbids the first so it cannot itself be read as a victim.
        let b = block(
            1,
            vec![
                exchange_tx(0x10, ATTACKER, 60_000_000_000),
                exchange_tx(0x11, ATTACKER, 61_000_000_000),
                exchange_tx(0x12, VICTIM, 50_000_000_000),
                exchange_tx(0x13, ATTACKER, 40_000_000_000),
                exchange_tx(0x14, ATTACKER, 40_000_000_000),
            ],
        );
        let snap = snapshot(vec![b])
            .event(ev(0x10, 0, 0, EXCHANGE, ATTACKER, 10_000, 60_000_000_000))
            .event(ev(0x11, 1, 1, EXCHANGE, ATTACKER, 10_000, 61_000_000_000))
            .event(ev(0x12, 2, 2, EXCHANGE, VICTIM, 7_000, 50_000_000_000))
            .event(ev(0x13, 3, 3, ATTACKER, EXCHANGE, 10_000, 40_000_000_000))
            .event(ev(0x14, 4, 4, ATTACKER, EXCHANGE, 10_000, 40_000_000_000))
            .build();
        let attacks = scan_insertion(&snap, &InsertionConfig::default()).unwrap();
        assert_eq!(attacks.len(), 2);
        assert_eq!(attacks[0].attacker_buy_tx, hash(0x10));
        assert_eq!(attacks[0].attacker_sell_tx, hash(0x13));
        assert_eq!(attacks[1].attacker_buy_tx, hash(0x11));
        assert_eq!(attacks[1].attacker_sell_tx, hash(0x14));
        assert_eq!(attacks[0].victim_tx, hash(0x12));
        assert_eq!(attacks[1].victim_tx, hash(0x12));
    }

    #[test]
    fn single_sell_settles_only_first_pair() {
        let b = block(
            1,
            vec![
                exchange_tx(0x10, ATTACKER, 60_000_000_000),
                exchange_tx(0x11, ATTACKER, 61_000_000_000),
                exchange_tx(0x12, VICTIM, 50_000_000_000),
                exchange_tx(0x13, ATTACKER, 40_000_000_000),
            ],
        );
        let snap = snapshot(vec![b])
            .event(ev(0x10, 0, 0, EXCHANGE, ATTACKER, 10_000, 60_000_000_000))
            .event(ev(0x11, 1, 1, EXCHANGE, ATTACKER, 10_000, 61_000_000_000))
            .event(ev(0x12, 2, 2, EXCHANGE, VICTIM, 7_000, 50_000_000_000))
            .event(ev(0x13, 3, 3, ATTACKER, EXCHANGE, 10_000, 40_000_000_000))
            .build();
        let attacks = scan_insertion(&snap, &InsertionConfig::default()).unwrap();
        assert_eq!(attacks.len(), 1);
        assert_eq!(attacks[0].attacker_buy_tx, hash(0x10));
    }

    #[test]
    fn lower_gas_second_buy_of_same_holder_reads_as_victim() {
        // The structural checks do not know intent: a same-holder second buy
        // at a lower gas price satisfies them as a "victim".  Pinned so the
        // behavior is a documented property rather than a surprise.
        let b = block(
            1,
            vec![
                exchange_tx(0x10, ATTACKER, 61_000_000_000),
                exchange_tx(0x11, ATTACKER, 60_000_000_000),
                exchange_tx(0x13, ATTACKER, 40_000_000_000),
            ],
        );
        let snap = snapshot(vec![b])
            .event(ev(0x10, 0, 0, EXCHANGE, ATTACKER, 10_000, 61_000_000_000))
            .event(ev(0x11, 1, 1, EXCHANGE, ATTACKER, 10_000, 60_000_000_000))
            .event(ev(0x13, 2, 2, ATTACKER, EXCHANGE, 10_000, 40_000_000_000))
            .build();
        let attacks = scan_insertion(&snap, &InsertionConfig::default()).unwrap();
        assert_eq!(attacks.len(), 1);
        assert_eq!(attacks[0].victim_tx, hash(0x11));
    }

    #[test]
    fn detection_ignores_event_list_order() {
        let (e_a1, e_v, e_a2) = canonical_triple();
        let cfg = InsertionConfig::default();
        let forward = [&e_a1, &e_v, &e_a2];
        let backward = [&e_a2, &e_a1, &e_v];
        let t1 = block_attack_triples(&forward, &cfg);
        let t2 = block_attack_triples(&backward, &cfg);
        assert_eq!(t1.len(), 1);
        assert_eq!(t1, t2);
    }

    #[test]
    fn gas_token_tagging_covers_all_routes() {
        let gt = GasTokenConfig::default();
        let chi_call = tx(0x21).sender(addr(1)).receiver(gt.chi).build();
        let gst_call = tx(0x22).sender(addr(1)).receiver(gt.gst2).build();
        let plain = tx(0x23).sender(addr(1)).receiver(addr(9)).build();
        // Bot whose code embeds the GST2 address, burning via self-destructs.
        let mut bot_code = vec![0x60, 0x00];
        bot_code.extend_from_slice(&gt.gst2.0);
        let burner_bot = addr(0xB0);
        let bot_call = tx(0x24).sender(addr(1)).receiver(burner_bot).build();
        // Bot with no recognizable embedded token: custom implementation.
        let custom_bot = addr(0xB1);
        let custom_call = tx(0x25).sender(addr(1)).receiver(custom_bot).build();
        let b = block(1, vec![chi_call, gst_call, plain, bot_call, custom_call]);
        let snap = snapshot(vec![b])
            .code(burner_bot, &bot_code)
            .code(custom_bot, &[0x60, 0x01])
            .trace(
                hash(0x24),
                &["PUSH1", "SELFDESTRUCT"],
                TraceTerminal::Normal,
            )
            .trace(
                hash(0x25),
                &["PUSH1", "SELFDESTRUCT"],
                TraceTerminal::Normal,
            )
            .trace(hash(0x23), &["PUSH1", "STOP"], TraceTerminal::Normal)
            .build();
        let t = |h: u8| snap.tx(&hash(h)).unwrap();

        // Neither transaction touches gas tokens.
        assert_eq!(
            tag_gas_token_usage(&snap, t(0x23), t(0x23), &gt),
            GasTokenUse::NONE
        );
        // Direct configured calls.
        let use1 = tag_gas_token_usage(&snap, t(0x21), t(0x23), &gt);
        assert_eq!(use1.usage, GasTokenUsage::FirstOnly);
        assert_eq!(use1.kind, Some(GasTokenKind::Chi));
        let use2 = tag_gas_token_usage(&snap, t(0x23), t(0x22), &gt);
        assert_eq!(use2.usage, GasTokenUsage::SecondOnly);
        assert_eq!(use2.kind, Some(GasTokenKind::Gst2));
        let both = tag_gas_token_usage(&snap, t(0x22), t(0x22), &gt);
        assert_eq!(both.usage, GasTokenUsage::Both);
        assert_eq!(both.kind, Some(GasTokenKind::Gst2));
        // Refund pattern via trace; kind from the embedded address.
        let traced = tag_gas_token_usage(&snap, t(0x24), t(0x23), &gt);
        assert_eq!(traced.usage, GasTokenUsage::FirstOnly);
        assert_eq!(traced.kind, Some(GasTokenKind::Gst2));
        // Refund pattern with unknown token: custom.
        let custom = tag_gas_token_usage(&snap, t(0x25), t(0x23), &gt);
        assert_eq!(custom.kind, Some(GasTokenKind::Custom));
        // Kinds differing across the two transactions: first one wins.
        let mixed = tag_gas_token_usage(&snap, t(0x21), t(0x22), &gt);
        assert_eq!(mixed.usage, GasTokenUsage::Both);
        assert_eq!(mixed.kind, Some(GasTokenKind::Chi));
    }

    #[test]
    fn competition_groups_by_victim_and_flags_shared_cluster() {
        let snap = sandwich_snapshot();
        let base = scan_insertion(&snap, &InsertionConfig::default()).unwrap();
        let mut second = base[0].clone();
        second.attacker_buy_tx = hash(0xC1);
        second.attacker_sell_tx = hash(0xC2);
        let attacks = vec![base[0].clone(), second];

        // Distinct clusters: a group, but no self-interference.
        let groups = detect_competition(&attacks, &[Some(0), Some(1)]).unwrap();
        assert_eq!(groups.len(), 1);
        assert_eq!(groups[0].attacker_buy_txs.len(), 2);
        assert!(!groups[0].self_interference);

        // Same cluster on both: flagged.
        let groups = detect_competition(&attacks, &[Some(3), Some(3)]).unwrap();
        assert!(groups[0].self_interference);

        // A single attack never forms a group.
        let groups = detect_competition(&attacks[..1], &[Some(0)]).unwrap();
        assert!(groups.is_empty());

        // Mismatched assignment length is an input error.
        assert!(detect_competition(&attacks, &[Some(0)]).is_err());
    }

    #[test]
    fn transfer_in_helper_matches_manual_event() {
        // Keeps the shared builder honest for the modules that use it.
        let t = tx(0x42).gas_price(7).build();
        let e = transfer_in(&t, 3, addr(TOKEN), addr(1), addr(2), 55);
        assert_eq!(e.tx_hash, t.hash);
        assert_eq!(e.gas_price, 7);
        assert_eq!(e.log_index, 3);
        assert_eq!(e.amount, BigUint::from(55u8));
    }
}
