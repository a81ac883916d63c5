//! Reporting and scoring: distribution tables, NDJSON attack interchange,
//! manifest scoring, and time-of-day activity matrices.
//!
//! Everything here is deterministic: rows come out in a fixed kind/metric
//! order, numbers render with two decimals and thousands separators, and
//! re-running any renderer on the same input yields identical bytes.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use chrono::{DateTime, Datelike, Timelike, Utc};
use serde::{Deserialize, Serialize};

use crate::attacker_graph::{AttackKind, AttackRef};
use crate::chain_model::{TxHash, Usd};
use crate::displacement::DisplacementAttack;
use crate::insertion::InsertionAttack;
use crate::suppression::SuppressionAttack;
use crate::synthetic_chain::GroundTruthManifest;
use crate::{Error, Result};

// ---------------------------------------------------------------------------
// NDJSON attack interchange
// ---------------------------------------------------------------------------

/// One detected attack of any kind — the unit of the NDJSON interchange
/// format every pipeline stage reads and writes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "attack", rename_all = "snake_case")]
pub enum AttackRecord {
    Displacement(DisplacementAttack),
    Insertion(InsertionAttack),
    Suppression(SuppressionAttack),
}

impl AttackRecord {
    pub fn kind(&self) -> AttackKind {
        match self {
            AttackRecord::Displacement(_) => AttackKind::Displacement,
            AttackRecord::Insertion(_) => AttackKind::Insertion,
            AttackRecord::Suppression(_) => AttackKind::Suppression,
        }
    }

    /// Block anchoring the attack in time (attacker inclusion, sandwich
    /// block, or first suppression block).
    pub fn block_number(&self) -> u64 {
        match self {
            AttackRecord::Displacement(a) => a.attacker_block,
            AttackRecord::Insertion(a) => a.block_number,
            AttackRecord::Suppression(a) => a.first_block,
        }
    }

    pub fn cost_wei(&self) -> u128 {
        match self {
            AttackRecord::Displacement(a) => a.cost_wei,
            AttackRecord::Insertion(a) => a.cost_wei,
            AttackRecord::Suppression(a) => a.cost_wei,
        }
    }

    pub fn profit_wei(&self) -> i128 {
        match self {
            AttackRecord::Displacement(a) => a.profit_wei,
            AttackRecord::Insertion(a) => a.profit_wei,
            AttackRecord::Suppression(a) => a.profit_wei,
        }
    }

    pub fn cost_usd(&self) -> Usd {
        match self {
            AttackRecord::Displacement(a) => a.cost_usd,
            AttackRecord::Insertion(a) => a.cost_usd,
            AttackRecord::Suppression(a) => a.cost_usd,
        }
    }

    pub fn profit_usd(&self) -> Usd {
        match self {
            AttackRecord::Displacement(a) => a.profit_usd,
            AttackRecord::Insertion(a) => a.profit_usd,
            AttackRecord::Suppression(a) => a.profit_usd,
        }
    }
}

impl From<&AttackRecord> for AttackRef {
    fn from(record: &AttackRecord) -> AttackRef {
        match record {
            AttackRecord::Displacement(a) => AttackRef::from(a),
            AttackRecord::Insertion(a) => AttackRef::from(a),
            AttackRecord::Suppression(a) => AttackRef::from(a),
        }
    }
}

/// Writes one JSON object per line.
pub fn write_attack_records<W: Write>(writer: &mut W, records: &[AttackRecord]) -> Result<()> {
    for record in records {
        let line = serde_json::to_string(record)
            .map_err(|e| Error::Internal(format!("attack record serialization failed: {e}")))?;
        writeln!(writer, "{line}")?;
    }
    Ok(())
}

pub fn read_attack_records(path: &Path) -> Result<Vec<AttackRecord>> {
    let text = std::fs::read_to_string(path)?;
    let mut records = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(line).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            line: (i + 1) as u64,
            message: e.to_string(),
        })?;
        records.push(record);
    }
    Ok(records)
}

// ---------------------------------------------------------------------------
// Distribution summaries
// ---------------------------------------------------------------------------

/// Seven-number summary of a sample, in table-row shape.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DistributionSummary {
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub q25: f64,
    pub q50: f64,
    pub q75: f64,
    pub max: f64,
}

/// Population statistics of a non-empty, finite sample.
///
/// The standard deviation divides by N (population form), and quantiles
/// interpolate linearly between order statistics at rank `(N−1)·p`.
/// Permutation-invariant: the input is sorted internally.
pub fn summarize(values: &[f64]) -> Result<DistributionSummary> {
    if values.is_empty() {
        return Err(Error::InvalidParameter(
            "cannot summarize an empty sample".into(),
        ));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter(
            "cannot summarize non-finite values".into(),
        ));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite values compare"));

    let n = sorted.len() as f64;
    let mean = sorted.iter().sum::<f64>() / n;
    let variance = sorted.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;

    let quantile = |p: f64| -> f64 {
        let h = (n - 1.0) * p;
        let lo = h.floor() as usize;
        let hi = h.ceil() as usize;
        sorted[lo] + (sorted[hi] - sorted[lo]) * (h - lo as f64)
    };

    Ok(DistributionSummary {
        mean,
        std: variance.sqrt(),
        min: sorted[0],
        q25: quantile(0.25),
        q50: quantile(0.5),
        q75: quantile(0.75),
        max: sorted[sorted.len() - 1],
    })
}

/// Renders a number with two decimals and thousands separators:
/// `-10620.614` → `-10,620.61`.
pub fn format_grouped(value: f64) -> String {
    let fixed = format!("{:.2}", value);
    let (sign, digits) = match fixed.strip_prefix('-') {
        Some(rest) => ("-", rest),
        None => ("", fixed.as_str()),
    };
    let (int_part, frac_part) = digits.split_once('.').expect("two-decimal format");
    let mut grouped = String::new();
    for (i, c) in int_part.chars().enumerate() {
        if i > 0 && (int_part.len() - i) % 3 == 0 {
            grouped.push(',');
        }
        grouped.push(c);
    }
    let body = format!("{grouped}.{frac_part}");
    if body.chars().all(|c| matches!(c, '0' | ',' | '.')) {
        // No negative zero.
        body
    } else {
        format!("{sign}{body}")
    }
}

impl DistributionSummary {
    /// The seven values as quoted CSV cells (quotes protect the thousands
    /// separators from the delimiter).
    pub fn csv_cells(&self) -> String {
        [
            self.mean, self.std, self.min, self.q25, self.q50, self.q75, self.max,
        ]
        .iter()
        .map(|v| format!("\"{}\"", format_grouped(*v)))
        .collect::<Vec<_>>()
        .join(",")
    }
}

const WEI_PER_ETH_F: f64 = 1e18;

/// Per-kind, per-metric distribution rows over a set of attacks, in a fixed
/// order. Kinds with no attacks contribute no rows.
pub fn distribution_rows(
    records: &[AttackRecord],
) -> Result<Vec<(AttackKind, String, DistributionSummary)>> {
    let kinds = [
        AttackKind::Displacement,
        AttackKind::Insertion,
        AttackKind::Suppression,
    ];
    let mut rows = Vec::new();
    for kind in kinds {
        let of_kind: Vec<&AttackRecord> = records.iter().filter(|r| r.kind() == kind).collect();
        if of_kind.is_empty() {
            continue;
        }
        let metrics: [(&str, Vec<f64>); 4] = [
            (
                "cost_eth",
                of_kind
                    .iter()
                    .map(|r| r.cost_wei() as f64 / WEI_PER_ETH_F)
                    .collect(),
            ),
            (
                "profit_eth",
                of_kind
                    .iter()
                    .map(|r| r.profit_wei() as f64 / WEI_PER_ETH_F)
                    .collect(),
            ),
            (
                "cost_usd",
                of_kind.iter().map(|r| r.cost_usd().to_f64()).collect(),
            ),
            (
                "profit_usd",
                of_kind.iter().map(|r| r.profit_usd().to_f64()).collect(),
            ),
        ];
        for (metric, values) in metrics {
            rows.push((kind, metric.to_string(), summarize(&values)?));
        }
    }
    Ok(rows)
}

fn kind_label(kind: AttackKind) -> &'static str {
    match kind {
        AttackKind::Displacement => "displacement",
        AttackKind::Insertion => "insertion",
        AttackKind::Suppression => "suppression",
    }
}

/// CSV with header `kind,metric,mean,std,min,q25,q50,q75,max`.
pub fn render_distribution_csv(rows: &[(AttackKind, String, DistributionSummary)]) -> String {
    let mut out = String::from("kind,metric,mean,std,min,q25,q50,q75,max\n");
    for (kind, metric, summary) in rows {
        out.push_str(&format!(
            "{},{},{}\n",
            kind_label(*kind),
            metric,
            summary.csv_cells()
        ));
    }
    out
}

// ---------------------------------------------------------------------------
// Scoring against a ground-truth manifest
// ---------------------------------------------------------------------------

/// Precision/recall and worst profit error for one attack kind.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KindScore {
    pub kind: AttackKind,
    pub planted: u64,
    pub detected: u64,
    pub matched: u64,
    /// matched / detected; 1.0 when nothing was detected.
    pub precision: f64,
    /// matched / planted; 1.0 when nothing was planted.
    pub recall: f64,
    /// Largest relative profit error across matches. Differences within
    /// 10⁻⁹ ether count as zero.
    pub max_profit_relative_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScoreReport {
    pub kinds: Vec<KindScore>,
    /// Detected attacks absent from the manifest.
    pub false_positives: Vec<String>,
    /// Planted attacks the scan missed.
    pub missed: Vec<String>,
}

impl ScoreReport {
    pub fn perfect(&self) -> bool {
        self.false_positives.is_empty()
            && self.missed.is_empty()
            && self
                .kinds
                .iter()
                .all(|k| k.precision == 1.0 && k.recall == 1.0)
    }

    pub fn render_text(&self) -> String {
        let mut out = String::new();
        for k in &self.kinds {
            out.push_str(&format!(
                "{}: planted {} detected {} matched {} precision {:.4} recall {:.4} max_profit_rel_err {:.9}\n",
                kind_label(k.kind),
                k.planted,
                k.detected,
                k.matched,
                k.precision,
                k.recall,
                k.max_profit_relative_error,
            ));
        }
        for fp in &self.false_positives {
            out.push_str(&format!("false_positive: {fp}\n"));
        }
        for miss in &self.missed {
            out.push_str(&format!("missed: {miss}\n"));
        }
        out
    }
}

/// Profit differences under one gwei-of-ether (10⁻⁹ ETH = 10⁹ wei) count as
/// exact; anything larger is reported relative to the expected magnitude.
fn profit_relative_error(got: i128, want: i128) -> f64 {
    let diff = got.abs_diff(want);
    if diff <= 1_000_000_000 {
        return 0.0;
    }
    diff as f64 / (want.unsigned_abs().max(1)) as f64
}

enum MatchKey {
    Displacement(TxHash, TxHash),
    Insertion(TxHash, TxHash, TxHash),
    Suppression(String),
}

impl MatchKey {
    fn encode(&self) -> String {
        match self {
            MatchKey::Displacement(a, v) => format!("attacker {a} victim {v}"),
            MatchKey::Insertion(b, v, s) => format!("buy {b} victim {v} sell {s}"),
            MatchKey::Suppression(k) => k.clone(),
        }
    }
}

fn detected_key(record: &AttackRecord) -> MatchKey {
    match record {
        AttackRecord::Displacement(a) => MatchKey::Displacement(a.attacker_tx, a.victim_tx),
        AttackRecord::Insertion(a) => {
            MatchKey::Insertion(a.attacker_buy_tx, a.victim_tx, a.attacker_sell_tx)
        }
        AttackRecord::Suppression(a) => MatchKey::Suppression(format!(
            "victim {} bot {}",
            a.victim_contract,
            a.bot_contracts
                .first()
                .map(|b| b.to_string())
                .unwrap_or_else(|| "-".into())
        )),
    }
}

fn planted_key(planted: &crate::synthetic_chain::PlantedAttack) -> Option<MatchKey> {
    match planted.kind {
        AttackKind::Displacement => Some(MatchKey::Displacement(
            *planted.txs.first()?,
            *planted.txs.get(1)?,
        )),
        AttackKind::Insertion => Some(MatchKey::Insertion(
            *planted.txs.first()?,
            *planted.txs.get(1)?,
            *planted.txs.get(2)?,
        )),
        AttackKind::Suppression => Some(MatchKey::Suppression(format!(
            "victim {} bot {}",
            planted.victim_contract?,
            planted
                .bot_contract
                .map(|b| b.to_string())
                .unwrap_or_else(|| "-".into())
        ))),
    }
}

/// Grades detected attacks against the manifest: per-kind precision and
/// recall over identity matches, plus the worst profit deviation among the
/// matched pairs. Unmatched attacks on either side are listed.
pub fn score_against_manifest(
    records: &[AttackRecord],
    manifest: &GroundTruthManifest,
) -> ScoreReport {
    let kinds = [
        AttackKind::Displacement,
        AttackKind::Insertion,
        AttackKind::Suppression,
    ];
    let mut kind_scores = Vec::new();
    let mut false_positives = Vec::new();
    let mut missed = Vec::new();

    for kind in kinds {
        let mut planted: BTreeMap<String, i128> = BTreeMap::new();
        for p in manifest.of_kind(kind) {
            if let Some(key) = planted_key(p) {
                planted.insert(key.encode(), p.expected_profit_wei);
            }
        }
        let detected: Vec<(String, i128)> = records
            .iter()
            .filter(|r| r.kind() == kind)
            .map(|r| (detected_key(r).encode(), r.profit_wei()))
            .collect();

        let planted_count = planted.len() as u64;
        let detected_count = detected.len() as u64;
        let mut matched = 0u64;
        let mut max_err = 0f64;
        let mut matched_keys = std::collections::BTreeSet::new();
        for (key, got_profit) in &detected {
            match planted.get(key) {
                Some(want_profit) => {
                    matched += 1;
                    matched_keys.insert(key.clone());
                    max_err = max_err.max(profit_relative_error(*got_profit, *want_profit));
                }
                None => false_positives.push(format!("{} {}", kind_label(kind), key)),
            }
        }
        for key in planted.keys() {
            if !matched_keys.contains(key) {
                missed.push(format!("{} {}", kind_label(kind), key));
            }
        }

        kind_scores.push(KindScore {
            kind,
            planted: planted_count,
            detected: detected_count,
            matched,
            precision: if detected_count == 0 {
                1.0
            } else {
                matched as f64 / detected_count as f64
            },
            recall: if planted_count == 0 {
                1.0
            } else {
                matched as f64 / planted_count as f64
            },
            max_profit_relative_error: max_err,
        });
    }

    ScoreReport {
        kinds: kind_scores,
        false_positives,
        missed,
    }
}

// ---------------------------------------------------------------------------
// Time-of-day and yearly activity
// ---------------------------------------------------------------------------

/// Counts attacks per (weekday, hour) in UTC. Row 0 is Monday.
pub fn weekday_hour_matrix(times: &[DateTime<Utc>]) -> [[u64; 24]; 7] {
    let mut matrix = [[0u64; 24]; 7];
    for t in times {
        let day = t.weekday().num_days_from_monday() as usize;
        let hour = t.hour() as usize;
        matrix[day][hour] += 1;
    }
    matrix
}

/// CSV with header `weekday,h00..h23`, one row per weekday Monday-first.
pub fn render_weekday_hour_csv(matrix: &[[u64; 24]; 7]) -> String {
    const DAYS: [&str; 7] = ["Mon", "Tue", "Wed", "Thu", "Fri", "Sat", "Sun"];
    let mut out = String::from("weekday");
    for h in 0..24 {
        out.push_str(&format!(",h{h:02}"));
    }
    out.push('\n');
    for (day, row) in DAYS.iter().zip(matrix) {
        out.push_str(day);
        for cell in row {
            out.push_str(&format!(",{cell}"));
        }
        out.push('\n');
    }
    out
}

/// Percentage of attacks falling in each calendar year (UTC), ascending.
pub fn yearly_percentages(times: &[DateTime<Utc>]) -> Vec<(i32, f64)> {
    let mut counts: BTreeMap<i32, u64> = BTreeMap::new();
    for t in times {
        *counts.entry(t.year()).or_default() += 1;
    }
    let total: u64 = counts.values().sum();
    counts
        .into_iter()
        .map(|(year, n)| (year, 100.0 * n as f64 / total as f64))
        .collect()
}

/// CSV with header `year,percent`; percentages carry two decimals.
pub fn render_yearly_csv(rows: &[(i32, f64)]) -> String {
    let mut out = String::from("year,percent\n");
    for (year, pct) in rows {
        out.push_str(&format!("{year},{pct:.2}\n"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain_model::Address;
    use crate::test_support::{addr, hash};
    use chrono::TimeZone;

    fn displacement_attack(a: u8, v: u8, profit: i128) -> DisplacementAttack {
        DisplacementAttack {
            attacker_tx: hash(a),
            victim_tx: hash(v),
            attacker_account: addr(0x01),
            victim_account: addr(0x02),
            bot_contract: None,
            attacker_block: 40,
            victim_block: 40,
            block_delta: 0,
            gas_price_delta: 1,
            gain_wei: 2_000_000,
            cost_wei: 1_000_000,
            profit_wei: profit,
            cost_usd: Usd::from_cents(4),
            profit_usd: Usd::from_cents(4),
        }
    }

    fn manifest_with_displacements(pairs: &[(u8, u8, i128)]) -> GroundTruthManifest {
        GroundTruthManifest {
            seed: 0,
            blocks: 100,
            planted: pairs
                .iter()
                .map(|(a, v, profit)| crate::synthetic_chain::PlantedAttack {
                    kind: AttackKind::Displacement,
                    txs: vec![hash(*a), hash(*v)],
                    victim_contract: Some(Address([*v; 20])),
                    bot_contract: None,
                    expected_cost_wei: 1_000_000,
                    expected_profit_wei: *profit,
                    rounds: None,
                    strategy: None,
                })
                .collect(),
            controls: Vec::new(),
        }
    }

    #[test]
    fn summarize_singleton_is_degenerate() {
        let s = summarize(&[5.0]).unwrap();
        assert_eq!(s.mean, 5.0);
        assert_eq!(s.std, 0.0);
        assert_eq!(s.min, 5.0);
        assert_eq!(s.q25, 5.0);
        assert_eq!(s.q50, 5.0);
        assert_eq!(s.q75, 5.0);
        assert_eq!(s.max, 5.0);
    }

    #[test]
    fn summarize_small_sample_hand_checked() {
        let s = summarize(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(s.mean, 2.5);
        assert_eq!(s.q50, 2.5);
        assert_eq!(s.q25, 1.75);
        assert_eq!(s.q75, 3.25);
        assert_eq!(s.std, 1.25f64.sqrt());
        assert_eq!(s.min, 1.0);
        assert_eq!(s.max, 4.0);
    }

    #[test]
    fn summarize_interpolates_between_order_statistics() {
        let s = summarize(&[0.0, 0.0, 0.0, 100.0]).unwrap();
        assert_eq!(s.q75, 25.0);
        assert_eq!(s.max, 100.0);
        assert_eq!(s.q25, 0.0);
        assert_eq!(s.q50, 0.0);
    }

    #[test]
    fn summarize_is_permutation_invariant() {
        let a = summarize(&[3.0, -1.0, 4.0, 1.0, 5.0, 9.0, 2.0, 6.0]).unwrap();
        let b = summarize(&[9.0, 6.0, 5.0, 4.0, 3.0, 2.0, 1.0, -1.0]).unwrap();
        assert_eq!(a, b);
        assert!(a.min <= a.q25 && a.q25 <= a.q50 && a.q50 <= a.q75 && a.q75 <= a.max);
    }

    #[test]
    fn summarize_rejects_bad_input() {
        assert!(summarize(&[]).is_err());
        assert!(summarize(&[1.0, f64::NAN]).is_err());
        assert!(summarize(&[f64::INFINITY]).is_err());
    }

    #[test]
    fn grouped_rendering_matches_table_style() {
        assert_eq!(format_grouped(0.0), "0.00");
        assert_eq!(format_grouped(-0.004), "0.00");
        assert_eq!(format_grouped(7.5), "7.50");
        assert_eq!(format_grouped(999.999), "1,000.00");
        assert_eq!(format_grouped(1_234_567.891), "1,234,567.89");
        assert_eq!(format_grouped(-10_620.614), "-10,620.61");
    }

    #[test]
    fn distribution_csv_is_deterministic_and_quoted() {
        let records = vec![
            AttackRecord::Displacement(displacement_attack(0x0A, 0x0B, 1_000_000)),
            AttackRecord::Displacement(displacement_attack(0x0C, 0x0D, 3_000_000)),
        ];
        let rows = distribution_rows(&records).unwrap();
        let csv = render_distribution_csv(&rows);
        let again = render_distribution_csv(&distribution_rows(&records).unwrap());
        assert_eq!(csv, again);
        assert!(csv.starts_with("kind,metric,mean,std,min,q25,q50,q75,max\n"));
        assert!(csv.contains("displacement,cost_eth,"));
        assert!(csv.contains("\"0.00\""));
        // Only the kind with attacks contributes rows: 4 metrics + header.
        assert_eq!(csv.lines().count(), 5);
    }

    fn transfer_event(tx: u8, tx_index: u32, gas_price: u128) -> crate::chain_model::TransferEvent {
        crate::chain_model::TransferEvent {
            token: addr(0x70),
            sender: addr(0x01),
            receiver: addr(0x02),
            amount: num_bigint::BigUint::from(123_456_789_u64),
            tx_hash: hash(tx),
            block_number: 42,
            tx_index,
            log_index: tx_index,
            gas_price,
        }
    }

    fn insertion_attack() -> InsertionAttack {
        InsertionAttack {
            block_number: 42,
            // A gas price above u64::MAX must survive the trip intact.
            e_a1: transfer_event(0x11, 0, u128::from(u64::MAX) + 7),
            e_v: transfer_event(0x12, 1, 50),
            e_a2: transfer_event(0x13, 2, 40),
            attacker_buy_tx: hash(0x11),
            victim_tx: hash(0x12),
            attacker_sell_tx: hash(0x13),
            exchange: addr(0xEE),
            token: addr(0x70),
            attacker_accounts: [addr(0x01)].into_iter().collect(),
            bot_contract: None,
            cost_wei: 3,
            gain_wei: 10,
            profit_wei: 7,
            cost_usd: Usd::from_cents(1),
            profit_usd: Usd::from_cents(2),
            gas_price_delta1: u128::from(u64::MAX) + 7 - 50,
            gas_price_delta2: 10,
            gas_token_usage: crate::insertion::GasTokenUse::NONE,
        }
    }

    fn suppression_attack() -> SuppressionAttack {
        use crate::suppression::{AttackStatus, SuppressionRound, SuppressionStrategy};
        SuppressionAttack {
            victim_contract: addr(0x55),
            bot_contracts: [addr(0x56)].into_iter().collect(),
            attacker_accounts: [addr(0x01)].into_iter().collect(),
            rounds: vec![SuppressionRound {
                investment_tx: hash(0x21),
                stuffing_txs: vec![hash(0x22), hash(0x23)],
                status: AttackStatus::Success,
                prize_claimed: 9,
            }],
            strategy: Some(SuppressionStrategy::ControlledGasLoop),
            first_block: 40,
            last_block: 41,
            blocks_stuffed: 2,
            tx_count: 3,
            cost_wei: 4,
            profit_wei: 5,
            cost_usd: Usd::from_cents(1),
            profit_usd: Usd::from_cents(2),
            status: AttackStatus::Success,
        }
    }

    #[test]
    fn attack_records_round_trip_through_ndjson() {
        let records = vec![
            AttackRecord::Displacement(displacement_attack(0x0A, 0x0B, 42)),
            AttackRecord::Insertion(insertion_attack()),
            AttackRecord::Suppression(suppression_attack()),
        ];
        let mut buf = Vec::new();
        write_attack_records(&mut buf, &records).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("{\"attack\":\"displacement\""));
        assert!(text.contains("{\"attack\":\"insertion\""));
        assert!(text.contains("{\"attack\":\"suppression\""));

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("attacks.ndjson");
        std::fs::write(&path, &buf).unwrap();
        let back = read_attack_records(&path).unwrap();
        assert_eq!(back, records);
        assert_eq!(back[0].kind(), AttackKind::Displacement);
        assert_eq!(back[0].block_number(), 40);
        assert_eq!(back[1].block_number(), 42);
        assert_eq!(back[2].block_number(), 40);
    }

    #[test]
    fn score_flags_misses_and_false_positives() {
        // Ten planted; nine detected correctly, plus one stray detection.
        let planted: Vec<(u8, u8, i128)> = (0..10)
            .map(|i| (2 * i + 1, 2 * i + 2, 1_000_000i128))
            .collect();
        let manifest = manifest_with_displacements(&planted);
        let mut records: Vec<AttackRecord> = planted[..9]
            .iter()
            .map(|(a, v, p)| AttackRecord::Displacement(displacement_attack(*a, *v, *p)))
            .collect();
        records.push(AttackRecord::Displacement(displacement_attack(
            0xE0, 0xE1, 7,
        )));

        let report = score_against_manifest(&records, &manifest);
        let k = &report.kinds[0];
        assert_eq!(k.kind, AttackKind::Displacement);
        assert_eq!(k.planted, 10);
        assert_eq!(k.detected, 10);
        assert_eq!(k.matched, 9);
        assert_eq!(k.recall, 0.9);
        assert_eq!(k.precision, 0.9);
        assert_eq!(report.missed.len(), 1);
        assert_eq!(report.false_positives.len(), 1);
        assert!(!report.perfect());

        // Insertion and suppression, untouched, score perfect by convention.
        assert_eq!(report.kinds[1].precision, 1.0);
        assert_eq!(report.kinds[2].recall, 1.0);
    }

    #[test]
    fn score_reports_exact_profits_as_zero_error() {
        let manifest = manifest_with_displacements(&[(1, 2, 5_000_000)]);
        let records = vec![AttackRecord::Displacement(displacement_attack(
            1, 2, 5_000_000,
        ))];
        let report = score_against_manifest(&records, &manifest);
        assert!(report.perfect());
        assert_eq!(report.kinds[0].max_profit_relative_error, 0.0);

        // A wei-scale rounding difference still counts as exact...
        let records = vec![AttackRecord::Displacement(displacement_attack(
            1, 2, 5_000_900,
        ))];
        let report = score_against_manifest(&records, &manifest);
        assert_eq!(report.kinds[0].max_profit_relative_error, 0.0);

        // ...but a material difference does not.
        let records = vec![AttackRecord::Displacement(displacement_attack(
            1,
            2,
            7_000_000_000_000,
        ))];
        let report = score_against_manifest(&records, &manifest);
        assert!(report.kinds[0].max_profit_relative_error > 0.0);
    }

    #[test]
    fn weekday_matrix_places_attacks_in_utc_cells() {
        // 2020-09-16 was a Wednesday.
        let wed = Utc.with_ymd_and_hms(2020, 9, 16, 13, 0, 0).unwrap();
        let matrix = weekday_hour_matrix(&[wed]);
        assert_eq!(matrix[2][13], 1);
        assert_eq!(matrix.iter().flatten().sum::<u64>(), 1);

        let csv = render_weekday_hour_csv(&matrix);
        let wednesday_row = csv.lines().nth(3).unwrap();
        assert!(wednesday_row.starts_with("Wed,"));
        assert_eq!(wednesday_row.split(',').nth(14).unwrap(), "1");
    }

    #[test]
    fn empty_matrix_renders_all_zero() {
        let csv = render_weekday_hour_csv(&weekday_hour_matrix(&[]));
        assert_eq!(csv.lines().count(), 8);
        assert!(csv
            .lines()
            .skip(1)
            .all(|row| row.split(',').skip(1).all(|cell| cell == "0")));
    }

    #[test]
    fn yearly_split_percentages() {
        let times = vec![
            Utc.with_ymd_and_hms(2019, 1, 1, 0, 0, 0).unwrap(),
            Utc.with_ymd_and_hms(2019, 5, 1, 0, 0, 0).unwrap(),
            Utc.with_ymd_and_hms(2019, 9, 1, 0, 0, 0).unwrap(),
            Utc.with_ymd_and_hms(2020, 1, 1, 0, 0, 0).unwrap(),
        ];
        let rows = yearly_percentages(&times);
        assert_eq!(rows, vec![(2019, 75.0), (2020, 25.0)]);
        assert_eq!(
            render_yearly_csv(&rows),
            "year,percent\n2019,75.00\n2020,25.00\n"
        );
        assert!(yearly_percentages(&[]).is_empty());
    }
}
