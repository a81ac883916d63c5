//! Attacker identity clustering.
//!
//! Different attacks often trace back to one operator: the same account
//! drives several bot contracts, or several accounts drive bots deployed
//! from one template.  This module links those identities in a graph whose
//! nodes are attacker accounts and bot contracts, with an edge when
//!
//! - an account and a bot appeared together in an attack
//!   (`SharedAttackTx`), or
//! - two bot contracts carry byte-identical code (`SameBytecode`).
//!
//! Connected components of that graph are attacker clusters; per-cluster
//! totals aggregate the member attacks' cost and profit.  Insertion attacks
//! that called an exchange directly (no bot) contribute account nodes but no
//! edges — there is nothing to link them by.

use crate::chain_model::{wei_string, wei_string_signed, Address, TxHash, Usd};
use crate::displacement::DisplacementAttack;
use crate::insertion::InsertionAttack;
use crate::suppression::SuppressionAttack;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackKind {
    Displacement,
    Insertion,
    Suppression,
}

/// Detector-agnostic view of one attack, carrying exactly what clustering
/// needs: who acted, through which bots, and what it cost and earned.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttackRef {
    pub kind: AttackKind,
    /// Stable handle: the attack's leading transaction.
    pub reference_tx: TxHash,
    /// The account an attack is attributed to when it has no bot.
    pub primary_account: Address,
    pub accounts: BTreeSet<Address>,
    pub bots: BTreeSet<Address>,
    #[serde(with = "wei_string")]
    pub cost_wei: u128,
    #[serde(with = "wei_string_signed")]
    pub profit_wei: i128,
    pub cost_usd: Usd,
    pub profit_usd: Usd,
}

impl From<&DisplacementAttack> for AttackRef {
    fn from(a: &DisplacementAttack) -> Self {
        AttackRef {
            kind: AttackKind::Displacement,
            reference_tx: a.attacker_tx,
            primary_account: a.attacker_account,
            accounts: BTreeSet::from([a.attacker_account]),
            bots: a.bot_contract.into_iter().collect(),
            cost_wei: a.cost_wei,
            profit_wei: a.profit_wei,
            cost_usd: a.cost_usd,
            profit_usd: a.profit_usd,
        }
    }
}

impl From<&InsertionAttack> for AttackRef {
    fn from(a: &InsertionAttack) -> Self {
        AttackRef {
            kind: AttackKind::Insertion,
            reference_tx: a.attacker_buy_tx,
            primary_account: *a
                .attacker_accounts
                .first()
                .expect("insertion attack has at least one account"),
            accounts: a.attacker_accounts.clone(),
            bots: a.bot_contract.into_iter().collect(),
            cost_wei: a.cost_wei,
            profit_wei: a.profit_wei,
            cost_usd: a.cost_usd,
            profit_usd: a.profit_usd,
        }
    }
}

impl From<&SuppressionAttack> for AttackRef {
    fn from(a: &SuppressionAttack) -> Self {
        AttackRef {
            kind: AttackKind::Suppression,
            reference_tx: a
                .rounds
                .first()
                .map(|r| r.investment_tx)
                .expect("suppression attack has at least one round"),
            primary_account: *a
                .attacker_accounts
                .first()
                .expect("suppression attack has at least one account"),
            accounts: a.attacker_accounts.clone(),
            bots: a.bot_contracts.clone(),
            cost_wei: a.cost_wei,
            profit_wei: a.profit_wei,
            cost_usd: a.cost_usd,
            profit_usd: a.profit_usd,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    AttackerAccount,
    BotContract,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Node {
    pub kind: NodeKind,
    pub address: Address,
}

impl Node {
    pub fn account(address: Address) -> Node {
        Node {
            kind: NodeKind::AttackerAccount,
            address,
        }
    }
    pub fn bot(address: Address) -> Node {
        Node {
            kind: NodeKind::BotContract,
            address,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeLabel {
    SharedAttackTx,
    SameBytecode,
}

/// Undirected edge, stored with endpoints in sorted order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Edge {
    pub a: Node,
    pub b: Node,
    pub label: EdgeLabel,
}

impl Edge {
    fn new(x: Node, y: Node, label: EdgeLabel) -> Edge {
        let (a, b) = if x <= y { (x, y) } else { (y, x) };
        Edge { a, b, label }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct AttackerGraph {
    pub nodes: BTreeSet<Node>,
    pub edges: BTreeSet<Edge>,
    /// Bots whose bytecode was unavailable (node kept, bytecode edges
    /// skipped).
    pub warnings: Vec<String>,
}

/// One connected component of the graph, with aggregated accounting.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AttackerCluster {
    /// Stable id: clusters are numbered in order of their smallest member
    /// address, starting at 0.
    pub id: u64,
    pub accounts: BTreeSet<Address>,
    pub bots: BTreeSet<Address>,
    /// Member attacks, in the order they were supplied.
    pub attacks: Vec<AttackId>,
    #[serde(with = "wei_string")]
    pub total_cost_wei: u128,
    #[serde(with = "wei_string_signed")]
    pub total_profit_wei: i128,
    pub total_cost_usd: Usd,
    pub total_profit_usd: Usd,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttackId {
    pub kind: AttackKind,
    pub reference_tx: TxHash,
}

/// Builds the identity graph from attacks and the bot bytecode map.
///
/// Every attacker account and bot becomes a node.  Each attack links its
/// accounts to its bots (`SharedAttackTx`), and bots with byte-identical
/// nonempty code are linked pairwise (`SameBytecode`).  A bot without known
/// code keeps its node but contributes no bytecode edges; the omission is
/// recorded as a warning.
pub fn build_graph(attacks: &[AttackRef], code: &BTreeMap<Address, Vec<u8>>) -> AttackerGraph {
    let mut graph = AttackerGraph::default();
    for attack in attacks {
        for account in &attack.accounts {
            graph.nodes.insert(Node::account(*account));
        }
        for bot in &attack.bots {
            graph.nodes.insert(Node::bot(*bot));
            for account in &attack.accounts {
                graph.edges.insert(Edge::new(
                    Node::account(*account),
                    Node::bot(*bot),
                    EdgeLabel::SharedAttackTx,
                ));
            }
        }
    }

    let mut by_code: BTreeMap<&[u8], Vec<Address>> = BTreeMap::new();
    let bots: BTreeSet<Address> = graph
        .nodes
        .iter()
        .filter(|n| n.kind == NodeKind::BotContract)
        .map(|n| n.address)
        .collect();
    for bot in bots {
        match code.get(&bot).map(Vec::as_slice) {
            Some(bytes) if !bytes.is_empty() => by_code.entry(bytes).or_default().push(bot),
            _ => graph
                .warnings
                .push(format!("no bytecode for bot {bot}; bytecode edges skipped")),
        }
    }
    for group in by_code.values() {
        for (i, &x) in group.iter().enumerate() {
            for &y in &group[i + 1..] {
                graph.edges.insert(Edge::new(
                    Node::bot(x),
                    Node::bot(y),
                    EdgeLabel::SameBytecode,
                ));
            }
        }
    }
    graph
}

/// Union-find over node indices, with path compression and union by rank.
struct UnionFind {
    parent: Vec<usize>,
    rank: Vec<u32>,
}

impl UnionFind {
    fn new(len: usize) -> UnionFind {
        UnionFind {
            parent: (0..len).collect(),
            rank: vec![0; len],
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]]; // halve the path
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, x: usize, y: usize) {
        let (rx, ry) = (self.find(x), self.find(y));
        if rx == ry {
            return;
        }
        match self.rank[rx].cmp(&self.rank[ry]) {
            std::cmp::Ordering::Less => self.parent[rx] = ry,
            std::cmp::Ordering::Greater => self.parent[ry] = rx,
            std::cmp::Ordering::Equal => {
                self.parent[ry] = rx;
                self.rank[rx] += 1;
            }
        }
    }
}

/// Computes attacker clusters as the graph's connected components and
/// attributes each attack — via its first bot, or its primary account when
/// it has none — to the component holding that node.
pub fn connected_components(
    graph: &AttackerGraph,
    attacks: &[AttackRef],
) -> Result<Vec<AttackerCluster>> {
    let nodes: Vec<Node> = graph.nodes.iter().copied().collect();
    let index: BTreeMap<Node, usize> = nodes.iter().enumerate().map(|(i, n)| (*n, i)).collect();
    let mut uf = UnionFind::new(nodes.len());
    for edge in &graph.edges {
        uf.union(index[&edge.a], index[&edge.b]);
    }

    let mut members: BTreeMap<usize, Vec<Node>> = BTreeMap::new();
    for (i, node) in nodes.iter().enumerate() {
        members.entry(uf.find(i)).or_default().push(*node);
    }
    // Deterministic ids: order components by their smallest member address.
    let mut components: Vec<Vec<Node>> = members.into_values().collect();
    components.sort_by_key(|ns| {
        ns.iter()
            .map(|n| n.address)
            .min()
            .expect("components are non-empty")
    });

    let mut clusters: Vec<AttackerCluster> = components
        .into_iter()
        .enumerate()
        .map(|(id, ns)| AttackerCluster {
            id: id as u64,
            accounts: ns
                .iter()
                .filter(|n| n.kind == NodeKind::AttackerAccount)
                .map(|n| n.address)
                .collect(),
            bots: ns
                .iter()
                .filter(|n| n.kind == NodeKind::BotContract)
                .map(|n| n.address)
                .collect(),
            attacks: Vec::new(),
            total_cost_wei: 0,
            total_profit_wei: 0,
            total_cost_usd: Usd::ZERO,
            total_profit_usd: Usd::ZERO,
        })
        .collect();

    let mut node_to_cluster: BTreeMap<Node, usize> = BTreeMap::new();
    for (i, cluster) in clusters.iter().enumerate() {
        for a in &cluster.accounts {
            node_to_cluster.insert(Node::account(*a), i);
        }
        for b in &cluster.bots {
            node_to_cluster.insert(Node::bot(*b), i);
        }
    }

    let overflow = || Error::Data("cluster totals overflow".into());
    for attack in attacks {
        let node = match attack.bots.first() {
            Some(bot) => Node::bot(*bot),
            None => Node::account(attack.primary_account),
        };
        let &i = node_to_cluster.get(&node).ok_or_else(|| {
            Error::Internal(format!(
                "attack {} references a node missing from the graph",
                attack.reference_tx
            ))
        })?;
        let cluster = &mut clusters[i];
        cluster.attacks.push(AttackId {
            kind: attack.kind,
            reference_tx: attack.reference_tx,
        });
        cluster.total_cost_wei = cluster
            .total_cost_wei
            .checked_add(attack.cost_wei)
            .ok_or_else(overflow)?;
        cluster.total_profit_wei = cluster
            .total_profit_wei
            .checked_add(attack.profit_wei)
            .ok_or_else(overflow)?;
        cluster.total_cost_usd = cluster
            .total_cost_usd
            .checked_add(attack.cost_usd)
            .ok_or_else(overflow)?;
        cluster.total_profit_usd = cluster
            .total_profit_usd
            .checked_add(attack.profit_usd)
            .ok_or_else(overflow)?;
    }
    Ok(clusters)
}

/// Convenience: builds the graph, computes components, and returns them with
/// each attack's cluster id (positionally aligned with `attacks`).
pub fn cluster_attacks(
    attacks: &[AttackRef],
    code: &BTreeMap<Address, Vec<u8>>,
) -> Result<(AttackerGraph, Vec<AttackerCluster>, Vec<Option<u64>>)> {
    let graph = build_graph(attacks, code);
    let clusters = connected_components(&graph, attacks)?;
    let mut by_tx: BTreeMap<TxHash, u64> = BTreeMap::new();
    for cluster in &clusters {
        for attack in &cluster.attacks {
            by_tx.insert(attack.reference_tx, cluster.id);
        }
    }
    let ids = attacks
        .iter()
        .map(|a| by_tx.get(&a.reference_tx).copied())
        .collect();
    Ok((graph, clusters, ids))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::test_support::{addr, hash};
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn attack(reference: u8, accounts: &[u8], bots: &[u8], cost: u128, profit: i128) -> AttackRef {
        AttackRef {
            kind: AttackKind::Insertion,
            reference_tx: hash(reference),
            primary_account: addr(accounts[0]),
            accounts: accounts.iter().map(|&b| addr(b)).collect(),
            bots: bots.iter().map(|&b| addr(b)).collect(),
            cost_wei: cost,
            profit_wei: profit,
            cost_usd: Usd::from_cents(100),
            profit_usd: Usd::from_cents(-40),
        }
    }

    fn codes(entries: &[(u8, &[u8])]) -> BTreeMap<Address, Vec<u8>> {
        entries
            .iter()
            .map(|(b, code)| (addr(*b), code.to_vec()))
            .collect()
    }

    #[test]
    fn single_pair_forms_one_cluster() {
        let attacks = vec![attack(1, &[0x01], &[0xB1], 10, 5)];
        let code = codes(&[(0xB1, &[1, 2, 3])]);
        let (graph, clusters, ids) = cluster_attacks(&attacks, &code).unwrap();
        assert_eq!(graph.nodes.len(), 2);
        assert_eq!(graph.edges.len(), 1);
        assert_eq!(clusters.len(), 1);
        assert_eq!(clusters[0].id, 0);
        assert_eq!(clusters[0].accounts, BTreeSet::from([addr(0x01)]));
        assert_eq!(clusters[0].bots, BTreeSet::from([addr(0xB1)]));
        assert_eq!(ids, vec![Some(0)]);
    }

    #[test]
    fn shared_bytecode_merges_operations() {
        // Accounts 1 and 2 drive bot B1; account 3 drives B2; B1 and B2
        // share bytecode, so all five nodes are one cluster.
        let attacks = vec![
            attack(1, &[0x01], &[0xB1], 10, 1),
            attack(2, &[0x02], &[0xB1], 10, 1),
            attack(3, &[0x03], &[0xB2], 10, 1),
        ];
        let code = codes(&[(0xB1, &[0xAA, 0xBB]), (0xB2, &[0xAA, 0xBB])]);
        let (graph, clusters, ids) = cluster_attacks(&attacks, &code).unwrap();
        assert_eq!(graph.nodes.len(), 5);
        assert!(graph
            .edges
            .iter()
            .any(|e| e.label == EdgeLabel::SameBytecode));
        assert_eq!(clusters.len(), 1);
        assert_eq!(
            clusters[0].accounts,
            BTreeSet::from([addr(0x01), addr(0x02), addr(0x03)])
        );
        assert_eq!(ids, vec![Some(0), Some(0), Some(0)]);
        assert_eq!(clusters[0].total_cost_wei, 30);
        assert_eq!(clusters[0].total_profit_wei, 3);
        assert_eq!(clusters[0].total_cost_usd.to_string(), "3.00");
        assert_eq!(clusters[0].total_profit_usd.to_string(), "-1.20");
    }

    #[test]
    fn distinct_bytecode_stays_separate_and_ids_follow_addresses() {
        let attacks = vec![
            attack(1, &[0x05], &[0xB9], 7, 0),
            attack(2, &[0x03], &[0xB1], 9, 2),
        ];
        let code = codes(&[(0xB9, &[1]), (0xB1, &[2])]);
        let (_, clusters, ids) = cluster_attacks(&attacks, &code).unwrap();
        assert_eq!(clusters.len(), 2);
        // Smallest member address 0x03… < 0x05…, so that cluster gets id 0.
        assert_eq!(clusters[0].accounts, BTreeSet::from([addr(0x03)]));
        assert_eq!(clusters[1].accounts, BTreeSet::from([addr(0x05)]));
        assert_eq!(ids, vec![Some(1), Some(0)]);
    }

    #[test]
    fn direct_attack_contributes_account_node_without_edges() {
        let attacks = vec![
            attack(1, &[0x01, 0x02], &[], 10, -3), // direct: two accounts, no bot
            attack(2, &[0x07], &[0xB1], 5, 1),
        ];
        let code = codes(&[(0xB1, &[1])]);
        let (graph, clusters, ids) = cluster_attacks(&attacks, &code).unwrap();
        // Account nodes exist but nothing connects 0x01 and 0x02.
        assert_eq!(graph.nodes.len(), 4);
        assert_eq!(graph.edges.len(), 1);
        assert_eq!(clusters.len(), 3);
        // The direct attack is attributed via its primary (first) account.
        assert_eq!(ids[0], Some(0));
        assert_eq!(clusters[0].total_cost_wei, 10);
        assert_eq!(clusters[1].total_cost_wei, 0); // 0x02: node, no attacks
        assert_eq!(ids[1], Some(2));
    }

    #[test]
    fn missing_bytecode_warns_but_keeps_shared_tx_links() {
        let attacks = vec![
            attack(1, &[0x01], &[0xB1], 1, 0),
            attack(2, &[0x02], &[0xB2], 1, 0),
        ];
        // B2's code unknown, B1's empty: neither gets bytecode edges.
        let code = codes(&[(0xB1, &[])]);
        let (graph, clusters, _) = cluster_attacks(&attacks, &code).unwrap();
        assert_eq!(graph.warnings.len(), 2);
        assert!(graph.warnings[0].contains("no bytecode"));
        assert!(graph
            .edges
            .iter()
            .all(|e| e.label == EdgeLabel::SharedAttackTx));
        assert_eq!(clusters.len(), 2);
    }

    #[test]
    fn rebuilding_is_idempotent() {
        let attacks = vec![
            attack(1, &[0x01, 0x02], &[0xB1], 1, 1),
            attack(2, &[0x03], &[0xB2], 1, 1),
        ];
        let code = codes(&[(0xB1, &[9]), (0xB2, &[9])]);
        let first = cluster_attacks(&attacks, &code).unwrap();
        let second = cluster_attacks(&attacks, &code).unwrap();
        assert_eq!(first.0, second.0);
        assert_eq!(first.1, second.1);
        assert_eq!(first.2, second.2);
    }

    #[test]
    fn adding_an_attack_only_merges_clusters() {
        let base = vec![
            attack(1, &[0x01], &[0xB1], 1, 0),
            attack(2, &[0x02], &[0xB2], 1, 0),
        ];
        let code = codes(&[(0xB1, &[1]), (0xB2, &[2])]);
        let (_, before, _) = cluster_attacks(&base, &code).unwrap();
        assert_eq!(before.len(), 2);

        // Account 0x01 now also drives B2: the two clusters merge.
        let mut more = base.clone();
        more.push(attack(3, &[0x01], &[0xB2], 1, 0));
        let (_, after, _) = cluster_attacks(&more, &code).unwrap();
        assert_eq!(after.len(), 1);
        // Every pre-existing co-membership survives.
        for cluster in &before {
            let target = after
                .iter()
                .find(|c| cluster.accounts.is_subset(&c.accounts))
                .expect("old cluster maps into a new one");
            assert!(cluster.bots.is_subset(&target.bots));
        }
    }

    #[test]
    fn empty_input_produces_empty_graph_and_no_clusters() {
        let (graph, clusters, ids) = cluster_attacks(&[], &BTreeMap::new()).unwrap();
        assert!(graph.nodes.is_empty());
        assert!(clusters.is_empty());
        assert!(ids.is_empty());
    }

    /// Brute-force reachability: repeatedly merge overlapping node sets.
    fn closure_components(edges: &[(Node, Node)], nodes: &BTreeSet<Node>) -> Vec<BTreeSet<Node>> {
        let mut sets: Vec<BTreeSet<Node>> = nodes.iter().map(|n| BTreeSet::from([*n])).collect();
        let mut changed = true;
        while changed {
            changed = false;
            'outer: for i in 0..sets.len() {
                for j in i + 1..sets.len() {
                    let connected = edges.iter().any(|(a, b)| {
                        (sets[i].contains(a) && sets[j].contains(b))
                            || (sets[i].contains(b) && sets[j].contains(a))
                    });
                    if connected {
                        let merged = sets.remove(j);
                        sets[i].extend(merged);
                        changed = true;
                        break 'outer;
                    }
                }
            }
        }
        sets
    }

    #[test]
    fn components_match_brute_force_closure_on_random_graphs() {
        let mut rng = StdRng::seed_from_u64(7);
        for _ in 0..30 {
            // Random account→bot attacks plus random shared bytecode.
            let n_attacks = rng.gen_range(1..12);
            let attacks: Vec<AttackRef> = (0..n_attacks)
                .map(|i| {
                    let account = rng.gen_range(1..10u8);
                    let bot = rng.gen_range(0xB0..0xB8u8);
                    attack(i as u8 + 1, &[account], &[bot], 1, 0)
                })
                .collect();
            let mut code = BTreeMap::new();
            for b in 0xB0..0xB8u8 {
                // Two possible byte codes: collisions create bytecode edges.
                let variant = rng.gen_range(0..2u8);
                code.insert(addr(b), vec![variant]);
            }
            let (graph, clusters, _) = cluster_attacks(&attacks, &code).unwrap();

            let edge_pairs: Vec<(Node, Node)> = graph.edges.iter().map(|e| (e.a, e.b)).collect();
            let mut expected = closure_components(&edge_pairs, &graph.nodes);
            expected.sort_by_key(|s| {
                s.iter()
                    .map(|n| n.address)
                    .min()
                    .expect("non-empty component")
            });
            assert_eq!(clusters.len(), expected.len());
            for (cluster, nodes) in clusters.iter().zip(&expected) {
                let got: BTreeSet<Node> = cluster
                    .accounts
                    .iter()
                    .map(|a| Node::account(*a))
                    .chain(cluster.bots.iter().map(|b| Node::bot(*b)))
                    .collect();
                assert_eq!(&got, nodes);
            }
        }
    }
}
