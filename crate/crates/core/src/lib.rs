//! Offline detection engine for blockchain frontrunning.
//!
//! The crate analyses a fixed snapshot of chain history — blocks, transactions,
//! token-transfer logs, execution traces, and internal value transfers — and
//! surfaces the three classic frontrunning shapes:
//!
//! * **Displacement** — an attacker observes a pending transaction, copies its
//!   payload, and gets the copy mined first with a higher gas price
//!   ([`displacement`]).
//! * **Insertion** — an attacker sandwiches a victim's exchange trade between a
//!   buy and a sell of their own, profiting from the forced slippage
//!   ([`insertion`]).
//! * **Suppression** — an attacker stuffs consecutive blocks with gas-burning
//!   transactions so a victim contract's clock runs out before anyone else can
//!   act ([`suppression`]).
//!
//! Detected attacks feed an account/contract relationship graph whose connected
//! components approximate real-world attacker identities ([`attacker_graph`]),
//! and every attack carries exact wei-level cost/profit accounting
//! ([`chain_model`]).
//!
//! Nothing here talks to a live node by default: [`ingestion`] reads
//! newline-delimited JSON fixtures (or any pluggable [`ingestion::DataSource`]),
//! and [`synthetic_chain`] fabricates seeded ground-truth chains — planted
//! attacks plus near-miss decoys — so the whole pipeline can be exercised and
//! scored deterministically on a desk machine.

pub mod attacker_graph;
pub mod bloom_ngram;
pub mod chain_model;
pub mod config;
pub mod displacement;
pub mod ingestion;
pub mod insertion;
pub mod report;
pub mod suppression;
pub mod synthetic_chain;

mod error;
#[cfg(test)]
pub(crate) mod test_support;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
