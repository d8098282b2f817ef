//! Reputation computation engine, decentralized reputation consensus, and a
//! deterministic multi-agent society simulator.
//!
//! The crate is organized around the lifecycle of reputation data:
//!
//! - [`model`] — identifiers, rating records, reputation states, engine
//!   configuration and the canonical state digest.
//! - [`engine`] — the pure per-period reputation arithmetic.
//! - [`scoping`] — temporal scoping policies deciding when and over which
//!   rating windows the engine runs.
//! - [`consensus`] — the reputation-consensus round state machine,
//!   reputation-weighted proposer selection and mining rewards.
//! - [`storage`] — rating-log ingestion and snapshot persistence.
//! - [`simnet`] — scenario generation and attack experiments.
//! - [`metrics`] — rank correlation, concentration and entropy measures.
//! - [`cli`] — the `repute` command-line entry point.

pub mod cli;
pub mod consensus;
pub mod engine;
pub mod metrics;
pub mod model;
pub mod scoping;
pub mod simnet;
pub mod storage;
