//! Simulation and analysis of route discovery in payment channel networks
//! whose trampoline nodes answer route queries selfishly.
//!
//! The crate is organised bottom-up:
//!
//! * [`graph`] – the network model, routes and hop neighborhoods;
//! * [`ingest`] – `describegraph` snapshot reader;
//! * [`topology`] – ring, scale-free, clique and adversarial generators;
//! * [`pathing`] – all-pairs, single-source, hop-limited and k-shortest routes;
//! * [`availability`] – liquidity and failure models;
//! * [`discovery`] – trampoline / partial / altruistic servers and the wallet;
//! * [`metrics`] – workloads, stretch, leak rate and analytic bounds;
//! * [`experiment`] – declarative experiment runs producing CSV;
//! * [`lemmas`] – executable checks of the worst-case constructions.

pub mod availability;
pub mod discovery;
pub mod experiment;
pub mod graph;
pub mod ingest;
pub mod lemmas;
pub mod metrics;
pub mod pathing;
pub mod seed;
pub mod topology;

pub use graph::{Channel, ChannelId, Msat, Network, NodeId, Route, Weight};

/// Payment size used throughout the experiments, in msat.
pub const DEFAULT_AMOUNT: Msat = 1_000_000;
