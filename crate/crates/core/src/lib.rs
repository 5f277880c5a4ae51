//! Log-driven self-healing diagnosis for resource-constrained nodes.
//!
//! The pipeline has three stages:
//!
//! * [`perception`] turns raw log lines into structured events through an
//!   exact template cache, semantic retrieval against the [`kb`], and a model
//!   fallback.
//! * [`reasoning`] counts events per time window and learns a sparse,
//!   prior-constrained causal graph with intra-slice (acyclic) and lag-1
//!   inter-slice edges.
//! * [`action`] extracts causal evidence from the graph, retrieves historical
//!   cases, and either decides locally or asks a model constrained to that
//!   evidence.
//!
//! [`eval`] reproduces the evaluation protocol (seeded noise injection,
//! parsing accuracy, AvgRank, RCA/E2E, latency and peak memory). Runnable
//! walkthroughs live in the crate's `examples/` directory.

pub mod action;
pub mod cli;
pub mod config;
pub mod embedding;
pub mod eval;
pub mod kb;
pub mod model;
pub mod perception;
pub mod reasoning;
pub mod text;
