//! Discrete marginal-independence models on bi-directed graphs.
//!
//! A bi-directed graph encodes *marginal* independencies through its missing
//! edges. This crate represents such graphs, derives the independence
//! structure from their disconnected node sets, builds marginal log-linear
//! parameterizations of contingency-table distributions, and computes
//! constrained maximum-likelihood fits with goodness-of-fit statistics and
//! asymptotic standard errors.
//!
//! The pieces:
//!
//! - [`graph`] — bi-directed graphs and their combinatorics (connected
//!   components, disconnected sets, independence statements, separation,
//!   induced 4-chain detection).
//! - [`table`] — contingency tables, marginalization and CSV ingestion.
//! - [`mll`] — hierarchical complete marginal log-linear parameterizations
//!   (multivariate logistic, disconnected-set and ordinary log-linear
//!   schemes), model constraint sets, ordered decomposability.
//! - [`fit`] — constrained maximum likelihood by Lagrangian Fisher scoring,
//!   with deviance, Pearson statistic and asymptotic covariances.
//! - [`oracle`] — brute-force reference maximizers used by the test suite.
//! - [`report`] — deterministic JSON fit reports.
//! - [`cli`] — the `margraph` command-line front end.
//!
//! See the `examples/` directory for runnable walk-throughs of each
//! capability; `data/` ships the bundled graph and table fixtures.

pub mod cli;
pub mod fit;
pub mod graph;
pub mod mll;
pub mod oracle;
pub mod report;
pub mod set;
pub mod table;

pub use fit::{fit, FitResult, FitSettings};
pub use graph::BidirectedGraph;
pub use mll::{ModelSpec, ParamScheme};
pub use set::VarSet;
pub use table::ContingencyTable;
