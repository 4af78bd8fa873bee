//! Credit scoring with call networks.
//!
//! The crate turns call-detail records and bank extracts into scorecards:
//! call graphs per timeframe ([`graph`]), default-exposure propagation
//! ([`propagation`]), subject features ([`features`]), baseline classifiers
//! ([`models`]) and statistical plus profit-based evaluation ([`eval`]).
//! [`synth`] generates reproducible datasets and [`pipeline`] wires the
//! stages together.

pub mod calendar;
pub mod error;
pub mod eval;
pub mod features;
pub mod graph;
pub mod ingest;
pub mod labels;
pub mod loans;
pub mod models;
pub mod money;
pub mod netstats;
pub mod pipeline;
pub mod propagation;
pub mod rng;
pub mod synth;

pub use error::{Error, Result};
