//! Screening of lottery prize-claim records for players whose winning
//! patterns are implausible for an ordinary ticket buyer.
//!
//! The crate is organised by stage:
//!
//! - [`ingest`]: claim parsing, store normalisation, per-player profiles
//! - [`prizes`]: prize tables, game mapping, model constants
//! - [`screen`]: analytic expected net gain, store entropy, outlier flags
//! - [`montecarlo`]: per-win purchase simulation and interval summaries
//! - [`cluster`]: store-distribution features and k-means
//! - [`synth`]: synthetic claim populations with known ground truth
//! - [`pipeline`]: file-level stages shared by the command-line tool

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cluster;
pub mod exec;
pub mod ingest;
pub mod money;
pub mod montecarlo;
pub mod pipeline;
pub mod prizes;
pub mod screen;
pub mod synth;

pub use exec::Execution;
pub use money::Cents;
