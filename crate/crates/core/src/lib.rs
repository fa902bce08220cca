//! Diesel feedgas emissions modeling and economic MPC.
//!
//! The crate hosts the full desk-scale stack: dense neural-network emissions
//! models with exact reverse-mode gradients ([`nn`]), batch SGD training and
//! hyperparameter search ([`train`]), a surrogate mean-value airpath plant
//! with a synthetic emissions ground truth ([`plant`]), open-loop
//! identification data generation ([`ident`]), a PI inner loop tracking
//! airpath set-points ([`airpath`]), the rate-based economic MPC ([`empc`]),
//! and the scenario/metrics harness behind the CLI ([`harness`]).

pub mod airpath;
pub mod config;
pub mod empc;
pub mod error;
pub mod harness;
pub mod ident;
pub mod nn;
pub mod plant;
pub mod train;

pub use error::{Error, Result};
pub use nn::{EmissionsState, FnnInput, NnParams, RnnInput};
