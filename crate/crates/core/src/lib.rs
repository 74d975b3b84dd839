//! Gas-fee modelling toolkit.
//!
//! Supply side: [`feemech`] (block cost equation, per-resource dynamic gas,
//! base fee and the refund rule), [`builder`] (geometric transaction
//! ranking and an exhaustive oracle) and [`mechanism`] (block-by-block fee
//! simulation).
//!
//! Demand side: [`market_data`] (CSV ingestion, median resampling, summary
//! statistics), [`fbm`] and [`fou`] (fractional Brownian motion and the
//! fractional Ornstein–Uhlenbeck price process), [`estimation`] (Hurst and
//! OU calibration) and [`derivatives`] (degree-day style options).
//!
//! Batch Monte Carlo work takes an [`Execution`]; with the `parallel`
//! feature (on by default) it runs on rayon, otherwise sequentially, with
//! bit-identical results either way.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod builder;
pub mod derivatives;
pub mod error;
pub mod estimation;
pub mod exec;
pub mod fbm;
pub mod feemech;
pub mod fou;
pub mod market_data;
pub mod mechanism;
pub mod quad;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
pub use exec::Execution;
