//! Portfolio optimization and tail-risk analytics.
//!
//! The crate covers the full historical-optimization pipeline: price ingestion
//! and return computation ([`marketdata`]), numerical kernels ([`solvers`]),
//! closed-form and constrained mean-variance portfolios ([`meanvar`]),
//! scenario-based CVaR optimization ([`cvar`]), rolling-window backtests under
//! long-only and leveraged long-short strategies ([`backtest`]), reward-risk
//! ratios ([`riskmetrics`]) and Hill tail-index estimation ([`tailrisk`]).

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod backtest;
pub mod cvar;
pub mod error;
pub mod marketdata;
pub mod meanvar;
pub mod riskmetrics;
pub mod solvers;
pub mod stats;
pub mod synthetic;
pub mod tailrisk;

pub use error::{Error, Result};
