//! Risk-neutral moments, distributions and dependence from option prices.
//!
//! Target payoffs are projected onto the span of traded payoffs (bond, underlying, puts,
//! calls, cross-rate calls) by least squares and the fitted portfolio is priced with
//! observed quotes. The Carr-Madan trapezoid is provided as the benchmark estimator.

pub mod error;
pub mod quad;
pub mod grid_basis;
pub mod projector;
pub mod cm_estimator;
pub mod models;
pub mod rn_distribution;
pub mod multi_asset;
pub mod fx;
pub mod ingest;
pub mod experiments;

pub use error::{Error, Result};
