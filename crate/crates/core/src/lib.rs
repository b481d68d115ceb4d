//! Data-driven confidence bands for expected-value constraints
//! E[h(x; ξ)] ≤ 0, built from distributionally robust optimization over
//! Burg-entropy divergence balls centered at the empirical distribution.
//!
//! Given i.i.d. observations ξ_1..ξ_n and a loss h, the band at a decision
//! point x is the range of Σ w_i·h(x; ξ_i) over probability weights w with
//! -(1/n)·Σ log(n·w_i) ≤ η. The profile empirical-likelihood duality makes
//! the endpoints computable by a 1-D bisection ([`el`]), with a conjugate
//! Lagrangian dual as an independent route ([`dual`]). The radius η is
//! calibrated from chi-square quantiles for single-point coverage or from
//! the excursion quantile of the squared standardized loss field for
//! simultaneous coverage over a decision interval ([`calibrate`]). A
//! seeded Monte Carlo harness measures the realized coverage ([`experiment`])
//! and backs the `el-dro` command-line tool.
//!
//! ```
//! use el_dro::el::{band_from_radius, EvaluatedLoss};
//!
//! let losses = EvaluatedLoss::new(vec![1.0, 2.0, 3.0]).unwrap();
//! let band = band_from_radius(&losses, 0.1).unwrap();
//! assert!(band.lower < 2.0 && 2.0 < band.upper);
//! ```

pub mod calibrate;
pub mod dual;
pub mod el;
mod error;
pub mod experiment;
pub mod loss;
pub mod sample;
pub mod stats;

pub use error::{Error, Result};
