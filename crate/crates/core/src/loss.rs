//! Loss models h(x; ξ) over a decision interval, the newsvendor instance
//! used throughout the experiments, and exact expectations under the demand
//! laws for checking coverage.

use crate::error::{Error, Result};
use crate::sample::Pmf;

/// A deterministic loss h(x; ξ): decision x in a closed interval, scalar
/// random outcome ξ. Implementations must be total and finite on the
/// domain; everything downstream (bands, calibration) only sees this trait,
/// so user losses plug in without touching the solvers.
pub trait LossModel: Sync {
    /// Loss value h(x; ξ).
    fn evaluate(&self, x: f64, outcome: f64) -> f64;

    /// Closed decision interval [lo, hi].
    fn decision_domain(&self) -> (f64, f64);
}

/// Newsvendor excess-loss parameters.
///
/// `v` price/unit, `s` salvage/unit, `l` shortage cost/unit, `c` cost/unit,
/// `rho` the loss threshold. The loss is
/// h(x; ξ) = -v·min(x, ξ) - s·(x-ξ)⁺ + l·(ξ-x)⁺ + c·x + rho.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewsvendorParams {
    pub v: f64,
    pub s: f64,
    pub l: f64,
    pub c: f64,
    pub rho: f64,
}

impl Default for NewsvendorParams {
    fn default() -> Self {
        NewsvendorParams { v: 10.0, s: 5.0, l: 4.0, c: 3.0, rho: 40.0 }
    }
}

/// Evaluate the newsvendor loss at one (decision, demand) pair.
pub fn newsvendor_eval(params: &NewsvendorParams, x: f64, demand: f64) -> f64 {
    let sold = x.min(demand);
    let leftover = (x - demand).max(0.0);
    let shortage = (demand - x).max(0.0);
    -params.v * sold - params.s * leftover + params.l * shortage + params.c * x + params.rho
}

/// The newsvendor loss as a [`LossModel`] over a decision interval.
#[derive(Debug, Clone)]
pub struct NewsvendorLoss {
    pub params: NewsvendorParams,
    domain: (f64, f64),
}

impl NewsvendorLoss {
    pub fn new(params: NewsvendorParams, domain: (f64, f64)) -> Result<Self> {
        if !(domain.0 < domain.1) || !domain.0.is_finite() || !domain.1.is_finite() {
            return Err(Error::domain("decision domain must be a finite interval"));
        }
        Ok(NewsvendorLoss { params, domain })
    }

    /// Default-parameter loss on the experiment domain [2.5, 50].
    pub fn experiment_default() -> Self {
        NewsvendorLoss { params: NewsvendorParams::default(), domain: (2.5, 50.0) }
    }
}

impl LossModel for NewsvendorLoss {
    fn evaluate(&self, x: f64, outcome: f64) -> f64 {
        newsvendor_eval(&self.params, x, outcome)
    }

    fn decision_domain(&self) -> (f64, f64) {
        self.domain
    }
}

/// An ordered grid of decision points.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionGrid {
    points: Vec<f64>,
}

impl DecisionGrid {
    pub fn new(points: Vec<f64>) -> Result<DecisionGrid> {
        if points.is_empty() {
            return Err(Error::domain("decision grid must be nonempty"));
        }
        if points.iter().any(|p| !p.is_finite()) {
            return Err(Error::domain("decision grid must be finite"));
        }
        for w in points.windows(2) {
            if !(w[0] < w[1]) {
                return Err(Error::domain("decision grid must be strictly increasing"));
            }
        }
        Ok(DecisionGrid { points })
    }

    /// `len` evenly spaced points from `lo` to `hi` inclusive.
    pub fn linspace(lo: f64, hi: f64, len: usize) -> Result<DecisionGrid> {
        if len < 1 {
            return Err(Error::domain("grid needs at least one point"));
        }
        if len == 1 {
            return DecisionGrid::new(vec![lo]);
        }
        let step = (hi - lo) / (len - 1) as f64;
        DecisionGrid::new((0..len).map(|j| lo + step * j as f64).collect())
    }

    /// The experiment grid {50j/20 : j = 1..20}.
    pub fn experiment_default() -> DecisionGrid {
        DecisionGrid::new((1..=20).map(|j| 50.0 * j as f64 / 20.0).collect())
            .expect("static grid is valid")
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Spacing of the first cell (the experiment grids are uniform).
    pub fn spacing(&self) -> f64 {
        if self.points.len() < 2 { 0.0 } else { self.points[1] - self.points[0] }
    }
}

/// Exact mean Σ_j p_j · h(x; s_j) of the loss under a finite discrete law.
pub fn true_mean_discrete(loss: &dyn LossModel, pmf: &Pmf, x: f64) -> f64 {
    pmf.support()
        .iter()
        .zip(pmf.probs())
        .map(|(&s, &p)| p * loss.evaluate(x, s))
        .sum()
}

/// Exact mean of the newsvendor loss under ξ ~ Exp(rate).
///
/// Splitting the integral at ξ = x and integrating each piece against
/// rate·e^(-rate·ξ) gives, with F(x) = 1 - e^(-rate·x):
///   E[min(x, ξ)]  = F(x)/rate
///   E[(x - ξ)⁺]   = x - F(x)/rate
///   E[(ξ - x)⁺]   = e^(-rate·x)/rate
/// so E[h] = -v·F(x)/rate - s·(x - F(x)/rate) + l·e^(-rate·x)/rate + c·x + rho.
pub fn true_mean_exponential(params: &NewsvendorParams, rate: f64, x: f64) -> Result<f64> {
    if !(rate > 0.0) || !rate.is_finite() {
        return Err(Error::domain(format!("rate must be positive, got {rate}")));
    }
    let tail = (-rate * x).exp();
    let cdf_over_rate = -(-rate * x).exp_m1() / rate;
    Ok(-params.v * cdf_over_rate - params.s * (x - cdf_over_rate) + params.l * tail / rate
        + params.c * x
        + params.rho)
}
