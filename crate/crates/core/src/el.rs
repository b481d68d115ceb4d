//! Profile empirical-likelihood machinery and the confidence bands it
//! induces over the empirical Burg-entropy divergence ball.
//!
//! For observed losses h_1..h_n the ball of radius η holds every weight
//! vector w on the data with -(1/n)·Σ log(n·w_i) ≤ η. The band endpoints
//!
//!   upper = max { Σ w_i h_i : w in ball },  lower = min { ... }
//!
//! are computed by bisection on the candidate mean μ against the profile
//! log-ratio: μ is inside the band exactly when the minimal Burg divergence
//! of a weight vector with mean μ stays within the radius. The profile
//! log-ratio is convex in μ, zero at the sample mean, and rises to +∞ at the
//! extremes of the data hull, so the bisection is unconditionally stable.
//! An independent Lagrangian-dual route lives in [`crate::dual`] as a
//! cross-check.

use crate::error::{Error, Result};

/// Sentinel value of the profile log-ratio when the candidate mean is
/// outside the open hull of the data (no feasible weight vector, or only
/// ones with zero weights). This is a deliberate, documented constant - it
/// never arises from floating-point overflow.
pub const INFEASIBLE_LOGRATIO: f64 = f64::INFINITY;

/// Convergence tolerance on the tilt equation residual (values are solved
/// in unit scale, so this is close to machine precision).
const TILT_TOL: f64 = 1e-13;
/// Relative inset used to keep the tilt bracket strictly inside its open
/// interval.
const BRACKET_INSET: f64 = 1e-12;

/// Losses h(x; ξ_i) evaluated at one decision point over a sample.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluatedLoss {
    values: Vec<f64>,
}

impl EvaluatedLoss {
    pub fn new(values: Vec<f64>) -> Result<EvaluatedLoss> {
        if values.is_empty() {
            return Err(Error::domain("evaluated loss needs at least one value"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("evaluated loss values must be finite"));
        }
        Ok(EvaluatedLoss { values })
    }

    /// Evaluate a loss model at decision `x` over sampled outcomes.
    pub fn from_sample(
        loss: &dyn crate::loss::LossModel,
        x: f64,
        outcomes: &[f64],
    ) -> Result<EvaluatedLoss> {
        EvaluatedLoss::new(outcomes.iter().map(|&o| loss.evaluate(x, o)).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Collapse exactly-equal values into (value, mass) pairs. The profile
    /// solve only depends on the multiset of values, so this is exact and
    /// makes repeated solves on discrete data O(k) instead of O(n).
    pub(crate) fn grouped(&self) -> GroupedValues {
        GroupedValues::from_values(&self.values)
    }
}

/// Lower/upper DRO bounds at one decision point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Band {
    pub lower: f64,
    pub upper: f64,
}

impl Band {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, z: f64) -> bool {
        self.lower <= z && z <= self.upper
    }
}

/// Solution of one profile empirical-likelihood problem.
///
/// For a finite `logratio` the weights are a probability vector on the data
/// attaining the profiled mean; when `logratio` is the infeasibility
/// sentinel the weights are empty and `lambda` is NaN.
#[derive(Debug, Clone)]
pub struct ElSolution {
    /// Lagrange multiplier of the mean constraint (after the 1/n rescale).
    pub lambda: f64,
    /// Optimal probability weights, one per datum, in input order.
    pub weights: Vec<f64>,
    /// -2 log R(μ): twice the minimal Burg divergence times n.
    pub logratio: f64,
}

/// Values with probability masses; the shared engine behind the empirical
/// and histogram ball routes.
#[derive(Debug, Clone)]
pub(crate) struct GroupedValues {
    pub vals: Vec<f64>,
    pub masses: Vec<f64>,
    /// Total observation count behind the masses.
    pub n: f64,
}

impl GroupedValues {
    fn from_values(values: &[f64]) -> GroupedValues {
        let n = values.len();
        let mut sorted = values.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
        let mut vals = Vec::new();
        let mut masses = Vec::new();
        let mut i = 0;
        while i < n {
            let mut j = i + 1;
            while j < n && sorted[j] == sorted[i] {
                j += 1;
            }
            vals.push(sorted[i]);
            masses.push((j - i) as f64 / n as f64);
            i = j;
        }
        GroupedValues { vals, masses, n: n as f64 }
    }

    fn mean(&self) -> f64 {
        self.vals.iter().zip(&self.masses).map(|(&v, &m)| v * m).sum()
    }

    fn min(&self) -> f64 {
        self.vals.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    fn max(&self) -> f64 {
        self.vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    fn negated(&self) -> GroupedValues {
        GroupedValues {
            vals: self.vals.iter().map(|v| -v).collect(),
            masses: self.masses.clone(),
            n: self.n,
        }
    }
}

/// Root of the tilt equation Σ m_i·t_i/(1 + u·t_i) = 0 for centred,
/// unit-scaled values t with min < 0 < max, on the open bracket
/// (-1/max t, -1/min t). The left-hand side is strictly decreasing with
/// opposite signs at the ends, so bracketed Newton with a bisection
/// safeguard always converges.
fn solve_tilt(t: &[f64], masses: &[f64]) -> f64 {
    let t_max = t.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let t_min = t.iter().cloned().fold(f64::INFINITY, f64::min);
    debug_assert!(t_min < 0.0 && t_max > 0.0);
    let mut lo = (-1.0 / t_max) * (1.0 - BRACKET_INSET);
    let mut hi = (-1.0 / t_min) * (1.0 - BRACKET_INSET);
    let mut u = 0.0;
    for _ in 0..200 {
        let mut psi = 0.0;
        let mut dpsi = 0.0;
        for (&ti, &mi) in t.iter().zip(masses) {
            let denom = 1.0 + u * ti;
            let ratio = ti / denom;
            psi += mi * ratio;
            dpsi -= mi * ratio * ratio;
        }
        if psi.abs() <= TILT_TOL {
            break;
        }
        if psi > 0.0 {
            lo = u;
        } else {
            hi = u;
        }
        let newton = u - psi / dpsi;
        let next = if newton.is_finite() && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if next == u || hi - lo <= f64::EPSILON * (1.0 + u.abs()) {
            break;
        }
        u = next;
    }
    u
}

/// Profile log-ratio of `grouped` at candidate mean `mu`, together with the
/// unit-scaled tilt root and the scale that undoes the normalisation.
/// Returns `None` when `mu` is not in the open hull of the values.
fn profile_grouped(grouped: &GroupedValues, mu: f64) -> Option<(f64, f64)> {
    let min = grouped.min();
    let max = grouped.max();
    if min == max {
        return if mu == min { Some((0.0, 1.0)) } else { None };
    }
    if !(mu > min && mu < max) {
        return None;
    }
    let scale = (max - mu).abs().max((min - mu).abs());
    let t: Vec<f64> = grouped.vals.iter().map(|&v| (v - mu) / scale).collect();
    let u = solve_tilt(&t, &grouped.masses);
    let logratio = 2.0
        * grouped.n
        * t.iter()
            .zip(&grouped.masses)
            .map(|(&ti, &mi)| mi * (u * ti).ln_1p())
            .sum::<f64>();
    // The profile log-ratio is nonnegative by construction; tiny negative
    // values can appear from rounding at mu equal to the sample mean.
    Some((u / scale, logratio.max(0.0)))
}

/// Profile empirical-likelihood log-ratio -2 log R(μ) for the candidate
/// mean `mu`, with the maximising weights.
///
/// Feasible case (min < μ < max): solves the tilt equation
/// (1/n)·Σ (h_i-μ)/(1+λ(h_i-μ)) = 0 and returns weights
/// w_i = 1/(n(1+λ(h_i-μ))) with logratio 2·Σ log(1+λ(h_i-μ)).
/// For μ outside the open hull the logratio is [`INFEASIBLE_LOGRATIO`];
/// for all-equal data the logratio is 0 at that value and infeasible
/// elsewhere.
pub fn profile_el_logratio(loss: &EvaluatedLoss, mu: f64) -> Result<ElSolution> {
    if !mu.is_finite() {
        return Err(Error::domain(format!("candidate mean must be finite, got {mu}")));
    }
    let n = loss.n() as f64;
    let min = loss.min();
    let max = loss.max();
    if min == max {
        return Ok(if mu == min {
            ElSolution { lambda: 0.0, weights: vec![1.0 / n; loss.n()], logratio: 0.0 }
        } else {
            infeasible_solution()
        });
    }
    let grouped = loss.grouped();
    match profile_grouped(&grouped, mu) {
        None => Ok(infeasible_solution()),
        Some((lambda, logratio)) => {
            let weights: Vec<f64> = loss
                .values()
                .iter()
                .map(|&h| 1.0 / (n * (1.0 + lambda * (h - mu))))
                .collect();
            Ok(ElSolution { lambda, weights, logratio })
        }
    }
}

fn infeasible_solution() -> ElSolution {
    ElSolution { lambda: f64::NAN, weights: Vec::new(), logratio: INFEASIBLE_LOGRATIO }
}

/// sup { μ ≥ mean : profile log-ratio of μ ≤ kappa } by bisection on
/// [mean, max). The log-ratio is continuous, increasing on this interval and
/// +∞ at max, so the returned feasible endpoint is within `tol` of the
/// supremum.
fn bisect_upper(grouped: &GroupedValues, kappa: f64, tol: f64) -> f64 {
    let mut lo = grouped.mean();
    let mut hi = grouped.max();
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break; // interval no longer splittable in f64
        }
        let feasible = match profile_grouped(grouped, mid) {
            Some((_, logratio)) => logratio <= kappa,
            None => false,
        };
        if feasible {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

fn band_from_grouped(grouped: &GroupedValues, eta: f64) -> Band {
    let mean = grouped.mean();
    if grouped.min() == grouped.max() || eta == 0.0 {
        // Degenerate data or a zero radius: the ball is the empirical
        // distribution itself.
        return Band { lower: mean, upper: mean };
    }
    let kappa = 2.0 * grouped.n * eta;
    let tol = 1e-9 * (1.0 + grouped.max() - grouped.min());
    let upper = bisect_upper(grouped, kappa, tol);
    let lower = -bisect_upper(&grouped.negated(), kappa, tol);
    Band { lower, upper }
}

/// DRO bounds over the empirical Burg divergence ball of radius `eta`:
/// the extremes of Σ w_i·h_i over probability weights w on the data with
/// -(1/n)·Σ log(n·w_i) ≤ eta.
pub fn band_from_radius(loss: &EvaluatedLoss, eta: f64) -> Result<Band> {
    if !eta.is_finite() || eta < 0.0 {
        return Err(Error::domain(format!("radius must satisfy eta >= 0, got {eta}")));
    }
    Ok(band_from_grouped(&loss.grouped(), eta))
}

/// DRO bounds over the histogram-ball: extremes of Σ p_i·h(s_i) over
/// probability vectors p on the support with -Σ p̂_i log(p_i/p̂_i) ≤ eta,
/// where p̂_i = counts_i / n. Support points with zero count carry no mass
/// (the ball requires absolute continuity w.r.t. the histogram) and are
/// dropped. Equals [`band_from_radius`] on the count-expanded sample.
pub fn histogram_band(support_losses: &[f64], counts: &[u64], eta: f64) -> Result<Band> {
    if support_losses.len() != counts.len() || support_losses.is_empty() {
        return Err(Error::domain(
            "histogram band needs equal, nonzero numbers of losses and counts",
        ));
    }
    if support_losses.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain("support losses must be finite"));
    }
    if !eta.is_finite() || eta < 0.0 {
        return Err(Error::domain(format!("radius must satisfy eta >= 0, got {eta}")));
    }
    let n: u64 = counts.iter().sum();
    if n == 0 {
        return Err(Error::domain("histogram band needs at least one observation"));
    }
    let mut vals = Vec::new();
    let mut masses = Vec::new();
    for (&v, &c) in support_losses.iter().zip(counts) {
        if c > 0 {
            vals.push(v);
            masses.push(c as f64 / n as f64);
        }
    }
    let grouped = GroupedValues { vals, masses, n: n as f64 };
    Ok(band_from_grouped(&grouped, eta))
}

/// DRO bounds over the Burg ball on a declared support set: probability
/// vectors on *all* the support points (zero-count cells included) whose
/// divergence from the histogram is within `eta`.
///
/// The Burg generator -log r + r - 1 has unit slope at infinity, so with
/// the simplex constraint the divergence reduces to the observed-cell sum
/// -Σ p̂_i log(p_i/p̂_i) and unobserved support points can absorb mass at no
/// further divergence cost; this ball strictly contains the observed-only
/// ball of [`histogram_band`] whenever a cell is empty. Solved through the
/// Lagrangian dual with the multiplier capped by the empty-cell constraint.
pub fn support_band(support_losses: &[f64], counts: &[u64], eta: f64) -> Result<Band> {
    if support_losses.len() != counts.len() || support_losses.is_empty() {
        return Err(Error::domain(
            "support band needs equal, nonzero numbers of losses and counts",
        ));
    }
    if support_losses.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain("support losses must be finite"));
    }
    if !eta.is_finite() || eta < 0.0 {
        return Err(Error::domain(format!("radius must satisfy eta >= 0, got {eta}")));
    }
    let n: u64 = counts.iter().sum();
    if n == 0 {
        return Err(Error::domain("support band needs at least one observation"));
    }
    let mut observed = Vec::new();
    let mut masses = Vec::new();
    let mut empty = Vec::new();
    for (&v, &c) in support_losses.iter().zip(counts) {
        if c > 0 {
            observed.push(v);
            masses.push(c as f64 / n as f64);
        } else {
            empty.push(v);
        }
    }
    if empty.is_empty() {
        let grouped = GroupedValues { vals: observed, masses, n: n as f64 };
        return Ok(band_from_grouped(&grouped, eta));
    }
    let upper = crate::dual::support_dual_sup(&observed, &masses, &empty, eta);
    let neg_observed: Vec<f64> = observed.iter().map(|v| -v).collect();
    let neg_empty: Vec<f64> = empty.iter().map(|v| -v).collect();
    let lower = -crate::dual::support_dual_sup(&neg_observed, &masses, &neg_empty, eta);
    Ok(Band { lower, upper })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn loss(values: &[f64]) -> EvaluatedLoss {
        EvaluatedLoss::new(values.to_vec()).unwrap()
    }

    #[test]
    fn logratio_zero_at_sample_mean() {
        let l = loss(&[1.0, 2.0, 3.0, 7.5]);
        let sol = profile_el_logratio(&l, l.mean()).unwrap();
        assert!(sol.logratio.abs() < 1e-12);
        assert!(sol.lambda.abs() < 1e-10);
        for &w in &sol.weights {
            assert!((w - 0.25).abs() < 1e-10);
        }
    }

    #[test]
    fn logratio_outside_hull_is_sentinel() {
        let l = loss(&[1.0, 2.0, 3.0]);
        assert_eq!(profile_el_logratio(&l, 5.0).unwrap().logratio, INFEASIBLE_LOGRATIO);
        assert_eq!(profile_el_logratio(&l, 1.0).unwrap().logratio, INFEASIBLE_LOGRATIO);
        assert_eq!(profile_el_logratio(&l, 3.0).unwrap().logratio, INFEASIBLE_LOGRATIO);
        assert!(profile_el_logratio(&l, f64::NAN).is_err());
    }

    #[test]
    fn logratio_reference_value() {
        // Frozen from the dense lambda-grid oracle in tests/oracles.
        let l = loss(&[1.0, 2.0, 3.0]);
        let sol = profile_el_logratio(&l, 1.5).unwrap();
        assert!((sol.logratio - 1.2602839239449684).abs() < 1e-9, "{}", sol.logratio);
    }

    #[test]
    fn solution_weights_are_feasible() {
        let l = loss(&[-3.0, 0.5, 0.5, 2.0, 11.0]);
        for &mu in &[-1.0, 0.0, 0.5, 2.2, 9.0] {
            let sol = profile_el_logratio(&l, mu).unwrap();
            assert!(sol.logratio >= 0.0);
            let total: f64 = sol.weights.iter().sum();
            assert!((total - 1.0).abs() <= 1e-10, "sum {total}");
            let mean: f64 =
                sol.weights.iter().zip(l.values()).map(|(&w, &h)| w * h).sum();
            assert!((mean - mu).abs() <= 1e-8 * (1.0 + mu.abs()));
            assert!(sol.weights.iter().all(|&w| w >= 0.0));
        }
    }

    #[test]
    fn logratio_blows_up_at_hull_boundary() {
        let l = loss(&[0.0, 1.0, 2.0, 5.0]);
        let range = 5.0;
        let near_max = 5.0 - 1e-6 * range;
        let sol = profile_el_logratio(&l, near_max).unwrap();
        assert!(sol.logratio > 20.0, "logratio {}", sol.logratio);
    }

    #[test]
    fn band_zero_radius_is_sample_mean() {
        let l = loss(&[1.0, 2.0, 4.0]);
        let band = band_from_radius(&l, 0.0).unwrap();
        assert_eq!(band.lower, band.upper);
        assert!((band.upper - l.mean()).abs() < 1e-12);
    }

    #[test]
    fn band_degenerate_data_is_zero_width() {
        let l = loss(&[3.5; 9]);
        for &eta in &[0.0, 0.1, 5.0] {
            let band = band_from_radius(&l, eta).unwrap();
            assert_eq!(band.lower, 3.5);
            assert_eq!(band.upper, 3.5);
        }
    }

    #[test]
    fn band_reference_value() {
        // Frozen from the refined simplex-search oracle in tests/oracles.
        let l = loss(&[1.0, 2.0, 3.0]);
        let band = band_from_radius(&l, 0.1).unwrap();
        assert!((band.lower - 1.6442878965031906).abs() < 1e-6, "lower {}", band.lower);
        assert!((band.upper - 2.3557121034968094).abs() < 1e-6, "upper {}", band.upper);
    }

    #[test]
    fn band_rejects_negative_radius() {
        let l = loss(&[1.0, 2.0]);
        assert!(band_from_radius(&l, -0.01).is_err());
        assert!(band_from_radius(&l, f64::NAN).is_err());
    }

    #[test]
    fn band_contains_mean_and_nests_in_radius() {
        let l = loss(&[-2.0, 0.0, 1.0, 1.0, 3.0, 8.0]);
        let mean = l.mean();
        let mut prev = band_from_radius(&l, 0.0).unwrap();
        for i in 1..=20 {
            let eta = i as f64 * 0.08;
            let band = band_from_radius(&l, eta).unwrap();
            assert!(band.contains(mean));
            assert!(band.lower <= prev.lower + 1e-12);
            assert!(band.upper >= prev.upper - 1e-12);
            assert!(band.lower >= l.min() && band.upper <= l.max());
            prev = band;
        }
    }

    #[test]
    fn histogram_band_zero_radius_and_single_atom() {
        let band = histogram_band(&[4.0], &[12], 0.3).unwrap();
        assert_eq!(band.lower, 4.0);
        assert_eq!(band.upper, 4.0);

        let band = histogram_band(&[1.0, 5.0], &[3, 1], 0.0).unwrap();
        assert!((band.upper - 2.0).abs() < 1e-12);
        assert_eq!(band.lower, band.upper);
    }

    #[test]
    fn histogram_band_rejects_empty_histogram() {
        assert!(histogram_band(&[1.0, 2.0], &[0, 0], 0.1).is_err());
        assert!(histogram_band(&[], &[], 0.1).is_err());
        assert!(histogram_band(&[1.0], &[2, 3], 0.1).is_err());
    }

    #[test]
    fn histogram_band_matches_expanded_sample() {
        // The histogram route must agree with the empirical-ball route on
        // the count-expanded data, for any radius.
        let support = [-1.0, 0.5, 2.0];
        let counts = [5_u64, 4, 3];
        let mut expanded = Vec::new();
        for (&v, &c) in support.iter().zip(&counts) {
            expanded.extend(std::iter::repeat(v).take(c as usize));
        }
        let l = loss(&expanded);
        for &eta in &[0.01, 0.05, 0.2, 0.8, 2.0] {
            let a = histogram_band(&support, &counts, eta).unwrap();
            let b = band_from_radius(&l, eta).unwrap();
            assert!((a.lower - b.lower).abs() < 1e-8, "eta {eta}");
            assert!((a.upper - b.upper).abs() < 1e-8, "eta {eta}");
        }
    }

    #[test]
    fn histogram_band_ignores_empty_cells() {
        let a = histogram_band(&[1.0, 2.0, 9.0], &[3, 0, 2], 0.15).unwrap();
        let b = histogram_band(&[1.0, 9.0], &[3, 2], 0.15).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn logratio_is_convex_in_mu() {
        let l = loss(&[0.0, 1.0, 1.5, 4.0, 6.0]);
        let d2 = |mu: f64| profile_el_logratio(&l, mu).unwrap().logratio;
        let (a, b) = (0.7, 5.2);
        for i in 1..20 {
            let t = i as f64 / 20.0;
            let mid = t * a + (1.0 - t) * b;
            assert!(d2(mid) <= t * d2(a) + (1.0 - t) * d2(b) + 1e-8);
        }
    }
}
