//! Radius policies for the divergence ball.
//!
//! Three families are supported: the fixed chi-square radii (df 1 for one
//! decision point, df k-1 for a k-cell histogram), and the excursion-based
//! radius for simultaneous bands, where the threshold is the (1-α) quantile
//! of the supremum of the squared standardized loss field over the decision
//! interval. The excursion quantile comes either from the
//! Euler-characteristic tail approximation
//!
//!   P(sup J ≥ u) ≈ P(χ²₁ ≥ u) + L₁·e^(-u/2)/π
//!
//! with L₁ = ∫ √Λ(x) dx the first Lipschitz-Killing curvature of the
//! domain under the field metric, or from direct Monte Carlo on the grid
//! correlation matrix. The two routes validate each other.

use crate::error::{Error, Result};
use crate::loss::{DecisionGrid, LossModel};
use crate::sample::{uniform_open01, RandomSeed};
use crate::stats::{chi2_quantile, std_normal_quantile};

/// Default finite-difference step as a fraction of grid spacing.
pub const DEFAULT_DELTA_FRACTION: f64 = 0.5;

/// How the divergence-ball radius is chosen.
#[derive(Debug, Clone)]
pub struct RadiusPolicy {
    pub alpha: f64,
    pub variant: PolicyVariant,
}

#[derive(Debug, Clone)]
pub enum PolicyVariant {
    /// χ²₁ quantile: asymptotically exact at a single decision point.
    PointwiseChi2,
    /// χ²_{k-1} quantile for a k-cell histogram ball.
    HistogramChi2 { k: usize },
    /// Excursion quantile via the Euler-characteristic approximation,
    /// integrating √Λ over `grid` with finite-difference step `delta`.
    ExcursionEuler { grid: DecisionGrid, delta: f64 },
    /// Excursion quantile by Monte Carlo over the grid correlation matrix.
    ExcursionMc { grid: DecisionGrid, reps: usize, seed: RandomSeed },
}

impl RadiusPolicy {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::domain(format!(
                "alpha must lie in (0,1), got {}",
                self.alpha
            )));
        }
        match &self.variant {
            PolicyVariant::PointwiseChi2 => Ok(()),
            PolicyVariant::HistogramChi2 { k } if *k < 2 => {
                Err(Error::domain(format!("histogram policy needs k >= 2, got {k}")))
            }
            PolicyVariant::HistogramChi2 { .. } => Ok(()),
            PolicyVariant::ExcursionEuler { delta, .. } if !(*delta > 0.0) => {
                Err(Error::domain("excursion policy needs delta > 0"))
            }
            PolicyVariant::ExcursionEuler { .. } => Ok(()),
            PolicyVariant::ExcursionMc { reps, .. } if *reps < 1000 => {
                Err(Error::domain(format!("mc policy needs reps >= 1000, got {reps}")))
            }
            PolicyVariant::ExcursionMc { .. } => Ok(()),
        }
    }

    /// Short tag for reports.
    pub fn tag(&self) -> &'static str {
        match self.variant {
            PolicyVariant::PointwiseChi2 => "chi2-1",
            PolicyVariant::HistogramChi2 { .. } => "chi2-k",
            PolicyVariant::ExcursionEuler { .. } => "euler",
            PolicyVariant::ExcursionMc { .. } => "mc",
        }
    }

    /// Whether the radius depends on the realized sample.
    pub fn is_data_driven(&self) -> bool {
        matches!(
            self.variant,
            PolicyVariant::ExcursionEuler { .. } | PolicyVariant::ExcursionMc { .. }
        )
    }

    /// Compute the radius for a sample of `outcomes` of size n under `loss`.
    pub fn calibrate(&self, loss: &dyn LossModel, outcomes: &[f64]) -> Result<CalibrationResult> {
        self.validate()?;
        let n = outcomes.len();
        match &self.variant {
            PolicyVariant::PointwiseChi2 => pointwise_radius(self.alpha, n),
            PolicyVariant::HistogramChi2 { k } => histogram_radius(self.alpha, n, *k),
            PolicyVariant::ExcursionEuler { grid, delta } => {
                euler_radius(loss, outcomes, grid, *delta, self.alpha)
            }
            PolicyVariant::ExcursionMc { grid, reps, seed } => {
                let (q, dropped) =
                    mc_sup_quantile(loss, outcomes, grid, self.alpha, *reps, *seed)?;
                Ok(CalibrationResult {
                    q,
                    eta: q / (2.0 * n as f64),
                    l1: None,
                    method: "mc",
                    dropped_points: dropped,
                })
            }
        }
    }
}

/// A calibrated radius: raw quantile `q` on the χ² scale and the ball
/// radius `eta = q / (2n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationResult {
    pub q: f64,
    pub eta: f64,
    /// First Lipschitz-Killing curvature (present for the Euler route).
    pub l1: Option<f64>,
    /// Policy tag that produced this radius.
    pub method: &'static str,
    /// Grid points dropped for zero sample variance (MC route only).
    pub dropped_points: usize,
}

/// Radius from the χ²₁ quantile: q = χ²_{1,1-α}, eta = q/(2n).
pub fn pointwise_radius(alpha: f64, n: usize) -> Result<CalibrationResult> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::domain(format!("alpha must lie in (0,1), got {alpha}")));
    }
    if n < 1 {
        return Err(Error::domain("sample size must be at least 1"));
    }
    let q = chi2_quantile(1, 1.0 - alpha)?;
    Ok(CalibrationResult {
        q,
        eta: q / (2.0 * n as f64),
        l1: None,
        method: "chi2-1",
        dropped_points: 0,
    })
}

/// Radius from the χ²_{k-1} quantile for a k-cell histogram ball.
pub fn histogram_radius(alpha: f64, n: usize, k: usize) -> Result<CalibrationResult> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::domain(format!("alpha must lie in (0,1), got {alpha}")));
    }
    if n < 1 {
        return Err(Error::domain("sample size must be at least 1"));
    }
    if k < 2 {
        return Err(Error::domain(format!("histogram radius needs k >= 2, got {k}")));
    }
    let q = chi2_quantile((k - 1) as u32, 1.0 - alpha)?;
    Ok(CalibrationResult {
        q,
        eta: q / (2.0 * n as f64),
        l1: None,
        method: "chi2-k",
        dropped_points: 0,
    })
}

/// Sample correlation of the loss field between decision points `x1`, `x2`.
pub fn empirical_correlation(
    loss: &dyn LossModel,
    outcomes: &[f64],
    x1: f64,
    x2: f64,
) -> Result<f64> {
    if outcomes.len() < 2 {
        return Err(Error::domain("correlation needs at least two observations"));
    }
    let n = outcomes.len() as f64;
    let h1: Vec<f64> = outcomes.iter().map(|&o| loss.evaluate(x1, o)).collect();
    let h2: Vec<f64> = outcomes.iter().map(|&o| loss.evaluate(x2, o)).collect();
    let m1 = h1.iter().sum::<f64>() / n;
    let m2 = h2.iter().sum::<f64>() / n;
    let mut cross = 0.0;
    let mut var1 = 0.0;
    let mut var2 = 0.0;
    for (a, b) in h1.iter().zip(&h2) {
        let da = a - m1;
        let db = b - m2;
        cross += da * db;
        var1 += da * da;
        var2 += db * db;
    }
    if var1 == 0.0 || var2 == 0.0 {
        return Err(Error::degenerate(format!(
            "zero sample variance at decision point {}",
            if var1 == 0.0 { x1 } else { x2 }
        )));
    }
    Ok((cross / (var1 * var2).sqrt()).clamp(-1.0, 1.0))
}

/// Second cross-derivative of the field correlation at (x, x), by the
/// central stencil: since r(x+δ, x+δ) = r(x-δ, x-δ) = 1 exactly,
/// Λ(x) ≈ (1 - r(x+δ, x-δ)) / (2δ²), clamped at zero.
///
/// Correlations within 1e-12 of 1 are treated as exactly 1: below that the
/// residual is accumulation noise, and the square root taken by the
/// curvature integral would amplify it.
pub fn lambda_x(loss: &dyn LossModel, outcomes: &[f64], x: f64, delta: f64) -> Result<f64> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::domain(format!("delta must be positive, got {delta}")));
    }
    let (lo, hi) = loss.decision_domain();
    if x - delta < lo || x + delta > hi {
        return Err(Error::domain(format!(
            "stencil [{}, {}] leaves the decision domain [{lo}, {hi}]",
            x - delta,
            x + delta
        )));
    }
    let r = empirical_correlation(loss, outcomes, x + delta, x - delta)?;
    let gap = if 1.0 - r <= 1e-12 { 0.0 } else { 1.0 - r };
    Ok((gap / (2.0 * delta * delta)).max(0.0))
}

/// First Lipschitz-Killing curvature L₁ = ∫ √Λ(x) dx, by the trapezoid
/// rule over `grid`. Every grid point must keep a margin of `delta` to the
/// decision-domain boundary so the central stencil stays inside.
pub fn lk_curvature_l1(
    loss: &dyn LossModel,
    outcomes: &[f64],
    grid: &DecisionGrid,
    delta: f64,
) -> Result<f64> {
    let pts = grid.points();
    let roots: Vec<f64> = pts
        .iter()
        .map(|&x| lambda_x(loss, outcomes, x, delta).map(f64::sqrt))
        .collect::<Result<_>>()?;
    let mut integral = 0.0;
    for i in 1..pts.len() {
        integral += 0.5 * (pts[i] - pts[i - 1]) * (roots[i] + roots[i - 1]);
    }
    Ok(integral)
}

/// Euler-characteristic approximation of the excursion tail:
/// P(sup J ≥ u) ≈ P(χ²₁ ≥ u) + L₁·e^(-u/2)/π.
pub fn euler_tail(u: f64, l1: f64) -> Result<f64> {
    if !(u > 0.0) || !u.is_finite() {
        return Err(Error::domain(format!("euler_tail requires u > 0, got {u}")));
    }
    if !(l1 >= 0.0) || !l1.is_finite() {
        return Err(Error::domain(format!("euler_tail requires L1 >= 0, got {l1}")));
    }
    Ok((1.0 - crate::stats::chi2_cdf(1, u)?) + l1 * (-u / 2.0).exp() / std::f64::consts::PI)
}

/// Root of euler_tail(u, L1) = alpha in u.
///
/// The left bracket endpoint χ²_{1,1-α} has tail ≥ α and the tail decays to
/// zero, so doubling the bracket and bisecting always isolates the unique
/// root; absolute tolerance 1e-8.
pub fn solve_qn(l1: f64, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::domain(format!("alpha must lie in (0,1), got {alpha}")));
    }
    if !(l1 >= 0.0) || !l1.is_finite() {
        return Err(Error::domain(format!("solve_qn requires L1 >= 0, got {l1}")));
    }
    let lo0 = chi2_quantile(1, 1.0 - alpha)?;
    if l1 == 0.0 {
        return Ok(lo0);
    }
    let mut gap = 1.0;
    let mut hi = lo0 + gap;
    while euler_tail(hi, l1)? > alpha {
        gap *= 2.0;
        hi = lo0 + gap;
        if gap > 1e6 {
            return Err(Error::numerical("excursion quantile bracket expansion failed"));
        }
    }
    let mut lo = lo0;
    while hi - lo > 1e-8 {
        let mid = 0.5 * (lo + hi);
        if euler_tail(mid, l1)? > alpha {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Excursion radius via the Euler-characteristic route: estimates L₁ from
/// the sample, then solves the tail equation. By construction q is at least
/// the χ²₁ quantile.
pub fn euler_radius(
    loss: &dyn LossModel,
    outcomes: &[f64],
    grid: &DecisionGrid,
    delta: f64,
    alpha: f64,
) -> Result<CalibrationResult> {
    let l1 = lk_curvature_l1(loss, outcomes, grid, delta)?;
    let q = solve_qn(l1, alpha)?;
    Ok(CalibrationResult {
        q,
        eta: q / (2.0 * outcomes.len() as f64),
        l1: Some(l1),
        method: "euler",
        dropped_points: 0,
    })
}

/// Lower-triangular Cholesky factor of a symmetric matrix, or None if a
/// pivot fails.
fn cholesky(matrix: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = matrix.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = matrix[i][j];
            for k in 0..j {
                sum -= l[i][k] * l[j][k];
            }
            if i == j {
                if sum <= 0.0 {
                    return None;
                }
                l[i][j] = sum.sqrt();
            } else {
                l[i][j] = sum / l[j][j];
            }
        }
    }
    Some(l)
}

/// Monte Carlo estimate of the (1-α) quantile of sup over the grid of the
/// squared standardized loss field, simulated from the empirical grid
/// correlation matrix.
///
/// Grid points with zero sample variance are dropped (their count is
/// returned); the factorization adds diagonal jitter escalating tenfold
/// from 1e-8 to at most 1e-4 before giving up. The quantile is the order
/// statistic at rank ceil((1-α)·reps) of the sorted maxima.
pub fn mc_sup_quantile(
    loss: &dyn LossModel,
    outcomes: &[f64],
    grid: &DecisionGrid,
    alpha: f64,
    reps: usize,
    seed: RandomSeed,
) -> Result<(f64, usize)> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::domain(format!("alpha must lie in (0,1), got {alpha}")));
    }
    if reps < 1000 {
        return Err(Error::domain(format!("mc quantile needs reps >= 1000, got {reps}")));
    }
    // Keep only non-degenerate grid points.
    let mut active = Vec::new();
    for &x in grid.points() {
        let h: Vec<f64> = outcomes.iter().map(|&o| loss.evaluate(x, o)).collect();
        let mean = h.iter().sum::<f64>() / h.len() as f64;
        if h.iter().any(|&v| v != mean) {
            active.push(x);
        }
    }
    let dropped = grid.len() - active.len();
    if active.is_empty() {
        return Err(Error::degenerate("loss field is degenerate at every grid point"));
    }
    let g = active.len();
    let mut corr = vec![vec![0.0; g]; g];
    for i in 0..g {
        corr[i][i] = 1.0;
        for j in 0..i {
            let r = empirical_correlation(loss, outcomes, active[i], active[j])?;
            corr[i][j] = r;
            corr[j][i] = r;
        }
    }
    let factor = {
        let mut found = None;
        let mut jitter = 0.0;
        loop {
            let mut jittered = corr.clone();
            for (i, row) in jittered.iter_mut().enumerate() {
                row[i] += jitter;
            }
            if let Some(l) = cholesky(&jittered) {
                found = Some(l);
                break;
            }
            jitter = if jitter == 0.0 { 1e-8 } else { jitter * 10.0 };
            if jitter > 1e-4 {
                break;
            }
        }
        found.ok_or_else(|| {
            Error::degenerate("grid correlation matrix is not positive definite under max jitter")
        })?
    };
    let mut rng = seed.rng();
    let mut z = vec![0.0; g];
    let mut maxima = Vec::with_capacity(reps);
    for _ in 0..reps {
        for zi in z.iter_mut() {
            *zi = std_normal_quantile(uniform_open01(&mut rng))?;
        }
        let mut sup = 0.0_f64;
        for (i, row) in factor.iter().enumerate() {
            let mut y = 0.0;
            for j in 0..=i {
                y += row[j] * z[j];
            }
            sup = sup.max(y * y);
        }
        maxima.push(sup);
    }
    maxima.sort_by(|a, b| a.partial_cmp(b).expect("finite maxima"));
    let rank = ((1.0 - alpha) * reps as f64).ceil() as usize;
    let idx = rank.clamp(1, reps) - 1;
    Ok((maxima[idx], dropped))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loss::NewsvendorLoss;
    use crate::sample::sample_exponential;

    const CHI2_1_95: f64 = 3.841458820694124;

    #[test]
    fn pointwise_radius_reference_values() {
        let cal = pointwise_radius(0.05, 30).unwrap();
        assert!((cal.q - CHI2_1_95).abs() < 1e-9);
        assert_eq!(cal.eta, cal.q / 60.0);
        let half = pointwise_radius(0.05, 60).unwrap();
        assert_eq!(half.eta, cal.eta / 2.0);
        let median = pointwise_radius(0.5, 10).unwrap();
        assert!((median.q - 0.454936423119572).abs() < 1e-9);
    }

    #[test]
    fn histogram_radius_reference_values() {
        let cal = histogram_radius(0.05, 30, 5).unwrap();
        assert!((cal.q - 9.487729036781154).abs() < 1e-9);
        // k = 2 matches the pointwise radius exactly.
        let a = histogram_radius(0.05, 40, 2).unwrap();
        let b = pointwise_radius(0.05, 40).unwrap();
        assert_eq!(a.q, b.q);
        assert_eq!(a.eta, b.eta);
        // q grows with the cell count.
        let mut prev = 0.0;
        for k in 2..=12 {
            let q = histogram_radius(0.05, 30, k).unwrap().q;
            assert!(q > prev);
            prev = q;
        }
        assert!(histogram_radius(0.05, 30, 1).is_err());
    }

    #[test]
    fn correlation_basic_identities() {
        let loss = NewsvendorLoss::experiment_default();
        let data = sample_exponential(0.05, 60, RandomSeed(11)).unwrap();
        let self_corr = empirical_correlation(&loss, &data, 25.0, 25.0).unwrap();
        assert!((self_corr - 1.0).abs() < 1e-14);
        let a = empirical_correlation(&loss, &data, 20.0, 35.0).unwrap();
        let b = empirical_correlation(&loss, &data, 35.0, 20.0).unwrap();
        assert!((a - b).abs() < 1e-14);
        assert!((-1.0..=1.0).contains(&a));
    }

    #[test]
    fn correlation_of_linear_field_is_one() {
        struct Scaled;
        impl LossModel for Scaled {
            fn evaluate(&self, x: f64, o: f64) -> f64 {
                x * o
            }
            fn decision_domain(&self) -> (f64, f64) {
                (1.0, 50.0)
            }
        }
        let data = sample_exponential(0.05, 40, RandomSeed(3)).unwrap();
        let r = empirical_correlation(&Scaled, &data, 5.0, 40.0).unwrap();
        assert!((r - 1.0).abs() < 1e-12);
    }

    #[test]
    fn correlation_degenerate_field_errors() {
        struct Flat;
        impl LossModel for Flat {
            fn evaluate(&self, _x: f64, _o: f64) -> f64 {
                2.0
            }
            fn decision_domain(&self) -> (f64, f64) {
                (0.0, 10.0)
            }
        }
        let data = [1.0, 2.0, 3.0];
        assert!(matches!(
            empirical_correlation(&Flat, &data, 1.0, 2.0),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn lambda_vanishes_for_additively_shifted_field() {
        struct Shift;
        impl LossModel for Shift {
            fn evaluate(&self, x: f64, o: f64) -> f64 {
                x + o
            }
            fn decision_domain(&self) -> (f64, f64) {
                (0.0, 50.0)
            }
        }
        let data = sample_exponential(0.05, 30, RandomSeed(7)).unwrap();
        let lam = lambda_x(&Shift, &data, 25.0, 0.5).unwrap();
        assert_eq!(lam, 0.0);
        let l1 = lk_curvature_l1(
            &Shift,
            &data,
            &DecisionGrid::linspace(1.0, 49.0, 15).unwrap(),
            0.5,
        )
        .unwrap();
        assert_eq!(l1, 0.0);
    }

    #[test]
    fn lambda_stencil_must_stay_inside_domain() {
        let loss = NewsvendorLoss::experiment_default();
        let data = sample_exponential(0.05, 30, RandomSeed(7)).unwrap();
        assert!(lambda_x(&loss, &data, 2.5, 1.25).is_err());
        assert!(lambda_x(&loss, &data, 50.0, 1.25).is_err());
        assert!(lambda_x(&loss, &data, 25.0, 1.25).is_ok());
    }

    #[test]
    fn lambda_stable_under_step_halving() {
        let loss = NewsvendorLoss::experiment_default();
        let data = sample_exponential(0.05, 50, RandomSeed(1234)).unwrap();
        let coarse = lambda_x(&loss, &data, 25.0, 0.25).unwrap();
        let fine = lambda_x(&loss, &data, 25.0, 0.125).unwrap();
        assert!(coarse > 0.0);
        assert!(
            (coarse - fine).abs() <= 0.05 * coarse.abs(),
            "Richardson check failed: {coarse} vs {fine}"
        );
    }

    #[test]
    fn euler_tail_reductions_and_monotonicity() {
        // Zero curvature reduces to the chi-square tail.
        let u = CHI2_1_95;
        let tail = euler_tail(u, 0.0).unwrap();
        assert!((tail - 0.05).abs() < 1e-10);
        // Direct arithmetic for the inflated tail.
        let inflated = euler_tail(u, 5.0).unwrap();
        let expect = 0.05 + 5.0 * (-u / 2.0).exp() / std::f64::consts::PI;
        assert!((inflated - expect).abs() < 1e-10);
        // Strictly decreasing in u.
        let mut prev = f64::INFINITY;
        for i in 0..=100 {
            let u = 1.0 + 29.0 * i as f64 / 100.0;
            let t = euler_tail(u, 5.0).unwrap();
            assert!(t < prev);
            prev = t;
        }
        assert!(euler_tail(0.0, 1.0).is_err());
        assert!(euler_tail(1.0, -0.5).is_err());
    }

    #[test]
    fn euler_tail_exponential_decay_rate() {
        let ratio = euler_tail(30.0, 2.0).unwrap() / euler_tail(20.0, 2.0).unwrap();
        let e5 = (-5.0_f64).exp();
        assert!(ratio >= e5 / 3.0 && ratio <= 3.0 * e5, "ratio {ratio}");
    }

    #[test]
    fn excursion_root_reference_and_inflation() {
        assert!((solve_qn(0.0, 0.05).unwrap() - CHI2_1_95).abs() < 1e-9);
        for &l1 in &[0.5, 2.0, 5.0, 20.0] {
            let q = solve_qn(l1, 0.05).unwrap();
            assert!(q > CHI2_1_95);
            let residual = euler_tail(q, l1).unwrap() - 0.05;
            assert!(residual.abs() < 1e-8, "residual {residual}");
        }
    }

    #[test]
    fn excursion_root_agrees_with_grid_scan() {
        // Independent dense-grid scan of the tail function.
        let l1 = 5.0;
        let alpha = 0.05;
        let mut best = f64::NAN;
        let mut u = CHI2_1_95;
        while u < 40.0 {
            if euler_tail(u, l1).unwrap() <= alpha {
                best = u;
                break;
            }
            u += 1e-6;
        }
        let q = solve_qn(l1, alpha).unwrap();
        assert!((q - best).abs() < 1e-5, "root {q} vs scan {best}");
    }

    #[test]
    fn mc_quantile_single_point_matches_chi2() {
        let loss = NewsvendorLoss::experiment_default();
        let data = sample_exponential(0.05, 50, RandomSeed(99)).unwrap();
        let grid = DecisionGrid::new(vec![30.0]).unwrap();
        let (q, dropped) =
            mc_sup_quantile(&loss, &data, &grid, 0.05, 100_000, RandomSeed(5)).unwrap();
        assert_eq!(dropped, 0);
        // Marginal of the squared field is chi-square(1); two standard
        // errors of the order statistic at 1e5 draws is ~0.05.
        assert!((q - CHI2_1_95).abs() < 0.05, "q {q}");
    }

    #[test]
    fn mc_quantile_perfectly_correlated_field() {
        struct Scaled;
        impl LossModel for Scaled {
            fn evaluate(&self, x: f64, o: f64) -> f64 {
                x * o
            }
            fn decision_domain(&self) -> (f64, f64) {
                (1.0, 50.0)
            }
        }
        let data = sample_exponential(0.05, 40, RandomSeed(3)).unwrap();
        let grid = DecisionGrid::linspace(2.0, 45.0, 12).unwrap();
        let (q, _) = mc_sup_quantile(&Scaled, &data, &grid, 0.05, 100_000, RandomSeed(5)).unwrap();
        assert!((q - CHI2_1_95).abs() < 0.05, "q {q}");
    }

    #[test]
    fn mc_quantile_requires_enough_reps() {
        let loss = NewsvendorLoss::experiment_default();
        let data = sample_exponential(0.05, 30, RandomSeed(1)).unwrap();
        let grid = DecisionGrid::new(vec![30.0]).unwrap();
        assert!(mc_sup_quantile(&loss, &data, &grid, 0.05, 999, RandomSeed(5)).is_err());
    }

    #[test]
    fn euler_radius_dominates_pointwise() {
        let loss = NewsvendorLoss::experiment_default();
        let data = sample_exponential(0.05, 50, RandomSeed(77)).unwrap();
        let grid = DecisionGrid::linspace(3.75, 48.75, 20).unwrap();
        let cal = euler_radius(&loss, &data, &grid, 1.25, 0.05).unwrap();
        assert!(cal.q >= CHI2_1_95);
        assert!(cal.l1.unwrap() > 0.0);
        assert_eq!(cal.eta, cal.q / 100.0);
    }

    #[test]
    fn euler_calibration_is_affine_invariant() {
        struct Affine {
            inner: NewsvendorLoss,
            a: f64,
            b: f64,
        }
        impl LossModel for Affine {
            fn evaluate(&self, x: f64, o: f64) -> f64 {
                self.a * self.inner.evaluate(x, o) + self.b
            }
            fn decision_domain(&self) -> (f64, f64) {
                self.inner.decision_domain()
            }
        }
        let data = sample_exponential(0.05, 40, RandomSeed(13)).unwrap();
        let grid = DecisionGrid::linspace(3.75, 48.75, 20).unwrap();
        let base = euler_radius(&NewsvendorLoss::experiment_default(), &data, &grid, 1.25, 0.05)
            .unwrap();
        let scaled = Affine { inner: NewsvendorLoss::experiment_default(), a: -2.5, b: 17.0 };
        let cal = euler_radius(&scaled, &data, &grid, 1.25, 0.05).unwrap();
        assert!((cal.l1.unwrap() - base.l1.unwrap()).abs() < 1e-8);
        assert!((cal.q - base.q).abs() < 1e-8);
    }

    #[test]
    fn grid_correlation_matrix_is_psd_with_jitter() {
        let loss = NewsvendorLoss::experiment_default();
        let data = sample_exponential(0.05, 50, RandomSeed(21)).unwrap();
        let grid = DecisionGrid::experiment_default();
        let pts = grid.points();
        let g = pts.len();
        let mut corr = vec![vec![0.0; g]; g];
        for i in 0..g {
            corr[i][i] = 1.0 + 1e-8;
            for j in 0..i {
                let r = empirical_correlation(&loss, &data, pts[i], pts[j]).unwrap();
                corr[i][j] = r;
                corr[j][i] = r;
            }
        }
        assert!(cholesky(&corr).is_some());
    }
}
