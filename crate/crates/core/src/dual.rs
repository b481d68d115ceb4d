//! Lagrangian-dual route to the empirical divergence-ball bounds, kept as an
//! independent cross-check of the profile-likelihood bisection in
//! [`crate::el`].
//!
//! The upper bound is the optimal value of
//!
//!   min over λ ≥ 0, γ of  -Σ (λ/n)·log(1 - (h_i + γ)/λ) + λη - γ
//!
//! (conjugate of the Burg generator -log r + r - 1), with the convention
//! -0·log(1 - t/0) = 0 for t ≤ 0 and = +∞ for t > 0; feasibility for λ > 0
//! requires γ < λ - max h_i. Substituting c = λ - γ decouples the
//! variables: the optimal multiplier for a fixed c is
//!
//!   λ*(c) = e^(-η) · exp(Σ (1/n)·log(c - h_i))
//!
//! and the objective collapses to g(c) = c - λ*(c), a smooth convex
//! function on (max h_i, ∞). Its stationary point is found by bracketed
//! Newton with a bisection safeguard, which avoids the boundary trouble a
//! direct two-variable search runs into near γ = λ - max h_i.

use crate::el::EvaluatedLoss;
use crate::error::{Error, Result};

/// Stationarity tolerance for the reduced dual objective.
const STATIONARITY_TOL: f64 = 1e-13;

struct ReducedDual<'a> {
    vals: &'a [f64],
    masses: &'a [f64],
    eta: f64,
    max: f64,
    /// Largest loss on a zero-count support point, when the ball lives on a
    /// declared support: mass may move there, which caps the multiplier at
    /// λ ≤ c - empty_max. NEG_INFINITY when every support point has data.
    empty_max: f64,
}

impl ReducedDual<'_> {
    /// g'(c) = 1 - exp(A(c) - η)·A'(c) with A(c) = Σ m_i log(c - h_i),
    /// evaluated in log space so the c → max⁺ blow-up cannot overflow.
    fn slope(&self, c: f64) -> f64 {
        let mut log_gm = 0.0;
        let mut inv_sum = 0.0;
        for (&v, &m) in self.vals.iter().zip(self.masses) {
            let gap = c - v;
            log_gm += m * gap.ln();
            inv_sum += m / gap;
        }
        1.0 - (log_gm - self.eta + inv_sum.ln()).exp()
    }

    /// g''(c) = exp(A - η)·(Σ m/(c-h)² - A'²) ≥ 0 (Cauchy-Schwarz).
    fn curvature(&self, c: f64) -> f64 {
        let mut log_gm = 0.0;
        let mut inv_sum = 0.0;
        let mut inv_sq_sum = 0.0;
        for (&v, &m) in self.vals.iter().zip(self.masses) {
            let gap = c - v;
            log_gm += m * gap.ln();
            inv_sum += m / gap;
            inv_sq_sum += m / (gap * gap);
        }
        (log_gm - self.eta).exp() * (inv_sq_sum - inv_sum * inv_sum)
    }

    /// Objective g(c) = c - e^(A(c) - η).
    fn value(&self, c: f64) -> f64 {
        let log_gm: f64 = self
            .vals
            .iter()
            .zip(self.masses)
            .map(|(&v, &m)| m * (c - v).ln())
            .sum();
        c - (log_gm - self.eta).exp()
    }

    /// Objective with the multiplier capped at c - empty_max: the inner
    /// optimum λ* applies while feasible, otherwise λ sits on the cap and
    /// the full dual objective is evaluated there.
    fn value_capped(&self, c: f64) -> f64 {
        let a: f64 = self
            .vals
            .iter()
            .zip(self.masses)
            .map(|(&v, &m)| m * (c - v).ln())
            .sum();
        let lam_star = (a - self.eta).exp();
        let cap = c - self.empty_max;
        if lam_star <= cap {
            c - lam_star
        } else if cap <= 0.0 {
            f64::INFINITY
        } else {
            -cap * (a - cap.ln()) + cap * self.eta - cap + c
        }
    }

    /// Golden-section minimization of the capped objective, used when mass
    /// may sit on unobserved support points. The objective is convex with a
    /// linear growth c·(1 - e^(-η)) at infinity, so doubling the bracket
    /// always captures the minimum.
    fn minimize_capped(&self) -> f64 {
        let spread = self.max.max(self.empty_max)
            - self.vals.iter().cloned().fold(f64::INFINITY, f64::min);
        let lo = self.max.max(self.empty_max) + 1e-12 * (1.0 + spread);
        let mut step = spread.max(1e-6);
        let mut hi = lo + step;
        let mut best = self.value_capped(hi);
        loop {
            let next = lo + 2.0 * step;
            let v = self.value_capped(next);
            if v >= best || !next.is_finite() {
                hi = next;
                break;
            }
            best = v;
            step *= 2.0;
            hi = next;
        }
        let phi = 0.5 * (5.0_f64.sqrt() - 1.0);
        let mut a = lo;
        let mut b = hi;
        let mut c1 = b - phi * (b - a);
        let mut c2 = a + phi * (b - a);
        let mut f1 = self.value_capped(c1);
        let mut f2 = self.value_capped(c2);
        for _ in 0..200 {
            if b - a <= 1e-11 * (1.0 + a.abs()) {
                break;
            }
            if f1 <= f2 {
                b = c2;
                c2 = c1;
                f2 = f1;
                c1 = b - phi * (b - a);
                f1 = self.value_capped(c1);
            } else {
                a = c1;
                c1 = c2;
                f1 = f2;
                c2 = a + phi * (b - a);
                f2 = self.value_capped(c2);
            }
        }
        self.value_capped(0.5 * (a + b)).min(self.value_capped(lo))
    }

    fn minimize(&self) -> f64 {
        let spread = self.max - self.vals.iter().cloned().fold(f64::INFINITY, f64::min);
        let lo0 = self.max + 1e-13 * spread;
        if self.slope(lo0) >= 0.0 {
            // The stationary point sits closer to the boundary than f64 can
            // resolve; the objective there equals max h_i to within rounding.
            return self.value(lo0);
        }
        let mut gap = spread;
        let mut hi = self.max + gap;
        while self.slope(hi) <= 0.0 {
            gap *= 2.0;
            hi = self.max + gap;
            if !hi.is_finite() {
                return self.value(self.max + spread);
            }
        }
        let mut lo = lo0;
        let mut c = 0.5 * (lo + hi);
        for _ in 0..200 {
            let slope = self.slope(c);
            if slope.abs() <= STATIONARITY_TOL {
                break;
            }
            if slope < 0.0 {
                lo = c;
            } else {
                hi = c;
            }
            let curv = self.curvature(c);
            let newton = c - slope / curv;
            let next = if newton.is_finite() && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if next == c || hi - lo <= 1e-13 * (1.0 + c.abs()) {
                break;
            }
            c = next;
        }
        self.value(c)
    }
}

fn dual_sup(values: &[f64], masses: &[f64], eta: f64) -> f64 {
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    if min == max || eta == 0.0 {
        let mean: f64 = values.iter().zip(masses).map(|(&v, &m)| v * m).sum();
        return mean;
    }
    ReducedDual { vals: values, masses, eta, max, empty_max: f64::NEG_INFINITY }.minimize()
}

/// Worst-case mean over the Burg ball on a declared support: weight vectors
/// on all support points (zero-count ones included) whose divergence from
/// the histogram stays within `eta`. The Burg generator has slope one at
/// infinity, so after the simplex constraint the divergence depends only on
/// the observed cells and unobserved support points can absorb mass; the
/// ball is therefore at least as large as the observed-support one.
pub(crate) fn support_dual_sup(
    observed: &[f64],
    masses: &[f64],
    empty_losses: &[f64],
    eta: f64,
) -> f64 {
    let max = observed.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = observed.iter().cloned().fold(f64::INFINITY, f64::min);
    let mean: f64 = observed.iter().zip(masses).map(|(&v, &m)| v * m).sum();
    if eta == 0.0 {
        return mean;
    }
    let empty_max = empty_losses.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if empty_max == f64::NEG_INFINITY {
        return dual_sup(observed, masses, eta);
    }
    if min == max && empty_max <= max {
        // Every reachable loss is at most the common observed value.
        return max;
    }
    ReducedDual { vals: observed, masses, eta, max, empty_max }.minimize_capped()
}

/// Worst-case (largest) mean over the empirical Burg ball of radius `eta`,
/// computed through the Lagrangian dual.
pub fn dro_dual_upper(loss: &EvaluatedLoss, eta: f64) -> Result<f64> {
    if !eta.is_finite() || eta < 0.0 {
        return Err(Error::domain(format!("radius must satisfy eta >= 0, got {eta}")));
    }
    let grouped = loss.grouped();
    Ok(dual_sup(&grouped.vals, &grouped.masses, eta))
}

/// Best-case (smallest) mean over the ball: the same program on the negated
/// losses with the sign flipped back.
pub fn dro_dual_lower(loss: &EvaluatedLoss, eta: f64) -> Result<f64> {
    if !eta.is_finite() || eta < 0.0 {
        return Err(Error::domain(format!("radius must satisfy eta >= 0, got {eta}")));
    }
    let grouped = loss.grouped();
    let negated: Vec<f64> = grouped.vals.iter().map(|v| -v).collect();
    Ok(-dual_sup(&negated, &grouped.masses, eta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::el::band_from_radius;

    fn loss(values: &[f64]) -> EvaluatedLoss {
        EvaluatedLoss::new(values.to_vec()).unwrap()
    }

    #[test]
    fn zero_radius_collapses_to_sample_mean() {
        let l = loss(&[1.0, 2.0, 4.5]);
        assert_eq!(dro_dual_upper(&l, 0.0).unwrap(), l.mean());
        assert_eq!(dro_dual_lower(&l, 0.0).unwrap(), l.mean());
    }

    #[test]
    fn matches_profile_band_on_reference_instance() {
        let l = loss(&[1.0, 2.0, 3.0]);
        let band = band_from_radius(&l, 0.1).unwrap();
        let up = dro_dual_upper(&l, 0.1).unwrap();
        let lo = dro_dual_lower(&l, 0.1).unwrap();
        assert!((up - band.upper).abs() < 1e-6, "upper {up} vs {}", band.upper);
        assert!((lo - band.lower).abs() < 1e-6, "lower {lo} vs {}", band.lower);
    }

    #[test]
    fn sign_symmetry_between_upper_and_lower() {
        let l = loss(&[-4.0, -1.0, 0.0, 2.0, 2.0, 7.0]);
        let negated = loss(&[4.0, 1.0, 0.0, -2.0, -2.0, -7.0]);
        for &eta in &[0.02, 0.3, 1.4] {
            let a = dro_dual_lower(&l, eta).unwrap();
            let b = -dro_dual_upper(&negated, eta).unwrap();
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn monotone_in_radius() {
        let l = loss(&[0.0, 0.5, 1.5, 2.0, 6.0, 9.0]);
        let mut prev_up = dro_dual_upper(&l, 0.0).unwrap();
        let mut prev_lo = dro_dual_lower(&l, 0.0).unwrap();
        for i in 1..=30 {
            let eta = i as f64 * 0.05;
            let up = dro_dual_upper(&l, eta).unwrap();
            let lo = dro_dual_lower(&l, eta).unwrap();
            assert!(up >= prev_up - 1e-12);
            assert!(lo <= prev_lo + 1e-12);
            assert!(up <= l.max() && lo >= l.min());
            prev_up = up;
            prev_lo = lo;
        }
    }

    #[test]
    fn heavy_ties_at_extreme_with_large_radius() {
        // Most of the mass already at the maximum: the worst case pushes to
        // the maximum itself; both routes must agree there.
        let mut values = vec![1.0; 99];
        values.push(0.0);
        let l = loss(&values);
        let up = dro_dual_upper(&l, 1.0).unwrap();
        let band = band_from_radius(&l, 1.0).unwrap();
        assert!((up - band.upper).abs() < 1e-6, "{up} vs {}", band.upper);
        assert!(up <= 1.0 + 1e-12);
    }

    #[test]
    fn rejects_negative_radius() {
        let l = loss(&[1.0, 2.0]);
        assert!(dro_dual_upper(&l, -0.1).is_err());
        assert!(dro_dual_lower(&l, f64::INFINITY).is_err());
    }
}
