//! Monte Carlo coverage harness.
//!
//! One run fixes a demand law (a k-cell discretized exponential or the
//! continuous exponential), a sample size, a radius policy and a seed, then
//! repeats: sample demands, calibrate the radius, form the band(s), and
//! record whether the true mean (known in closed form) is covered. Reports
//! carry point estimates with Wald intervals and are bitwise reproducible:
//! replication r draws from the stream seeded with `seed ^ r`, and the
//! aggregation is an ordered reduction, so thread count cannot change any
//! output byte.

use rayon::prelude::*;

use crate::calibrate::{PolicyVariant, RadiusPolicy, DEFAULT_DELTA_FRACTION};
use crate::el::{band_from_radius, EvaluatedLoss};
use crate::error::{Error, Result};
use crate::loss::{
    true_mean_discrete, true_mean_exponential, DecisionGrid, LossModel, NewsvendorLoss,
    NewsvendorParams,
};
use crate::sample::{discretize_exponential, sample_discrete, sample_exponential, RandomSeed};
use crate::stats::std_normal_quantile;

/// What the coverage indicator quantifies over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Cover the true mean at the single decision point x0.
    Pointwise,
    /// Cover the true mean at every grid point simultaneously.
    Simultaneous,
}

/// Demand law for the experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Demand {
    /// Exponential demand discretized onto a k-cell grid.
    Discrete { k: usize },
    /// Continuous exponential demand.
    Continuous,
}

/// Which radius policy the run calibrates with.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Calibration {
    /// χ²₁ radius.
    Chi2One,
    /// χ²_{k-1} radius (discrete demand only).
    Chi2K,
    /// Excursion radius via the Euler-characteristic tail.
    Euler,
    /// Excursion radius via Monte Carlo on the grid correlation.
    Mc,
}

impl Calibration {
    pub fn tag(self) -> &'static str {
        match self {
            Calibration::Chi2One => "chi2-1",
            Calibration::Chi2K => "chi2-k",
            Calibration::Euler => "euler",
            Calibration::Mc => "mc",
        }
    }
}

/// Full description of one coverage run.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub demand: Demand,
    /// Exponential rate of the demand law.
    pub rate: f64,
    /// Upper end of the discretization interval.
    pub upper: f64,
    /// Sample size per replication.
    pub n: usize,
    /// Number of replications.
    pub reps: usize,
    /// Significance level of the band.
    pub alpha: f64,
    pub calibration: Calibration,
    pub loss: NewsvendorParams,
    /// Decision point for pointwise mode.
    pub x0: f64,
    /// Decision grid for simultaneous mode (also the band domain).
    pub grid: DecisionGrid,
    pub seed: RandomSeed,
    /// Replications of the embedded Monte Carlo calibration (Mc only).
    pub mc_reps: usize,
    /// Retain per-replication outcomes in the report.
    pub keep_replications: bool,
}

impl ExperimentConfig {
    /// Paper-style defaults: newsvendor loss, Exp(1/20) demand on [0, 50],
    /// grid {50j/20}, x0 = 30, alpha = 0.05, 1000 replications.
    pub fn new(mode: Mode, demand: Demand, n: usize, calibration: Calibration) -> Self {
        ExperimentConfig {
            mode,
            demand,
            rate: 1.0 / 20.0,
            upper: 50.0,
            n,
            reps: 1000,
            alpha: 0.05,
            calibration,
            loss: NewsvendorParams::default(),
            x0: 30.0,
            grid: DecisionGrid::experiment_default(),
            seed: RandomSeed(0),
            mc_reps: 10_000,
            keep_replications: false,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = RandomSeed(seed);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.reps < 1 {
            return Err(Error::domain("reps must be at least 1"));
        }
        if self.n < 2 {
            return Err(Error::domain("sample size must be at least 2"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::domain(format!("alpha must lie in (0,1), got {}", self.alpha)));
        }
        if !(self.rate > 0.0) || !(self.upper > 0.0) {
            return Err(Error::domain("rate and upper must be positive"));
        }
        if let Demand::Discrete { k } = self.demand {
            if k < 2 {
                return Err(Error::domain(format!("discrete demand needs k >= 2, got {k}")));
            }
        }
        if matches!(self.calibration, Calibration::Chi2K)
            && matches!(self.demand, Demand::Continuous)
        {
            return Err(Error::domain(
                "chi2-k calibration needs a discrete demand with a known cell count",
            ));
        }
        let domain = (self.grid.points()[0], *self.grid.points().last().expect("nonempty"));
        if self.x0 < domain.0 || self.x0 > domain.1 {
            return Err(Error::domain(format!(
                "x0 = {} outside the grid hull [{}, {}]",
                self.x0, domain.0, domain.1
            )));
        }
        Ok(())
    }

    /// The loss model over the grid hull.
    fn loss_model(&self) -> Result<NewsvendorLoss> {
        let pts = self.grid.points();
        NewsvendorLoss::new(self.loss, (pts[0], *pts.last().expect("nonempty")))
    }

    /// Radius policy instance for one replication.
    fn policy(&self, rep_seed: RandomSeed) -> Result<RadiusPolicy> {
        let variant = match self.calibration {
            Calibration::Chi2One => PolicyVariant::PointwiseChi2,
            Calibration::Chi2K => match self.demand {
                Demand::Discrete { k } => PolicyVariant::HistogramChi2 { k },
                Demand::Continuous => unreachable!("validated"),
            },
            Calibration::Euler => {
                let (grid, delta) = self.calibration_grid()?;
                PolicyVariant::ExcursionEuler { grid, delta }
            }
            Calibration::Mc => {
                let (grid, _) = self.calibration_grid()?;
                PolicyVariant::ExcursionMc {
                    grid,
                    reps: self.mc_reps,
                    seed: rep_seed.calibration_stream(),
                }
            }
        };
        Ok(RadiusPolicy { alpha: self.alpha, variant })
    }

    /// Integration grid for the excursion routes: the band domain shrunk by
    /// the finite-difference step so every central stencil stays inside.
    fn calibration_grid(&self) -> Result<(DecisionGrid, f64)> {
        let pts = self.grid.points();
        let (lo, hi) = (pts[0], *pts.last().expect("nonempty"));
        let delta = if self.grid.len() > 1 {
            DEFAULT_DELTA_FRACTION * self.grid.spacing()
        } else {
            DEFAULT_DELTA_FRACTION * (hi - lo).max(1.0)
        };
        let grid = DecisionGrid::linspace(lo + delta, hi - delta, self.grid.len().max(2))?;
        Ok((grid, delta))
    }

    /// Stable 64-bit FNV-1a hash of the run configuration.
    pub fn config_hash(&self) -> u64 {
        let mut text = String::new();
        text.push_str(match self.mode {
            Mode::Pointwise => "pointwise;",
            Mode::Simultaneous => "simultaneous;",
        });
        match self.demand {
            Demand::Discrete { k } => text.push_str(&format!("discrete:{k};")),
            Demand::Continuous => text.push_str("continuous;"),
        }
        text.push_str(&format!(
            "rate={:x};upper={:x};n={};reps={};alpha={:x};calib={};x0={:x};seed={};mc={};",
            self.rate.to_bits(),
            self.upper.to_bits(),
            self.n,
            self.reps,
            self.alpha.to_bits(),
            self.calibration.tag(),
            self.x0.to_bits(),
            self.seed.0,
            self.mc_reps,
        ));
        text.push_str(&format!(
            "loss={:x},{:x},{:x},{:x},{:x};",
            self.loss.v.to_bits(),
            self.loss.s.to_bits(),
            self.loss.l.to_bits(),
            self.loss.c.to_bits(),
            self.loss.rho.to_bits()
        ));
        for p in self.grid.points() {
            text.push_str(&format!("{:x},", p.to_bits()));
        }
        fnv1a(text.as_bytes())
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325_u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Outcome of a single replication.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReplicationSummary {
    pub covered_two_sided: bool,
    pub covered_one_sided: bool,
    /// Raw calibration quantile used for the band.
    pub q: f64,
}

/// Aggregated coverage estimates for one configuration.
#[derive(Debug, Clone)]
pub struct CoverageReport {
    pub coverage_two_sided: f64,
    pub coverage_one_sided: f64,
    pub ci_two: (f64, f64),
    pub ci_one: (f64, f64),
    /// Requested replications.
    pub reps: usize,
    /// Replications that completed without a solver error.
    pub completed: usize,
    /// Replications aborted by a propagated solver error.
    pub aborts: usize,
    /// Mean raw quantile over completed replications.
    pub mean_q: f64,
    pub config: ExperimentConfig,
    /// Per-replication outcomes when `keep_replications` was set.
    pub replications: Option<Vec<ReplicationSummary>>,
}

/// CLT interval: sample mean of the losses at `x` plus/minus
/// z_{1-alpha/2} times the (n-1)-divisor standard error.
pub fn clt_interval(
    loss: &dyn LossModel,
    outcomes: &[f64],
    x: f64,
    alpha: f64,
) -> Result<(f64, f64)> {
    if outcomes.len() < 2 {
        return Err(Error::domain("clt interval needs at least two observations"));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::domain(format!("alpha must lie in (0,1), got {alpha}")));
    }
    let n = outcomes.len() as f64;
    let values: Vec<f64> = outcomes.iter().map(|&o| loss.evaluate(x, o)).collect();
    let mean = values.iter().sum::<f64>() / n;
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    let sd = (ss / (n - 1.0)).sqrt();
    let z = std_normal_quantile(1.0 - alpha / 2.0)?;
    let half = z * sd / n.sqrt();
    Ok((mean - half, mean + half))
}

/// Wald binomial interval for `successes` out of `trials`, clipped to
/// [0, 1].
pub fn binomial_ci(successes: usize, trials: usize, level: f64) -> Result<(f64, f64)> {
    if trials == 0 || successes > trials {
        return Err(Error::domain("binomial interval needs 0 <= successes <= trials, trials > 0"));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::domain(format!("level must lie in (0,1), got {level}")));
    }
    let p = successes as f64 / trials as f64;
    let z = std_normal_quantile(0.5 * (1.0 + level))?;
    let half = z * (p * (1.0 - p) / trials as f64).sqrt();
    Ok(((p - half).max(0.0), (p + half).min(1.0)))
}

/// Result of one replication, or the error that aborted it.
type RepResult = std::result::Result<ReplicationSummary, Error>;

fn run_replication(
    config: &ExperimentConfig,
    loss: &NewsvendorLoss,
    truth: &[f64],
    eval_points: &[f64],
    r: u64,
) -> RepResult {
    let rep_seed = config.seed.replication(r);
    let outcomes = match config.demand {
        Demand::Discrete { k } => {
            let pmf = discretize_exponential(config.rate, k, config.upper)?;
            sample_discrete(&pmf, config.n, rep_seed)?
        }
        Demand::Continuous => sample_exponential(config.rate, config.n, rep_seed)?,
    };
    let calibration = config.policy(rep_seed)?.calibrate(loss, &outcomes)?;
    let mut two = true;
    let mut one = true;
    for (&x, &z0) in eval_points.iter().zip(truth) {
        let evaluated = EvaluatedLoss::from_sample(loss, x, &outcomes)?;
        let band = band_from_radius(&evaluated, calibration.eta)?;
        two &= band.contains(z0);
        one &= z0 <= band.upper;
        if !two && !one {
            break;
        }
    }
    Ok(ReplicationSummary { covered_two_sided: two, covered_one_sided: one, q: calibration.q })
}

fn run(config: &ExperimentConfig) -> Result<CoverageReport> {
    config.validate()?;
    let loss = config.loss_model()?;
    let eval_points: Vec<f64> = match config.mode {
        Mode::Pointwise => vec![config.x0],
        Mode::Simultaneous => config.grid.points().to_vec(),
    };
    let truth: Vec<f64> = match config.demand {
        Demand::Discrete { k } => {
            let pmf = discretize_exponential(config.rate, k, config.upper)?;
            eval_points.iter().map(|&x| true_mean_discrete(&loss, &pmf, x)).collect()
        }
        Demand::Continuous => eval_points
            .iter()
            .map(|&x| true_mean_exponential(&config.loss, config.rate, x))
            .collect::<Result<_>>()?,
    };

    // Replications are independent streams; the indexed collect keeps the
    // reduction order fixed regardless of thread count.
    let outcomes: Vec<RepResult> = (0..config.reps as u64)
        .into_par_iter()
        .map(|r| run_replication(config, &loss, &truth, &eval_points, r))
        .collect();

    let mut two = 0_usize;
    let mut one = 0_usize;
    let mut aborts = 0_usize;
    let mut q_sum = 0.0;
    let mut kept = Vec::new();
    for rep in &outcomes {
        match rep {
            Ok(summary) => {
                two += summary.covered_two_sided as usize;
                one += summary.covered_one_sided as usize;
                q_sum += summary.q;
                if config.keep_replications {
                    kept.push(*summary);
                }
            }
            Err(_) => aborts += 1,
        }
    }
    let completed = config.reps - aborts;
    if completed == 0 {
        return Err(Error::numerical("every replication aborted"));
    }
    let coverage_two = two as f64 / completed as f64;
    let coverage_one = one as f64 / completed as f64;
    Ok(CoverageReport {
        coverage_two_sided: coverage_two,
        coverage_one_sided: coverage_one,
        ci_two: binomial_ci(two, completed, 0.95)?,
        ci_one: binomial_ci(one, completed, 0.95)?,
        reps: config.reps,
        completed,
        aborts,
        mean_q: q_sum / completed as f64,
        config: config.clone(),
        replications: config.keep_replications.then_some(kept),
    })
}

/// Coverage of the band at the single decision point x0.
pub fn run_pointwise(config: &ExperimentConfig) -> Result<CoverageReport> {
    if config.mode != Mode::Pointwise {
        return Err(Error::domain("run_pointwise needs mode = pointwise"));
    }
    run(config)
}

/// Simultaneous coverage of the band over the whole decision grid.
pub fn run_simultaneous(config: &ExperimentConfig) -> Result<CoverageReport> {
    if config.mode != Mode::Simultaneous {
        return Err(Error::domain("run_simultaneous needs mode = simultaneous"));
    }
    run(config)
}

/// Format a float with six significant digits (plain decimal where
/// readable, scientific otherwise). Deterministic: same value, same bytes.
pub fn fmt_sig(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    if !v.is_finite() {
        return if v.is_nan() { "nan".into() } else if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let exp = v.abs().log10().floor() as i32;
    if (-4..=5).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        format!("{:.*}", decimals, v)
    } else {
        format!("{:.5e}", v)
    }
}

/// CSV header for coverage reports.
pub fn csv_header() -> &'static str {
    "config_hash,mode,dist,k,n,reps,alpha,calib,coverage2,ci2_lo,ci2_hi,coverage1,ci1_lo,ci1_hi,mean_qn,aborts"
}

impl CoverageReport {
    /// One deterministic CSV row matching [`csv_header`].
    pub fn csv_row(&self) -> String {
        let config = &self.config;
        let (dist, k) = match config.demand {
            Demand::Discrete { k } => ("discrete", k),
            Demand::Continuous => ("continuous", 0),
        };
        let mode = match config.mode {
            Mode::Pointwise => "pointwise",
            Mode::Simultaneous => "simultaneous",
        };
        format!(
            "{:016x},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            config.config_hash(),
            mode,
            dist,
            k,
            config.n,
            config.reps,
            fmt_sig(config.alpha),
            config.calibration.tag(),
            fmt_sig(self.coverage_two_sided),
            fmt_sig(self.ci_two.0),
            fmt_sig(self.ci_two.1),
            fmt_sig(self.coverage_one_sided),
            fmt_sig(self.ci_one.0),
            fmt_sig(self.ci_one.1),
            fmt_sig(self.mean_q),
            self.aborts
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clt_interval_hand_arithmetic() {
        struct Identity;
        impl LossModel for Identity {
            fn evaluate(&self, _x: f64, o: f64) -> f64 {
                o
            }
            fn decision_domain(&self) -> (f64, f64) {
                (0.0, 1.0)
            }
        }
        // Data {0, 2}: mean 1, (n-1)-divisor variance 2, half-width
        // z_{0.975}·sqrt(2)/sqrt(2) = z_{0.975}.
        let (lo, hi) = clt_interval(&Identity, &[0.0, 2.0], 0.5, 0.05).unwrap();
        assert!((lo - (1.0 - 1.959963984540054)).abs() < 1e-9);
        assert!((hi - (1.0 + 1.959963984540054)).abs() < 1e-9);
        // Symmetry about the mean.
        assert!(((lo + hi) / 2.0 - 1.0).abs() < 1e-12);
        // Constant data collapse.
        let (lo, hi) = clt_interval(&Identity, &[4.0, 4.0, 4.0], 0.5, 0.05).unwrap();
        assert_eq!((lo, hi), (4.0, 4.0));
        assert!(clt_interval(&Identity, &[1.0], 0.5, 0.05).is_err());
    }

    #[test]
    fn binomial_ci_reference_values() {
        let (lo, hi) = binomial_ci(1000, 1000, 0.95).unwrap();
        assert_eq!((lo, hi), (1.0, 1.0));
        let (lo, hi) = binomial_ci(500, 1000, 0.95).unwrap();
        assert!((lo - 0.4690102483847719).abs() < 1e-9);
        assert!((hi - 0.5309897516152281).abs() < 1e-9);
        // Width shrinks like 1/sqrt(reps).
        let (lo1, hi1) = binomial_ci(50, 100, 0.95).unwrap();
        let (lo2, hi2) = binomial_ci(5000, 10000, 0.95).unwrap();
        assert!((hi2 - lo2) < (hi1 - lo1) / 5.0);
        assert!(binomial_ci(3, 2, 0.95).is_err());
    }

    #[test]
    fn fmt_sig_is_six_significant_digits() {
        assert_eq!(fmt_sig(0.996), "0.996000");
        assert_eq!(fmt_sig(0.05), "0.0500000");
        assert_eq!(fmt_sig(3.8414588), "3.84146");
        assert_eq!(fmt_sig(0.0), "0");
        assert_eq!(fmt_sig(-104.381887), "-104.382");
        assert_eq!(fmt_sig(1.25e9), "1.25000e9");
    }

    #[test]
    fn identical_seeds_identical_reports() {
        let config = ExperimentConfig::new(
            Mode::Pointwise,
            Demand::Discrete { k: 5 },
            30,
            Calibration::Chi2One,
        )
        .with_seed(7);
        let mut small = config.clone();
        small.reps = 40;
        let a = run_pointwise(&small).unwrap();
        let b = run_pointwise(&small).unwrap();
        assert_eq!(a.coverage_two_sided, b.coverage_two_sided);
        assert_eq!(a.csv_row(), b.csv_row());
    }

    #[test]
    fn one_sided_dominates_two_sided() {
        let mut config = ExperimentConfig::new(
            Mode::Simultaneous,
            Demand::Discrete { k: 5 },
            20,
            Calibration::Chi2One,
        )
        .with_seed(3);
        config.reps = 60;
        config.keep_replications = true;
        let report = run_simultaneous(&config).unwrap();
        for rep in report.replications.as_ref().unwrap() {
            assert!(rep.covered_one_sided || !rep.covered_two_sided);
        }
        assert!(report.coverage_one_sided >= report.coverage_two_sided);
        assert_eq!(report.aborts, 0);
    }

    #[test]
    fn euler_band_nests_pointwise_band_per_replication() {
        let base = ExperimentConfig::new(
            Mode::Simultaneous,
            Demand::Discrete { k: 5 },
            30,
            Calibration::Chi2One,
        )
        .with_seed(11);
        let mut chi = base.clone();
        chi.reps = 50;
        chi.keep_replications = true;
        let mut euler = chi.clone();
        euler.calibration = Calibration::Euler;
        let report_chi = run_simultaneous(&chi).unwrap();
        let report_euler = run_simultaneous(&euler).unwrap();
        let reps_chi = report_chi.replications.as_ref().unwrap();
        let reps_euler = report_euler.replications.as_ref().unwrap();
        for (a, b) in reps_chi.iter().zip(reps_euler) {
            // Same demand stream; a wider radius can only keep coverage.
            assert!(b.q >= a.q);
            assert!(!a.covered_two_sided || b.covered_two_sided);
            assert!(!a.covered_one_sided || b.covered_one_sided);
        }
    }

    #[test]
    fn chi2k_on_continuous_demand_is_a_config_error() {
        let config = ExperimentConfig::new(
            Mode::Pointwise,
            Demand::Continuous,
            30,
            Calibration::Chi2K,
        );
        assert!(matches!(run_pointwise(&config), Err(Error::Domain(_))));
    }

    #[test]
    fn mode_mismatch_is_rejected() {
        let config = ExperimentConfig::new(
            Mode::Pointwise,
            Demand::Discrete { k: 5 },
            30,
            Calibration::Chi2One,
        );
        assert!(run_simultaneous(&config).is_err());
    }
}
