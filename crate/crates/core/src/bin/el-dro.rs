//! Command-line front end: coverage experiments, band computation on a data
//! file, and radius calibration diagnostics.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical failure.

use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use el_dro::calibrate::{PolicyVariant, RadiusPolicy, DEFAULT_DELTA_FRACTION};
use el_dro::el::{band_from_radius, EvaluatedLoss};
use el_dro::experiment::{
    csv_header, fmt_sig, run_pointwise, run_simultaneous, Calibration, Demand, ExperimentConfig,
    Mode,
};
use el_dro::loss::{DecisionGrid, NewsvendorLoss, NewsvendorParams};
use el_dro::sample::RandomSeed;
use el_dro::Error;

#[derive(Parser)]
#[command(name = "el-dro", version, about = "Empirical-likelihood DRO confidence bands")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Pointwise,
    Simultaneous,
}

#[derive(Clone, Copy, ValueEnum)]
enum DistArg {
    Discrete,
    Continuous,
}

#[derive(Clone, Copy, ValueEnum)]
enum CalibArg {
    #[value(name = "chi2-1")]
    Chi2One,
    #[value(name = "chi2-k")]
    Chi2K,
    Euler,
    Mc,
}

impl From<CalibArg> for Calibration {
    fn from(c: CalibArg) -> Calibration {
        match c {
            CalibArg::Chi2One => Calibration::Chi2One,
            CalibArg::Chi2K => Calibration::Chi2K,
            CalibArg::Euler => Calibration::Euler,
            CalibArg::Mc => Calibration::Mc,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte Carlo coverage experiment and emit one CSV row.
    Coverage {
        #[arg(long, value_enum)]
        mode: ModeArg,
        #[arg(long, value_enum)]
        dist: DistArg,
        /// Cell count of the discretized demand (discrete only).
        #[arg(long, default_value_t = 5)]
        k: usize,
        /// Sample size per replication.
        #[arg(long)]
        n: usize,
        /// Number of replications.
        #[arg(long, default_value_t = 1000)]
        reps: usize,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long, value_enum)]
        calib: CalibArg,
        /// Decision point for pointwise mode.
        #[arg(long, default_value_t = 30.0)]
        x0: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Replications of the embedded Monte Carlo calibration (mc only).
        #[arg(long, default_value_t = 10_000)]
        calib_reps: usize,
        /// Write the CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compute the band at one decision point from a newline-delimited
    /// demand data file.
    Bounds {
        #[arg(long)]
        data: PathBuf,
        /// Decision point.
        #[arg(long)]
        x: f64,
        #[arg(long, value_enum)]
        calib: CalibArg,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        /// Band domain and grid as "lo:hi:steps" (excursion calibrations).
        #[arg(long, default_value = "2.5:50:20")]
        grid: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 10_000)]
        calib_reps: usize,
    },
    /// Calibrate a radius from a data file and print the diagnostics.
    Calibrate {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum)]
        calib: CalibArg,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        /// Band domain and grid as "lo:hi:steps".
        #[arg(long, default_value = "2.5:50:20")]
        grid: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 10_000)]
        calib_reps: usize,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("el-dro: {err}");
            match err {
                Error::Domain(_) => ExitCode::from(2),
                Error::Degenerate(_) | Error::Numerical(_) => ExitCode::from(3),
            }
        }
    }
}

fn dispatch(command: Command) -> el_dro::Result<()> {
    match command {
        Command::Coverage { mode, dist, k, n, reps, alpha, calib, x0, seed, calib_reps, out } => {
            let demand = match dist {
                DistArg::Discrete => Demand::Discrete { k },
                DistArg::Continuous => Demand::Continuous,
            };
            let mode = match mode {
                ModeArg::Pointwise => Mode::Pointwise,
                ModeArg::Simultaneous => Mode::Simultaneous,
            };
            let mut config = ExperimentConfig::new(mode, demand, n, calib.into()).with_seed(seed);
            config.reps = reps;
            config.alpha = alpha;
            config.x0 = x0;
            config.mc_reps = calib_reps;
            let report = match mode {
                Mode::Pointwise => run_pointwise(&config)?,
                Mode::Simultaneous => run_simultaneous(&config)?,
            };
            let csv = format!("{}\n{}\n", csv_header(), report.csv_row());
            match out {
                Some(path) => fs::write(&path, csv).map_err(|e| {
                    Error::Domain(format!("cannot write {}: {e}", path.display()))
                })?,
                None => {
                    let mut stdout = std::io::stdout().lock();
                    stdout.write_all(csv.as_bytes()).map_err(|e| {
                        Error::Numerical(format!("cannot write to stdout: {e}"))
                    })?;
                }
            }
            Ok(())
        }
        Command::Bounds { data, x, calib, alpha, grid, seed, calib_reps } => {
            let outcomes = read_data(&data)?;
            let (policy, loss) =
                build_policy(calib, alpha, &grid, seed, calib_reps, &outcomes)?;
            let calibration = policy.calibrate(&loss, &outcomes)?;
            let evaluated = EvaluatedLoss::from_sample(&loss, x, &outcomes)?;
            let band = band_from_radius(&evaluated, calibration.eta)?;
            println!("n {}", outcomes.len());
            println!("x {}", fmt_sig(x));
            println!("calib {}", calibration.method);
            println!("q {}", fmt_sig(calibration.q));
            println!("eta {}", fmt_sig(calibration.eta));
            if let Some(l1) = calibration.l1 {
                println!("l1 {}", fmt_sig(l1));
            }
            println!("sample_mean {}", fmt_sig(evaluated.mean()));
            println!("lower {}", fmt_sig(band.lower));
            println!("upper {}", fmt_sig(band.upper));
            Ok(())
        }
        Command::Calibrate { data, calib, alpha, grid, seed, calib_reps } => {
            let outcomes = read_data(&data)?;
            let (policy, loss) =
                build_policy(calib, alpha, &grid, seed, calib_reps, &outcomes)?;
            let calibration = policy.calibrate(&loss, &outcomes)?;
            println!("n {}", outcomes.len());
            println!("method {}", calibration.method);
            println!("q {}", fmt_sig(calibration.q));
            println!("eta {}", fmt_sig(calibration.eta));
            if let Some(l1) = calibration.l1 {
                println!("l1 {}", fmt_sig(l1));
            }
            if calibration.dropped_points > 0 {
                println!("dropped_grid_points {}", calibration.dropped_points);
            }
            Ok(())
        }
    }
}

/// Parse a newline-delimited numeric data file; blank lines and `#`
/// comments are skipped.
fn read_data(path: &PathBuf) -> el_dro::Result<Vec<f64>> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Domain(format!("cannot read {}: {e}", path.display())))?;
    let mut values = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let v: f64 = line.parse().map_err(|_| {
            Error::Domain(format!("{}:{}: not a number: {line:?}", path.display(), lineno + 1))
        })?;
        values.push(v);
    }
    if values.len() < 2 {
        return Err(Error::Domain("data file needs at least two observations".into()));
    }
    Ok(values)
}

/// Assemble the radius policy and the newsvendor loss over the requested
/// band domain. For chi2-k the cell count is the number of distinct data
/// values.
fn build_policy(
    calib: CalibArg,
    alpha: f64,
    grid_spec: &str,
    seed: u64,
    calib_reps: usize,
    outcomes: &[f64],
) -> el_dro::Result<(RadiusPolicy, NewsvendorLoss)> {
    let (lo, hi, steps) = parse_grid(grid_spec)?;
    let loss = NewsvendorLoss::new(NewsvendorParams::default(), (lo, hi))?;
    let spacing = (hi - lo) / (steps.max(2) - 1) as f64;
    let delta = DEFAULT_DELTA_FRACTION * spacing;
    let variant = match calib {
        CalibArg::Chi2One => PolicyVariant::PointwiseChi2,
        CalibArg::Chi2K => {
            let mut sorted = outcomes.to_vec();
            sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite data"));
            sorted.dedup();
            PolicyVariant::HistogramChi2 { k: sorted.len() }
        }
        CalibArg::Euler => PolicyVariant::ExcursionEuler {
            grid: DecisionGrid::linspace(lo + delta, hi - delta, steps)?,
            delta,
        },
        CalibArg::Mc => PolicyVariant::ExcursionMc {
            grid: DecisionGrid::linspace(lo + delta, hi - delta, steps)?,
            reps: calib_reps,
            seed: RandomSeed(seed).calibration_stream(),
        },
    };
    Ok((RadiusPolicy { alpha, variant }, loss))
}

fn parse_grid(spec: &str) -> el_dro::Result<(f64, f64, usize)> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = || Error::Domain(format!("grid must be \"lo:hi:steps\", got {spec:?}"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let lo: f64 = parts[0].parse().map_err(|_| bad())?;
    let hi: f64 = parts[1].parse().map_err(|_| bad())?;
    let steps: usize = parts[2].parse().map_err(|_| bad())?;
    if !(lo < hi) || steps < 2 {
        return Err(Error::Domain(format!(
            "grid needs lo < hi and steps >= 2, got {spec:?}"
        )));
    }
    Ok((lo, hi, steps))
}
