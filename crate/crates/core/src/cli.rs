//! Command-line front end. Result lines go to standard output as
//! `key=value` pairs; tables and warnings go to standard error.

use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::asymptotics::{
    distance_d, estimate_distance_d_mc, predict_asymptotic_power, ShiftFunction, ShiftKind,
};
use crate::error::{Error, Result};
use crate::harness::{
    load_config, power_curve_svg, run_nonlocal_experiment, run_null_distribution_check,
    run_power_curve, run_size_experiment, ExperimentConfig, FamilyTemplate, NonlocalKind,
    PowerCurve,
};
use crate::hypothesis::{
    calibrate_critical_value_mc, projection_direction, run_projection_test, run_test, Calibration,
    Method, Tail, TestOutcome,
};
use crate::sphere::read_csv_path;

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_REJECT: i32 = 2;
pub const EXIT_USAGE: i32 = 64;

#[derive(Debug, Parser)]
#[command(name = "sphere-unif", version, about = "Uniformity tests on the hypersphere")]
pub struct Cli {
    /// Master seed for every random draw.
    #[arg(long, global = true, env = "SPHERE_UNIF_SEED")]
    pub seed: Option<u64>,
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Output file for CSV results.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Test a sample stored as CSV (one point per row).
    Test(TestArgs),
    /// Null rejection rates for a config (model family replaced by uniform).
    Size(ConfigArgs),
    /// Power curve over the config's signal grid.
    Power(PowerArgs),
    /// Compare the simulated null law of the scaled sup-distance with Kolmogorov.
    Nulldist(NulldistArgs),
    /// Distance between alternative and null inner-product laws.
    Distance(DistanceArgs),
    /// Limiting power of the sup-distance test under a bridge drift.
    Predict(PredictArgs),
    /// Monte Carlo critical value of a statistic.
    Calibrate(CalibrateArgs),
    /// Rejection rates under a non-local alternative.
    Nonlocal(NonlocalArgs),
}

#[derive(Debug, Args)]
pub struct TestArgs {
    /// CSV file with one point per row.
    #[arg(long)]
    pub data: PathBuf,
    /// Methods to run (repeat or comma-separate); default: all pairwise tests.
    #[arg(long = "method", value_delimiter = ',')]
    pub methods: Vec<Method>,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value = "upper")]
    pub tail: Tail,
    /// `asymptotic`, `mc` or `mc:<reps>`.
    #[arg(long, default_value = "asymptotic", value_parser = parse_calibration)]
    pub calibration: CalibrationArg,
    /// Scale rows to unit norm instead of rejecting non-unit rows.
    #[arg(long)]
    pub normalize: bool,
    /// Exit with status 2 when any test rejects.
    #[arg(long)]
    pub exit_on_reject: bool,
}

#[derive(Debug, Args)]
pub struct ConfigArgs {
    /// JSON experiment config.
    #[arg(long)]
    pub config: PathBuf,
}

#[derive(Debug, Args)]
pub struct PowerArgs {
    /// JSON experiment config.
    #[arg(long)]
    pub config: PathBuf,
    /// Also write an SVG chart to this path.
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct NulldistArgs {
    #[arg(long, default_value_t = 80)]
    pub n: usize,
    #[arg(long, default_value_t = 80)]
    pub p: usize,
    #[arg(long, default_value_t = 2000)]
    pub reps: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum DistanceModel {
    Fvml,
    Watson,
    #[value(alias = "lowrank")]
    LowRank,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum DistanceMode {
    Quadrature,
    Mc,
}

#[derive(Debug, Args)]
pub struct DistanceArgs {
    #[arg(long, value_enum)]
    pub model: DistanceModel,
    #[arg(long)]
    pub tau: f64,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub p: usize,
    #[arg(long, value_enum, default_value = "quadrature")]
    pub mode: DistanceMode,
    /// Pair count for `--mode mc`.
    #[arg(long, default_value_t = 1_000_000)]
    pub pairs: usize,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// `fvml` or `quadratic` (also `watson`, `low_rank`).
    #[arg(long, value_parser = parse_shift)]
    pub shift: ShiftKind,
    #[arg(long)]
    pub tau: f64,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value_t = 20_000)]
    pub reps: usize,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub p: usize,
    #[arg(long, default_value = "sup_distance")]
    pub method: Method,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value_t = 2000)]
    pub reps: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum NonlocalKindArg {
    #[value(alias = "cap_mixture")]
    Capmix,
    #[value(alias = "alpha_spherical")]
    Alpha,
}

#[derive(Debug, Args)]
pub struct NonlocalArgs {
    #[arg(long, value_enum)]
    pub kind: NonlocalKindArg,
    #[arg(long, default_value_t = 50)]
    pub n: usize,
    #[arg(long, default_value_t = 5000)]
    pub p: usize,
    /// Tail index for `--kind alpha`.
    #[arg(long = "tail-index", default_value_t = 1.0)]
    pub tail_index: f64,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value_t = crate::harness::DEFAULT_NONLOCAL_REPS)]
    pub reps: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CalibrationArg {
    Asymptotic,
    MonteCarlo(usize),
}

fn parse_calibration(s: &str) -> std::result::Result<CalibrationArg, String> {
    match s {
        "asymptotic" => Ok(CalibrationArg::Asymptotic),
        "mc" | "monte_carlo" => Ok(CalibrationArg::MonteCarlo(2000)),
        _ => s
            .strip_prefix("mc:")
            .and_then(|r| r.parse().ok())
            .map(CalibrationArg::MonteCarlo)
            .ok_or_else(|| format!("expected `asymptotic`, `mc` or `mc:<reps>`, got `{s}`")),
    }
}

fn parse_shift(s: &str) -> std::result::Result<ShiftKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit status.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{text}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(err, "{text}");
                    EXIT_USAGE
                }
            };
        }
    };
    match dispatch(&cli, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_ERROR
        }
    }
}

fn dispatch(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(Error::Config("--threads must be positive".into()));
        }
        // a pool that already exists (repeated in-process calls) is kept
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    let seed = cli.seed.unwrap_or(0);
    match &cli.command {
        Command::Test(a) => cmd_test(a, seed, cli.seed.is_some(), cli.out.as_ref(), out, err),
        Command::Size(a) => {
            let mut cfg = load_config(&a.config)?;
            if let Some(s) = cli.seed {
                cfg.seed = s;
            }
            warn(&cfg, err)?;
            let rates = run_size_experiment(&cfg)?;
            writeln!(err, "{:<14}{:>8}{:>9}", "method", "size", "se")?;
            let mut line = format!("command=size n={} p={} alpha={} reps={} seed={}", cfg.n, cfg.p, cfg.alpha, cfg.reps, cfg.seed);
            for r in &rates {
                writeln!(err, "{:<14}{:>8.4}{:>9.4}", r.method.name(), r.rate, r.se)?;
                line.push_str(&format!(" {}={}", r.method.name(), r.rate));
            }
            if let Some(path) = &cli.out {
                let mut f = fs::File::create(path)?;
                writeln!(f, "method,rate,se,reps,seed")?;
                for r in &rates {
                    writeln!(f, "{},{},{},{},{}", r.method, r.rate, r.se, r.reps, cfg.seed)?;
                }
            }
            writeln!(out, "{line}")?;
            Ok(EXIT_OK)
        }
        Command::Power(a) => {
            let mut cfg = load_config(&a.config)?;
            if let Some(s) = cli.seed {
                cfg.seed = s;
            }
            warn(&cfg, err)?;
            let curve = run_power_curve(&cfg)?;
            power_table(&curve, err)?;
            writeln!(err, "wall clock: {:.2} s", curve.wall_clock_secs)?;
            let path = cli
                .out
                .clone()
                .or_else(|| cfg.output_path.as_ref().map(PathBuf::from));
            if let Some(p) = &path {
                crate::harness::export_csv(&curve, p)?;
            } else {
                curve.write_csv(&mut *err)?;
            }
            if let Some(svg) = &a.svg {
                fs::write(svg, power_curve_svg(&curve, Some(cfg.alpha)))?;
            }
            writeln!(
                out,
                "command=power family={} config_hash={} seed={} reps={} cells={} out={}",
                curve.family,
                curve.config_hash,
                curve.seed,
                curve.reps,
                curve.cells.len(),
                path.map_or("-".into(), |p| p.display().to_string())
            )?;
            Ok(EXIT_OK)
        }
        Command::Nulldist(a) => {
            let chk = run_null_distribution_check(a.n, a.p, a.reps, seed)?;
            if let Some(path) = &cli.out {
                let mut f = std::io::BufWriter::new(fs::File::create(path)?);
                writeln!(f, "standardized")?;
                for z in &chk.standardized {
                    writeln!(f, "{z}")?;
                }
                f.flush()?;
            }
            writeln!(err, "KS distance to Kolmogorov law: {:.4}", chk.ks)?;
            writeln!(err, "size at alpha=0.05: {:.4}", chk.size_05)?;
            writeln!(
                out,
                "command=nulldist n={} p={} reps={} seed={seed} ks={} size_05={}",
                a.n, a.p, a.reps, chk.ks, chk.size_05
            )?;
            Ok(EXIT_OK)
        }
        Command::Distance(a) => {
            let template = match a.model {
                DistanceModel::Fvml => FamilyTemplate::Fvml { mu: None },
                DistanceModel::Watson => FamilyTemplate::Watson { mu: None },
                DistanceModel::LowRank => FamilyTemplate::LowRank { rotate: false },
            };
            let model = template.model(a.tau, a.n, a.p)?;
            let d = match a.mode {
                DistanceMode::Quadrature => distance_d(&model)?,
                DistanceMode::Mc => estimate_distance_d_mc(&model, a.pairs, seed)?,
            };
            let limit = match a.model {
                DistanceModel::Fvml => ShiftFunction::fvml(a.tau).limit_nd(),
                _ => ShiftFunction::quadratic(a.tau).limit_nd(),
            };
            writeln!(err, "model: {model:?}")?;
            writeln!(
                out,
                "command=distance model={} mode={} tau={} n={} p={} d={} nd={} limit_nd={}",
                template.name(),
                match a.mode {
                    DistanceMode::Quadrature => "quadrature",
                    DistanceMode::Mc => "mc",
                },
                a.tau,
                a.n,
                a.p,
                d,
                d * a.n as f64,
                limit
            )?;
            Ok(EXIT_OK)
        }
        Command::Predict(a) => {
            let shift = ShiftFunction::new(a.shift, a.tau)?;
            let power = predict_asymptotic_power(Some(&shift), a.alpha, a.reps, seed)?;
            writeln!(
                out,
                "command=predict shift={} tau={} alpha={} reps={} seed={seed} power={power}",
                match a.shift {
                    ShiftKind::Fvml => "fvml",
                    ShiftKind::Quadratic => "quadratic",
                },
                a.tau,
                a.alpha,
                a.reps
            )?;
            Ok(EXIT_OK)
        }
        Command::Calibrate(a) => {
            let c = calibrate_critical_value_mc(a.n, a.p, a.method, a.alpha, a.reps, seed)?;
            writeln!(
                out,
                "command=calibrate method={} n={} p={} alpha={} reps={} seed={seed} critical_value={c}",
                a.method, a.n, a.p, a.alpha, a.reps
            )?;
            Ok(EXIT_OK)
        }
        Command::Nonlocal(a) => {
            let kind = match a.kind {
                NonlocalKindArg::Capmix => NonlocalKind::CapMixture,
                NonlocalKindArg::Alpha => NonlocalKind::AlphaSpherical { alpha: a.tail_index },
            };
            let r = run_nonlocal_experiment(kind, a.n, a.p, a.alpha, a.reps, seed)?;
            writeln!(err, "{:<14}{:>8}{:>9}", "method", "rate", "se")?;
            let mut line = format!(
                "command=nonlocal kind={} n={} p={} reps={} seed={seed}",
                match a.kind {
                    NonlocalKindArg::Capmix => "capmix",
                    NonlocalKindArg::Alpha => "alpha",
                },
                a.n,
                a.p,
                a.reps
            );
            for m in &r.rates {
                writeln!(err, "{:<14}{:>8.4}{:>9.4}", m.method.name(), m.rate, m.se)?;
                line.push_str(&format!(" {}={}", m.method.name(), m.rate));
            }
            writeln!(err, "mean R_n: {:.4}", r.mean_r)?;
            writeln!(err, "mean |R_n|: {:.4} (se {:.4}, bound {:.4})", r.mean_abs_r, r.se_abs_r, r.r_bound)?;
            writeln!(err, "share B_n < 0: {:.3}", r.share_b_negative)?;
            writeln!(err, "share P_n below null quantile: {:.3}", r.share_p_low)?;
            line.push_str(&format!(
                " mean_abs_r={} r_bound={} share_b_negative={} share_p_low={}",
                r.mean_abs_r, r.r_bound, r.share_b_negative, r.share_p_low
            ));
            writeln!(out, "{line}")?;
            Ok(EXIT_OK)
        }
    }
}

fn warn(cfg: &ExperimentConfig, err: &mut dyn Write) -> Result<()> {
    for w in cfg.validate()? {
        writeln!(err, "warning: {w}")?;
    }
    Ok(())
}

fn power_table(curve: &PowerCurve, err: &mut dyn Write) -> Result<()> {
    let methods = curve.methods();
    write!(err, "{:>8}", "tau")?;
    for m in &methods {
        write!(err, "{:>14}", m.name())?;
    }
    writeln!(err)?;
    let mut taus: Vec<f64> = curve.cells.iter().map(|c| c.tau).collect();
    taus.dedup();
    for t in taus {
        write!(err, "{t:>8}")?;
        for m in &methods {
            let c = curve.rate(t, *m).expect("cell present");
            write!(err, "{:>14}", format!("{:.3}±{:.3}", c.rate, c.se))?;
        }
        writeln!(err)?;
    }
    Ok(())
}

fn cmd_test(
    a: &TestArgs,
    seed: u64,
    seed_given: bool,
    csv_out: Option<&PathBuf>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<i32> {
    let s = read_csv_path(&a.data, a.normalize)?;
    let methods: Vec<Method> = if a.methods.is_empty() {
        vec![Method::SupDistance, Method::Rayleigh, Method::Bingham, Method::Packing]
    } else {
        a.methods.clone()
    };
    let calibration = match a.calibration {
        CalibrationArg::Asymptotic => Calibration::Asymptotic,
        CalibrationArg::MonteCarlo(reps) => Calibration::MonteCarlo { reps, seed },
    };
    let mut rows: Vec<TestOutcome> = Vec::new();
    for &m in &methods {
        let o = if m == Method::Projection && seed_given {
            run_projection_test(&s, &projection_direction(s.p(), seed), a.alpha, a.tail, calibration)?
        } else {
            run_test(&s, m, a.alpha, a.tail, calibration)?
        };
        rows.push(o);
    }
    writeln!(err, "n = {}, p = {}", s.n(), s.p())?;
    writeln!(
        err,
        "{:<14}{:>13}{:>13}{:>10}{:>8}",
        "method", "statistic", "standardized", "p-value", "reject"
    )?;
    for o in &rows {
        writeln!(
            err,
            "{:<14}{:>13.6}{:>13.4}{:>10.4}{:>8}",
            o.method.name(),
            o.statistic,
            o.standardized,
            o.p_value,
            o.reject
        )?;
        writeln!(
            out,
            "command=test method={} n={} p={} statistic={} standardized={} p_value={} reject={} alpha={} tail={} calibration={}",
            o.method,
            s.n(),
            s.p(),
            o.statistic,
            o.standardized,
            o.p_value,
            o.reject,
            o.alpha,
            o.tail,
            o.calibration
        )?;
    }
    if let Some(path) = csv_out {
        let mut f = fs::File::create(path)?;
        writeln!(f, "{}", TestOutcome::CSV_HEADER)?;
        for o in &rows {
            writeln!(f, "{}", o.csv_row())?;
        }
    }
    let any = rows.iter().any(|o| o.reject);
    Ok(if a.exit_on_reject && any { EXIT_REJECT } else { EXIT_OK })
}
