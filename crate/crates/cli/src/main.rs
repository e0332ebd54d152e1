//! `fracosc`: impulse, frequency and forced responses of the fractionally
//! damped oscillator, written as CSV.
//!
//! Exit codes: 0 ok, 2 usage or invalid parameters, 3 numerical failure,
//! 4 too many failed samples in `fit`. A `manifest.json` is written last on
//! exit codes 0 and 4.

mod manifest;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use fracosc::approx::{frf_curve, impulse_approx_on_grid, relative_magnitude_gap, FrfKind};
use fracosc::equiv::{self, draw_samples, fit_power_law, FitTarget, MIN_FIT_SAMPLES};
use fracosc::io;
use fracosc::ml_series::impulse_series_on_grid;
use fracosc::response::{self, fdm_reference, run_impulse_with, ComparisonReport, Scenario};
use fracosc::{linspace_grid, OscillatorParams, SeriesOptions, TimeSeries};

use manifest::Run;

/// Share of failed samples above which `fit` exits with code 4.
const FAILURE_BUDGET: f64 = 0.01;

#[derive(Parser)]
#[command(name = "fracosc", version, about = "Fractionally damped oscillator responses")]
struct Cli {
    /// Worker threads (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,

    /// Seed for sampled runs.
    #[arg(long, global = true, env = "FRACOSC_SEED", default_value_t = equiv::DEFAULT_SEED)]
    seed: u64,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Impulse response by series, approximation and/or finite differences.
    Impulse(ImpulseArgs),
    /// Exact and approximate frequency response magnitudes.
    Frf(FrfArgs),
    /// Power-law fit of the equivalent frequency or damping over sampled parameters.
    Fit(FitArgs),
    /// Forced response for a canned case or a scenario file.
    Respond(RespondArgs),
}

#[derive(Args)]
struct OscillatorArgs {
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    omega_n: f64,
    #[arg(long, default_value_t = 0.05, allow_negative_numbers = true)]
    zeta: f64,
    #[arg(long, default_value_t = 0.5, allow_negative_numbers = true)]
    beta: f64,
}

impl OscillatorArgs {
    fn params(&self) -> Result<OscillatorParams> {
        Ok(OscillatorParams::new(self.omega_n, self.zeta, self.beta)?)
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    Series,
    Approx,
    Fdm,
    All,
}

#[derive(Args)]
struct ImpulseArgs {
    #[command(flatten)]
    osc: OscillatorArgs,
    #[arg(long, default_value_t = 20.0, allow_negative_numbers = true)]
    t_end: f64,
    #[arg(long, default_value_t = 2001)]
    n: usize,
    #[arg(long, value_enum, default_value_t = Method::All)]
    method: Method,
    /// Sum the series in plain double precision.
    #[arg(long)]
    naive: bool,
    /// Continue past a series breakdown with finite-difference values
    /// (flagged `valid = 0`).
    #[arg(long)]
    fallback: bool,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct FrfArgs {
    #[command(flatten)]
    osc: OscillatorArgs,
    /// Upper end of the frequency ratio axis.
    #[arg(long, default_value_t = 3.0, allow_negative_numbers = true)]
    g_max: f64,
    #[arg(long, default_value_t = 601)]
    n: usize,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Target {
    OmegaD,
    ZetaEq,
}

impl Target {
    fn fit_target(self) -> FitTarget {
        match self {
            Target::OmegaD => FitTarget::OmegaD,
            Target::ZetaEq => FitTarget::ZetaEq,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Target::OmegaD => "omega-d",
            Target::ZetaEq => "zeta-eq",
        }
    }
}

#[derive(Args)]
struct FitArgs {
    #[arg(long, value_enum)]
    target: Target,
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
#[group(required = true, multiple = false, id = "source")]
struct Source {
    /// `1`-`4` or `yuan`.
    #[arg(long)]
    case: Option<String>,
    /// `key = value` file.
    #[arg(long)]
    scenario: Option<PathBuf>,
}

#[derive(Args)]
struct RespondArgs {
    #[command(flatten)]
    source: Source,
    /// Override the case horizon.
    #[arg(long)]
    t_end: Option<f64>,
    /// Override the case sample count.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

/// Failure carrying its exit code.
#[derive(Debug)]
struct Exit {
    code: u8,
    message: String,
}

impl fmt::Display for Exit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for Exit {}

fn fail(code: u8, message: impl Into<String>) -> anyhow::Error {
    Exit {
        code,
        message: message.into(),
    }
    .into()
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<Exit>() {
            return e.code;
        }
        if let Some(e) = cause.downcast_ref::<fracosc::Error>() {
            return match e {
                fracosc::Error::Domain { .. } | fracosc::Error::UnknownCase(_) | fracosc::Error::Scenario(_) => 2,
                _ => 3,
            };
        }
    }
    1
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.jobs > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.jobs).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    let result = match &cli.command {
        Command::Impulse(a) => cmd_impulse(a, cli.seed),
        Command::Frf(a) => cmd_frf(a, cli.seed),
        Command::Fit(a) => cmd_fit(a, cli.seed),
        Command::Respond(a) => cmd_respond(a, cli.seed),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn record_params(run: &mut Run, p: &OscillatorParams) {
    run.param("omega_n", p.omega_n);
    run.param("zeta", p.zeta);
    run.param("beta", p.beta);
}

/// Fills every masked sample of `series` with the matching `backup` value,
/// keeping the mask.
fn patch_masked(series: &TimeSeries, backup: &TimeSeries) -> Result<TimeSeries> {
    let values = series
        .values()
        .iter()
        .zip(backup.values())
        .zip(series.mask())
        .map(|((&s, &b), &ok)| if ok { s } else { b })
        .collect();
    Ok(TimeSeries::with_mask(
        *series.grid(),
        values,
        series.mask().to_vec(),
        series.quantity(),
    )?)
}

fn cmd_impulse(a: &ImpulseArgs, seed: u64) -> Result<u8> {
    let p = a.osc.params()?;
    let grid = linspace_grid(a.t_end, a.n)?;
    let opts = if a.naive {
        SeriesOptions::naive()
    } else {
        SeriesOptions::default()
    };
    let mut run = Run::start(&a.out, "impulse", seed)?;
    record_params(&mut run, &p);
    run.param("t_end", a.t_end);
    run.param("n", a.n);
    run.param("naive", a.naive);
    run.param("fallback", a.fallback);

    match a.method {
        Method::Series => {
            run.param("method", "series");
            let mut series = impulse_series_on_grid(&p, &grid, &opts, true)?;
            if let Some(t) = series.first_invalid_time() {
                if !a.fallback {
                    return Err(fail(
                        3,
                        format!("series blew up at t = {t} s; use the stable summation or --fallback"),
                    ));
                }
                eprintln!("warning: series invalid from t = {t} s, filled from finite differences");
                series = patch_masked(&series, &fdm_reference(&p, &grid, None)?)?;
            }
            run.emit("impulse_series.csv", |w| io::write_series(w, &series))?;
        }
        Method::Approx => {
            run.param("method", "approx");
            let x = impulse_approx_on_grid(&p, &grid)?;
            run.emit("impulse_approx.csv", |w| io::write_series(w, &x))?;
        }
        Method::Fdm => {
            run.param("method", "fdm");
            let x = fdm_reference(&p, &grid, None)?;
            run.emit("impulse_fdm.csv", |w| io::write_series(w, &x))?;
        }
        Method::All => {
            run.param("method", "all");
            let report = run_impulse_with("impulse", &p, &grid, &opts)?;
            if report.valid_until < grid.t_end() {
                eprintln!("warning: series invalid from t = {} s", report.valid_until);
            }
            let series = if a.fallback {
                patch_masked(&report.series, report.fdm.as_ref().expect("impulse runs carry FDM"))?
            } else {
                report.series.clone()
            };
            run.emit("impulse_series.csv", |w| io::write_series(w, &series))?;
            run.emit("impulse_approx.csv", |w| io::write_series(w, &report.approx))?;
            if let Some(f) = &report.fdm {
                run.emit("impulse_fdm.csv", |w| io::write_series(w, f))?;
            }
            run.emit("impulse_all.csv", |w| io::write_report(w, &report))?;
            summarize(&report);
        }
    }
    run.finish()?;
    Ok(0)
}

fn cmd_frf(a: &FrfArgs, seed: u64) -> Result<u8> {
    let p = a.osc.params()?;
    let exact = frf_curve(&p, FrfKind::Exact, a.g_max, a.n)?;
    let approx = frf_curve(&p, FrfKind::Approx, a.g_max, a.n)?;
    let mut run = Run::start(&a.out, "frf", seed)?;
    record_params(&mut run, &p);
    run.param("g_max", a.g_max);
    run.param("n", a.n);
    run.emit("frf.csv", |w| io::write_frf_pair(w, &exact, &approx))?;
    if let (Some((ge, me)), Some((ga, ma))) = (exact.peak(), approx.peak()) {
        println!("peak exact  g = {ge:.6}  |h| = {me:.6e}");
        println!("peak approx g = {ga:.6}  |h| = {ma:.6e}");
    }
    println!("relative magnitude gap {:.6e}", relative_magnitude_gap(&exact, &approx));
    run.finish()?;
    Ok(0)
}

fn cmd_fit(a: &FitArgs, seed: u64) -> Result<u8> {
    if a.samples == 0 {
        return Err(fail(2, "--samples must be at least 1"));
    }
    let target = a.target.fit_target();
    let set = draw_samples(target, a.samples, seed);
    let mut run = Run::start(&a.out, "fit", seed)?;
    run.param("target", a.target.name());
    run.param("samples", a.samples);

    let name = a.target.name().replace('-', "_");
    run.emit(&format!("scatter_{name}.csv"), |w| io::write_scatter(w, &set.points))?;
    let (a0, a1) = target.reference_constants();
    let fit = if set.points.len() >= MIN_FIT_SAMPLES {
        fit_power_law(&set.points, a0, a1)?
    } else {
        eprintln!(
            "warning: {} usable samples, fewer than the {MIN_FIT_SAMPLES} a fit needs; reporting no estimate",
            set.points.len()
        );
        equiv::RegressionFit {
            a0: f64::NAN,
            a1: f64::NAN,
            ci95_a0: (f64::NEG_INFINITY, f64::INFINITY),
            ci95_a1: (f64::NEG_INFINITY, f64::INFINITY),
            n_samples: set.points.len(),
            rmse: f64::NAN,
            iterations: 0,
        }
    };
    run.emit(&format!("fit_{name}.csv"), |w| io::write_fit(w, &fit))?;
    println!(
        "a0 = {:.4} [{:.4}, {:.4}]  a1 = {:.4} [{:.4}, {:.4}]  rmse = {:.4e}  n = {}",
        fit.a0, fit.ci95_a0.0, fit.ci95_a0.1, fit.a1, fit.ci95_a1.0, fit.ci95_a1.1, fit.rmse, fit.n_samples
    );

    let rate = set.failure_rate();
    run.param("failed", set.failures.len());
    run.finish()?;
    if rate > FAILURE_BUDGET {
        let (i, e) = &set.failures[0];
        eprintln!(
            "error: {} of {} samples failed ({:.2}%), first at index {i}: {e}",
            set.failures.len(),
            a.samples,
            100.0 * rate
        );
        return Ok(4);
    }
    Ok(0)
}

fn cmd_respond(a: &RespondArgs, seed: u64) -> Result<u8> {
    let mut run = Run::start(&a.out, "respond", seed)?;
    let report = match (&a.source.case, &a.source.scenario) {
        (Some(id), _) => {
            let spec = response::case_spec(id)?;
            let t_end = a.t_end.unwrap_or(spec.t_end);
            let n = a.n.unwrap_or(spec.n);
            let report = response::run_case(id, t_end, n)?;
            run.param("case", spec.id);
            record_params(&mut run, &spec.params);
            run.param("t_end", t_end);
            run.param("n", n);
            report
        }
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))
                .map_err(|e| fail(2, format!("{e:#}")))?;
            let mut sc = Scenario::parse(&text)?;
            if let Some(t) = a.t_end {
                sc.t_end = t;
            }
            if let Some(n) = a.n {
                sc.n = n;
            }
            let report = sc.run("scenario")?;
            run.param("scenario", path.display().to_string());
            record_params(&mut run, &sc.params);
            run.param("t_end", sc.t_end);
            run.param("n", sc.n);
            run.param("excitation", sc.excitation.kind().name());
            report
        }
        (None, None) => unreachable!("clap requires one source"),
    };
    run.emit(&format!("respond_{}.csv", report.case_id), |w| io::write_report(w, &report))?;
    summarize(&report);
    run.finish()?;
    Ok(0)
}

fn summarize(r: &ComparisonReport) {
    println!("series valid until t = {}", r.valid_until);
    println!(
        "max |series - approx| = {:.6e} ({:.4e} of the series peak)",
        r.residual_max, r.residual_rel
    );
    if let (Some(fa), Some(fs)) = (r.fdm_approx_max, r.fdm_series_max) {
        println!("max |fdm - approx| = {fa:.6e}, max |fdm - series| = {fs:.6e}");
    }
}
