//! Command-line front end for the `coxband` library.
//!
//! Four subcommands: `fit` (parameter table and Breslow baseline), `band`
//! (simultaneous confidence bands for the cumulative baseline hazard or a
//! covariate-specific survival curve), `simulate` (Monte-Carlo coverage
//! experiment), and `rrm` (restricted residual mean with a bootstrap CI).
//!
//! Settings come from flags, or from an optional `key=value` config file
//! (`--config`); flags win over config values. The worker count comes from
//! `--threads`, the config key `threads`, or the `COXBAND_THREADS`
//! environment variable, in that order of precedence.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data error
//! (unreadable, malformed, or structurally invalid input), 3 numerical
//! failure (non-convergence, singular systems, degenerate bootstrap).
//! All diagnostics go to standard error; outputs on standard output and in
//! files are byte-identical across reruns and thread counts for a fixed
//! seed.

mod io;

pub use io::{band_csv, baseline_csv, coverage_csv, read_csv};

use clap::parser::ValueSource;
use clap::{Arg, ArgAction, ArgMatches, Command};
use coxband::{
    build_band, coverage_experiment, fit, rrm_ci, rrm_diff_ci, run_bootstrap, survival_band,
    BandSpec, BootConfig, DgpConfig, Error, ExperimentConfig, FitOptions, Increments,
    MultiplierKind, Scheme, Transform, WeightKind,
};
use ndarray::arr1;
use std::collections::HashMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

const SCHEMA_VERSION: u32 = 1;

/// A failure with its process exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags, bad config file, or invalid settings (exit 1).
    Usage(String),
    /// Unreadable or invalid input data, or an unwritable output (exit 2).
    Data(String),
    /// The computation itself failed (exit 3).
    Numerical(String),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Numerical(m) => m,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::EmptyDataset
            | Error::InvalidRow { .. }
            | Error::CovariateDimension { .. }
            | Error::DimensionMismatch { .. }
            | Error::QueryBeyondTau { .. }
            | Error::NoEventsInInterval { .. } => CliError::Data(e.to_string()),
            Error::InvalidConfig { .. } | Error::TooFewReplicates { .. } => {
                CliError::Usage(e.to_string())
            }
            Error::MonotoneLikelihood { .. }
            | Error::SingularInformation { .. }
            | Error::DidNotConverge { .. }
            | Error::NoConvergedReplicates
            | Error::ZeroVarianceOnGrid { .. }
            | Error::ZeroEstimateOnGrid { .. }
            | Error::RegenerationLimit { .. } => CliError::Numerical(e.to_string()),
        }
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// Runs the tool on explicit arguments and returns the process exit code.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let matches = match command().try_get_matches_from(argv) {
        Ok(m) => m,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(&matches) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.code()
        }
    }
}

fn command() -> Command {
    let input = Arg::new("input")
        .long("input")
        .value_name("FILE")
        .required(true)
        .help("Input CSV: id, optional start, stop, status, covariate columns");
    let tau = Arg::new("tau")
        .long("tau")
        .value_name("TIME")
        .help("Truncate the follow-up horizon at this time");
    let fit_opts = |cmd: Command| {
        cmd.arg(
            Arg::new("score-tol")
                .long("score-tol")
                .value_name("TOL")
                .default_value("1e-9")
                .help("Newton convergence threshold on the score sup norm"),
        )
        .arg(
            Arg::new("max-iter")
                .long("max-iter")
                .value_name("N")
                .default_value("50")
                .help("Maximum Newton iterations"),
        )
        .arg(
            Arg::new("divergence-bound")
                .long("divergence-bound")
                .value_name("BOUND")
                .default_value("50")
                .help("Parameter sup norm treated as likelihood divergence"),
        )
    };
    let boot_opts = |cmd: Command| {
        cmd.arg(
            Arg::new("scheme")
                .long("scheme")
                .value_name("direct|ee")
                .default_value("direct")
                .help("Bootstrap scheme: direct linearization or estimating-equation refit"),
        )
        .arg(
            Arg::new("increments")
                .long("increments")
                .value_name("dn|dmhat")
                .default_value("dn")
                .help("Residual increments: counting-process jumps or martingale estimates"),
        )
        .arg(
            Arg::new("multiplier")
                .long("multiplier")
                .value_name("normal|poisson|exponential")
                .default_value("normal")
                .help("Multiplier distribution (mean zero, unit variance)"),
        )
        .arg(
            Arg::new("B")
                .long("B")
                .value_name("COUNT")
                .default_value("499")
                .help("Bootstrap replicates"),
        )
        .arg(
            Arg::new("alpha")
                .long("alpha")
                .value_name("LEVEL")
                .default_value("0.05")
                .help("Miscoverage level"),
        )
        .arg(
            Arg::new("seed")
                .long("seed")
                .value_name("SEED")
                .default_value("0")
                .help("Root seed; fixes every random draw"),
        )
    };

    let fit_cmd = fit_opts(
        Command::new("fit")
            .about("Fit the model; print the parameter table, optionally write the baseline")
            .arg(input.clone())
            .arg(tau.clone())
            .arg(
                Arg::new("out-baseline")
                    .long("out-baseline")
                    .value_name("FILE")
                    .help("Write the baseline hazard as CSV (t,jump,cumulative)"),
            ),
    );

    let band_cmd = boot_opts(fit_opts(
        Command::new("band")
            .about("Simultaneous confidence band for the cumulative baseline hazard")
            .arg(input.clone())
            .arg(tau.clone())
            .arg(
                Arg::new("output")
                    .long("output")
                    .value_name("PREFIX")
                    .required(true)
                    .help("Write PREFIX.csv and PREFIX.json"),
            )
            .arg(
                Arg::new("weight")
                    .long("weight")
                    .value_name("ep|hw")
                    .default_value("hw")
                    .help("Band weight: equal precision or Hall-Wellner"),
            )
            .arg(
                Arg::new("transform")
                    .long("transform")
                    .value_name("id|log")
                    .default_value("log")
                    .help("Band construction scale"),
            )
            .arg(
                Arg::new("interval")
                    .long("interval")
                    .value_name("T1:T2")
                    .required(true)
                    .help("Band interval endpoints"),
            )
            .arg(
                Arg::new("covariates")
                    .long("covariates")
                    .value_name("V1,V2,...")
                    .help("Covariate profile: band for that survival curve instead"),
            ),
    ));

    let simulate_cmd = boot_opts(
        Command::new("simulate")
            .about("Monte-Carlo coverage experiment over band variants")
            .arg(
                Arg::new("n")
                    .long("n")
                    .value_name("SUBJECTS")
                    .default_value("100")
                    .help("Subjects per generated dataset"),
            )
            .arg(
                Arg::new("beta0")
                    .long("beta0")
                    .value_name("BETA")
                    .default_value("0.3")
                    .help("True regression parameter"),
            )
            .arg(
                Arg::new("cov-sd")
                    .long("cov-sd")
                    .value_name("SD")
                    .default_value("4")
                    .help("Covariate standard deviation"),
            )
            .arg(
                Arg::new("admin-censor")
                    .long("admin-censor")
                    .value_name("TIME")
                    .default_value("3")
                    .help("Administrative censoring time"),
            )
            .arg(
                Arg::new("replications")
                    .long("replications")
                    .value_name("R")
                    .default_value("100")
                    .help("Accepted repetitions required"),
            )
            .arg(
                Arg::new("max-attempts")
                    .long("max-attempts")
                    .value_name("N|auto")
                    .default_value("auto")
                    .help("Attempt budget (auto: replications plus a 20% margin)"),
            )
            .arg(
                Arg::new("variants")
                    .long("variants")
                    .value_name("LIST")
                    .default_value("hw-log,hw-id,ep-log,ep-id")
                    .help("Comma-separated band variants (weight-transform)"),
            )
            .arg(
                Arg::new("interval")
                    .long("interval")
                    .value_name("T1:T2")
                    .default_value("0.5:3")
                    .help("Band interval endpoints"),
            )
            .arg(
                Arg::new("out-csv")
                    .long("out-csv")
                    .value_name("FILE")
                    .help("Write per-variant tallies as CSV"),
            )
            .arg(
                Arg::new("out-json")
                    .long("out-json")
                    .value_name("FILE")
                    .help("Write configuration and full results as JSON"),
            ),
    );

    let rrm_cmd = boot_opts(fit_opts(
        Command::new("rrm")
            .about("Restricted residual mean of a covariate profile, with bootstrap CI")
            .arg(input)
            .arg(
                Arg::new("covariates")
                    .long("covariates")
                    .value_name("V1,V2,...")
                    .required(true)
                    .help("Covariate profile"),
            )
            .arg(
                Arg::new("tau")
                    .long("tau")
                    .value_name("HORIZON")
                    .required(true)
                    .help("Restriction horizon"),
            )
            .arg(
                Arg::new("diff")
                    .long("diff")
                    .value_name("V1,V2,...")
                    .help("Second profile: CI for the difference of restricted means"),
            )
            .arg(
                Arg::new("out-json")
                    .long("out-json")
                    .value_name("FILE")
                    .help("Write the interval as JSON"),
            ),
    ));

    Command::new("coxband")
        .about("Cox proportional hazards with wild-bootstrap confidence bands")
        .version(env!("CARGO_PKG_VERSION"))
        .subcommand_required(true)
        .arg_required_else_help(true)
        .arg(
            Arg::new("config")
                .long("config")
                .value_name("FILE")
                .global(true)
                .help("key=value settings file; flags take precedence"),
        )
        .arg(
            Arg::new("threads")
                .long("threads")
                .value_name("N")
                .global(true)
                .help("Worker threads (default: COXBAND_THREADS or all cores)"),
        )
        .arg(
            Arg::new("quiet")
                .long("quiet")
                .action(ArgAction::SetTrue)
                .global(true)
                .help("Suppress timing output on standard error"),
        )
        .subcommand(fit_cmd)
        .subcommand(band_cmd)
        .subcommand(simulate_cmd)
        .subcommand(rrm_cmd)
}

/// Keys accepted in a `--config` file. Keys that do not apply to the running
/// subcommand are ignored.
const CONFIG_KEYS: &[&str] = &[
    "scheme",
    "increments",
    "multiplier",
    "weight",
    "transform",
    "B",
    "alpha",
    "seed",
    "interval",
    "threads",
    "score-tol",
    "max-iter",
    "divergence-bound",
];

fn load_config(path: &Path) -> Result<HashMap<String, String>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
    let mut map = HashMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            usage(format!(
                "config {} line {}: expected key=value",
                path.display(),
                lineno + 1
            ))
        })?;
        let key = key.trim().to_string();
        if !CONFIG_KEYS.contains(&key.as_str()) {
            return Err(usage(format!(
                "config {} line {}: unknown key `{key}`",
                path.display(),
                lineno + 1
            )));
        }
        map.insert(key, value.trim().to_string());
    }
    Ok(map)
}

/// One subcommand's settings view: flag values merged over config-file
/// values, flags winning.
struct Ctx<'a> {
    m: &'a ArgMatches,
    cfg: HashMap<String, String>,
}

impl Ctx<'_> {
    /// The effective raw value of an arg: the command line if given there,
    /// else the config file, else the clap default (if any).
    fn raw(&self, id: &str) -> Option<String> {
        let known = self.m.try_contains_id(id).is_ok();
        let from_cli = known && self.m.value_source(id) == Some(ValueSource::CommandLine);
        if !from_cli {
            if let Some(v) = self.cfg.get(id) {
                return Some(v.clone());
            }
        }
        if known {
            self.m.get_one::<String>(id).cloned()
        } else {
            None
        }
    }

    fn str(&self, id: &str) -> Result<String, CliError> {
        self.raw(id)
            .ok_or_else(|| usage(format!("missing required value for --{id}")))
    }

    fn f64(&self, id: &str) -> Result<f64, CliError> {
        let s = self.str(id)?;
        s.parse()
            .map_err(|_| usage(format!("--{id}: {s:?} is not a number")))
    }

    fn opt_f64(&self, id: &str) -> Result<Option<f64>, CliError> {
        match self.raw(id) {
            None => Ok(None),
            Some(s) => s
                .parse()
                .map(Some)
                .map_err(|_| usage(format!("--{id}: {s:?} is not a number"))),
        }
    }

    fn usize(&self, id: &str) -> Result<usize, CliError> {
        let s = self.str(id)?;
        s.parse()
            .map_err(|_| usage(format!("--{id}: {s:?} is not a non-negative integer")))
    }

    fn u64(&self, id: &str) -> Result<u64, CliError> {
        let s = self.str(id)?;
        s.parse()
            .map_err(|_| usage(format!("--{id}: {s:?} is not a non-negative integer")))
    }

    fn path(&self, id: &str) -> Result<PathBuf, CliError> {
        Ok(PathBuf::from(self.str(id)?))
    }

    fn opt_path(&self, id: &str) -> Option<PathBuf> {
        self.raw(id).map(PathBuf::from)
    }
}

fn parse_interval(s: &str) -> Result<(f64, f64), CliError> {
    let (a, b) = s
        .split_once(':')
        .ok_or_else(|| usage(format!("--interval: expected T1:T2, got {s:?}")))?;
    let t1: f64 = a
        .trim()
        .parse()
        .map_err(|_| usage(format!("--interval: {a:?} is not a number")))?;
    let t2: f64 = b
        .trim()
        .parse()
        .map_err(|_| usage(format!("--interval: {b:?} is not a number")))?;
    Ok((t1, t2))
}

fn parse_profile(s: &str) -> Result<Vec<f64>, CliError> {
    s.split(',')
        .map(|part| {
            part.trim()
                .parse()
                .map_err(|_| usage(format!("--covariates: {part:?} is not a number")))
        })
        .collect()
}

fn parse_scheme(s: &str) -> Result<Scheme, CliError> {
    match s {
        "direct" => Ok(Scheme::Direct),
        "ee" => Ok(Scheme::EstimatingEquation),
        other => Err(usage(format!("--scheme: expected direct|ee, got {other:?}"))),
    }
}

fn parse_increments(s: &str) -> Result<Increments, CliError> {
    match s {
        "dn" => Ok(Increments::Dn),
        "dmhat" => Ok(Increments::Dmhat),
        other => Err(usage(format!(
            "--increments: expected dn|dmhat, got {other:?}"
        ))),
    }
}

fn parse_multiplier(s: &str) -> Result<MultiplierKind, CliError> {
    match s {
        "normal" => Ok(MultiplierKind::Normal),
        "poisson" => Ok(MultiplierKind::Poisson),
        "exponential" => Ok(MultiplierKind::Exponential),
        other => Err(usage(format!(
            "--multiplier: expected normal|poisson|exponential, got {other:?}"
        ))),
    }
}

fn parse_weight(s: &str) -> Result<WeightKind, CliError> {
    match s {
        "ep" => Ok(WeightKind::EqualPrecision),
        "hw" => Ok(WeightKind::HallWellner),
        other => Err(usage(format!("--weight: expected ep|hw, got {other:?}"))),
    }
}

fn parse_transform(s: &str) -> Result<Transform, CliError> {
    match s {
        "id" => Ok(Transform::Identity),
        "log" => Ok(Transform::Log),
        other => Err(usage(format!("--transform: expected id|log, got {other:?}"))),
    }
}

fn parse_variants(s: &str) -> Result<Vec<(WeightKind, Transform)>, CliError> {
    let mut out = Vec::new();
    for token in s.split(',') {
        let token = token.trim();
        let (w, t) = token
            .split_once('-')
            .ok_or_else(|| usage(format!("--variants: expected weight-transform, got {token:?}")))?;
        out.push((parse_weight(w)?, parse_transform(t)?));
    }
    if out.is_empty() {
        return Err(usage("--variants: empty list"));
    }
    Ok(out)
}

fn fit_options(ctx: &Ctx) -> Result<FitOptions, CliError> {
    Ok(FitOptions {
        score_tol: ctx.f64("score-tol")?,
        max_iter: ctx.usize("max-iter")?,
        divergence_bound: ctx.f64("divergence-bound")?,
    })
}

fn boot_config(ctx: &Ctx, opts: FitOptions) -> Result<BootConfig, CliError> {
    Ok(BootConfig {
        scheme: parse_scheme(&ctx.str("scheme")?)?,
        increments: parse_increments(&ctx.str("increments")?)?,
        multiplier: parse_multiplier(&ctx.str("multiplier")?)?,
        b: ctx.usize("B")?,
        seed: ctx.u64("seed")?,
        fit_options: opts,
    })
}

fn init_threads(ctx: &Ctx) -> Result<(), CliError> {
    let from_args = ctx.raw("threads");
    let resolved = match from_args {
        Some(s) => Some(
            s.parse::<usize>()
                .ok()
                .filter(|&k| k >= 1)
                .ok_or_else(|| usage(format!("--threads: {s:?} is not a positive integer")))?,
        ),
        None => match std::env::var("COXBAND_THREADS") {
            Ok(s) => Some(s.parse::<usize>().ok().filter(|&k| k >= 1).ok_or_else(|| {
                usage(format!("COXBAND_THREADS: {s:?} is not a positive integer"))
            })?),
            Err(_) => None,
        },
    };
    if let Some(k) = resolved {
        // Ignore the error: the global pool can only be built once per
        // process, and a pre-existing pool is fine for in-process callers.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(k).build_global();
    }
    Ok(())
}

fn dispatch(matches: &ArgMatches) -> Result<(), CliError> {
    let (name, sub) = matches
        .subcommand()
        .expect("subcommand_required guarantees a subcommand");
    let cfg = match sub.get_one::<String>("config") {
        Some(p) => load_config(Path::new(p))?,
        None => HashMap::new(),
    };
    let ctx = Ctx { m: sub, cfg };
    init_threads(&ctx)?;
    let quiet = sub.get_flag("quiet");
    let started = Instant::now();
    let result = match name {
        "fit" => run_fit(&ctx),
        "band" => run_band(&ctx),
        "simulate" => run_simulate(&ctx),
        "rrm" => run_rrm(&ctx),
        other => Err(usage(format!("unknown subcommand {other:?}"))),
    };
    if !quiet {
        eprintln!("wall time: {:.3}s", started.elapsed().as_secs_f64());
    }
    result
}

fn load_dataset(ctx: &Ctx) -> Result<(coxband::SurvivalDataset, Vec<String>), CliError> {
    let path = ctx.path("input")?;
    let (ds, names) = read_csv(&path)?;
    match ctx.opt_f64("tau")? {
        Some(tau) => Ok((ds.with_tau(tau)?, names)),
        None => Ok((ds, names)),
    }
}

fn run_fit(ctx: &Ctx) -> Result<(), CliError> {
    let (ds, names) = load_dataset(ctx)?;
    let opts = fit_options(ctx)?;
    let fitted = fit(&ds, &opts)?;
    let cov = fitted.covariance();

    let mut table = String::from("covariate,beta,se\n");
    for (j, name) in names.iter().enumerate() {
        let se = cov
            .as_ref()
            .map(|c| io::fmt_f64(c[[j, j]].sqrt()))
            .unwrap_or_else(|| "NA".to_string());
        table.push_str(&format!("{name},{},{se}\n", io::fmt_f64(fitted.beta_hat[j])));
    }
    print!("{table}");
    eprintln!(
        "log partial likelihood {} after {} iterations",
        io::fmt_f64(fitted.log_pl),
        fitted.iterations
    );

    if let Some(path) = ctx.opt_path("out-baseline") {
        io::write_file(&path, &io::baseline_csv(&fitted.baseline))?;
    }
    Ok(())
}

fn run_band(ctx: &Ctx) -> Result<(), CliError> {
    let (ds, _) = load_dataset(ctx)?;
    let opts = fit_options(ctx)?;
    let boot = boot_config(ctx, opts.clone())?;
    let interval = parse_interval(&ctx.str("interval")?)?;
    let spec = BandSpec {
        interval,
        alpha: ctx.f64("alpha")?,
        weight: parse_weight(&ctx.str("weight")?)?,
        transform: parse_transform(&ctx.str("transform")?)?,
    };
    let profile = match ctx.raw("covariates") {
        Some(s) => Some(parse_profile(&s)?),
        None => None,
    };

    let fitted = fit(&ds, &opts)?;
    let reps = run_bootstrap(&fitted, &ds, &boot, &[interval.0, interval.1])?;
    let (kind, band) = match &profile {
        None => ("cumulative_hazard", build_band(&fitted, &reps, &spec)?),
        Some(x) => (
            "survival",
            survival_band(&fitted, &reps, &arr1(x), &spec)?,
        ),
    };

    let doc = io::BandDocument {
        schema_version: SCHEMA_VERSION,
        kind,
        band: &band,
        diagnostics: io::Diagnostics {
            scheme: ctx.str("scheme")?,
            increments: ctx.str("increments")?,
            multiplier: ctx.str("multiplier")?,
            b_requested: boot.b,
            n_failed: reps.n_failed,
            seed: boot.seed,
            n_subjects: ds.n_subjects(),
        },
    };
    let prefix = ctx.str("output")?;
    io::write_file(Path::new(&format!("{prefix}.csv")), &io::band_csv(&band))?;
    io::write_file(Path::new(&format!("{prefix}.json")), &io::to_json_string(&doc)?)?;
    println!(
        "c_star={} b_used={} grid_points={}",
        io::fmt_f64(band.c_star),
        band.b_used,
        band.grid.len()
    );
    Ok(())
}

fn run_simulate(ctx: &Ctx) -> Result<(), CliError> {
    let opts = FitOptions::default();
    let boot = boot_config(ctx, opts)?;
    let interval = parse_interval(&ctx.str("interval")?)?;
    let replications = ctx.usize("replications")?;
    let max_attempts = match ctx.str("max-attempts")?.as_str() {
        "auto" => replications + (replications / 5).max(1),
        s => s
            .parse()
            .map_err(|_| usage(format!("--max-attempts: {s:?} is not a count or `auto`")))?,
    };
    let cfg = ExperimentConfig {
        dgp: DgpConfig {
            n: ctx.usize("n")?,
            beta0: ctx.f64("beta0")?,
            cov_sd: ctx.f64("cov-sd")?,
            admin_censor: ctx.f64("admin-censor")?,
            band_interval: interval,
            seed: 0,
        },
        boot,
        bands: parse_variants(&ctx.str("variants")?)?,
        alpha: ctx.f64("alpha")?,
        interval,
        replications,
        max_attempts,
        seed: ctx.u64("seed")?,
    };

    let result = coverage_experiment(&cfg)?;
    let fingerprint = format!("{:016x}", result.fingerprint());

    let mut stdout = String::new();
    for cell in &result.cells {
        stdout.push_str(&format!(
            "variant={}-{} covered={} evaluated={} rate={} mc_se={} mean_width={}\n",
            io::weight_token(cell.weight),
            io::transform_token(cell.transform),
            cell.covered,
            cell.evaluated,
            io::fmt_f64(cell.rate()),
            io::fmt_f64(cell.mc_se()),
            io::fmt_f64(cell.mean_width),
        ));
    }
    stdout.push_str(&format!(
        "attempts={} discarded={} mean_replicate_failure={}\n",
        result.attempts,
        result.discarded,
        io::fmt_f64(result.mean_replicate_failure),
    ));
    stdout.push_str(&format!("fingerprint={fingerprint}\n"));
    print!("{stdout}");

    if let Some(path) = ctx.opt_path("out-csv") {
        io::write_file(&path, &io::coverage_csv(&result))?;
    }
    if let Some(path) = ctx.opt_path("out-json") {
        #[derive(serde::Serialize)]
        struct SimDocument<'a> {
            schema_version: u32,
            config: &'a ExperimentConfig,
            result: &'a coxband::CoverageResult,
            fingerprint: &'a str,
        }
        let doc = SimDocument {
            schema_version: SCHEMA_VERSION,
            config: &cfg,
            result: &result,
            fingerprint: &fingerprint,
        };
        io::write_file(&path, &io::to_json_string(&doc)?)?;
    }
    Ok(())
}

fn run_rrm(ctx: &Ctx) -> Result<(), CliError> {
    // `--tau` is the restricted-mean horizon here, not an observation
    // horizon, so the dataset keeps its default terminal time (max stop).
    let (ds, _) = read_csv(&ctx.path("input")?)?;
    let opts = fit_options(ctx)?;
    let boot = boot_config(ctx, opts.clone())?;
    let tau = ctx.f64("tau")?;
    let alpha = ctx.f64("alpha")?;
    let x = arr1(&parse_profile(&ctx.str("covariates")?)?);
    let diff = match ctx.raw("diff") {
        Some(s) => Some(arr1(&parse_profile(&s)?)),
        None => None,
    };

    let fitted = fit(&ds, &opts)?;
    let grid = vec![tau];
    let reps = run_bootstrap(&fitted, &ds, &boot, &grid)?;
    let interval = match &diff {
        None => rrm_ci(&fitted, &reps, &x, tau, alpha)?,
        Some(y) => rrm_diff_ci(&fitted, &reps, &x, y, tau, alpha)?,
    };
    println!(
        "estimate={} lower={} upper={}",
        io::fmt_f64(interval.estimate),
        io::fmt_f64(interval.lower),
        io::fmt_f64(interval.upper)
    );
    if let Some(path) = ctx.opt_path("out-json") {
        #[derive(serde::Serialize)]
        struct RrmDocument {
            schema_version: u32,
            tau: f64,
            alpha: f64,
            difference: bool,
            estimate: f64,
            lower: f64,
            upper: f64,
        }
        let doc = RrmDocument {
            schema_version: SCHEMA_VERSION,
            tau,
            alpha,
            difference: diff.is_some(),
            estimate: interval.estimate,
            lower: interval.lower,
            upper: interval.upper,
        };
        io::write_file(&path, &io::to_json_string(&doc)?)?;
    }
    Ok(())
}
