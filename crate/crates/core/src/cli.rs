//! Command-line front end.
//!
//! [`run`] parses arguments and writes to caller-supplied sinks, so the
//! binary and the tests share one code path. Exit codes: 0 pass, 1 certified
//! failure or numerical breakdown, 2 usage error. Curves are CSV by
//! default, certificates are always JSON. Identical arguments produce
//! byte-identical output.

use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::bochner::{
    boundedness_check, design_elements, fit_measure, fit_negative_measure, synth_negative_profile,
    synth_positive_profile, MeasureSpec, NNLS_TOL,
};
use crate::classb::{pi_eval, recover_from_samples, ClassBSamples, RecoveryOptions, SLOPE_TOL};
use crate::error::{Error, Result};
use crate::group::{random_sl_family, spherical_eval_profile, spherical_limit_test, GroupElement};
use crate::kernels::{negtype_check, psd_check, schoenberg_check_gram, PairProfiles, GRAM_TOL};
use crate::measures::{
    density_grid, ft_residual, single_density_grid, weak_convergence_check, DEFAULT_STEP, DEFAULT_T_MAX,
};
use crate::params::{Alpha, ROOT_IMAG_TOL};
use crate::Complex64;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Names accepted by `--tol-<name> <value>`; `--tol` alone means `gram`.
pub const TOLERANCE_NAMES: [&str; 6] = ["gram", "root-imag", "slope", "nnls", "convergence", "ft"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Tolerances {
    pub gram: f64,
    pub root_imag: f64,
    pub slope: f64,
    pub nnls: f64,
    pub convergence: f64,
    /// Fourier residual limit; `None` selects 1e-6 for one factor and 1e-4
    /// for convolutions.
    pub ft: Option<f64>,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            gram: GRAM_TOL,
            root_imag: ROOT_IMAG_TOL,
            slope: SLOPE_TOL,
            nnls: NNLS_TOL,
            convergence: 1e-3,
            ft: None,
        }
    }
}

impl Tolerances {
    fn set(&mut self, name: &str, value: f64) -> std::result::Result<(), String> {
        if !(value > 0.0 && value.is_finite()) {
            return Err(format!("tolerance {name} must be a positive finite number, got {value}"));
        }
        match name {
            "gram" => self.gram = value,
            "root-imag" => self.root_imag = value,
            "slope" => self.slope = value,
            "nnls" => self.nnls = value,
            "convergence" => self.convergence = value,
            "ft" => self.ft = Some(value),
            _ => {
                return Err(format!(
                    "unknown tolerance {name:?}; known: {}",
                    TOLERANCE_NAMES.join(", ")
                ))
            }
        }
        Ok(())
    }
}

#[derive(Debug, Parser)]
#[command(name = "olshanski", version, about = "Spherical functions of (SL(∞), SU(∞)) at finite rank")]
struct Cli {
    /// Base seed for every random draw.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Write to this file instead of stdout.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Output format for curve commands.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Kind {
    Positive,
    Negative,
}

#[derive(Debug, Args)]
pub struct MeasureArgs {
    /// Measure JSON file, or the JSON text itself.
    #[arg(long)]
    measure: String,
    /// Matrix rank of the sampled elements.
    #[arg(long, default_value_t = 6)]
    n: usize,
    /// Number of sampled elements.
    #[arg(long, default_value_t = 40)]
    num: usize,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tabulate Π(α, λ) over `--range min:max:step`.
    EvalPi {
        #[arg(long, allow_hyphen_values = true)]
        alpha: String,
        #[arg(long, allow_hyphen_values = true)]
        range: String,
    },
    /// Density of the measure whose Fourier transform is Π(α, ·).
    Density {
        #[arg(long, allow_hyphen_values = true)]
        alpha: String,
        #[arg(long, default_value_t = DEFAULT_T_MAX)]
        t_max: f64,
        #[arg(long, default_value_t = DEFAULT_STEP)]
        step: f64,
        /// Append the maximal Fourier residual on [−3, 3].
        #[arg(long)]
        check_ft: bool,
    },
    /// Positive-type certificate for φ_α on random elements of SL(n).
    PsdCheck {
        #[arg(long, allow_hyphen_values = true)]
        alpha: String,
        #[arg(long, default_value_t = 6)]
        n: usize,
        #[arg(long, default_value_t = 40)]
        num: usize,
        /// Certify −φ_α instead.
        #[arg(long)]
        flip_sign: bool,
    },
    /// Monte Carlo check of the spherical functional equation.
    SphericalLimit {
        #[arg(long, allow_hyphen_values = true)]
        alpha: String,
        /// Element x: JSON file or inline JSON; a bare array is a diagonal profile.
        #[arg(long, default_value = "[1, -1]", allow_hyphen_values = true)]
        x: String,
        #[arg(long, default_value = "[1, -1]", allow_hyphen_values = true)]
        y: String,
        #[arg(long, value_delimiter = ',', default_value = "4,8,16,32")]
        n_list: Vec<usize>,
        #[arg(long, default_value_t = 4000)]
        mc: usize,
    },
    /// Recover α from a `lambda,re,im` samples CSV.
    Recover {
        #[arg(long)]
        samples: PathBuf,
        /// Skip order detection.
        #[arg(long)]
        order: Option<usize>,
    },
    /// Negative-type certificate for the ψ synthesized from a measure.
    NegtypeCheck {
        #[command(flatten)]
        m: MeasureArgs,
        #[arg(long)]
        flip_sign: bool,
    },
    /// Both sides of the Schoenberg correspondence for a measure's ψ.
    Schoenberg {
        #[command(flatten)]
        m: MeasureArgs,
        #[arg(long, value_delimiter = ',', default_value = "0.1,1,10")]
        t_list: Vec<f64>,
        #[arg(long)]
        flip_sign: bool,
    },
    /// Boundedness certificate sup |ψ − ψ(e)| ≤ 2 μ(ℛ*).
    BoundCheck {
        #[arg(long)]
        measure: String,
        #[arg(long, default_value_t = 6)]
        n: usize,
        #[arg(long, default_value_t = 200)]
        samples: usize,
    },
    /// Synthesize data from a measure on a deterministic design and fit it back.
    Fit {
        #[command(flatten)]
        m: MeasureArgs,
        /// Candidate atoms separated by ';' (∅ or empty for the trivial
        /// atom); defaults to the measure's atoms plus ∅.
        #[arg(long, allow_hyphen_values = true)]
        grid: Option<String>,
        #[arg(long, value_enum, default_value_t = Kind::Positive)]
        kind: Kind,
    },
    /// Values of the φ or ψ synthesized from a measure on random elements.
    BochnerSynth {
        #[command(flatten)]
        m: MeasureArgs,
        #[arg(long, value_enum, default_value_t = Kind::Positive)]
        kind: Kind,
    },
    /// Sup distances of Π(limit + 1/n, ·) to Π(limit, ·) for n = 1..=terms.
    ConvergenceDemo {
        #[arg(long, default_value = "0", allow_hyphen_values = true)]
        limit: String,
        #[arg(long, default_value_t = 1000)]
        terms: usize,
        #[arg(long, default_value_t = 3.0)]
        lambda_max: f64,
    },
}

/// Parsed invocation.
#[derive(Debug)]
pub struct RunConfig {
    pub command: Command,
    pub seed: u64,
    pub tolerances: Tolerances,
    pub output: Option<PathBuf>,
    pub format: Option<Format>,
}

enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Validation(_)
            | Error::DimensionMismatch { .. }
            | Error::StepMismatch(..)
            | Error::InsufficientWindow { .. }
            | Error::Io(_)
            | Error::Csv(_)
            | Error::Json(_) => Failure::Usage(e.to_string()),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn usage<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(Failure::Usage(msg.into()))
}

/// Removes `--tol`, `--tol-<name>` (space or `=` separated) from `args`.
fn extract_tolerances(args: Vec<String>) -> CliResult<(Vec<String>, Tolerances)> {
    let mut tol = Tolerances::default();
    let mut rest = Vec::with_capacity(args.len());
    let mut it = args.into_iter();
    while let Some(arg) = it.next() {
        let Some(spec) = arg.strip_prefix("--tol") else {
            rest.push(arg);
            continue;
        };
        let (name, inline) = match spec.split_once('=') {
            Some((n, v)) => (n.to_string(), Some(v.to_string())),
            None => (spec.to_string(), None),
        };
        let name = match name.as_str() {
            "" => "gram".to_string(),
            n => match n.strip_prefix('-') {
                Some(n) => n.to_string(),
                None => {
                    rest.push(arg);
                    continue;
                }
            },
        };
        let Some(value) = inline.or_else(|| it.next()) else {
            return usage(format!("--tol-{name} needs a value"));
        };
        let value: f64 = value.parse().map_err(|_| Failure::Usage(format!("bad tolerance value {value:?}")))?;
        tol.set(&name, value).map_err(Failure::Usage)?;
    }
    Ok((rest, tol))
}

/// Parses command-line arguments (including the program name).
fn parse_config(args: Vec<String>) -> std::result::Result<RunConfig, (i32, String)> {
    let (args, tolerances) = extract_tolerances(args).map_err(|f| match f {
        Failure::Usage(m) | Failure::Runtime(m) => (EXIT_USAGE, format!("error: {m}\n")),
    })?;
    let cli = Cli::try_parse_from(args).map_err(|e| {
        let code = match e.kind() {
            ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_PASS,
            _ => EXIT_USAGE,
        };
        (code, e.render().to_string())
    })?;
    Ok(RunConfig { command: cli.command, seed: cli.seed, tolerances, output: cli.output, format: cli.format })
}

/// Runs one invocation; returns the process exit code.
pub fn run<I, S>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    let args: Vec<String> = args.into_iter().map(Into::into).collect();
    let config = match parse_config(args) {
        Ok(c) => c,
        Err((code, msg)) => {
            let _ = if code == EXIT_PASS { out.write_all(msg.as_bytes()) } else { err.write_all(msg.as_bytes()) };
            return code;
        }
    };
    let (body, passed) = match execute(&config) {
        Ok(r) => r,
        Err(Failure::Usage(m)) => {
            let _ = writeln!(err, "error: {m}");
            return EXIT_USAGE;
        }
        Err(Failure::Runtime(m)) => {
            let _ = writeln!(err, "error: {m}");
            return EXIT_FAIL;
        }
    };
    let written = match &config.output {
        Some(path) => fs::write(path, body.as_bytes()),
        None => out.write_all(body.as_bytes()),
    };
    if let Err(e) = written {
        let _ = writeln!(err, "error: cannot write output: {e}");
        return EXIT_USAGE;
    }
    if passed {
        EXIT_PASS
    } else {
        EXIT_FAIL
    }
}

/// Shortest round-trip representation with `−0` printed as `0`.
fn num(x: f64) -> String {
    format!("{:?}", x + 0.0)
}

fn csv_table(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut s = header.join(",");
    s.push('\n');
    for row in rows {
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

fn nums(values: &[f64]) -> Vec<String> {
    values.iter().copied().map(num).collect()
}

/// A row whose first column is an integer label.
fn labelled(label: usize, values: &[f64]) -> Vec<String> {
    std::iter::once(label.to_string()).chain(values.iter().copied().map(num)).collect()
}

fn normalize_zeros(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() && n.as_f64() == Some(0.0) => *v = json!(0.0),
        Value::Array(items) => items.iter_mut().for_each(normalize_zeros),
        Value::Object(map) => map.values_mut().for_each(normalize_zeros),
        _ => {}
    }
}

fn to_json(report: &impl Serialize) -> CliResult<String> {
    let mut v = serde_json::to_value(report).map_err(Error::from)?;
    normalize_zeros(&mut v);
    let mut s = serde_json::to_string_pretty(&v).map_err(Error::from)?;
    s.push('\n');
    Ok(s)
}

fn parse_alpha(text: &str) -> CliResult<Alpha> {
    Ok(Alpha::parse(text)?)
}

fn parse_range(text: &str) -> CliResult<Vec<f64>> {
    let parts: Vec<&str> = text.split(':').collect();
    let [lo, hi, step] = parts.as_slice() else {
        return usage(format!("range {text:?} must be min:max:step"));
    };
    let parse = |s: &str| s.trim().parse::<f64>().map_err(|_| Failure::Usage(format!("bad number {s:?} in range")));
    let (lo, hi, step) = (parse(lo)?, parse(hi)?, parse(step)?);
    if !(lo.is_finite() && hi.is_finite() && step > 0.0 && step.is_finite() && hi >= lo) {
        return usage(format!("range {text:?} needs finite min <= max and step > 0"));
    }
    let count = ((hi - lo) / step + 1e-9).floor() as usize;
    Ok((0..=count).map(|k| lo + k as f64 * step).collect())
}

/// File contents, or the argument itself when it already looks like JSON.
fn json_source(arg: &str) -> CliResult<String> {
    let t = arg.trim_start();
    if t.starts_with('{') || t.starts_with('[') {
        return Ok(arg.to_string());
    }
    fs::read_to_string(arg).map_err(|e| Failure::Usage(format!("cannot read {arg:?}: {e}")))
}

fn load_measure(arg: &str) -> CliResult<MeasureSpec> {
    Ok(MeasureSpec::from_json(&json_source(arg)?)?)
}

fn curve_format(config: &RunConfig) -> Format {
    config.format.unwrap_or(Format::Csv)
}

fn certificate_format(config: &RunConfig) -> CliResult<()> {
    match config.format {
        Some(Format::Csv) => usage("certificates are emitted as JSON only"),
        _ => Ok(()),
    }
}

fn execute(config: &RunConfig) -> CliResult<(String, bool)> {
    let tol = &config.tolerances;
    let seed = config.seed;
    match &config.command {
        Command::EvalPi { alpha, range } => {
            let alpha = parse_alpha(alpha)?;
            let rows: Vec<[f64; 4]> = parse_range(range)?
                .into_iter()
                .map(|l| {
                    let v = pi_eval(&alpha, l);
                    [l, v.re, v.im, v.norm()]
                })
                .collect();
            let body = match curve_format(config) {
                Format::Csv => csv_table(&["lambda", "re", "im", "abs"], rows.iter().map(|r| nums(r))),
                Format::Json => to_json(
                    &rows
                        .iter()
                        .map(|r| json!({"lambda": r[0], "re": r[1], "im": r[2], "abs": r[3]}))
                        .collect::<Vec<_>>(),
                )?,
            };
            Ok((body, true))
        }

        Command::Density { alpha, t_max, step, check_ft } => {
            let alpha = parse_alpha(alpha)?;
            let grid = match alpha.values() {
                [a] => single_density_grid(*a, *t_max, *step)?,
                _ => density_grid(&alpha, *t_max, *step)?,
            };
            let limit = tol.ft.unwrap_or(if alpha.len() == 1 { 1e-6 } else { 1e-4 });
            let residual = check_ft.then(|| ft_residual(&grid, &alpha, 3.0, 0.01));
            let passed = residual.is_none_or(|r| r <= limit);
            let body = match curve_format(config) {
                Format::Csv => {
                    let mut s = csv_table(&["t", "value"], (0..grid.len()).map(|k| nums(&[grid.t(k), grid.values()[k]])));
                    if let Some(r) = residual {
                        s.push_str(&format!("# max_ft_residual={}\n", num(r)));
                    }
                    s
                }
                Format::Json => to_json(&json!({
                    "t_min": grid.t_min(),
                    "step": grid.step(),
                    "values": grid.values(),
                    "mass": grid.mass(),
                    "max_ft_residual": residual,
                }))?,
            };
            Ok((body, passed))
        }

        Command::PsdCheck { alpha, n, num, flip_sign } => {
            certificate_format(config)?;
            let alpha = parse_alpha(alpha)?;
            let pairs = PairProfiles::new(&random_sl_family(*n, *num, seed)?)?;
            let sign = if *flip_sign { -1.0 } else { 1.0 };
            let k = pairs.gram(|p| sign * spherical_eval_profile(&alpha, p));
            let report = psd_check(&k, tol.gram)?;
            Ok((to_json(&report)?, report.passed))
        }

        Command::SphericalLimit { alpha, x, y, n_list, mc } => {
            let alpha = parse_alpha(alpha)?;
            let x = GroupElement::from_json(&json_source(x)?)?;
            let y = GroupElement::from_json(&json_source(y)?)?;
            let rows = spherical_limit_test(&alpha, &x, &y, n_list, *mc, seed)?;
            let body = match curve_format(config) {
                Format::Csv => csv_table(
                    &["n", "estimate_re", "estimate_im", "target_re", "target_im", "abs_err", "mc_stderr"],
                    rows.iter().map(|r| {
                        labelled(r.n, &[r.estimate.re, r.estimate.im, r.target.re, r.target.im, r.abs_err, r.mc_stderr])
                    }),
                ),
                Format::Json => to_json(&rows)?,
            };
            Ok((body, true))
        }

        Command::Recover { samples, order } => {
            certificate_format(config)?;
            let file = fs::File::open(samples)
                .map_err(|e| Failure::Usage(format!("cannot read {}: {e}", samples.display())))?;
            let samples = ClassBSamples::read_csv(file)?;
            let opts = RecoveryOptions { slope_tol: tol.slope, root_imag_tol: tol.root_imag };
            let rec = recover_from_samples(&samples, *order, &opts)?;
            Ok((to_json(&rec)?, true))
        }

        Command::NegtypeCheck { m, flip_sign } => {
            certificate_format(config)?;
            let (psi_gram, _) = psi_gram(m, *flip_sign, seed)?;
            let report = negtype_check(&psi_gram, tol.gram)?;
            Ok((to_json(&report)?, report.passed))
        }

        Command::Schoenberg { m, t_list, flip_sign } => {
            certificate_format(config)?;
            let (psi_gram, at_e) = psi_gram(m, *flip_sign, seed)?;
            let report = schoenberg_check_gram(&psi_gram, at_e, t_list, tol.gram)?;
            Ok((to_json(&report)?, report.passed))
        }

        Command::BoundCheck { measure, n, samples } => {
            certificate_format(config)?;
            let spec = load_measure(measure)?;
            let report = boundedness_check(&spec.measure, spec.psi_at_e, *n, *samples, seed)?;
            Ok((to_json(&report)?, report.passed))
        }

        Command::Fit { m, grid, kind } => {
            certificate_format(config)?;
            let spec = load_measure(&m.measure)?;
            let grid = match grid {
                Some(text) => text.split(';').map(parse_alpha).collect::<CliResult<Vec<_>>>()?,
                None => {
                    let mut g = spec.measure.atoms().to_vec();
                    if !g.contains(&Alpha::empty()) {
                        g.insert(0, Alpha::empty());
                    }
                    g
                }
            };
            let design = design_elements(m.n, m.num, seed)?;
            let profiles = design.iter().map(crate::group::cartan_profile).collect::<Result<Vec<_>>>()?;
            let (fit, psi_at_e) = match kind {
                Kind::Positive => {
                    let data: Vec<_> = design
                        .into_iter()
                        .zip(&profiles)
                        .map(|(g, p)| (g, synth_positive_profile(&spec.measure, p)))
                        .collect();
                    (fit_measure(&data, &grid, tol.nnls)?, 0.0)
                }
                Kind::Negative => {
                    let data = design
                        .into_iter()
                        .zip(&profiles)
                        .map(|(g, p)| Ok((g, synth_negative_profile(&spec.measure, spec.psi_at_e, p)?)))
                        .collect::<Result<Vec<_>>>()?;
                    (fit_negative_measure(&data, &grid, spec.psi_at_e, tol.nnls)?, spec.psi_at_e)
                }
            };
            let fitted = MeasureSpec { psi_at_e, measure: fit.measure.clone() };
            let mut doc: Value = serde_json::from_str(&fitted.to_json()?).map_err(Error::from)?;
            doc["residual"] = json!(fit.residual);
            doc["condition"] = json!(fit.condition);
            doc["ill_conditioned"] = json!(fit.ill_conditioned);
            doc["trivial_atom_identifiable"] = json!(fit.trivial_atom_identifiable);
            Ok((to_json(&doc)?, true))
        }

        Command::BochnerSynth { m, kind } => {
            let spec = load_measure(&m.measure)?;
            let elements = random_sl_family(m.n, m.num, seed)?;
            let values = elements
                .iter()
                .map(|g| {
                    let p = crate::group::cartan_profile(g)?;
                    match kind {
                        Kind::Positive => Ok(synth_positive_profile(&spec.measure, &p)),
                        Kind::Negative => synth_negative_profile(&spec.measure, spec.psi_at_e, &p),
                    }
                })
                .collect::<Result<Vec<Complex64>>>()?;
            let body = match curve_format(config) {
                Format::Csv => csv_table(
                    &["index", "re", "im"],
                    values.iter().enumerate().map(|(i, v)| labelled(i, &[v.re, v.im])),
                ),
                Format::Json => to_json(
                    &values
                        .iter()
                        .enumerate()
                        .map(|(i, v)| json!({"index": i, "re": v.re, "im": v.im}))
                        .collect::<Vec<_>>(),
                )?,
            };
            Ok((body, true))
        }

        Command::ConvergenceDemo { limit, terms, lambda_max } => {
            let limit = parse_alpha(limit)?;
            if *terms == 0 {
                return usage("terms must be >= 1");
            }
            let seq = (1..=*terms)
                .map(|n| Alpha::new(limit.values().iter().map(|v| v + 1.0 / n as f64).collect::<Vec<_>>()))
                .collect::<Result<Vec<_>>>()?;
            let report = weak_convergence_check(&seq, &limit, *lambda_max, tol.convergence)?;
            let body = match curve_format(config) {
                Format::Csv => csv_table(
                    &["n", "sup_distance", "param_distance"],
                    report
                        .sup_distances
                        .iter()
                        .zip(&report.param_distances)
                        .enumerate()
                        .map(|(i, (s, d))| labelled(i + 1, &[*s, *d])),
                ),
                Format::Json => to_json(&report)?,
            };
            Ok((body, report.converged))
        }
    }
}

/// Gram matrix of `±ψ` on random elements, and `±ψ(e)`.
fn psi_gram(m: &MeasureArgs, flip: bool, seed: u64) -> CliResult<(crate::group::CMatrix, Complex64)> {
    let spec = load_measure(&m.measure)?;
    let pairs = PairProfiles::new(&random_sl_family(m.n, m.num, seed)?)?;
    let sign = if flip { -1.0 } else { 1.0 };
    // psi_at_e was validated by the loader, so synthesis cannot fail
    let psi = |p: &crate::group::CartanProfile| {
        sign * synth_negative_profile(&spec.measure, spec.psi_at_e, p).expect("validated psi_at_e")
    };
    let gram = pairs.gram(psi);
    Ok((gram, Complex64::new(sign * spec.psi_at_e, 0.0)))
}
