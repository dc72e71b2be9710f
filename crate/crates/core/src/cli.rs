//! Data ingestion and the command implementations behind the `elg` binary.
//!
//! Every command produces an [`OutputEnvelope`], rendered either as an
//! aligned text table or as one line of JSON. Exit codes:
//!
//! | code | meaning                                   |
//! |------|-------------------------------------------|
//! | 0    | success                                   |
//! | 1    | usage, argument or input parse error      |
//! | 2    | numerical non-convergence or degenerate data |
//! | 3    | I/O error                                 |

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::distributions::{
    elg_cdf, elg_hazard, elg_pdf, elg_quantile, elg_sample, elg_survival, gamma_log_pdf, weibull_log_pdf, ElgParams,
    Seed,
};
use crate::error::{Error, Result};
use crate::estimation::{confidence_intervals, fit_mle_em, observed_information, Dataset, FitOptions, FitResult};
use crate::inference::{
    compare_models_with, fit_elg_nested, fit_gamma, fit_lg_with, fit_lindley, fit_weibull, information_criteria,
    lr_test_against, ModelComparison, NullModel,
};
use crate::moments::{elg_moment, summary_stats};
use crate::special::normal_quantile;

/// Relief times (minutes) of 20 patients receiving an analgesic.
pub const RELIEF_TIMES: [f64; 20] = [
    1.1, 1.4, 1.3, 1.7, 1.9, 1.8, 1.6, 2.2, 1.7, 2.7, 4.1, 1.8, 1.5, 1.2, 1.4, 3.0, 1.7, 2.3, 1.6, 2.0,
];

pub const RELIEF_SOURCE: &str = "builtin:relief";

/// SHA-256 of [`relief_text`].
pub const RELIEF_DIGEST: &str = "429331a9c4014b5a8a9f3b6a190df45edc323f430b37cfb07ed1bee9f852b333";

/// The bundled relief data in the on-disk input format.
pub fn relief_text() -> String {
    let mut s = String::from("# relief times (minutes), 20 patients\n");
    for v in RELIEF_TIMES {
        let _ = writeln!(s, "{v}");
    }
    s
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// Parses one positive number per line. Blank lines and lines starting with
/// `#` are skipped; a non-numeric first line is taken as a column header; a
/// line with a single comma-separated field is accepted as CSV.
pub fn parse_dataset(text: &str, label: &str) -> Result<Dataset> {
    let mut values = Vec::new();
    let mut header_seen = false;
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let field = match fields.as_slice() {
            [one] => *one,
            [one, rest @ ..] if rest.iter().all(|f| f.is_empty()) => *one,
            _ => {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("expected a single column, found {} fields", fields.len()),
                })
            }
        };
        let field = field.trim_matches('"');
        match field.parse::<f64>() {
            Ok(v) if v > 0.0 && v.is_finite() => values.push(v),
            Ok(v) => {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("failure times must be positive and finite, got {v}"),
                })
            }
            Err(_) if values.is_empty() && !header_seen => header_seen = true,
            Err(_) => {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("not a number: {field:?}"),
                })
            }
        }
    }
    if values.is_empty() {
        return Err(Error::Parse {
            line: 0,
            message: "input contains no observations".into(),
        });
    }
    Dataset::new(values, label)
}

/// Reads `builtin:relief` or a file; returns the dataset and the input bytes.
pub fn load_input(source: &str) -> Result<(Dataset, Vec<u8>)> {
    if source == RELIEF_SOURCE {
        let text = relief_text();
        let data = parse_dataset(&text, "relief")?;
        return Ok((data, text.into_bytes()));
    }
    if let Some(name) = source.strip_prefix("builtin:") {
        return Err(Error::domain(format!("unknown builtin dataset {name:?}; available: relief")));
    }
    let bytes = std::fs::read(source)?;
    let text = String::from_utf8(bytes.clone()).map_err(|e| Error::Parse {
        line: 0,
        message: format!("input is not UTF-8: {e}"),
    })?;
    Ok((parse_dataset(&text, source)?, bytes))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputEnvelope {
    pub command: String,
    pub inputs_digest: String,
    pub results: Value,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Table,
    Json,
}

#[derive(Debug, Parser)]
#[command(name = "elg", version, about = "Exponentiated Lindley geometric lifetime model: fitting, comparison, sampling")]
pub struct Cli {
    /// Output format.
    #[arg(long, global = true, value_enum, default_value = "table")]
    pub format: Format,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a model by maximum likelihood.
    Fit(FitArgs),
    /// Fit ELG, Gamma, Weibull and LG and tabulate AIC, BIC and AICc.
    Compare(DataArgs),
    /// Likelihood-ratio test of ELG against a nested submodel.
    Lrtest(LrArgs),
    /// Draw a seeded ELG sample.
    Sample(SampleArgs),
    /// Evaluate pdf, cdf, hazard, survival or quantile on a grid.
    Eval(EvalArgs),
    /// Raw moments and summary statistics.
    Moments(MomentArgs),
}

const EM_DEFAULT_MAX_ITER: usize = 200_000;

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Input file (one value per line) or `builtin:relief`.
    #[arg(long)]
    pub data: String,
    /// Iteration budget; defaults to 500 for Newton and 200000 for EM.
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long, default_value_t = 1e-8)]
    pub grad_tol: f64,
}

impl DataArgs {
    fn options(&self) -> Result<FitOptions> {
        self.options_with(FitOptions::default().max_iterations)
    }

    fn options_with(&self, default_iter: usize) -> Result<FitOptions> {
        let max_iter = self.max_iter.unwrap_or(default_iter);
        if max_iter == 0 || !(self.grad_tol > 0.0) {
            return Err(Error::domain("--max-iter and --grad-tol must be positive"));
        }
        Ok(FitOptions {
            max_iterations: max_iter,
            grad_tol: self.grad_tol,
            ..FitOptions::default()
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelKind {
    Elg,
    Lg,
    Lindley,
    Gamma,
    Weibull,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodKind {
    Newton,
    Em,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_enum, default_value = "elg")]
    pub model: ModelKind,
    #[arg(long, value_enum, default_value = "newton")]
    pub method: MethodKind,
    /// Confidence level of the Wald intervals.
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NullKind {
    Lg,
    Lindley,
}

#[derive(Debug, Args)]
pub struct LrArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_enum, default_value = "lg")]
    pub null: NullKind,
}

#[derive(Debug, Args)]
pub struct ParamArgs {
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    pub theta: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub p: f64,
}

impl ParamArgs {
    fn params(&self) -> Result<ElgParams> {
        ElgParams::new(self.alpha, self.theta, self.p)
    }
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Write the sample here, one value per line, instead of into the results.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalKind {
    Pdf,
    Cdf,
    Hazard,
    Survival,
    Quantile,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    #[arg(long, value_enum)]
    pub what: EvalKind,
    /// Explicit evaluation points.
    #[arg(long, num_args = 1.., conflicts_with_all = ["from", "u"])]
    pub x: Vec<f64>,
    /// Probabilities for `--what quantile`.
    #[arg(long, num_args = 1..)]
    pub u: Vec<f64>,
    #[arg(long, requires_all = ["to", "step"])]
    pub from: Option<f64>,
    #[arg(long)]
    pub to: Option<f64>,
    #[arg(long)]
    pub step: Option<f64>,
}

#[derive(Debug, Args)]
pub struct MomentArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    #[arg(long, default_value_t = 4)]
    pub n_max: u32,
}

/// Result of running the CLI: exit code plus what goes to stdout and stderr.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliOutcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Domain(_) | Error::Parse { .. } => 1,
        Error::NonConvergence { .. } | Error::Singular { .. } | Error::DegenerateData(_) => 2,
        Error::Io(_) => 3,
    }
}

/// Parses arguments and runs one command.
pub fn run<I, T>(args: I) -> CliOutcome
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            return if code == 0 {
                CliOutcome { code, stdout: text, stderr: String::new() }
            } else {
                CliOutcome { code, stdout: String::new(), stderr: text }
            };
        }
    };
    match execute(&cli) {
        Ok(env) => {
            let stdout = match cli.format {
                Format::Json => format!("{}\n", serde_json::to_string(&env).expect("envelope serializes")),
                Format::Table => render_table(&env),
            };
            let stderr = env.warnings.iter().map(|w| format!("warning: {w}\n")).collect();
            CliOutcome { code: 0, stdout, stderr }
        }
        Err(e) => CliOutcome {
            code: exit_code(&e),
            stdout: String::new(),
            stderr: format!("error: {e}\n"),
        },
    }
}

fn digest(input: &[u8], command: &Command, format: Format) -> String {
    let mut bytes = input.to_vec();
    bytes.push(0);
    bytes.extend_from_slice(format!("{command:?}|{format:?}").as_bytes());
    sha256_hex(&bytes)
}

/// Runs a parsed command and builds its envelope.
pub fn execute(cli: &Cli) -> Result<OutputEnvelope> {
    let mut warnings = Vec::new();
    let (name, input, results) = match &cli.command {
        Command::Fit(a) => {
            let (data, bytes) = load_input(&a.data.data)?;
            ("fit", bytes, cmd_fit(&data, a, &mut warnings)?)
        }
        Command::Compare(a) => {
            let (data, bytes) = load_input(&a.data)?;
            let c = compare_models_with(&data, &a.options()?)?;
            for r in &c.rows {
                if let Some(e) = &r.error {
                    warnings.push(format!("{} fit failed: {e}", r.model));
                }
            }
            ("compare", bytes, serde_json::to_value(c).expect("comparison serializes"))
        }
        Command::Lrtest(a) => {
            let (data, bytes) = load_input(&a.data.data)?;
            ("lrtest", bytes, cmd_lrtest(&data, a)?)
        }
        Command::Sample(a) => ("sample", Vec::new(), cmd_sample(a)?),
        Command::Eval(a) => ("eval", Vec::new(), cmd_eval(a)?),
        Command::Moments(a) => ("moments", Vec::new(), cmd_moments(a, &mut warnings)?),
    };
    Ok(OutputEnvelope {
        command: name.into(),
        inputs_digest: digest(&input, &cli.command, cli.format),
        results,
        warnings,
    })
}

fn map<const N: usize>(pairs: [(&str, f64); N]) -> BTreeMap<String, f64> {
    pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

/// Central-difference Hessian of `f` at `x`.
fn numeric_hessian<F: Fn(&[f64]) -> f64>(f: F, x: &[f64]) -> Vec<Vec<f64>> {
    let k = x.len();
    let h: Vec<f64> = x.iter().map(|v| 1e-4 * v.abs().max(1e-2)).collect();
    let mut out = vec![vec![0.0; k]; k];
    let eval = |di: &[(usize, f64)]| {
        let mut y = x.to_vec();
        for &(i, d) in di {
            y[i] += d;
        }
        f(&y)
    };
    for i in 0..k {
        for j in i..k {
            let v = if i == j {
                (eval(&[(i, h[i])]) - 2.0 * f(x) + eval(&[(i, -h[i])])) / (h[i] * h[i])
            } else {
                (eval(&[(i, h[i]), (j, h[j])]) - eval(&[(i, h[i]), (j, -h[j])]) - eval(&[(i, -h[i]), (j, h[j])])
                    + eval(&[(i, -h[i]), (j, -h[j])]))
                    / (4.0 * h[i] * h[j])
            };
            out[i][j] = v;
            out[j][i] = v;
        }
    }
    out
}

/// Standard errors from the inverse of a small information matrix.
fn standard_errors_from_info(info: &[Vec<f64>]) -> Option<Vec<f64>> {
    let k = info.len();
    let m = nalgebra::DMatrix::from_fn(k, k, |i, j| info[i][j]);
    let inv = m.cholesky()?.inverse();
    let se: Vec<f64> = (0..k).map(|i| inv[(i, i)].sqrt()).collect();
    se.iter().all(|s| s.is_finite() && *s > 0.0).then_some(se)
}

fn wald(names: &[&str], est: &[f64], se: &[f64], level: f64) -> Result<Value> {
    let z = normal_quantile(1.0 - (1.0 - level) / 2.0)?;
    let mut m = serde_json::Map::new();
    for ((n, e), s) in names.iter().zip(est).zip(se) {
        m.insert((*n).into(), json!([e - z * s, e + z * s]));
    }
    Ok(Value::Object(m))
}

fn elg_fit_json(fit: &FitResult, level: f64, n: usize, warnings: &mut Vec<String>) -> Result<Value> {
    let p = fit.params;
    let se = fit.standard_errors();
    let cis = confidence_intervals(fit, level)?;
    if fit.info_condition > 1e8 {
        warnings.push(format!(
            "observed information is ill-conditioned (condition {:.3e}); the likelihood is flat along a ridge and individual estimates are weakly identified",
            fit.info_condition
        ));
    }
    let trace_first = fit.trace.first().map(|t| t.1);
    let trace_last = fit.trace.last().map(|t| t.1);
    Ok(json!({
        "model": "elg",
        "method": fit.method,
        "n": n,
        "params": map([("alpha", p.alpha()), ("theta", p.theta()), ("p", p.p())]),
        "loglik": fit.loglik,
        "criteria": information_criteria(fit.loglik, 3, n).ok(),
        "standard_errors": se.map(|s| map([("alpha", s[0]), ("theta", s[1]), ("p", s[2])])),
        "level": level,
        "confidence_intervals": {
            "alpha": [cis.alpha_ci.0, cis.alpha_ci.1],
            "theta": [cis.theta_ci.0, cis.theta_ci.1],
            "p": [cis.p_ci.0, cis.p_ci.1],
        },
        "converged": fit.converged,
        "iterations": fit.iterations,
        "score_norm": fit.score_norm,
        "information": fit.info,
        "vcov": fit.vcov,
        "information_condition": fit.info_condition,
        "trace": {"length": fit.trace.len(), "first_loglik": trace_first, "last_loglik": trace_last},
    }))
}

#[allow(clippy::too_many_arguments)]
fn comparator_json(
    model: &str,
    names: &[&str],
    est: &[f64],
    loglik: f64,
    score_norm: f64,
    info: Vec<Vec<f64>>,
    level: f64,
    n: usize,
    warnings: &mut Vec<String>,
) -> Result<Value> {
    let se = standard_errors_from_info(&info);
    let cis = match &se {
        Some(se) => Some(wald(names, est, se, level)?),
        None => {
            warnings.push("information matrix is not positive definite; no standard errors".into());
            None
        }
    };
    Ok(json!({
        "model": model,
        "method": "newton",
        "n": n,
        "params": names.iter().zip(est).map(|(k, v)| (k.to_string(), *v)).collect::<BTreeMap<_, _>>(),
        "loglik": loglik,
        "criteria": information_criteria(loglik, names.len(), n).ok(),
        "standard_errors": se.map(|s| names.iter().zip(s).map(|(k, v)| (k.to_string(), v)).collect::<BTreeMap<_, _>>()),
        "level": level,
        "confidence_intervals": cis,
        "converged": true,
        "score_norm": score_norm,
        "information": info,
    }))
}

fn check_level(level: f64) -> Result<()> {
    if level > 0.0 && level < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("--level must be in (0, 1), got {level}")))
    }
}

fn cmd_fit(data: &Dataset, a: &FitArgs, warnings: &mut Vec<String>) -> Result<Value> {
    check_level(a.level)?;
    let opts = match a.method {
        MethodKind::Newton => a.data.options()?,
        // EM converges linearly, slowly when most information is missing
        MethodKind::Em => a.data.options_with(EM_DEFAULT_MAX_ITER)?,
    };
    let n = data.len();
    if a.method == MethodKind::Em && a.model != ModelKind::Elg {
        return Err(Error::domain("--method em applies only to --model elg"));
    }
    match a.model {
        ModelKind::Elg => {
            let fit = match a.method {
                MethodKind::Newton => fit_elg_nested(data, None, &opts)?,
                MethodKind::Em => fit_mle_em(data, None, &opts)?,
            };
            if !fit.converged {
                return Err(Error::no_convergence("ELG fit", fit.iterations));
            }
            elg_fit_json(&fit, a.level, n, warnings)
        }
        ModelKind::Lg => {
            let f = fit_lg_with(data, &opts)?;
            let full = observed_information(f.params.as_elg(), data);
            let info = vec![vec![full[1][1], full[1][2]], vec![full[2][1], full[2][2]]];
            if f.params.p() < 0.0 {
                warnings.push(format!(
                    "p = {:.6} is negative: a valid density, but outside the geometric-compounding range (0, 1)",
                    f.params.p()
                ));
            }
            comparator_json("lg", &["theta", "p"], &[f.params.theta(), f.params.p()], f.loglik, f.score_norm, info, a.level, n, warnings)
        }
        ModelKind::Lindley => {
            let f = fit_lindley(data)?;
            let t = f.params.theta();
            let nf = n as f64;
            let info = vec![vec![2.0 * nf / (t * t) - nf / ((t + 1.0) * (t + 1.0))]];
            comparator_json("lindley", &["theta"], &[t], f.loglik, f.score_norm, info, a.level, n, warnings)
        }
        ModelKind::Gamma => {
            let f = fit_gamma(data)?;
            let x = data.values();
            let ll = |v: &[f64]| match crate::GammaParams::new(v[0], v[1]) {
                Ok(g) => x.iter().map(|&xi| gamma_log_pdf(g, xi).unwrap_or(f64::NEG_INFINITY)).sum(),
                Err(_) => f64::NEG_INFINITY,
            };
            let est = [f.params.shape(), f.params.rate()];
            let info = numeric_hessian(ll, &est).into_iter().map(|r| r.into_iter().map(|v| -v).collect()).collect();
            let mut v = comparator_json("gamma", &["shape", "rate"], &est, f.loglik, f.score_norm, info, a.level, n, warnings)?;
            v["labels"] = json!({"shape": "shape (β)", "rate": "rate (α)"});
            Ok(v)
        }
        ModelKind::Weibull => {
            let f = fit_weibull(data)?;
            let x = data.values();
            let ll = |v: &[f64]| match crate::WeibullParams::new(v[0], v[1]) {
                Ok(w) => x.iter().map(|&xi| weibull_log_pdf(w, xi).unwrap_or(f64::NEG_INFINITY)).sum(),
                Err(_) => f64::NEG_INFINITY,
            };
            let est = [f.params.shape(), f.params.scale()];
            let info = numeric_hessian(ll, &est).into_iter().map(|r| r.into_iter().map(|v| -v).collect()).collect();
            comparator_json("weibull", &["shape", "scale"], &est, f.loglik, f.score_norm, info, a.level, n, warnings)
        }
    }
}

fn cmd_lrtest(data: &Dataset, a: &LrArgs) -> Result<Value> {
    let null = match a.null {
        NullKind::Lg => NullModel::Lg,
        NullKind::Lindley => NullModel::Lindley,
    };
    let t = lr_test_against(data, null, &a.data.options()?)?;
    let p = t.full.params;
    let null_name = match a.null {
        NullKind::Lg => "lg",
        NullKind::Lindley => "lindley",
    };
    Ok(json!({
        "null": null_name,
        "null_description": t.test.null_description,
        "full_params": map([("alpha", p.alpha()), ("theta", p.theta()), ("p", p.p())]),
        "full_loglik": t.full.loglik,
        "restricted_params": t.restricted_params,
        "restricted_loglik": t.restricted_loglik,
        "omega": t.test.omega,
        "df": t.test.df,
        "p_value": t.test.p_value,
    }))
}

/// The sample as text, one value per line in shortest round-trip form.
pub fn sample_text(values: &[f64]) -> String {
    values.iter().fold(String::new(), |mut s, v| {
        let _ = writeln!(s, "{v}");
        s
    })
}

fn cmd_sample(a: &SampleArgs) -> Result<Value> {
    let params = a.params.params()?;
    if a.n == 0 {
        return Err(Error::domain("--n must be at least 1"));
    }
    let values = elg_sample(params, a.n, Seed(a.seed))?;
    let text = sample_text(&values);
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = values.iter().cloned().fold(0.0, f64::max);
    let mut out = json!({
        "params": map([("alpha", params.alpha()), ("theta", params.theta()), ("p", params.p())]),
        "n": a.n,
        "seed": a.seed,
        "sha256": sha256_hex(text.as_bytes()),
        "summary": {"mean": mean, "min": min, "max": max},
    });
    match &a.output {
        Some(path) => {
            std::fs::write(path, &text)?;
            out["output"] = json!(path.display().to_string());
        }
        None => out["values"] = json!(values),
    }
    Ok(out)
}

fn cmd_eval(a: &EvalArgs) -> Result<Value> {
    let params = a.params.params()?;
    let points: Vec<f64> = if a.what == EvalKind::Quantile {
        if a.u.is_empty() {
            return Err(Error::domain("--what quantile needs --u"));
        }
        a.u.clone()
    } else if !a.x.is_empty() {
        a.x.clone()
    } else if let (Some(from), Some(to), Some(step)) = (a.from, a.to, a.step) {
        if !(step > 0.0) || !(to >= from) {
            return Err(Error::domain("grid needs --step > 0 and --to >= --from"));
        }
        let count = ((to - from) / step + 1e-9).floor() as usize + 1;
        if count > 10_000_000 {
            return Err(Error::domain("grid has more than 10^7 points"));
        }
        (0..count).map(|i| from + i as f64 * step).collect()
    } else {
        return Err(Error::domain("give --x values or a --from/--to/--step grid"));
    };
    let f = |v: f64| -> Result<f64> {
        match a.what {
            EvalKind::Pdf => {
                if v == 0.0 {
                    // limit at the origin
                    Ok(if params.alpha() < 1.0 {
                        f64::INFINITY
                    } else if params.alpha() == 1.0 {
                        params.theta().powi(2) / ((params.theta() + 1.0) * (1.0 - params.p()))
                    } else {
                        0.0
                    })
                } else {
                    elg_pdf(params, v)
                }
            }
            EvalKind::Cdf => elg_cdf(params, v),
            EvalKind::Survival => elg_survival(params, v),
            EvalKind::Hazard => {
                if v == 0.0 {
                    Ok(if params.alpha() < 1.0 {
                        f64::INFINITY
                    } else if params.alpha() == 1.0 {
                        params.theta().powi(2) / ((params.theta() + 1.0) * (1.0 - params.p()))
                    } else {
                        0.0
                    })
                } else {
                    elg_hazard(params, v)
                }
            }
            EvalKind::Quantile => elg_quantile(params, v),
        }
    };
    let pairs: Vec<(f64, f64)> = points.iter().map(|&v| f(v).map(|y| (v, y))).collect::<Result<_>>()?;
    Ok(json!({
        "params": map([("alpha", params.alpha()), ("theta", params.theta()), ("p", params.p())]),
        "what": a.what,
        "points": pairs,
    }))
}

fn cmd_moments(a: &MomentArgs, warnings: &mut Vec<String>) -> Result<Value> {
    let params = a.params.params()?;
    if a.n_max == 0 || a.n_max > 20 {
        return Err(Error::domain("--n-max must be between 1 and 20"));
    }
    let mut rows = Vec::new();
    for n in 1..=a.n_max {
        let m = elg_moment(params, n)?;
        rows.push(json!({"n": n, "value": m.value, "method": m.method, "terms_used": m.terms_used}));
    }
    let summary = match summary_stats(params) {
        Ok(s) => Some(s),
        Err(e) => {
            warnings.push(format!("summary statistics unavailable: {e}"));
            None
        }
    };
    Ok(json!({
        "params": map([("alpha", params.alpha()), ("theta", params.theta()), ("p", params.p())]),
        "moments": rows,
        "summary": summary,
    }))
}

/// Formats with six significant digits.
pub fn sig6(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let mag = x.abs().log10().floor() as i32;
    if !(-4..=9).contains(&mag) {
        return format!("{x:.5e}");
    }
    let decimals = (5 - mag).max(0) as usize;
    format!("{x:.decimals$}")
}

/// Natural parameter order rather than the maps' alphabetical one.
fn param_rank(name: &str) -> usize {
    const ORDER: [&str; 6] = ["alpha", "theta", "p", "shape", "rate", "scale"];
    ORDER.iter().position(|o| *o == name).unwrap_or(ORDER.len())
}

fn cell(v: &Value) -> String {
    match v {
        Value::Number(n) if n.is_u64() || n.is_i64() => n.to_string(),
        Value::Number(n) => n.as_f64().map(sig6).unwrap_or_else(|| n.to_string()),
        Value::String(s) => s.clone(),
        Value::Null => "-".into(),
        Value::Bool(b) => b.to_string(),
        Value::Array(a) => format!("[{}]", a.iter().map(cell).collect::<Vec<_>>().join(", ")),
        Value::Object(m) => {
            let mut kv: Vec<_> = m.iter().collect();
            kv.sort_by_key(|(k, _)| param_rank(k));
            kv.iter().map(|(k, v)| format!("{k}={}", cell(v))).collect::<Vec<_>>().join(" ")
        }
    }
}

fn aligned(rows: &[Vec<String>]) -> String {
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|c| rows.iter().filter_map(|r| r.get(c)).map(|s| s.chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for r in rows {
        let line: Vec<String> = r
            .iter()
            .enumerate()
            .map(|(c, s)| format!("{s:<w$}", w = widths[c]))
            .collect();
        let _ = writeln!(out, "{}", line.join("  ").trim_end());
    }
    out
}

fn render_comparison(c: &ModelComparison) -> String {
    let mut rows = vec![vec![
        "model".to_string(),
        "estimates".into(),
        "loglik".into(),
        "AIC".into(),
        "BIC".into(),
        "AICc".into(),
    ]];
    for r in &c.rows {
        let mut params: Vec<_> = r.params.iter().collect();
        params.sort_by_key(|(k, _)| param_rank(k));
        let est = params
            .into_iter()
            .map(|(k, v)| {
                let label = match (r.model.as_str(), k.as_str()) {
                    ("Gamma", "shape") => "shape (β)",
                    ("Gamma", "rate") => "rate (α)",
                    _ => k,
                };
                format!("{label}={}", sig6(*v))
            })
            .collect::<Vec<_>>()
            .join(" ");
        match &r.criteria {
            Some(ic) => rows.push(vec![r.model.clone(), est, sig6(ic.loglik), sig6(ic.aic), sig6(ic.bic), sig6(ic.aicc)]),
            None => rows.push(vec![r.model.clone(), format!("error: {}", r.error.as_deref().unwrap_or("?"))]),
        }
    }
    let mut out = aligned(&rows);
    let _ = writeln!(
        out,
        "best: AIC {}, BIC {}, AICc {}",
        c.best_by_aic.as_deref().unwrap_or("-"),
        c.best_by_bic.as_deref().unwrap_or("-"),
        c.best_by_aicc.as_deref().unwrap_or("-")
    );
    out
}

/// Human-readable rendering of an envelope.
pub fn render_table(env: &OutputEnvelope) -> String {
    let mut out = format!("{}  (inputs {})\n", env.command, &env.inputs_digest[..12]);
    let r = &env.results;
    match env.command.as_str() {
        "compare" => match serde_json::from_value::<ModelComparison>(r.clone()) {
            Ok(c) => out.push_str(&render_comparison(&c)),
            Err(_) => out.push_str(&r.to_string()),
        },
        "eval" => {
            let mut rows = vec![vec![
                if r["what"] == "quantile" { "u".to_string() } else { "x".to_string() },
                cell(&r["what"]),
            ]];
            if let Some(pts) = r["points"].as_array() {
                for p in pts {
                    rows.push(vec![cell(&p[0]), cell(&p[1])]);
                }
            }
            out.push_str(&aligned(&rows));
        }
        "moments" => {
            let mut rows = vec![vec!["n".to_string(), "E(X^n)".into(), "method".into()]];
            for m in r["moments"].as_array().into_iter().flatten() {
                rows.push(vec![cell(&m["n"]), cell(&m["value"]), cell(&m["method"])]);
            }
            out.push_str(&aligned(&rows));
            if let Some(s) = r["summary"].as_object() {
                let mut rows = Vec::new();
                for k in ["mean", "variance", "skewness", "kurtosis"] {
                    rows.push(vec![k.to_string(), cell(&s[k])]);
                }
                out.push_str(&aligned(&rows));
            }
        }
        "fit" => {
            let _ = writeln!(out, "model {}  method {}  n {}", cell(&r["model"]), cell(&r["method"]), cell(&r["n"]));
            let mut rows = vec![vec![
                "parameter".to_string(),
                "estimate".into(),
                "std.err".into(),
                format!("{}% CI", 100.0 * r["level"].as_f64().unwrap_or(0.95)),
            ]];
            let labels = &r["labels"];
            let mut params: Vec<_> = r["params"].as_object().into_iter().flatten().collect();
            params.sort_by_key(|(k, _)| param_rank(k));
            for (k, v) in params {
                let label = labels.get(k).and_then(Value::as_str).unwrap_or(k).to_string();
                rows.push(vec![
                    label,
                    cell(v),
                    cell(r["standard_errors"].get(k).unwrap_or(&Value::Null)),
                    cell(r["confidence_intervals"].get(k).unwrap_or(&Value::Null)),
                ]);
            }
            out.push_str(&aligned(&rows));
            let ic = &r["criteria"];
            let _ = writeln!(
                out,
                "loglik {}  AIC {}  BIC {}  AICc {}  score norm {}",
                cell(&r["loglik"]),
                cell(&ic["aic"]),
                cell(&ic["bic"]),
                cell(&ic["aicc"]),
                cell(&r["score_norm"])
            );
        }
        _ => {
            let mut rows = Vec::new();
            for (k, v) in r.as_object().into_iter().flatten() {
                if k == "values" {
                    rows.push(vec![k.clone(), format!("{} values (use --format json or --output)", v.as_array().map_or(0, Vec::len))]);
                } else {
                    rows.push(vec![k.clone(), cell(v)]);
                }
            }
            out.push_str(&aligned(&rows));
        }
    }
    out
}
