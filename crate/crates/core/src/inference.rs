//! Model comparison: information criteria, likelihood-ratio tests for the
//! nested submodels, and maximum likelihood fits of the comparator models
//! (Gamma, Weibull, Lindley-geometric, Lindley).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::distributions::{gamma_log_pdf, lindley_pdf, weibull_log_pdf, ElgParams, GammaParams, LgParams, LindleyParams, WeibullParams};
use crate::error::{Error, Result};
use crate::estimation::{fit_mle_newton, log_likelihood, newton_ascent, Dataset, FitOptions, FitResult, FreeMask};
use crate::special::{chi_square_sf, digamma};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InformationCriteria {
    pub loglik: f64,
    pub k: usize,
    pub n: usize,
    pub aic: f64,
    pub bic: f64,
    pub aicc: f64,
}

/// AIC, BIC and small-sample corrected AIC for a fit with `k` free parameters.
pub fn information_criteria(loglik: f64, k: usize, n: usize) -> Result<InformationCriteria> {
    if k == 0 || n <= k + 1 {
        return Err(Error::domain(format!("AICc needs n > k + 1 with k >= 1, got k={k}, n={n}")));
    }
    let (kf, nf) = (k as f64, n as f64);
    let aic = 2.0 * kf - 2.0 * loglik;
    Ok(InformationCriteria {
        loglik,
        k,
        n,
        aic,
        bic: kf * nf.ln() - 2.0 * loglik,
        aicc: aic + 2.0 * kf * (kf + 1.0) / (nf - kf - 1.0),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LrTestResult {
    pub omega: f64,
    pub df: u32,
    pub p_value: f64,
    pub null_description: String,
}

/// Slack allowed when the restricted fit lands marginally above the full one.
pub const NESTING_SLACK: f64 = 1e-8;

pub fn lr_test(loglik_full: f64, loglik_restricted: f64, df: u32, null_description: impl Into<String>) -> Result<LrTestResult> {
    if df == 0 {
        return Err(Error::domain("LR test needs df >= 1"));
    }
    if !loglik_full.is_finite() || !loglik_restricted.is_finite() {
        return Err(Error::domain("LR test needs finite log-likelihoods"));
    }
    if loglik_full < loglik_restricted - NESTING_SLACK {
        return Err(Error::domain(format!(
            "restricted log-likelihood {loglik_restricted} exceeds the full one {loglik_full}; models are not nested"
        )));
    }
    let omega = (2.0 * (loglik_full - loglik_restricted)).max(0.0);
    Ok(LrTestResult {
        omega,
        df,
        p_value: chi_square_sf(omega, df)?,
        null_description: null_description.into(),
    })
}

/// A fitted comparator model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelFit<P> {
    pub params: P,
    pub loglik: f64,
    /// Norm of the log-likelihood gradient in the model's natural parameters.
    pub score_norm: f64,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Bisection for a root of a function that changes sign on `[lo, hi]`,
/// halving in log space. Stops once the bracket cannot shrink any further.
fn log_bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, what: &str) -> Result<f64> {
    let f_lo = f(lo);
    let f_hi = f(hi);
    if !(f_lo.signum() != f_hi.signum()) {
        return Err(Error::no_convergence(format!("{what}: root not bracketed on [{lo}, {hi}]"), 0));
    }
    let lo_sign = f_lo.signum();
    for _ in 0..400 {
        let mid = (lo * hi).sqrt();
        if !(mid > lo && mid < hi) {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == lo_sign {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // pick the endpoint with the smaller residual
    Ok(if f(lo).abs() <= f(hi).abs() { lo } else { hi })
}

/// Gamma MLE via the profile equation `ln k - psi(k) = ln(mean x) - mean(ln x)`.
pub fn fit_gamma(data: &Dataset) -> Result<ModelFit<GammaParams>> {
    data.check_fittable()?;
    let x = data.values();
    let n = x.len() as f64;
    let xbar = mean(x);
    let mean_log = x.iter().map(|v| v.ln()).sum::<f64>() / n;
    let s = xbar.ln() - mean_log;
    let shape = log_bisect(|k| k.ln() - digamma(k) - s, 1e-8, 1e12, "gamma shape equation")?;
    let rate = shape / xbar;
    let params = GammaParams::new(shape, rate)?;
    let loglik = x.iter().map(|&v| gamma_log_pdf(params, v)).sum::<Result<f64>>()?;
    let sum_x: f64 = x.iter().sum();
    let g_shape = n * rate.ln() - n * digamma(shape) + n * mean_log;
    let g_rate = n * shape / rate - sum_x;
    Ok(ModelFit {
        params,
        loglik,
        score_norm: g_shape.hypot(g_rate),
    })
}

/// Weibull MLE via the shape equation
/// `sum x^k ln x / sum x^k - 1/k - mean(ln x) = 0` and `scale = (mean x^k)^(1/k)`.
pub fn fit_weibull(data: &Dataset) -> Result<ModelFit<WeibullParams>> {
    data.check_fittable()?;
    let x = data.values();
    let n = x.len() as f64;
    let logs: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let mean_log = mean(&logs);
    let max_log = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    // weights x^k scaled by max(x)^k to stay finite
    let moments = |k: f64| {
        let (mut s0, mut s1, mut s2) = (0.0, 0.0, 0.0);
        for &l in &logs {
            let w = (k * (l - max_log)).exp();
            s0 += w;
            s1 += w * l;
            s2 += w * l * l;
        }
        (s0, s1, s2)
    };
    let equation = |k: f64| {
        let (s0, s1, _) = moments(k);
        s1 / s0 - 1.0 / k - mean_log
    };
    let shape = log_bisect(equation, 1e-6, 1e6, "weibull shape equation")?;
    let (s0, _, _) = moments(shape);
    let ln_scale = max_log + (s0 / n).ln() / shape;
    let scale = ln_scale.exp();
    let params = WeibullParams::new(shape, scale)?;
    let loglik = x.iter().map(|&v| weibull_log_pdf(params, v)).sum::<Result<f64>>()?;

    let (mut g_k, mut g_l) = (n / shape, -n * shape / scale);
    for &l in &logs {
        let zl = l - ln_scale;
        let zk = (shape * zl).exp();
        g_k += zl - zk * zl;
        g_l += shape / scale * zk;
    }
    Ok(ModelFit {
        params,
        loglik,
        score_norm: g_k.hypot(g_l),
    })
}

/// Lindley MLE from the monotone score `2n/theta - n/(theta+1) - sum x`.
pub fn fit_lindley(data: &Dataset) -> Result<ModelFit<LindleyParams>> {
    data.check_fittable()?;
    let x = data.values();
    let n = x.len() as f64;
    let sum_x: f64 = x.iter().sum();
    let score = |t: f64| 2.0 * n / t - n / (t + 1.0) - sum_x;
    let theta = log_bisect(score, 1e-8, 1e6, "lindley score equation")?;
    let params = LindleyParams::new(theta)?;
    let loglik = x.iter().map(|&v| lindley_pdf(params, v).map(f64::ln)).sum::<Result<f64>>()?;
    Ok(ModelFit {
        params,
        loglik,
        score_norm: score(theta).abs(),
    })
}

const LG_GRID_P: [f64; 9] = [-500.0, -100.0, -20.0, -5.0, -1.0, 0.0, 0.3, 0.6, 0.9];

/// Lindley-geometric MLE: Newton over `(theta, p)` with `alpha = 1`,
/// parameterised through `ln(1 - p)` so that large negative `p` is reachable.
pub fn fit_lg(data: &Dataset) -> Result<ModelFit<LgParams>> {
    fit_lg_with(data, &FitOptions::default())
}

pub fn fit_lg_with(data: &Dataset, opts: &FitOptions) -> Result<ModelFit<LgParams>> {
    data.check_fittable()?;
    let theta0 = crate::estimation::lindley_moment_theta(data.mean());
    let mut cells: Vec<(f64, ElgParams)> = Vec::new();
    for m in [0.25, 0.5, 1.0, 2.0, 4.0] {
        for &p in &LG_GRID_P {
            let params = ElgParams::new(1.0, m * theta0, p)?;
            let ll = log_likelihood(params, data);
            if ll.is_finite() {
                cells.push((ll, params));
            }
        }
    }
    cells.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut best: Option<crate::estimation::NewtonRun> = None;
    let mut last_err = None;
    for (_, start) in cells.into_iter().take(4) {
        match newton_ascent(data, start, FreeMask::THETA_P, opts) {
            Ok(run) => {
                let better = best
                    .as_ref()
                    .is_none_or(|b| (run.converged, run.derivs.loglik) > (b.converged, b.derivs.loglik));
                if better {
                    best = Some(run);
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    let run = match best {
        Some(r) => r,
        None => return Err(last_err.unwrap_or_else(|| Error::DegenerateData("no finite LG start".into()))),
    };
    if !run.converged {
        return Err(Error::no_convergence("LG Newton-Raphson", run.iterations));
    }
    Ok(ModelFit {
        params: LgParams::new(run.params.theta(), run.params.p())?,
        loglik: run.derivs.loglik,
        score_norm: run.score_norm,
    })
}

/// ELG fit that also starts from the supplied submodel point, so the result
/// never falls below a nested model's likelihood.
pub fn fit_elg_nested(data: &Dataset, nested_start: Option<ElgParams>, opts: &FitOptions) -> Result<FitResult> {
    let grid = fit_mle_newton(data, None, opts);
    let Some(start) = nested_start else {
        return grid;
    };
    let nested = fit_mle_newton(data, Some(start), opts);
    match (grid, nested) {
        (Ok(a), Ok(b)) => Ok(if (b.converged, b.loglik) > (a.converged, a.loglik) { b } else { a }),
        (Ok(a), Err(_)) => Ok(a),
        (Err(_), Ok(b)) => Ok(b),
        (Err(e), Err(_)) => Err(e),
    }
}

/// Submodel under the null hypothesis of an LR test against the full ELG.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NullModel {
    /// `alpha = 1`
    Lg,
    /// `alpha = 1, p = 0`
    Lindley,
}

impl NullModel {
    pub fn df(self) -> u32 {
        match self {
            NullModel::Lg => 1,
            NullModel::Lindley => 2,
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            NullModel::Lg => "H0: alpha = 1 (Lindley-geometric)",
            NullModel::Lindley => "H0: (alpha, p) = (1, 0) (Lindley)",
        }
    }
}

/// Everything computed by an ELG-versus-submodel LR test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NestedTest {
    pub full: FitResult,
    pub restricted_params: BTreeMap<String, f64>,
    pub restricted_loglik: f64,
    pub test: LrTestResult,
}

pub fn lr_test_against(data: &Dataset, null: NullModel, opts: &FitOptions) -> Result<NestedTest> {
    let (restricted_params, restricted_loglik, start) = match null {
        NullModel::Lg => {
            let f = fit_lg_with(data, opts)?;
            (lg_map(&f.params), f.loglik, f.params.as_elg())
        }
        NullModel::Lindley => {
            let f = fit_lindley(data)?;
            (
                BTreeMap::from([("theta".to_string(), f.params.theta())]),
                f.loglik,
                ElgParams::new(1.0, f.params.theta(), 0.0)?,
            )
        }
    };
    let full = fit_elg_nested(data, Some(start), opts)?;
    let test = lr_test(full.loglik, restricted_loglik, null.df(), null.description())?;
    Ok(NestedTest {
        full,
        restricted_params,
        restricted_loglik,
        test,
    })
}

fn lg_map(p: &LgParams) -> BTreeMap<String, f64> {
    BTreeMap::from([("theta".to_string(), p.theta()), ("p".to_string(), p.p())])
}

/// One row of a model-comparison table. Exactly one of `criteria` and
/// `error` is set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRow {
    pub model: String,
    pub params: BTreeMap<String, f64>,
    pub criteria: Option<InformationCriteria>,
    pub score_norm: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelComparison {
    pub rows: Vec<ModelRow>,
    pub best_by_aic: Option<String>,
    pub best_by_bic: Option<String>,
    pub best_by_aicc: Option<String>,
}

impl ModelComparison {
    pub fn row(&self, model: &str) -> Option<&ModelRow> {
        self.rows.iter().find(|r| r.model == model)
    }
}

fn make_row(model: &str, n: usize, k: usize, fit: Result<(BTreeMap<String, f64>, f64, f64)>) -> ModelRow {
    let fit = fit.and_then(|(params, ll, sn)| Ok((params, information_criteria(ll, k, n)?, sn)));
    match fit {
        Ok((params, criteria, score_norm)) => ModelRow {
            model: model.into(),
            params,
            criteria: Some(criteria),
            score_norm: Some(score_norm),
            error: None,
        },
        Err(e) => ModelRow {
            model: model.into(),
            params: BTreeMap::new(),
            criteria: None,
            score_norm: None,
            error: Some(e.to_string()),
        },
    }
}

fn best_by(rows: &[ModelRow], key: impl Fn(&InformationCriteria) -> f64) -> Option<String> {
    rows.iter()
        .filter_map(|r| r.criteria.as_ref().map(|c| (key(c), &r.model)))
        .filter(|(v, _)| v.is_finite())
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(_, m)| m.clone())
}

/// Fits ELG, Gamma, Weibull and LG and tabulates AIC, BIC and AICc. A model
/// that fails to fit yields an error row; the other rows are unaffected.
pub fn compare_models(data: &Dataset) -> Result<ModelComparison> {
    compare_models_with(data, &FitOptions::default())
}

pub fn compare_models_with(data: &Dataset, opts: &FitOptions) -> Result<ModelComparison> {
    if data.len() < crate::estimation::MIN_FIT_SIZE {
        return Err(Error::DegenerateData(format!(
            "model comparison needs at least {} observations",
            crate::estimation::MIN_FIT_SIZE
        )));
    }
    let n = data.len();
    let (lg, (elg, gamma, weibull)) = std::thread::scope(|s| {
        let gamma = s.spawn(|| fit_gamma(data));
        let weibull = s.spawn(|| fit_weibull(data));
        let lg = fit_lg_with(data, opts);
        let start = lg.as_ref().ok().map(|f| f.params.as_elg());
        let elg = fit_elg_nested(data, start, opts).and_then(|f| {
            if f.converged {
                Ok(f)
            } else {
                Err(Error::no_convergence("ELG Newton-Raphson", f.iterations))
            }
        });
        let gamma = gamma.join().expect("gamma fit thread panicked");
        let weibull = weibull.join().expect("weibull fit thread panicked");
        (lg, (elg, gamma, weibull))
    });

    let rows = vec![
        make_row(
            "ELG",
            n,
            3,
            elg.map(|f| {
                let p = f.params;
                (
                    BTreeMap::from([
                        ("alpha".to_string(), p.alpha()),
                        ("theta".to_string(), p.theta()),
                        ("p".to_string(), p.p()),
                    ]),
                    f.loglik,
                    f.score_norm,
                )
            }),
        ),
        make_row(
            "Gamma",
            n,
            2,
            gamma.map(|f| {
                (
                    BTreeMap::from([
                        ("shape".to_string(), f.params.shape()),
                        ("rate".to_string(), f.params.rate()),
                    ]),
                    f.loglik,
                    f.score_norm,
                )
            }),
        ),
        make_row(
            "Weibull",
            n,
            2,
            weibull.map(|f| {
                (
                    BTreeMap::from([
                        ("shape".to_string(), f.params.shape()),
                        ("scale".to_string(), f.params.scale()),
                    ]),
                    f.loglik,
                    f.score_norm,
                )
            }),
        ),
        make_row("LG", n, 2, lg.map(|f| (lg_map(&f.params), f.loglik, f.score_norm))),
    ];
    Ok(ModelComparison {
        best_by_aic: best_by(&rows, |c| c.aic),
        best_by_bic: best_by(&rows, |c| c.bic),
        best_by_aicc: best_by(&rows, |c| c.aicc),
        rows,
    })
}

/// Log-likelihood of a Gamma fit recomputed from `lgamma` directly.
#[cfg(test)]
fn gamma_loglik_direct(x: &[f64], shape: f64, rate: f64) -> f64 {
    let lg = crate::special::log_gamma(shape).unwrap();
    x.iter()
        .map(|&v| shape * rate.ln() + (shape - 1.0) * v.ln() - rate * v - lg)
        .sum()
}
