//! Likelihood inference for the ELG model.
//!
//! Parameters are ordered `(alpha, theta, p)` everywhere: score vectors,
//! information matrices and covariance matrices. The second derivatives are
//! derived here from the per-observation log density
//!
//! ```text
//! l_i = ln a + 2 ln t - ln(t+1) + ln(1-p) + ln(1+x) - t x + (a-1) ln tau - 2 ln(1 - p + p tau^a)
//! ```
//!
//! with `tau` the Lindley cdf at `x`, and are validated against finite
//! differences of the score in the test suite.

use nalgebra::{DMatrix, DVector, Matrix3, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::distributions::{elg_log_pdf_at, ElgParams, ElgPoint, LindleyPoint};
use crate::error::{Error, Result};
use crate::special::normal_quantile;

/// Minimum sample size accepted by the fitting routines.
pub const MIN_FIT_SIZE: usize = 5;

/// Positive failure times with a provenance label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    values: Vec<f64>,
    label: String,
}

impl Dataset {
    pub fn new(values: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::DegenerateData("dataset is empty".into()));
        }
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !(**v > 0.0 && v.is_finite())) {
            return Err(Error::domain(format!(
                "observation {} is {v}; failure times must be positive and finite",
                i + 1
            )));
        }
        Ok(Dataset {
            values,
            label: label.into(),
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Rejects samples the fitting routines cannot work with.
    pub fn check_fittable(&self) -> Result<()> {
        if self.len() < MIN_FIT_SIZE {
            return Err(Error::DegenerateData(format!(
                "fitting needs at least {MIN_FIT_SIZE} observations, got {}",
                self.len()
            )));
        }
        let first = self.values[0];
        if self.values.iter().all(|&v| v == first) {
            return Err(Error::DegenerateData("all observations are identical".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub max_iterations: usize,
    pub grad_tol: f64,
    pub step_halving_max: usize,
    pub param_floor: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            max_iterations: 500,
            grad_tol: 1e-8,
            step_halving_max: 30,
            param_floor: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FitMethod {
    Newton,
    Em,
}

pub type Matrix3x3 = [[f64; 3]; 3];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub params: ElgParams,
    pub loglik: f64,
    /// Euclidean norm of the score in `(alpha, theta, p)` at `params`.
    pub score_norm: f64,
    /// Observed information, the negative Hessian of the log-likelihood.
    pub info: Matrix3x3,
    /// Inverse of `info`; absent when the information is not positive definite.
    pub vcov: Option<Matrix3x3>,
    /// Ratio of extreme eigenvalues of `info`.
    pub info_condition: f64,
    pub iterations: usize,
    pub converged: bool,
    pub method: FitMethod,
    pub trace: Vec<(usize, f64)>,
}

impl FitResult {
    /// Asymptotic standard errors from the diagonal of `vcov`.
    pub fn standard_errors(&self) -> Option<[f64; 3]> {
        let v = self.vcov?;
        let se = [v[0][0].sqrt(), v[1][1].sqrt(), v[2][2].sqrt()];
        se.iter().all(|s| s.is_finite() && *s > 0.0).then_some(se)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceIntervals {
    pub level: f64,
    pub alpha_ci: (f64, f64),
    pub theta_ci: (f64, f64),
    pub p_ci: (f64, f64),
}

/// `tau(theta, x) = 1 - (theta + 1 + theta x)/(theta + 1) e^{-theta x}`.
pub fn tau(theta: f64, x: f64) -> Result<f64> {
    if !(theta > 0.0) || !(x > 0.0) {
        return Err(Error::domain(format!("tau needs theta > 0 and x > 0, got {theta}, {x}")));
    }
    Ok(LindleyPoint::new(theta, x).g)
}

/// Sum of `ln f(x_i)` over the sample.
pub fn log_likelihood(params: ElgParams, data: &Dataset) -> f64 {
    data.values
        .iter()
        .map(|&x| elg_log_pdf_at(&params, x, &ElgPoint::new(&params, x)))
        .sum()
}

/// Log-likelihood, score and Hessian at one parameter point.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Derivatives {
    pub loglik: f64,
    pub grad: [f64; 3],
    pub hess: Matrix3x3,
}

/// Derivatives of `ln tau` with respect to theta.
#[derive(Debug, Clone, Copy)]
pub(crate) struct TauTheta {
    /// `d ln tau / d theta`
    pub l1: f64,
    /// `d^2 ln tau / d theta^2`
    pub l2: f64,
}

pub(crate) fn tau_theta(theta: f64, x: f64, tau: f64) -> TauTheta {
    let tp1 = theta + 1.0;
    let e = (-theta * x).exp();
    // d tau / d theta = x e^{-theta x} (1 + theta x/(theta+1) - 1/(theta+1)^2)
    let a = 1.0 + theta * x / tp1 - 1.0 / (tp1 * tp1);
    let da = x / (tp1 * tp1) + 2.0 / (tp1 * tp1 * tp1);
    let t1 = x * e * a;
    let t2 = x * e * (da - x * a);
    let l1 = t1 / tau;
    TauTheta {
        l1,
        l2: t2 / tau - l1 * l1,
    }
}

pub(crate) fn derivatives(params: &ElgParams, data: &Dataset) -> Derivatives {
    let (a, th, p) = (params.alpha(), params.theta(), params.p());
    let n = data.len() as f64;
    let mut loglik = 0.0;
    let mut g = [0.0; 3];
    let mut h = [[0.0; 3]; 3];

    g[0] = n / a;
    g[1] = n * (2.0 / th - 1.0 / (th + 1.0));
    g[2] = -n / (1.0 - p);
    h[0][0] = -n / (a * a);
    h[1][1] = n * (-2.0 / (th * th) + 1.0 / ((th + 1.0) * (th + 1.0)));
    h[2][2] = -n / ((1.0 - p) * (1.0 - p));

    for &x in &data.values {
        let pt = ElgPoint::new(params, x);
        loglik += elg_log_pdf_at(params, x, &pt);
        let l = pt.lindley.ln_g;
        let tt = tau_theta(th, x, pt.lindley.g);
        let t = pt.t;
        let one_minus_t = pt.ln_one_minus_t.exp();
        let d = pt.d;

        let t_a = l * t;
        let t_th = a * tt.l1 * t;
        let t_aa = l * l * t;
        let t_ath = tt.l1 * t * (1.0 + a * l);
        let t_thth = a * t * (tt.l2 + a * tt.l1 * tt.l1);

        g[0] += l - 2.0 * p * t_a / d;
        g[1] += -x + (a - 1.0) * tt.l1 - 2.0 * p * t_th / d;
        g[2] += 2.0 * one_minus_t / d;

        let d2 = d * d;
        h[0][0] += -2.0 * p * (t_aa / d - p * t_a * t_a / d2);
        h[1][1] += (a - 1.0) * tt.l2 - 2.0 * p * (t_thth / d - p * t_th * t_th / d2);
        h[2][2] += 2.0 * one_minus_t * one_minus_t / d2;
        h[0][1] += tt.l1 - 2.0 * p * (t_ath / d - p * t_a * t_th / d2);
        h[0][2] += -2.0 * t_a / d2;
        h[1][2] += -2.0 * t_th / d2;
    }
    h[1][0] = h[0][1];
    h[2][0] = h[0][2];
    h[2][1] = h[1][2];
    Derivatives { loglik, grad: g, hess: h }
}

/// Analytic score `(dl/d alpha, dl/d theta, dl/d p)`.
pub fn score(params: ElgParams, data: &Dataset) -> [f64; 3] {
    derivatives(&params, data).grad
}

/// Observed information: the negative Hessian of the log-likelihood.
pub fn observed_information(params: ElgParams, data: &Dataset) -> Matrix3x3 {
    let h = derivatives(&params, data).hess;
    let mut info = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            info[i][j] = -h[i][j];
        }
    }
    info
}

fn to_matrix3(m: &Matrix3x3) -> Matrix3<f64> {
    Matrix3::from_fn(|i, j| m[i][j])
}

fn from_matrix3(m: &Matrix3<f64>) -> Matrix3x3 {
    let mut out = [[0.0; 3]; 3];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = m[(i, j)];
        }
    }
    out
}

/// Ratio of the largest to the smallest absolute eigenvalue.
pub fn condition_number(m: &Matrix3x3) -> f64 {
    let eig = SymmetricEigen::new(to_matrix3(m));
    let abs: Vec<f64> = eig.eigenvalues.iter().map(|v| v.abs()).collect();
    let max = abs.iter().cloned().fold(0.0, f64::max);
    let min = abs.iter().cloned().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Symmetric positive-definite inverse of the information matrix.
pub fn invert_information(info: &Matrix3x3) -> Result<Matrix3x3> {
    let condition = condition_number(info);
    let chol = to_matrix3(info)
        .cholesky()
        .ok_or(Error::Singular { condition })?;
    let inv = chol.inverse();
    if inv.iter().any(|v| !v.is_finite()) || condition > 1e15 {
        return Err(Error::Singular { condition });
    }
    // symmetric up to rounding; make it exact
    Ok(from_matrix3(&((inv + inv.transpose()) * 0.5)))
}

/// Which coordinates of `(alpha, theta, p)` a Newton run may move.
#[derive(Debug, Clone, Copy)]
pub(crate) struct FreeMask(pub [bool; 3]);

impl FreeMask {
    pub const ALL: FreeMask = FreeMask([true, true, true]);
    /// Lindley-geometric: alpha pinned at its starting value.
    pub const THETA_P: FreeMask = FreeMask([false, true, true]);

    fn indices(&self) -> Vec<usize> {
        (0..3).filter(|&i| self.0[i]).collect()
    }
}

/// Unconstrained coordinates `(ln alpha, ln theta, ln(1 - p))`.
fn to_unconstrained(params: &ElgParams) -> [f64; 3] {
    [params.alpha().ln(), params.theta().ln(), (-params.p()).ln_1p()]
}

fn from_unconstrained(phi: &[f64; 3], floor: f64) -> Result<ElgParams> {
    let alpha = phi[0].exp().max(floor);
    let theta = phi[1].exp().max(floor);
    let p = -phi[2].exp_m1();
    ElgParams::new(alpha, theta, p.min(1.0 - floor))
}

/// Outcome of a safeguarded Newton ascent.
#[derive(Debug, Clone)]
pub(crate) struct NewtonRun {
    pub params: ElgParams,
    pub derivs: Derivatives,
    pub score_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub trace: Vec<(usize, f64)>,
}

fn masked_norm(g: &[f64; 3], mask: FreeMask) -> f64 {
    mask.indices().iter().map(|&i| g[i] * g[i]).sum::<f64>().sqrt()
}

/// Newton-Raphson ascent in unconstrained coordinates with Levenberg damping
/// when the Hessian is not negative definite and step halving for ascent.
pub(crate) fn newton_ascent(data: &Dataset, start: ElgParams, mask: FreeMask, opts: &FitOptions) -> Result<NewtonRun> {
    let idx = mask.indices();
    let k = idx.len();
    let mut phi = to_unconstrained(&start);
    let mut params = start;
    let mut d = derivatives(&params, data);
    if !d.loglik.is_finite() {
        return Err(Error::domain(format!("log-likelihood is not finite at the start point {start:?}")));
    }
    let mut trace = vec![(0, d.loglik)];
    let mut iterations = 0;
    let mut converged = false;

    while iterations < opts.max_iterations {
        let gnorm = masked_norm(&d.grad, mask);
        if gnorm <= opts.grad_tol {
            converged = true;
            break;
        }
        iterations += 1;

        // chain rule: first and second derivatives of the reparameterisation
        let jac = [params.alpha(), params.theta(), -(1.0 - params.p())];
        let grad = DVector::from_fn(k, |r, _| jac[idx[r]] * d.grad[idx[r]]);
        let neg_hess = DMatrix::from_fn(k, k, |r, c| {
            let (i, j) = (idx[r], idx[c]);
            let mut v = -jac[i] * jac[j] * d.hess[i][j];
            if i == j {
                v -= jac[i] * d.grad[i];
            }
            v
        });

        let max_diag = (0..k).map(|i| neg_hess[(i, i)].abs()).fold(1e-12, f64::max);
        let mut damping = 0.0;
        let mut accepted = false;
        for _attempt in 0..12 {
            let mut m = neg_hess.clone();
            for i in 0..k {
                m[(i, i)] += damping;
            }
            let Some(chol) = m.cholesky() else {
                damping = if damping == 0.0 { 1e-6 * max_diag } else { damping * 10.0 };
                continue;
            };
            let mut step = chol.solve(&grad);
            let biggest = step.amax();
            if biggest > 3.0 {
                step *= 3.0 / biggest;
            }

            let mut t = 1.0;
            for halving in 0..=opts.step_halving_max {
                let mut cand_phi = phi;
                for (r, &i) in idx.iter().enumerate() {
                    cand_phi[i] += t * step[r];
                }
                if let Ok(cand) = from_unconstrained(&cand_phi, opts.param_floor) {
                    let cd = derivatives(&cand, data);
                    let slack = 1e-13 * (1.0 + d.loglik.abs());
                    let ok = cd.loglik.is_finite()
                        && (cd.loglik > d.loglik
                            || (halving == 0 && cd.loglik >= d.loglik - slack && masked_norm(&cd.grad, mask) < gnorm));
                    if ok {
                        phi = cand_phi;
                        params = cand;
                        d = cd;
                        accepted = true;
                        break;
                    }
                }
                t *= 0.5;
            }
            if accepted {
                break;
            }
            damping = if damping == 0.0 { max_diag } else { damping * 10.0 };
        }
        trace.push((iterations, d.loglik));
        if !accepted {
            break;
        }
    }
    let score_norm = masked_norm(&d.grad, mask);
    converged |= score_norm <= opts.grad_tol;
    Ok(NewtonRun {
        params,
        derivs: d,
        score_norm,
        iterations,
        converged,
        trace,
    })
}

/// Lindley rate from the closed moment relation `mean = (theta+2)/(theta(theta+1))`.
pub(crate) fn lindley_moment_theta(mean: f64) -> f64 {
    let b = mean - 1.0;
    (-b + (b * b + 8.0 * mean).sqrt()) / (2.0 * mean)
}

/// Starting points ranked by log-likelihood over a coarse grid around the
/// Lindley anchor `(1, theta_0, 0.1)`.
pub(crate) fn grid_starts(data: &Dataset, p_values: &[f64], count: usize) -> Vec<ElgParams> {
    let theta0 = lindley_moment_theta(data.mean());
    let alphas = [0.3, 1.0, 3.0, 10.0, 30.0];
    let thetas = [0.5, 0.75, 1.0, 1.5, 2.0].map(|m| m * theta0);
    let mut cells: Vec<(f64, ElgParams)> = Vec::new();
    for &a in &alphas {
        for &t in &thetas {
            for &p in p_values {
                if let Ok(params) = ElgParams::new(a, t, p) {
                    let ll = log_likelihood(params, data);
                    if ll.is_finite() {
                        cells.push((ll, params));
                    }
                }
            }
        }
    }
    cells.sort_by(|a, b| b.0.total_cmp(&a.0));
    cells.into_iter().take(count).map(|(_, p)| p).collect()
}

const GRID_P: [f64; 5] = [-2.0, -0.5, 0.1, 0.5, 0.9];
const GRID_P_COMPOUNDING: [f64; 5] = [0.05, 0.1, 0.3, 0.6, 0.9];

fn finish_fit(run: NewtonRun, data: &Dataset, method: FitMethod) -> Result<FitResult> {
    let info = observed_information(run.params, data);
    let info_condition = condition_number(&info);
    let vcov = match invert_information(&info) {
        Ok(v) => Some(v),
        Err(e) if run.converged => return Err(e),
        Err(_) => None,
    };
    Ok(FitResult {
        params: run.params,
        loglik: run.derivs.loglik,
        score_norm: run.score_norm,
        info,
        vcov,
        info_condition,
        iterations: run.iterations,
        converged: run.converged,
        method,
        trace: run.trace,
    })
}

/// Maximum likelihood by Newton-Raphson. Without `init` the search starts
/// from the best cells of a coarse likelihood grid.
pub fn fit_mle_newton(data: &Dataset, init: Option<ElgParams>, opts: &FitOptions) -> Result<FitResult> {
    data.check_fittable()?;
    let starts = match init {
        Some(p) => vec![p],
        None => grid_starts(data, &GRID_P, 3),
    };
    if starts.is_empty() {
        return Err(Error::DegenerateData("no start point with a finite likelihood".into()));
    }
    let mut best: Option<NewtonRun> = None;
    for start in starts {
        let run = match newton_ascent(data, start, FreeMask::ALL, opts) {
            Ok(r) => r,
            Err(_) => continue,
        };
        let better = match &best {
            None => true,
            Some(b) => (run.converged, run.derivs.loglik) > (b.converged, b.derivs.loglik),
        };
        if better {
            best = Some(run);
        }
    }
    let run = best.ok_or_else(|| Error::no_convergence("Newton-Raphson from every start", 0))?;
    finish_fit(run, data, FitMethod::Newton)
}

/// Expected geometric count given `x`: `(1 + p(1 - tau^a)) / (1 - p(1 - tau^a))`.
pub fn expected_count(params: ElgParams, x: f64) -> f64 {
    let pt = ElgPoint::new(&params, x);
    let q = params.p() * pt.ln_one_minus_t.exp();
    (1.0 + q) / (1.0 - q)
}

/// Expected complete-data log-likelihood in `(alpha, theta)` for fixed weights
/// `z`, dropping terms that do not involve either parameter.
struct CompleteData<'a> {
    data: &'a Dataset,
    z: &'a [f64],
    sum_x: f64,
}

impl CompleteData<'_> {
    /// Returns `Q` with its gradient and Hessian in `(ln alpha, ln theta)`.
    fn eval(&self, alpha: f64, theta: f64) -> (f64, [f64; 2], [[f64; 2]; 2]) {
        let n = self.data.len() as f64;
        let params = ElgParams::new(alpha, theta, 0.0).expect("positive alpha and theta");
        let mut q = n * alpha.ln() + n * (2.0 * theta.ln() - (theta + 1.0).ln()) - theta * self.sum_x;
        let (mut da, mut daa) = (n / alpha, -n / (alpha * alpha));
        let mut dt = 2.0 * n / theta - n / (theta + 1.0) - self.sum_x;
        let mut dtt = -2.0 * n / (theta * theta) + n / ((theta + 1.0) * (theta + 1.0));
        let mut dat = 0.0;
        for (&x, &z) in self.data.values.iter().zip(self.z) {
            let pt = ElgPoint::new(&params, x);
            let l = pt.lindley.ln_g;
            let w = z - 1.0;
            q += (alpha - 1.0) * l + w * pt.ln_one_minus_t;
            let t = pt.t;
            let inv = (-pt.ln_one_minus_t).exp();
            // t / (1 - t)
            let odds = t * inv;
            let tt = tau_theta(theta, x, pt.lindley.g);
            let t_th = alpha * tt.l1 * t;
            let t_thth = alpha * t * (tt.l2 + alpha * tt.l1 * tt.l1);
            da += l - w * odds * l;
            daa -= w * odds * (1.0 + odds) * l * l;
            dt += (alpha - 1.0) * tt.l1 - w * t_th * inv;
            dtt += (alpha - 1.0) * tt.l2 - w * (t_thth * inv + t_th * t_th * inv * inv);
            dat += tt.l1 - w * (t_th * inv * inv * l + odds * tt.l1);
        }
        // convert to log coordinates
        let g = [alpha * da, theta * dt];
        let h = [
            [alpha * alpha * daa + g[0], alpha * theta * dat],
            [alpha * theta * dat, theta * theta * dtt + g[1]],
        ];
        (q, g, h)
    }

    /// Damped Newton ascent of `Q` jointly in `(ln alpha, ln theta)`,
    /// started from the current iterate so that `Q` never decreases.
    fn maximize(&self, alpha: f64, theta: f64, opts: &FitOptions) -> (f64, f64) {
        let mut u = [alpha.ln(), theta.ln()];
        let value_at = |u: [f64; 2]| {
            let a = u[0].exp().max(opts.param_floor);
            let t = u[1].exp().max(opts.param_floor);
            self.eval(a, t)
        };
        let (mut q, mut g, mut h) = value_at(u);
        for _ in 0..100 {
            let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
            let mut step = if h[0][0] < 0.0 && det > 0.0 {
                [
                    -(h[1][1] * g[0] - h[0][1] * g[1]) / det,
                    -(h[0][0] * g[1] - h[1][0] * g[0]) / det,
                ]
            } else {
                let scale = 1.0 / (1.0 + h[0][0].abs().max(h[1][1].abs()));
                [g[0] * scale, g[1] * scale]
            };
            let len = step[0].hypot(step[1]);
            if len > 2.0 {
                step = [step[0] * 2.0 / len, step[1] * 2.0 / len];
            }
            if len < 1e-13 {
                break;
            }
            let mut moved = false;
            for _ in 0..=opts.step_halving_max {
                let next = [u[0] + step[0], u[1] + step[1]];
                let cand = value_at(next);
                if cand.0.is_finite() && cand.0 >= q {
                    u = next;
                    (q, g, h) = cand;
                    moved = true;
                    break;
                }
                step = [step[0] * 0.5, step[1] * 0.5];
            }
            if !moved || step[0].hypot(step[1]) < 1e-12 {
                break;
            }
        }
        (u[0].exp().max(opts.param_floor), u[1].exp().max(opts.param_floor))
    }
}

/// Maximum likelihood by EM, treating the geometric count behind each
/// observation as missing data. `init.p` must lie in `(0, 1)`.
pub fn fit_mle_em(data: &Dataset, init: Option<ElgParams>, opts: &FitOptions) -> Result<FitResult> {
    data.check_fittable()?;
    let mut params = match init {
        Some(p) => p,
        None => *grid_starts(data, &GRID_P_COMPOUNDING, 1)
            .first()
            .ok_or_else(|| Error::DegenerateData("no start point with a finite likelihood".into()))?,
    };
    if !(params.p() > 0.0 && params.p() < 1.0) {
        return Err(Error::domain(format!(
            "EM needs p in (0, 1), got {}",
            params.p()
        )));
    }
    let n = data.len() as f64;
    let sum_x: f64 = data.values.iter().sum();
    let mut loglik = log_likelihood(params, data);
    let mut trace = vec![(0, loglik)];
    let mut iterations = 0;
    let mut converged = false;
    let tol = 10.0 * opts.grad_tol;
    let mut z = vec![0.0; data.len()];

    while iterations < opts.max_iterations {
        let gnorm = score(params, data).iter().map(|v| v * v).sum::<f64>().sqrt();
        if gnorm <= tol {
            converged = true;
            break;
        }
        iterations += 1;

        for (zi, &x) in z.iter_mut().zip(&data.values) {
            *zi = expected_count(params, x);
        }
        let p_next = 1.0 - n / z.iter().sum::<f64>();
        if !(p_next > 0.0 && p_next < 1.0) {
            return Err(Error::domain(format!("EM update moved p to {p_next}")));
        }

        let cd = CompleteData {
            data,
            z: &z,
            sum_x,
        };
        let (alpha, theta) = cd.maximize(params.alpha(), params.theta(), opts);
        params = ElgParams::new(alpha, theta, p_next)?;
        loglik = log_likelihood(params, data);
        trace.push((iterations, loglik));
    }

    let d = derivatives(&params, data);
    let score_norm = d.grad.iter().map(|v| v * v).sum::<f64>().sqrt();
    converged |= score_norm <= tol;
    let run = NewtonRun {
        params,
        derivs: d,
        score_norm,
        iterations,
        converged,
        trace,
    };
    finish_fit(run, data, FitMethod::Em)
}

/// Wald intervals `estimate +- z se` at the given coverage level.
pub fn confidence_intervals(fit: &FitResult, level: f64) -> Result<ConfidenceIntervals> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::domain(format!("confidence level must be in (0,1), got {level}")));
    }
    if !fit.converged {
        return Err(Error::no_convergence("fit used for confidence intervals", fit.iterations));
    }
    let vcov = fit.vcov.ok_or(Error::Singular {
        condition: fit.info_condition,
    })?;
    let z = normal_quantile(1.0 - (1.0 - level) / 2.0)?;
    let est = [fit.params.alpha(), fit.params.theta(), fit.params.p()];
    let mut cis = [(0.0, 0.0); 3];
    for i in 0..3 {
        let var = vcov[i][i];
        if !(var > 0.0) {
            return Err(Error::domain(format!("non-positive variance {var} for parameter {i}")));
        }
        let half = z * var.sqrt();
        cis[i] = (est[i] - half, est[i] + half);
    }
    Ok(ConfidenceIntervals {
        level,
        alpha_ci: cis[0],
        theta_ci: cis[1],
        p_ci: cis[2],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::{elg_pdf, elg_sample, lindley_cdf, LindleyParams, Seed};

    pub(crate) fn relief() -> Dataset {
        Dataset::new(crate::cli::RELIEF_TIMES.to_vec(), "relief").unwrap()
    }

    fn elg(a: f64, t: f64, p: f64) -> ElgParams {
        ElgParams::new(a, t, p).unwrap()
    }

    #[test]
    fn tau_examples() {
        let v = tau(1.0, 1.0).unwrap();
        assert!((v - 0.448_180_9).abs() < 1e-7);
        let v = tau(2.0, 0.5).unwrap();
        assert!((v - (1.0 - 4.0 / 3.0 * (-1.0f64).exp())).abs() < 1e-15);
        assert!((v - lindley_cdf(LindleyParams::new(2.0).unwrap(), 0.5).unwrap()).abs() < 1e-16);
        assert!(tau(200.0, 1.0).unwrap() > 1.0 - 1e-15);
        assert!(tau(1.0, 0.0).is_err());
    }

    #[test]
    fn dataset_validation() {
        assert!(Dataset::new(vec![], "x").is_err());
        assert!(Dataset::new(vec![1.0, -2.0], "x").is_err());
        assert!(Dataset::new(vec![1.0, f64::NAN], "x").is_err());
        let small = Dataset::new(vec![1.0, 2.0, 3.0, 4.0], "x").unwrap();
        assert!(matches!(small.check_fittable(), Err(Error::DegenerateData(_))));
        let flat = Dataset::new(vec![2.0; 6], "x").unwrap();
        assert!(matches!(flat.check_fittable(), Err(Error::DegenerateData(_))));
    }

    #[test]
    fn log_likelihood_examples() {
        let ll = log_likelihood(elg(15.5628, 1.5270, 0.9059), &relief());
        assert!((ll + 15.5528).abs() < 1e-3);
        let one = Dataset::new(vec![1.0], "one").unwrap();
        assert!((log_likelihood(elg(1.0, 1.0, 0.0), &one) + 1.0).abs() < 1e-14);
        let data = relief();
        let mut doubled = data.values().to_vec();
        doubled.extend_from_slice(data.values());
        let doubled = Dataset::new(doubled, "x2").unwrap();
        let params = elg(2.0, 1.2, 0.3);
        assert!((log_likelihood(params, &doubled) - 2.0 * log_likelihood(params, &data)).abs() < 1e-12);
    }

    #[test]
    fn log_likelihood_is_sum_of_log_pdf() {
        let data = relief();
        for &(a, t, p) in &[(0.5, 0.5, -2.0), (2.0, 1.0, 0.5), (15.0, 2.0, 0.9)] {
            let params = elg(a, t, p);
            let direct: f64 = data.values().iter().map(|&x| elg_pdf(params, x).unwrap().ln()).sum();
            assert!((log_likelihood(params, &data) - direct).abs() < 1e-10 * data.len() as f64);
        }
    }

    #[test]
    fn score_at_p_zero_matches_closed_form() {
        let data = relief();
        let params = elg(1.7, 1.1, 0.0);
        let expected: f64 = -(data.len() as f64)
            + 2.0 * data.values().iter().map(|&x| 1.0 - tau(1.1, x).unwrap().powf(1.7)).sum::<f64>();
        assert!((score(params, &data)[2] - expected).abs() < 1e-10);
    }

    #[test]
    fn information_closed_form_entries() {
        let data = relief();
        let n = data.len() as f64;
        let info = observed_information(elg(1.7, 1.1, 0.0), &data);
        assert!((info[0][0] - n / (1.7 * 1.7)).abs() < 1e-12);
        let (a, t, p) = (2.5, 1.3, 0.4);
        let info = observed_information(elg(a, t, p), &data);
        let s: f64 = data
            .values()
            .iter()
            .map(|&x| {
                let ta = tau(t, x).unwrap().powf(a);
                ((1.0 - ta) / (1.0 - p + p * ta)).powi(2)
            })
            .sum();
        let expected = n / ((1.0 - p) * (1.0 - p)) - 2.0 * s;
        assert!((info[2][2] - expected).abs() < 1e-10 * expected.abs());
    }

    #[test]
    fn score_matches_finite_differences() {
        let data = relief();
        for &(a, t, p) in &[(2.0, 1.0, 0.5), (0.7, 1.5, -1.0), (15.0, 1.5, 0.9)] {
            let params = elg(a, t, p);
            let g = score(params, &data);
            let x = [a, t, p];
            for i in 0..3 {
                let h = 1e-6 * x[i].abs().max(1e-3);
                let mut up = x;
                let mut dn = x;
                up[i] += h;
                dn[i] -= h;
                let fd = (log_likelihood(elg(up[0], up[1], up[2]), &data)
                    - log_likelihood(elg(dn[0], dn[1], dn[2]), &data))
                    / (2.0 * h);
                assert!((g[i] - fd).abs() <= 1e-4 * fd.abs().max(1e-2), "{i}: {} vs {fd}", g[i]);
            }
        }
    }

    #[test]
    fn newton_reproduces_relief_fit() {
        let fit = fit_mle_newton(&relief(), None, &FitOptions::default()).unwrap();
        assert!(fit.converged);
        assert!(fit.score_norm <= 1e-8);
        assert!((fit.loglik + 15.5528).abs() < 0.01);
        assert!((fit.params.alpha() - 15.5628).abs() < 0.05 * 15.5628);
        assert!((fit.params.theta() - 1.5270).abs() < 0.05 * 1.5270);
        assert!((fit.params.p() - 0.9059).abs() < 0.05 * 0.9059);
        let eig = SymmetricEigen::new(to_matrix3(&fit.info));
        assert!(eig.eigenvalues.iter().all(|&v| v > 0.0));
        let se = fit.standard_errors().unwrap();
        assert!(se.iter().all(|&s| s > 0.0));
    }

    #[test]
    fn newton_score_at_reference_estimates_is_small() {
        // the reference estimates are rounded to four decimals
        let g = score(elg(15.5628, 1.5270, 0.9059), &relief());
        let fit = fit_mle_newton(&relief(), None, &FitOptions::default()).unwrap();
        let at_fit = score(fit.params, &relief());
        assert!(at_fit.iter().all(|v| v.abs() < 1e-8));
        assert!(g.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn newton_from_stationary_point_stops_quickly() {
        let data = relief();
        let fit = fit_mle_newton(&data, None, &FitOptions::default()).unwrap();
        let again = fit_mle_newton(&data, Some(fit.params), &FitOptions::default()).unwrap();
        assert!(again.iterations <= 2);
        assert!((again.loglik - fit.loglik).abs() < 1e-12);
    }

    #[test]
    fn newton_recovers_simulated_parameters() {
        let truth = elg(2.0, 1.0, 0.5);
        let data = Dataset::new(elg_sample(truth, 5000, Seed(2024)).unwrap(), "sim").unwrap();
        let fit = fit_mle_newton(&data, None, &FitOptions::default()).unwrap();
        assert!(fit.converged);
        let se = fit.standard_errors().unwrap();
        let est = [fit.params.alpha(), fit.params.theta(), fit.params.p()];
        for (i, &t) in [2.0, 1.0, 0.5].iter().enumerate() {
            assert!((est[i] - t).abs() < 3.0 * se[i], "param {i}: {} vs {t} (se {})", est[i], se[i]);
        }
    }

    #[test]
    fn em_matches_newton_on_relief() {
        let data = relief();
        let newton = fit_mle_newton(&data, None, &FitOptions::default()).unwrap();
        let opts = FitOptions {
            max_iterations: 20_000,
            ..FitOptions::default()
        };
        let em = fit_mle_em(&data, Some(elg(5.0, 1.0, 0.5)), &opts).unwrap();
        assert!((em.loglik - newton.loglik).abs() < 1e-4, "{} vs {}", em.loglik, newton.loglik);
        for w in em.trace.windows(2) {
            assert!(w[1].1 >= w[0].1 - 1e-10);
        }
    }

    #[test]
    fn em_rejects_non_compounding_start() {
        let opts = FitOptions::default();
        assert!(fit_mle_em(&relief(), Some(elg(2.0, 1.0, -0.5)), &opts).is_err());
        assert!(fit_mle_em(&relief(), Some(elg(2.0, 1.0, 0.0)), &opts).is_err());
    }

    #[test]
    fn expected_count_limits() {
        for &x in &[0.1, 1.0, 5.0] {
            assert!((expected_count(elg(2.0, 1.0, 1e-12), x) - 1.0).abs() < 1e-11);
            assert!(expected_count(elg(2.0, 1.0, 0.7), x) > 1.0);
        }
        // all z equal to one gives p = 1 - n / n = 0
        let z = [1.0; 7];
        assert_eq!(1.0 - z.len() as f64 / z.iter().sum::<f64>(), 0.0);
    }

    #[test]
    fn intervals_contain_estimates_and_nest() {
        let fit = fit_mle_newton(&relief(), None, &FitOptions::default()).unwrap();
        let c95 = confidence_intervals(&fit, 0.95).unwrap();
        let c99 = confidence_intervals(&fit, 0.99).unwrap();
        let est = [fit.params.alpha(), fit.params.theta(), fit.params.p()];
        for (i, (a, b)) in [(c95.alpha_ci, c99.alpha_ci), (c95.theta_ci, c99.theta_ci), (c95.p_ci, c99.p_ci)]
            .into_iter()
            .enumerate()
        {
            assert!(a.0 <= est[i] && est[i] <= a.1);
            assert!(b.0 < a.0 && a.1 < b.1);
        }
        let se = fit.standard_errors().unwrap();
        assert!(((c95.alpha_ci.1 - est[0]) / se[0] - 1.959_964).abs() < 1e-6);
        assert!(confidence_intervals(&fit, 1.0).is_err());
    }
}
