//! Raw moments and the moment generating function.
//!
//! The ELG law is a signed mixture of exponentiated-Lindley laws with
//! exponents `alpha (k + 1)`:
//!
//! ```text
//! E(X^n) = 1/(1-p) sum_k (-p/(1-p))^k  E(Y^n_{alpha(k+1)})
//! E(Y^n_a) = a theta^2/(1+theta) K(a, theta, n, theta)
//! ```
//!
//! where `K(a, b, c, delta) = int_0^inf G_b(x)^(a-1) (1+x) x^c e^(-delta x) dx`
//! is evaluated by expanding `G_b^(a-1)` in powers of the Lindley survival
//! function. The mixture converges only for `|p/(1-p)| < 1`; outside that
//! range, or when the series stalls, moments come from quadrature.

use std::ops::{Add, Div, Mul, Sub};

use serde::{Deserialize, Serialize};
use twofloat::TwoFloat;

use crate::distributions::{elg_pdf, ElgParams, LindleyPoint};
use crate::error::{Error, Result};
use crate::special::{integrate_semi_infinite, sum_series, QuadratureSpec, SeriesTerm};

/// Absolute tolerance of both series levels.
pub const SERIES_ABS_TOL: f64 = 1e-12;
/// Term budget for the mixture (outer) sum.
pub const OUTER_MAX_TERMS: usize = 500;
/// Term budget for the binomial (inner) sum of `K`; non-integer exponents
/// below one decay only polynomially.
pub const INNER_MAX_TERMS: usize = 1_000_000;

/// Unit roundoff used for the rounding-floor estimate of double-double sums.
const DD_ROUNDOFF: f64 = 1e-30;
const F64_ROUNDOFF: f64 = 1e-15;

/// Largest exponent for which `K` is summed in closed form. The binomial sum
/// cancels roughly `2^a` in magnitude, beyond double-double reach past here.
pub const K_CLOSED_FORM_MAX_A: f64 = 48.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MomentMethod {
    Series,
    Quadrature,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentResult {
    pub value: f64,
    pub terms_used: usize,
    pub converged: bool,
    pub method: MomentMethod,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub mean: f64,
    pub variance: f64,
    pub skewness: f64,
    /// Plain (not excess) kurtosis.
    pub kurtosis: f64,
}

trait Scalar:
    SeriesTerm + From<f64> + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Div<Output = Self>
{
    fn to_f64(self) -> f64;
    const ROUNDOFF: f64;
}

impl Scalar for f64 {
    fn to_f64(self) -> f64 {
        self
    }
    const ROUNDOFF: f64 = F64_ROUNDOFF;
}

impl Scalar for TwoFloat {
    fn to_f64(self) -> f64 {
        self.hi() + self.lo()
    }
    const ROUNDOFF: f64 = DD_ROUNDOFF;
}

#[derive(Debug, Clone, Copy)]
struct KSum {
    value: f64,
    /// Estimated rounding error of `value`.
    noise: f64,
}

/// `int_0^inf ((1 + b + b x)/(1 + b))^i (1 + x) x^c e^{-(b i + delta) x} dx`,
/// expanded as `sum_m C(i, m) r^m (c+m)!/lambda^(c+m+1) (1 + (c+m+1)/lambda)`
/// with `r = b/(1+b)` and `lambda = b i + delta`.
fn survival_power_integral<T: Scalar>(i: usize, r: T, b: f64, delta: f64, c: u32, fact_c: T) -> T {
    let lambda = T::from(b) * T::from(i as f64) + T::from(delta);
    let mut u = fact_c;
    for _ in 0..=c {
        u = u / lambda;
    }
    let one = T::from(1.0);
    let mut sum = u * (one + T::from(f64::from(c) + 1.0) / lambda);
    for m in 0..i {
        let mf = m as f64;
        let ratio = T::from((i - m) as f64) / T::from(mf + 1.0) * r * T::from(f64::from(c) + mf + 1.0) / lambda;
        u = u * ratio;
        let term = u * (one + T::from(f64::from(c) + mf + 2.0) / lambda);
        sum = sum + term;
        if ratio.magnitude() < 1.0 && term.magnitude() < T::ROUNDOFF * 1e-4 * sum.magnitude() {
            break;
        }
    }
    sum
}

fn k_sum<T: Scalar>(a: f64, b: f64, c: u32, delta: f64) -> Result<KSum> {
    let r = T::from(b) / (T::from(1.0) + T::from(b));
    let mut fact_c = T::from(1.0);
    for j in 2..=c {
        fact_c = fact_c * T::from(f64::from(j));
    }
    // coef_i = (-1)^i C(a - 1, i), built by its ratio recurrence
    let mut coef = T::from(1.0);
    let mut magnitude = 0.0;
    let sum = sum_series(
        |i| {
            if i > 0 {
                let num = T::from(i as f64) - T::from(a);
                coef = coef * num / T::from(i as f64);
            }
            if coef.magnitude() == 0.0 {
                return Ok(T::from(0.0));
            }
            let term = coef * survival_power_integral(i, r, b, delta, c, fact_c);
            magnitude += term.magnitude();
            Ok(term)
        },
        SERIES_ABS_TOL,
        INNER_MAX_TERMS,
    )?;
    Ok(KSum {
        value: sum.value.to_f64(),
        noise: magnitude * T::ROUNDOFF * 10.0,
    })
}

fn k_eval(a: f64, b: f64, c: u32, delta: f64) -> Result<KSum> {
    if !(a > 0.0 && b > 0.0 && delta > 0.0) || !(a.is_finite() && b.is_finite() && delta.is_finite()) {
        return Err(Error::domain(format!(
            "K(a, b, c, delta) needs a, b, delta > 0; got a={a}, b={b}, delta={delta}"
        )));
    }
    // binomial coefficients stay below one in magnitude for a <= 2, so the
    // alternating sum has no cancellation worth extra precision
    if a <= 2.0 {
        k_sum::<f64>(a, b, c, delta)
    } else if a <= K_CLOSED_FORM_MAX_A {
        k_sum::<TwoFloat>(a, b, c, delta)
    } else {
        k_integral(a, b, c, delta)
    }
}

/// `K` from its defining integral `int G^(a-1) (1 + x) x^c e^{-delta x} dx`.
fn k_integral(a: f64, b: f64, c: u32, delta: f64) -> Result<KSum> {
    let cf = f64::from(c);
    let value = integrate_semi_infinite(
        |x| {
            let lp = LindleyPoint::new(b, x);
            ((a - 1.0) * lp.ln_g + x.ln_1p() + cf * x.ln() - delta * x).exp()
        },
        &quadrature_spec(),
    )?;
    Ok(KSum {
        value,
        noise: value.abs() * 1e-11,
    })
}

/// The triple sum `K(a, b, c, delta)` with its inner integrals in closed form.
pub fn k_function(a: f64, b: f64, c: u32, delta: f64) -> Result<f64> {
    k_eval(a, b, c, delta).map(|k| k.value)
}

/// True when the mixture series for the moments converges for this `p`.
pub fn series_applies(params: &ElgParams) -> bool {
    let p = params.p();
    (p / (1.0 - p)).abs() < 1.0 - 1e-9
}

/// The mixture series evaluated with `K(alpha(k+1), theta, c, delta)`.
fn mixture_series(params: &ElgParams, c: u32, delta: f64) -> Result<MomentResult> {
    if !series_applies(params) {
        return Err(Error::domain(format!(
            "moment series needs |p/(1-p)| < 1, got p = {}",
            params.p()
        )));
    }
    let (alpha, theta, p) = (params.alpha(), params.theta(), params.p());
    let ratio = -p / (1.0 - p);
    let scale = theta * theta / (1.0 + theta);
    let mut weight = 1.0;
    let sum = sum_series(
        |k| {
            if k > 0 {
                weight *= ratio;
            }
            if weight == 0.0 {
                return Ok(0.0);
            }
            let a = alpha * (k as f64 + 1.0);
            let kv = k_eval(a, theta, c, delta)?;
            let term = weight * a * scale * kv.value;
            let noise = (weight * a * scale).abs() * kv.noise;
            // a term lost in its own rounding floor carries no information
            Ok(if term.abs() <= noise { 0.0 } else { term })
        },
        SERIES_ABS_TOL,
        OUTER_MAX_TERMS,
    )?;
    Ok(MomentResult {
        value: sum.value / (1.0 - p),
        terms_used: sum.terms_used,
        converged: true,
        method: MomentMethod::Series,
    })
}

fn quadrature_spec() -> QuadratureSpec {
    QuadratureSpec {
        abs_tol: 1e-13,
        rel_tol: 1e-11,
        max_subdivisions: 2000,
    }
}

/// `E(X^n)` from the mixture series alone; `n = 0` is accepted and returns
/// the total mass.
pub fn elg_moment_series(params: ElgParams, n: u32) -> Result<MomentResult> {
    mixture_series(&params, n, params.theta())
}

/// `E(X^n)` by quadrature of `x^n f(x)`.
pub fn elg_moment_quadrature(params: ElgParams, n: u32) -> Result<MomentResult> {
    let nf = f64::from(n);
    let value = integrate_semi_infinite(
        |x| {
            let f = elg_pdf(params, x).unwrap_or(0.0);
            if f == 0.0 {
                0.0
            } else {
                (nf * x.ln() + f.ln()).exp()
            }
        },
        &quadrature_spec(),
    )?;
    Ok(MomentResult {
        value,
        terms_used: 0,
        converged: true,
        method: MomentMethod::Quadrature,
    })
}

/// `E(X^n)` for `n >= 1`: series where it converges, quadrature otherwise.
pub fn elg_moment(params: ElgParams, n: u32) -> Result<MomentResult> {
    if n == 0 {
        return Err(Error::domain("moment order must be at least 1"));
    }
    if series_applies(&params) {
        match elg_moment_series(params, n) {
            Ok(m) => return Ok(m),
            Err(Error::NonConvergence { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    elg_moment_quadrature(params, n)
}

fn check_mgf_arg(params: &ElgParams, t: f64) -> Result<()> {
    if !(t < params.theta()) || !t.is_finite() {
        return Err(Error::domain(format!(
            "MGF needs t < theta = {}, got {t}",
            params.theta()
        )));
    }
    Ok(())
}

pub fn elg_mgf_series(params: ElgParams, t: f64) -> Result<MomentResult> {
    check_mgf_arg(&params, t)?;
    mixture_series(&params, 0, params.theta() - t)
}

pub fn elg_mgf_quadrature(params: ElgParams, t: f64) -> Result<MomentResult> {
    check_mgf_arg(&params, t)?;
    let value = integrate_semi_infinite(
        |x| {
            let f = elg_pdf(params, x).unwrap_or(0.0);
            if f == 0.0 {
                0.0
            } else {
                (t * x + f.ln()).exp()
            }
        },
        &quadrature_spec(),
    )?;
    Ok(MomentResult {
        value,
        terms_used: 0,
        converged: true,
        method: MomentMethod::Quadrature,
    })
}

/// Moment generating function `E(e^{tX})` for `t < theta`.
pub fn elg_mgf(params: ElgParams, t: f64) -> Result<MomentResult> {
    check_mgf_arg(&params, t)?;
    if t == 0.0 {
        return Ok(MomentResult {
            value: 1.0,
            terms_used: 1,
            converged: true,
            method: MomentMethod::Series,
        });
    }
    if series_applies(&params) {
        match elg_mgf_series(params, t) {
            Ok(m) => return Ok(m),
            Err(Error::NonConvergence { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    elg_mgf_quadrature(params, t)
}

/// Mean, variance, skewness and kurtosis from the first four raw moments.
pub fn summary_stats(params: ElgParams) -> Result<SummaryStats> {
    let m: Vec<f64> = (1..=4)
        .map(|n| elg_moment(params, n).map(|r| r.value))
        .collect::<Result<_>>()?;
    let (m1, m2, m3, m4) = (m[0], m[1], m[2], m[3]);
    let variance = m2 - m1 * m1;
    if !(variance > 0.0) {
        return Err(Error::domain(format!("non-positive variance {variance}")));
    }
    let mu3 = m3 - 3.0 * m1 * m2 + 2.0 * m1.powi(3);
    let mu4 = m4 - 4.0 * m1 * m3 + 6.0 * m1 * m1 * m2 - 3.0 * m1.powi(4);
    Ok(SummaryStats {
        mean: m1,
        variance,
        skewness: mu3 / variance.powf(1.5),
        kurtosis: mu4 / (variance * variance),
    })
}
