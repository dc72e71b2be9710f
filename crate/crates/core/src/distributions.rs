//! Parameter types, densities, quantiles and sampling for the ELG law and
//! the comparator models (Lindley, Lindley-geometric, Gamma, Weibull).
//!
//! With `G` the Lindley cdf with rate `theta`, the ELG cdf is
//!
//! ```text
//! F(x) = G(x)^alpha / (1 - p + p G(x)^alpha)
//! ```
//!
//! which reduces to the Lindley-geometric law at `alpha = 1` and to Lindley
//! at `alpha = 1, p = 0`. Densities are evaluated in log space so that the
//! likelihood code and the public pdf share one expression.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::{lambert_w_minus1, log_gamma};

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} must be a positive finite number, got {v}")))
    }
}

fn check_p(p: f64) -> Result<()> {
    if p < 1.0 && p.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("p must be finite and < 1, got {p}")))
    }
}

fn check_x_positive(x: f64) -> Result<()> {
    if x > 0.0 && !x.is_nan() {
        Ok(())
    } else {
        Err(Error::domain(format!("density needs x > 0, got {x}")))
    }
}

fn check_x_nonnegative(x: f64) -> Result<()> {
    if x >= 0.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("x must be >= 0, got {x}")))
    }
}

/// ELG parameters `(alpha, theta, p)`: `alpha > 0`, `theta > 0`, `p < 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ElgParamsRaw")]
pub struct ElgParams {
    alpha: f64,
    theta: f64,
    p: f64,
}

#[derive(Deserialize)]
struct ElgParamsRaw {
    alpha: f64,
    theta: f64,
    p: f64,
}

impl TryFrom<ElgParamsRaw> for ElgParams {
    type Error = Error;
    fn try_from(raw: ElgParamsRaw) -> Result<Self> {
        ElgParams::new(raw.alpha, raw.theta, raw.p)
    }
}

impl ElgParams {
    pub fn new(alpha: f64, theta: f64, p: f64) -> Result<Self> {
        check_positive("alpha", alpha)?;
        check_positive("theta", theta)?;
        check_p(p)?;
        Ok(ElgParams { alpha, theta, p })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// True when `p` lies in the geometric-compounding range `(0, 1)`.
    pub fn is_compounding(&self) -> bool {
        self.p > 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LindleyParams {
    theta: f64,
}

impl LindleyParams {
    pub fn new(theta: f64) -> Result<Self> {
        check_positive("theta", theta)?;
        Ok(LindleyParams { theta })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }
}

/// Lindley-geometric parameters; `p` may be any value below one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LgParams {
    theta: f64,
    p: f64,
}

impl LgParams {
    pub fn new(theta: f64, p: f64) -> Result<Self> {
        check_positive("theta", theta)?;
        check_p(p)?;
        Ok(LgParams { theta, p })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// The same law viewed as an ELG member with `alpha = 1`.
    pub fn as_elg(&self) -> ElgParams {
        ElgParams {
            alpha: 1.0,
            theta: self.theta,
            p: self.p,
        }
    }
}

/// Gamma with density `rate^shape x^(shape-1) e^(-rate x) / Gamma(shape)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaParams {
    shape: f64,
    rate: f64,
}

impl GammaParams {
    pub fn new(shape: f64, rate: f64) -> Result<Self> {
        check_positive("shape", shape)?;
        check_positive("rate", rate)?;
        Ok(GammaParams { shape, rate })
    }

    pub fn shape(&self) -> f64 {
        self.shape
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }
}

/// Weibull with cdf `1 - exp(-(x/scale)^shape)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeibullParams {
    shape: f64,
    scale: f64,
}

impl WeibullParams {
    pub fn new(shape: f64, scale: f64) -> Result<Self> {
        check_positive("shape", shape)?;
        check_positive("scale", scale)?;
        Ok(WeibullParams { shape, scale })
    }

    pub fn shape(&self) -> f64 {
        self.shape
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }
}

/// Seed for [`SplitMix64`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Seed(pub u64);

/// SplitMix64 generator.
///
/// State update `s += 0x9E3779B97F4A7C15`; output mixes `s` with
/// `z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9`,
/// `z = (z ^ (z >> 27)) * 0x94D049BB133111EB`, `z ^ (z >> 31)`.
/// Uniforms on `(0, 1)` take the top 53 bits: `((z >> 11) + 0.5) / 2^53`.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: Seed) -> Self {
        SplitMix64 { state: seed.0 }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform draw strictly inside `(0, 1)`.
    pub fn next_open01(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }
}

/// Lindley quantities at one point, computed to keep precision in both tails.
#[derive(Debug, Clone, Copy)]
pub(crate) struct LindleyPoint {
    /// `G(x)`, the Lindley cdf.
    pub g: f64,
    /// `ln G(x)`.
    pub ln_g: f64,
    /// `ln(1 - G(x))`.
    pub ln_s: f64,
}

impl LindleyPoint {
    pub fn new(theta: f64, x: f64) -> Self {
        let tx = theta * x;
        let ln_s = (tx / (theta + 1.0)).ln_1p() - tx;
        let s = ln_s.exp();
        let g = if s > 0.5 {
            -(-tx).exp_m1() - tx * (-tx).exp() / (theta + 1.0)
        } else {
            1.0 - s
        };
        let ln_g = if s < 0.5 { (-s).ln_1p() } else { g.ln() };
        LindleyPoint { g, ln_g, ln_s }
    }
}

/// ELG quantities at one point shared by the cdf, pdf, hazard and likelihood.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ElgPoint {
    pub lindley: LindleyPoint,
    /// `G^alpha`.
    pub t: f64,
    /// `ln(1 - G^alpha)`.
    pub ln_one_minus_t: f64,
    /// `1 - p + p G^alpha`.
    pub d: f64,
}

impl ElgPoint {
    pub fn new(params: &ElgParams, x: f64) -> Self {
        let lindley = LindleyPoint::new(params.theta, x);
        let a_ln_g = params.alpha * lindley.ln_g;
        let t = a_ln_g.exp();
        let s = lindley.ln_s.exp();
        let ln_one_minus_t = if s < 1e-8 {
            // 1 - (1 - s)^alpha = alpha s (1 - (alpha - 1) s / 2 + ...)
            params.alpha.ln() + lindley.ln_s + (-(params.alpha - 1.0) * s / 2.0).ln_1p()
        } else {
            (-a_ln_g.exp_m1()).ln()
        };
        let d = (1.0 - params.p) + params.p * t;
        ElgPoint {
            lindley,
            t,
            ln_one_minus_t,
            d,
        }
    }
}

/// Lindley cdf `1 - (theta + 1 + theta x)/(theta + 1) e^(-theta x)`.
pub fn lindley_cdf(params: LindleyParams, x: f64) -> Result<f64> {
    check_x_nonnegative(x)?;
    if x == 0.0 {
        return Ok(0.0);
    }
    Ok(LindleyPoint::new(params.theta, x).g)
}

pub fn lindley_pdf(params: LindleyParams, x: f64) -> Result<f64> {
    check_x_positive(x)?;
    let t = params.theta;
    Ok(t * t / (t + 1.0) * (1.0 + x) * (-t * x).exp())
}

/// Lindley quantile through the lower Lambert branch.
pub fn lindley_quantile(params: LindleyParams, u: f64) -> Result<f64> {
    if !(u > 0.0 && u < 1.0) {
        return Err(Error::domain(format!("quantile needs u in (0,1), got {u}")));
    }
    lindley_quantile_from_tail(params.theta, 1.0 - u)
}

/// Lindley quantile at cdf level `1 - tail`, with `tail` passed directly.
fn lindley_quantile_from_tail(theta: f64, tail: f64) -> Result<f64> {
    let tp1 = theta + 1.0;
    let arg = -tp1 * (-tp1).exp() * tail;
    let arg = arg.clamp(-std::f64::consts::E.recip() + 1e-15, -1e-300);
    let w = lambert_w_minus1(arg)?;
    // x = -1 - 1/theta - w/theta, arranged to limit cancellation near x = 0
    Ok((-(tp1 + w) / theta).max(0.0))
}

/// ELG cdf.
pub fn elg_cdf(params: ElgParams, x: f64) -> Result<f64> {
    check_x_nonnegative(x)?;
    if x == 0.0 {
        return Ok(0.0);
    }
    if x.is_infinite() {
        return Ok(1.0);
    }
    let pt = ElgPoint::new(&params, x);
    Ok((pt.t / pt.d).clamp(0.0, 1.0))
}

/// ELG survival `1 - F(x) = (1 - p)(1 - G^alpha) / (1 - p + p G^alpha)`.
pub fn elg_survival(params: ElgParams, x: f64) -> Result<f64> {
    check_x_nonnegative(x)?;
    if x == 0.0 {
        return Ok(1.0);
    }
    if x.is_infinite() {
        return Ok(0.0);
    }
    let pt = ElgPoint::new(&params, x);
    Ok(((1.0 - params.p) * pt.ln_one_minus_t.exp() / pt.d).clamp(0.0, 1.0))
}

/// Log density at a validated point; shared with the likelihood.
pub(crate) fn elg_log_pdf_at(params: &ElgParams, x: f64, pt: &ElgPoint) -> f64 {
    let (a, t, p) = (params.alpha, params.theta, params.p);
    a.ln() + 2.0 * t.ln() + (-p).ln_1p() + x.ln_1p() - t * x + (a - 1.0) * pt.lindley.ln_g
        - (t + 1.0).ln()
        - 2.0 * pt.d.ln()
}

/// Log of the ELG density.
pub fn elg_log_pdf(params: ElgParams, x: f64) -> Result<f64> {
    check_x_positive(x)?;
    if x.is_infinite() {
        return Ok(f64::NEG_INFINITY);
    }
    let pt = ElgPoint::new(&params, x);
    Ok(elg_log_pdf_at(&params, x, &pt))
}

/// ELG density. For `alpha < 1` the density diverges at the origin; values
/// that overflow saturate at `f64::MAX`.
pub fn elg_pdf(params: ElgParams, x: f64) -> Result<f64> {
    let v = elg_log_pdf(params, x)?.exp();
    Ok(if v.is_infinite() { f64::MAX } else { v })
}

/// ELG hazard rate `f(x) / S(x)`, evaluated from its closed form.
pub fn elg_hazard(params: ElgParams, x: f64) -> Result<f64> {
    check_x_positive(x)?;
    let (a, t) = (params.alpha, params.theta);
    let pt = ElgPoint::new(&params, x);
    let ln_h = a.ln() + 2.0 * t.ln() + x.ln_1p() - t * x + (a - 1.0) * pt.lindley.ln_g
        - (t + 1.0).ln()
        - pt.ln_one_minus_t
        - pt.d.ln();
    let h = ln_h.exp();
    Ok(if h.is_infinite() { f64::MAX } else { h })
}

/// ELG quantile: the Lindley quantile evaluated at
/// `v = ((u - u p) / (1 - u p))^(1/alpha)`.
pub fn elg_quantile(params: ElgParams, u: f64) -> Result<f64> {
    if !(u > 0.0 && u < 1.0) {
        return Err(Error::domain(format!("quantile needs u in (0,1), got {u}")));
    }
    let ln_v = (u.ln() + (-params.p).ln_1p() - (-u * params.p).ln_1p()) / params.alpha;
    let tail = -ln_v.exp_m1();
    lindley_quantile_from_tail(params.theta, tail)
}

/// `n` inverse-transform draws from the ELG law driven by [`SplitMix64`].
pub fn elg_sample(params: ElgParams, n: usize, seed: Seed) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::domain("sample size must be at least 1"));
    }
    let mut rng = SplitMix64::new(seed);
    (0..n).map(|_| elg_quantile(params, rng.next_open01())).collect()
}

/// Exact draws of the maximum of `block` iid ELG variables, one per replicate,
/// using `max ~ F^{-1}(U^{1/block})`.
pub fn elg_sample_block_maxima(params: ElgParams, block: usize, replicates: usize, seed: Seed) -> Result<Vec<f64>> {
    if block == 0 || replicates == 0 {
        return Err(Error::domain("block size and replicate count must be positive"));
    }
    let mut rng = SplitMix64::new(seed);
    let inv = 1.0 / block as f64;
    (0..replicates)
        .map(|_| {
            let u = (rng.next_open01().ln() * inv).exp();
            elg_quantile(params, u.min(1.0 - f64::EPSILON / 2.0))
        })
        .collect()
}

/// Exact draws of the minimum of `block` iid ELG variables, using
/// `min ~ F^{-1}(1 - (1 - U)^{1/block})`.
pub fn elg_sample_block_minima(params: ElgParams, block: usize, replicates: usize, seed: Seed) -> Result<Vec<f64>> {
    if block == 0 || replicates == 0 {
        return Err(Error::domain("block size and replicate count must be positive"));
    }
    let mut rng = SplitMix64::new(seed);
    let inv = 1.0 / block as f64;
    (0..replicates)
        .map(|_| {
            let u = -((-rng.next_open01()).ln_1p() * inv).exp_m1();
            elg_quantile(params, u.max(f64::MIN_POSITIVE))
        })
        .collect()
}

/// Lindley-geometric density, written out directly:
/// `theta^2/(theta+1) (1-p)(1+x) e^(-theta x) [1 - p (theta+1+theta x)/(theta+1) e^(-theta x)]^(-2)`.
pub fn lg_pdf(params: LgParams, x: f64) -> Result<f64> {
    check_x_positive(x)?;
    let (t, p) = (params.theta, params.p);
    let e = (-t * x).exp();
    let bracket = 1.0 - p * (t + 1.0 + t * x) / (t + 1.0) * e;
    Ok(t * t / (t + 1.0) * (1.0 - p) * (1.0 + x) * e / (bracket * bracket))
}

pub fn gamma_log_pdf(params: GammaParams, x: f64) -> Result<f64> {
    check_x_positive(x)?;
    let (k, r) = (params.shape, params.rate);
    Ok(k * r.ln() + (k - 1.0) * x.ln() - r * x - log_gamma(k)?)
}

pub fn gamma_pdf(params: GammaParams, x: f64) -> Result<f64> {
    gamma_log_pdf(params, x).map(f64::exp)
}

pub fn weibull_log_pdf(params: WeibullParams, x: f64) -> Result<f64> {
    check_x_positive(x)?;
    let (k, l) = (params.shape, params.scale);
    let z = x / l;
    Ok(k.ln() - l.ln() + (k - 1.0) * z.ln() - z.powf(k))
}

pub fn weibull_pdf(params: WeibullParams, x: f64) -> Result<f64> {
    weibull_log_pdf(params, x).map(f64::exp)
}

/// Norming constants `(a_n, b_n) = (theta, F^{-1}(1 - 1/n))` for which
/// `a_n (M_n - b_n)` has the Gumbel limit `exp(-e^{-x})` when `M_n` is the
/// largest of `n` draws.
pub fn norming_constants(params: ElgParams, n: usize) -> Result<(f64, f64)> {
    if n < 2 {
        return Err(Error::domain(format!("norming constants need n >= 2, got {n}")));
    }
    let b_n = elg_quantile(params, 1.0 - 1.0 / n as f64)?;
    Ok((params.theta, b_n))
}
