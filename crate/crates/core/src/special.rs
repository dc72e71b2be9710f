//! Special functions and numerical primitives.
//!
//! The gamma-function family is delegated to `statrs`; the lower Lambert W
//! branch, the semi-infinite quadrature and the series accumulator are
//! implemented here because the rest of the crate depends on their exact
//! stopping behaviour.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::ops::Add;

use statrs::distribution::{ContinuousCDF, Normal};
use twofloat::TwoFloat;

use crate::error::{Error, Result};

/// `1/e` rounded to the nearest double.
const FRAC_1_E_HI: f64 = 0.367_879_441_171_442_33;
/// `1/e - FRAC_1_E_HI`.
const FRAC_1_E_LO: f64 = -1.242_875_367_278_836_3e-17;

/// Lower branch `W_{-1}` of the Lambert W function.
///
/// Accepts `z` in `[-1/e, 0)` and returns the solution `w <= -1` of
/// `w * exp(w) = z`. The branch point itself maps to exactly `-1`.
pub fn lambert_w_minus1(z: f64) -> Result<f64> {
    if !(-FRAC_1_E_HI..0.0).contains(&z) {
        return Err(Error::domain(format!(
            "lambert_w_minus1 requires z in [-1/e, 0), got {z}"
        )));
    }
    // distance from the branch point, carried with the low word of 1/e
    let dist = (z + FRAC_1_E_HI) + FRAC_1_E_LO;
    if dist <= 0.0 {
        return Ok(-1.0);
    }

    let mut w = if z < -0.25 {
        let p = -(2.0 * std::f64::consts::E * dist).sqrt();
        let series = -1.0
            + p * (1.0
                + p * (-1.0 / 3.0
                    + p * (11.0 / 72.0
                        + p * (-43.0 / 540.0 + p * (769.0 / 17280.0 + p * (-221.0 / 8505.0))))));
        // the branch-point expansion is already exact to rounding here
        if p.abs() < 1e-3 {
            return Ok(series.min(-1.0));
        }
        series
    } else {
        let l1 = (-z).ln();
        let l2 = (-l1).ln();
        l1 - l2
    };

    for _ in 0..64 {
        let ew = w.exp();
        let f = w * ew - z;
        let wp1 = w + 1.0;
        let denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1);
        let next = w - f / denom;
        if !next.is_finite() {
            break;
        }
        let done = (next - w).abs() <= 4.0 * f64::EPSILON * next.abs();
        w = next;
        if done {
            break;
        }
    }
    Ok(w.min(-1.0))
}

/// Natural log of the gamma function for `x > 0`.
pub fn log_gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::domain(format!("log_gamma requires x > 0, got {x}")));
    }
    Ok(statrs::function::gamma::ln_gamma(x))
}

/// Regularized lower incomplete gamma function `P(s, x)`.
pub fn regularized_gamma_lower(s: f64, x: f64) -> Result<f64> {
    check_incomplete_gamma_args(s, x)?;
    if x == 0.0 {
        return Ok(0.0);
    }
    if x.is_infinite() {
        return Ok(1.0);
    }
    Ok(statrs::function::gamma::gamma_lr(s, x).clamp(0.0, 1.0))
}

/// Regularized upper incomplete gamma function `Q(s, x) = 1 - P(s, x)`,
/// computed directly so small tail probabilities keep their precision.
pub fn regularized_gamma_upper(s: f64, x: f64) -> Result<f64> {
    check_incomplete_gamma_args(s, x)?;
    if x == 0.0 {
        return Ok(1.0);
    }
    if x.is_infinite() {
        return Ok(0.0);
    }
    Ok(statrs::function::gamma::gamma_ur(s, x).clamp(0.0, 1.0))
}

fn check_incomplete_gamma_args(s: f64, x: f64) -> Result<()> {
    if !(s > 0.0) || !s.is_finite() || !(x >= 0.0) {
        return Err(Error::domain(format!(
            "incomplete gamma requires s > 0 and x >= 0, got s={s}, x={x}"
        )));
    }
    Ok(())
}

/// Digamma function `psi(x)` for `x > 0`.
pub fn digamma(x: f64) -> f64 {
    statrs::function::gamma::digamma(x)
}

/// Upper-tail probability of a chi-square variable with `df` degrees of freedom.
pub fn chi_square_sf(x: f64, df: u32) -> Result<f64> {
    if df == 0 {
        return Err(Error::domain("chi-square needs df >= 1"));
    }
    regularized_gamma_upper(f64::from(df) / 2.0, x.max(0.0) / 2.0)
}

fn standard_normal() -> Normal {
    Normal::standard()
}

/// Standard normal cdf.
pub fn normal_cdf(x: f64) -> f64 {
    standard_normal().cdf(x)
}

/// Standard normal quantile for `u` in `(0, 1)`.
pub fn normal_quantile(u: f64) -> Result<f64> {
    if !(u > 0.0 && u < 1.0) {
        return Err(Error::domain(format!("normal quantile needs u in (0,1), got {u}")));
    }
    Ok(standard_normal().inverse_cdf(u))
}

/// Tolerances for [`integrate_semi_infinite`] and [`integrate_interval`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            abs_tol: 1e-10,
            rel_tol: 1e-10,
            max_subdivisions: 200,
        }
    }
}

impl QuadratureSpec {
    pub fn new(abs_tol: f64, rel_tol: f64, max_subdivisions: usize) -> Result<Self> {
        let spec = QuadratureSpec {
            abs_tol,
            rel_tol,
            max_subdivisions,
        };
        spec.validate()?;
        Ok(spec)
    }

    fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0) || !(self.rel_tol > 0.0) || self.max_subdivisions == 0 {
            return Err(Error::domain(format!("invalid quadrature spec {self:?}")));
        }
        Ok(())
    }
}

// Gauss-Kronrod 7/15 nodes and weights on [-1, 1].
const GK15_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const GK15_KRONROD: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const GK15_GAUSS: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

struct Segment {
    lo: f64,
    hi: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gk15<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64) -> Result<Segment> {
    let centre = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let fc = f(centre);
    let mut kronrod = GK15_KRONROD[7] * fc;
    let mut gauss = GK15_GAUSS[3] * fc;
    let mut finite = fc.is_finite();
    for j in 0..7 {
        let dx = half * GK15_NODES[j];
        let pair = f(centre - dx) + f(centre + dx);
        finite &= pair.is_finite();
        kronrod += GK15_KRONROD[j] * pair;
        if j % 2 == 1 {
            gauss += GK15_GAUSS[j / 2] * pair;
        }
    }
    if !finite {
        return Err(Error::domain(format!(
            "integrand is not finite on [{lo}, {hi}]"
        )));
    }
    Ok(Segment {
        lo,
        hi,
        value: kronrod * half,
        error: ((kronrod - gauss) * half).abs(),
    })
}

/// Globally adaptive Gauss-Kronrod quadrature of `f` over `[a, b]`.
pub fn integrate_interval<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, spec: &QuadratureSpec) -> Result<f64> {
    spec.validate()?;
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::domain("integrate_interval needs finite limits"));
    }
    if a == b {
        return Ok(0.0);
    }
    if a > b {
        return integrate_interval(f, b, a, spec).map(|v| -v);
    }

    let mut heap = BinaryHeap::new();
    let first = gk15(&f, a, b)?;
    let mut total = first.value;
    let mut total_err = first.error;
    heap.push(first);

    let mut subdivisions = 0;
    loop {
        if total_err <= spec.abs_tol.max(spec.rel_tol * total.abs()) {
            return Ok(total);
        }
        if subdivisions >= spec.max_subdivisions {
            return Err(Error::no_convergence(
                format!("adaptive quadrature (error estimate {total_err:.3e})"),
                subdivisions,
            ));
        }
        let worst = heap.pop().expect("heap holds at least one segment");
        let mid = 0.5 * (worst.lo + worst.hi);
        if mid <= worst.lo || mid >= worst.hi {
            // interval can no longer be split in floating point
            return Err(Error::no_convergence("adaptive quadrature (interval underflow)", subdivisions));
        }
        let left = gk15(&f, worst.lo, mid)?;
        let right = gk15(&f, mid, worst.hi)?;
        total += left.value + right.value - worst.value;
        total_err += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        subdivisions += 1;

        // refresh the running sums to keep cancellation drift out of the test
        if subdivisions % 32 == 0 {
            total = heap.iter().map(|s| s.value).sum();
            total_err = heap.iter().map(|s| s.error).sum();
        }
    }
}

/// Integral of `f` over `(0, inf)` via `x = t / (1 - t)` and adaptive
/// Gauss-Kronrod refinement on `(0, 1)`.
pub fn integrate_semi_infinite<F: Fn(f64) -> f64>(f: F, spec: &QuadratureSpec) -> Result<f64> {
    let mapped = |t: f64| {
        let s = 1.0 - t;
        let x = t / s;
        if x.is_infinite() {
            return 0.0;
        }
        let v = f(x);
        if v == 0.0 {
            0.0
        } else {
            v / (s * s)
        }
    };
    integrate_interval(mapped, 0.0, 1.0, spec)
}

/// Scalar types that [`sum_series`] can accumulate.
pub trait SeriesTerm: Copy + Add<Output = Self> {
    fn zero() -> Self;
    fn magnitude(self) -> f64;
}

impl SeriesTerm for f64 {
    fn zero() -> Self {
        0.0
    }
    fn magnitude(self) -> f64 {
        self.abs()
    }
}

impl SeriesTerm for TwoFloat {
    fn zero() -> Self {
        TwoFloat::from(0.0)
    }
    fn magnitude(self) -> f64 {
        self.hi().abs()
    }
}

/// Partial sum of a series together with the number of terms consumed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesSum<T> {
    pub value: T,
    pub terms_used: usize,
}

/// Sums `term(0) + term(1) + ...` until three consecutive terms fall below
/// `abs_tol` in magnitude.
pub fn sum_series<T, F>(mut term: F, abs_tol: f64, max_terms: usize) -> Result<SeriesSum<T>>
where
    T: SeriesTerm,
    F: FnMut(usize) -> Result<T>,
{
    if !(abs_tol > 0.0) {
        return Err(Error::domain("sum_series needs abs_tol > 0"));
    }
    let mut acc = T::zero();
    let mut small_run = 0;
    for k in 0..max_terms {
        let t = term(k)?;
        if !t.magnitude().is_finite() {
            return Err(Error::domain(format!("series term {k} is not finite")));
        }
        acc = acc + t;
        if t.magnitude() < abs_tol {
            small_run += 1;
            if small_run == 3 {
                return Ok(SeriesSum {
                    value: acc,
                    terms_used: k + 1,
                });
            }
        } else {
            small_run = 0;
        }
    }
    Err(Error::no_convergence("series summation", max_terms))
}

#[cfg(test)]
mod tests {
    use super::*;

    // independent oracle: bisection on w*exp(w) = z over the lower branch
    fn w_minus1_bisect(z: f64) -> f64 {
        let (mut lo, mut hi) = (-800.0_f64, -1.0_f64);
        // w*exp(w) increases from 0- to -1/e as w goes from -inf to -1
        for _ in 0..400 {
            let mid = 0.5 * (lo + hi);
            if mid * mid.exp() > z {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn lambert_branch_point_and_exact_values() {
        let w = lambert_w_minus1(-1.0 / std::f64::consts::E).unwrap();
        assert!((w + 1.0).abs() <= 1e-8);
        let z = -2.0 * (-2.0_f64).exp();
        assert!((lambert_w_minus1(z).unwrap() + 2.0).abs() < 1e-13);
        let w = lambert_w_minus1(-0.1).unwrap();
        assert!((w - w_minus1_bisect(-0.1)).abs() < 1e-12);
        assert!((w + 3.577_152_063_957_297).abs() < 1e-9);
    }

    #[test]
    fn lambert_rejects_out_of_domain() {
        assert!(lambert_w_minus1(-0.5).is_err());
        assert!(lambert_w_minus1(0.0).is_err());
        assert!(lambert_w_minus1(0.1).is_err());
        assert!(lambert_w_minus1(f64::NAN).is_err());
    }

    #[test]
    fn lambert_matches_bisection_across_range() {
        for &z in &[-0.3678, -0.36, -0.3, -0.25, -0.2, -1e-2, -1e-5, -1e-50, -1e-300] {
            let w = lambert_w_minus1(z).unwrap();
            let oracle = w_minus1_bisect(z);
            assert!((w - oracle).abs() <= 1e-11 * oracle.abs(), "z={z}: {w} vs {oracle}");
        }
    }

    #[test]
    fn lambert_monotone_decreasing() {
        let lo = -FRAC_1_E_HI;
        let mut prev = f64::INFINITY;
        for i in 1..1000 {
            let z = lo + (0.0 - lo) * f64::from(i) / 1000.0;
            let w = lambert_w_minus1(z).unwrap();
            assert!(w < prev, "not decreasing at z={z}");
            prev = w;
        }
    }

    #[test]
    fn log_gamma_values() {
        assert!(log_gamma(1.0).unwrap().abs() < 1e-15);
        let l5 = log_gamma(5.0).unwrap();
        assert!((l5 - 24f64.ln()).abs() <= 1e-12 * 24f64.ln());
        let lh = log_gamma(0.5).unwrap();
        let expected = std::f64::consts::PI.sqrt().ln();
        assert!((lh - expected).abs() <= 1e-12 * expected);
        assert!((lh - 0.572_364_9).abs() < 1e-7);
        // ln(99!) from the product
        let ln_fact: f64 = (1..100).map(|k| f64::from(k).ln()).sum();
        assert!((log_gamma(100.0).unwrap() - ln_fact).abs() <= 1e-12 * ln_fact);
        assert!(log_gamma(0.0).is_err());
        assert!(log_gamma(-1.5).is_err());
    }

    #[test]
    fn incomplete_gamma_values() {
        let v = regularized_gamma_lower(1.0, 1.0).unwrap();
        assert!((v - (1.0 - (-1.0f64).exp())).abs() < 1e-12);
        assert_eq!(regularized_gamma_lower(2.0, 0.0).unwrap(), 0.0);
        // chi-square(1) tail at the reported LR statistic
        let pv = 1.0 - regularized_gamma_lower(0.5, 7.5667 / 2.0).unwrap();
        assert!((pv - 0.0059).abs() < 5e-5);
        assert!(regularized_gamma_lower(0.0, 1.0).is_err());
        assert!(regularized_gamma_lower(1.0, -1.0).is_err());
    }

    #[test]
    fn incomplete_gamma_monotone_and_bounded() {
        for &s in &[0.5, 1.0, 1.5, 2.0, 5.0] {
            let mut prev = 0.0;
            for i in 0..=400 {
                let x = f64::from(i) * 0.05;
                let v = regularized_gamma_lower(s, x).unwrap();
                assert!((0.0..=1.0).contains(&v));
                assert!(v >= prev - 1e-15, "s={s} x={x}");
                prev = v;
            }
        }
    }

    #[test]
    fn chi_square_one_df_matches_normal_identity() {
        for &w in &[0.01, 0.5, 1.0, 3.84, 7.5667, 12.0, 25.0] {
            let via_gamma = chi_square_sf(w, 1).unwrap();
            let via_normal = 2.0 * (1.0 - normal_cdf(f64::sqrt(w)));
            assert!((via_gamma - via_normal).abs() < 1e-8, "w={w}");
        }
    }

    #[test]
    fn normal_quantile_constant() {
        let z = normal_quantile(0.975).unwrap();
        assert!((z - 1.959_964).abs() < 1e-6);
        assert!((z - 1.959_963_984_540_054).abs() < 1e-9);
        // erf identity: Phi(z) = (1 + erf(z / sqrt 2)) / 2
        let phi = 0.5 * (1.0 + statrs::function::erf::erf(z / std::f64::consts::SQRT_2));
        assert!((phi - 0.975).abs() < 1e-9);
    }

    #[test]
    fn quadrature_basic_integrals() {
        let spec = QuadratureSpec::default();
        let one = integrate_semi_infinite(|x| (-x).exp(), &spec).unwrap();
        assert!((one - 1.0).abs() < 1e-10);
        let one = integrate_semi_infinite(|x| x * (-x).exp(), &spec).unwrap();
        assert!((one - 1.0).abs() < 1e-10);
        // integrable singularity at the origin: Gamma(1/2)
        let sqrt_pi = integrate_semi_infinite(|x| (-x).exp() / x.sqrt(), &spec).unwrap();
        assert!((sqrt_pi - std::f64::consts::PI.sqrt()).abs() < 1e-8);
        let third = integrate_interval(|x| x * x, 0.0, 1.0, &spec).unwrap();
        assert!((third - 1.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn quadrature_reports_non_convergence() {
        let spec = QuadratureSpec::new(1e-14, 1e-14, 2).unwrap();
        let res = integrate_semi_infinite(|x| (-x).exp() / x.sqrt(), &spec);
        assert!(matches!(res, Err(Error::NonConvergence { .. })));
        assert!(QuadratureSpec::new(0.0, 1e-10, 10).is_err());
        assert!(QuadratureSpec::new(1e-10, 1e-10, 0).is_err());
    }

    #[test]
    fn series_examples() {
        let s = sum_series(|k| Ok(0.5f64.powi(k as i32)), 1e-12, 1000).unwrap();
        assert!((s.value - 2.0).abs() < 1e-11);
        let mut fact = 1.0;
        let s = sum_series(
            |k| {
                if k > 0 {
                    fact *= k as f64;
                }
                Ok(if k % 2 == 0 { 1.0 } else { -1.0 } / fact)
            },
            1e-15,
            100,
        )
        .unwrap();
        assert!((s.value - (-1.0f64).exp()).abs() < 1e-14);
        let s = sum_series(|_| Ok(1.0f64), 1e-12, 1000);
        assert!(matches!(s, Err(Error::NonConvergence { .. })));
    }

    #[test]
    fn series_needs_three_small_terms() {
        // a single zero term in the middle must not stop the sum
        let terms = [1.0, 0.0, 1.0, 0.0, 0.0, 0.0];
        let s = sum_series(|k| Ok(terms.get(k).copied().unwrap_or(0.0)), 1e-12, 10).unwrap();
        assert_eq!(s.value, 2.0);
        assert_eq!(s.terms_used, 6);
    }
}
