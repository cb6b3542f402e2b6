//! Transverse reduction of Riesz operators on flat codimension-`m` factors.
//!
//! Integrating the transverse momentum out of `(lambda + |q|^2)^{-s}` over
//! `R^m` leaves the multiplier `C_{m,s} lambda^{m/2 - s}` with
//! `C_{m,s} = (4 pi)^{-m/2} Gamma(s - m/2) / Gamma(s)`. This module evaluates
//! that constant in closed form and by two independent quadratures
//! (radial momentum integral and Schwinger proper-time integral), together
//! with the mollified restriction and the two-step `1 + 3` reduction chain.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_positive, Error, Result};
use crate::quad::{self, QuadOptions};
use crate::specfun::gamma;

const RADIAL_TOL: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReductionParams {
    /// Transverse dimension.
    pub m: u32,
    /// Riesz exponent.
    pub s: f64,
    /// Spectral value of the brane operator.
    pub lambda: f64,
    /// Ambient normalization.
    pub kappa: f64,
    /// Brane normalization, `kappa * C_{m,s}`.
    pub g: f64,
}

impl ReductionParams {
    pub fn new(m: u32, s: f64, lambda: f64, kappa: f64) -> Result<Self> {
        ensure_positive("lambda", lambda)?;
        ensure_positive("kappa", kappa)?;
        let c = reduction_constant(m, s)?;
        Ok(Self { m, s, lambda, kappa, g: kappa * c })
    }

    /// The codimension-three mediator at `s = 5/2`, where `g = kappa / (6 pi^2)`.
    pub fn codimension_three(lambda: f64, kappa: f64) -> Result<Self> {
        Self::new(3, 2.5, lambda, kappa)
    }

    pub fn reduced_multiplier(&self) -> f64 {
        self.g * self.lambda.powf(self.m as f64 / 2.0 - self.s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum MollifierShape {
    /// `|eta_hat(k)|^2 = exp(-|k|^2)`.
    Gaussian,
    /// Normalized indicator of the unit ball (compact support); `m` in `{1, 3}`.
    Ball,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MollifierSpec {
    pub shape: MollifierShape,
    /// Smearing width; zero means no smearing.
    pub width: f64,
}

impl MollifierSpec {
    pub fn gaussian(width: f64) -> Self {
        Self { shape: MollifierShape::Gaussian, width }
    }

    pub fn ball(width: f64) -> Self {
        Self { shape: MollifierShape::Ball, width }
    }

    /// `|eta_hat(width * q)|^2` for the transverse dimension `m`.
    pub fn profile_sq(&self, m: u32, q: f64) -> Result<f64> {
        let y = self.width * q;
        match self.shape {
            MollifierShape::Gaussian => Ok((-y * y).exp()),
            MollifierShape::Ball => ball_transform(m, y).map(|v| v * v),
        }
    }
}

/// Fourier transform of the unit-mass ball indicator, normalized to 1 at 0.
fn ball_transform(m: u32, y: f64) -> Result<f64> {
    let y2 = y * y;
    match m {
        1 if y < 1e-3 => Ok(1.0 - y2 / 6.0 + y2 * y2 / 120.0),
        1 => Ok(y.sin() / y),
        3 if y < 1e-2 => Ok(1.0 - y2 / 10.0 + y2 * y2 / 280.0),
        3 => Ok(3.0 * (y.sin() - y * y.cos()) / (y2 * y)),
        _ => Err(Error::Unsupported(format!(
            "ball mollifier is implemented for m in {{1, 3}}, got m = {m}"
        ))),
    }
}

fn check_convergent(m: u32, s: f64) -> Result<()> {
    if m == 0 {
        return Err(Error::InvalidParameter("transverse dimension m must be positive".into()));
    }
    let half_m = m as f64 / 2.0;
    if !(s > half_m) || !s.is_finite() {
        return Err(Error::Divergent { s, half_m });
    }
    Ok(())
}

/// `C_{m,s} = (4 pi)^{-m/2} Gamma(s - m/2) / Gamma(s)`.
pub fn reduction_constant(m: u32, s: f64) -> Result<f64> {
    check_convergent(m, s)?;
    let half_m = m as f64 / 2.0;
    Ok((4.0 * PI).powf(-half_m) * gamma(s - half_m)? / gamma(s)?)
}

/// The exponent `1 + m/2` at which the reduced multiplier is `lambda^{-1}`.
pub fn critical_exponent(m: u32) -> f64 {
    1.0 + m as f64 / 2.0
}

/// `S_{m-1} / (2 pi)^m`, the angular factor of a radial integral over `R^m`.
fn radial_measure(m: u32) -> Result<f64> {
    let half_m = m as f64 / 2.0;
    Ok(2.0 * PI.powf(half_m) / gamma(half_m)? / (2.0 * PI).powi(m as i32))
}

/// `int d^m q / (2 pi)^m w(|q|) (lambda + q^2)^{-s}` for a weight that is
/// bounded and has a limit at infinity.
///
/// The head `[0, sqrt(lambda)]` is integrated directly; the tail is mapped to
/// `(0, 1]` by `q = sqrt(lambda) / v`, where the integrand carries the exact
/// power `v^{2s - m - 1}`, which is removed analytically.
fn weighted_momentum<W>(m: u32, s: f64, lambda: f64, w: W) -> Result<f64>
where
    W: Fn(f64) -> f64,
{
    check_convergent(m, s)?;
    ensure_positive("lambda", lambda)?;
    let opts = QuadOptions::rel(RADIAL_TOL);
    let root = lambda.sqrt();
    let mm1 = m as i32 - 1;
    let head = quad::integrate(|q| q.powi(mm1) * (lambda + q * q).powf(-s) * w(q), 0.0, root, &opts)?;
    let p = 2.0 * s - m as f64 - 1.0;
    let scale = lambda.powf(m as f64 / 2.0);
    let tail = quad::integrate_power_weighted(
        p,
        |v| scale * (lambda + lambda * v * v).powf(-s) * w(root / v),
        1.0,
        &opts,
    )?;
    Ok(radial_measure(m)? * (head.value + tail.value))
}

/// Numerical `int d^m q / (2 pi)^m (lambda + |q|^2)^{-s}`.
pub fn momentum_integral(m: u32, s: f64, lambda: f64) -> Result<f64> {
    weighted_momentum(m, s, lambda, |_| 1.0)
}

/// Numerical proper-time form
/// `(4 pi)^{-m/2} Gamma(s)^{-1} int_0^inf t^{s - 1 - m/2} e^{-t lambda} dt`.
pub fn schwinger_integral(m: u32, s: f64, lambda: f64) -> Result<f64> {
    check_convergent(m, s)?;
    ensure_positive("lambda", lambda)?;
    let half_m = m as f64 / 2.0;
    let p = s - 1.0 - half_m;
    let opts = QuadOptions::rel(RADIAL_TOL);
    // split at t = 1/lambda; the power singularity at 0 is removed exactly
    let t1 = 1.0 / lambda;
    let head = quad::integrate_power_weighted(p, |t| (-t * lambda).exp(), t1, &opts)?;
    // beyond lambda t = 60 + 4 max(p, 0) the remaining mass is below 1e-20 of the total
    let t_max = (60.0 + 4.0 * p.max(0.0)) / lambda;
    let pts = quad::geometric_points(t1, t_max, 2.0);
    let body = quad::integrate_points(|t| t.powf(p) * (-t * lambda).exp(), &pts, &opts)?;
    Ok((4.0 * PI).powf(-half_m) / gamma(s)? * (head.value + body.value))
}

/// `int d^m q / (2 pi)^m |eta_hat(eps q)|^2 (lambda + |q|^2)^{-s}`.
pub fn mollified_reduction(m: u32, s: f64, lambda: f64, mollifier: &MollifierSpec) -> Result<f64> {
    let eps = mollifier.width;
    if !(eps >= 0.0) || !eps.is_finite() {
        return Err(Error::InvalidParameter(format!("mollifier width must be >= 0, got {eps}")));
    }
    if eps == 0.0 {
        return momentum_integral(m, s, lambda);
    }
    match mollifier.shape {
        MollifierShape::Gaussian => weighted_momentum(m, s, lambda, |q| (-(eps * q).powi(2)).exp()),
        MollifierShape::Ball => ball_momentum(m, s, lambda, eps),
    }
}

/// Ball profile: oscillatory, so integrate over half-periods up to a cutoff
/// `Q` beyond which `|eta_hat|^2 <= K / (eps q)^{2d}` bounds the neglected tail
/// below `1e-14` of the unsmeared value.
fn ball_momentum(m: u32, s: f64, lambda: f64, eps: f64) -> Result<f64> {
    check_convergent(m, s)?;
    ensure_positive("lambda", lambda)?;
    let (k, d) = match m {
        1 => (1.0, 1.0),
        3 => (36.0, 2.0),
        _ => {
            return Err(Error::Unsupported(format!(
                "ball mollifier is implemented for m in {{1, 3}}, got m = {m}"
            )))
        }
    };
    let expo = 2.0 * s + 2.0 * d - m as f64;
    let target = 1e-14 * reduction_constant(m, s)? * lambda.powf(m as f64 / 2.0 - s);
    let q_cut = (k / (eps.powf(2.0 * d) * expo * target / radial_measure(m)?))
        .powf(1.0 / expo)
        .max(10.0 * lambda.sqrt())
        .max(10.0 / eps);
    let half_period = PI / eps;
    let mut pts = vec![0.0];
    let mut x = half_period;
    while x < q_cut {
        pts.push(x);
        x += half_period;
    }
    pts.push(q_cut);
    let opts = QuadOptions { abs_tol: 1e-3 * target, rel_tol: RADIAL_TOL, max_intervals: 200_000 };
    let mm1 = m as i32 - 1;
    let r = quad::try_integrate_points(
        |q| {
            let w = ball_transform(m, eps * q)?;
            Ok(q.powi(mm1) * (lambda + q * q).powf(-s) * w * w)
        },
        &pts,
        &opts,
    )?;
    Ok(radial_measure(m)? * r.value)
}

/// Mollified values at a sequence of widths, their errors against the
/// unsmeared integral, and the polynomial-in-`eps^2` extrapolation to zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestrictionLimit {
    pub m: u32,
    pub s: f64,
    pub lambda: f64,
    pub shape: MollifierShape,
    pub widths: Vec<f64>,
    pub values: Vec<f64>,
    pub exact: f64,
    /// `exact - value` per width.
    pub errors: Vec<f64>,
    /// `errors[i] / errors[i + 1]`.
    pub error_ratios: Vec<f64>,
    pub extrapolated: f64,
}

pub fn restriction_limit(
    m: u32,
    s: f64,
    lambda: f64,
    shape: MollifierShape,
    widths: &[f64],
) -> Result<RestrictionLimit> {
    if widths.len() < 2 {
        return Err(Error::InvalidParameter("extrapolation needs at least two widths".into()));
    }
    let exact = momentum_integral(m, s, lambda)?;
    let values = widths
        .iter()
        .map(|&w| mollified_reduction(m, s, lambda, &MollifierSpec { shape, width: w }))
        .collect::<Result<Vec<_>>>()?;
    let errors: Vec<f64> = values.iter().map(|v| exact - v).collect();
    let error_ratios = errors.windows(2).map(|e| e[0] / e[1]).collect();
    let h: Vec<f64> = widths.iter().map(|w| w * w).collect();
    let extrapolated = neville_at_zero(&h, &values);
    Ok(RestrictionLimit {
        m,
        s,
        lambda,
        shape,
        widths: widths.to_vec(),
        values,
        exact,
        errors,
        error_ratios,
        extrapolated,
    })
}

/// Value at `h = 0` of the interpolating polynomial through `(h_i, y_i)`.
fn neville_at_zero(h: &[f64], y: &[f64]) -> f64 {
    let mut p = y.to_vec();
    let n = p.len();
    for k in 1..n {
        for i in 0..n - k {
            p[i] = (h[i + k] * p[i] - h[i] * p[i + 1]) / (h[i + k] - h[i]);
        }
    }
    p[0]
}

/// Constants of the two-step reduction `R^4 = R^1 x R^3` at `s = 3`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReductionChain {
    pub lambda: f64,
    /// `C_{1,3} = 3/16`.
    pub p_constant: f64,
    /// `C_{3,5/2} = 1/(6 pi^2)`.
    pub q_constant: f64,
    /// `p_constant * q_constant`.
    pub combined: f64,
    /// `C_{4,3}` from the single four-dimensional formula.
    pub combined_direct: f64,
    /// Nested quadrature of `int d^3q dp / (2 pi)^4 (lambda + q^2 + p^2)^{-3}`;
    /// equals `combined / lambda`.
    pub nested: f64,
}

pub fn two_step_chain(lambda: f64) -> Result<ReductionChain> {
    ensure_positive("lambda", lambda)?;
    let p_constant = reduction_constant(1, 3.0)?;
    let q_constant = reduction_constant(3, 2.5)?;
    let combined_direct = reduction_constant(4, 3.0)?;
    let nested = nested_four_dimensional(lambda)?;
    Ok(ReductionChain {
        lambda,
        p_constant,
        q_constant,
        combined: p_constant * q_constant,
        combined_direct,
        nested,
    })
}

/// Outer radial `q` integral over an inner numerical `p` integral.
fn nested_four_dimensional(lambda: f64) -> Result<f64> {
    let inner = |q: f64| momentum_integral(1, 3.0, lambda + q * q);
    let root = lambda.sqrt();
    let opts = QuadOptions::rel(1e-12);
    let head = quad::try_integrate_points(|q| Ok(q * q * inner(q)?), &[0.0, root], &opts)?;
    // q = root / v: dq = root / v^2 dv
    let tail = quad::try_integrate_points(
        |v| {
            let q = root / v;
            Ok(q * q * inner(q)? * root / (v * v))
        },
        &[0.0, 1.0],
        &opts,
    )?;
    Ok(radial_measure(3)? * (head.value + tail.value))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn closed_form_constants() {
        assert!(rel(reduction_constant(3, 2.5).unwrap(), 1.0 / (6.0 * PI * PI)) < 1e-14);
        assert!((reduction_constant(3, 2.5).unwrap() - 0.016_886_863).abs() < 1e-9);
        assert!(rel(reduction_constant(1, 3.0).unwrap(), 0.1875) < 1e-14);
        assert!(rel(reduction_constant(2, 2.0).unwrap(), 1.0 / (4.0 * PI)) < 1e-14);
    }

    #[test]
    fn divergence_is_rejected() {
        assert!(matches!(reduction_constant(3, 1.5), Err(Error::Divergent { .. })));
        assert!(matches!(momentum_integral(4, 1.0, 1.0), Err(Error::Divergent { .. })));
        assert!(matches!(schwinger_integral(2, 0.5, 1.0), Err(Error::Divergent { .. })));
        assert!(momentum_integral(3, 2.5, 0.0).is_err());
    }

    #[test]
    fn critical_exponents() {
        assert_eq!(critical_exponent(3), 2.5);
        assert_eq!(critical_exponent(1), 1.5);
        assert_eq!(critical_exponent(4), 3.0);
        for m in 1..=4 {
            let c = reduction_constant(m, critical_exponent(m)).unwrap();
            let expect = (4.0 * PI).powf(-(m as f64) / 2.0) / gamma(1.0 + m as f64 / 2.0).unwrap();
            assert!(rel(c, expect) < 1e-14);
        }
    }

    #[test]
    fn momentum_integral_examples() {
        let c = 1.0 / (6.0 * PI * PI);
        assert!(rel(momentum_integral(3, 2.5, 1.0).unwrap(), c) < 1e-8);
        assert!(rel(momentum_integral(3, 2.5, 4.0).unwrap(), c / 4.0) < 1e-8);
        assert!((momentum_integral(1, 3.0, 1.0).unwrap() - 0.1875).abs() < 1e-10);
    }

    #[test]
    fn schwinger_examples() {
        assert!(rel(schwinger_integral(3, 2.5, 1.0).unwrap(), 1.0 / (6.0 * PI * PI)) < 1e-8);
        assert!(rel(schwinger_integral(3, 4.0, 1.0).unwrap(), reduction_constant(3, 4.0).unwrap()) < 1e-8);
        for m in 1..=3u32 {
            let s = critical_exponent(m);
            let c = (4.0 * PI).powf(-(m as f64) / 2.0) / gamma(1.0 + m as f64 / 2.0).unwrap();
            for &l in &[0.5, 1.0, 2.0] {
                assert!(rel(schwinger_integral(m, s, l).unwrap(), c / l) < 1e-8);
            }
        }
    }

    #[test]
    fn three_routes_agree_on_grid() {
        for m in 1..=4u32 {
            for &ds in &[0.1, 0.5, 1.0, 2.3] {
                let s = m as f64 / 2.0 + ds;
                for &l in &[0.3f64, 1.0, 7.0] {
                    let closed = reduction_constant(m, s).unwrap() * l.powf(m as f64 / 2.0 - s);
                    let a = momentum_integral(m, s, l).unwrap();
                    let b = schwinger_integral(m, s, l).unwrap();
                    assert!(rel(a, closed) < 1e-7, "m={m} s={s} l={l}");
                    assert!(rel(b, closed) < 1e-7, "m={m} s={s} l={l}");
                    assert!(rel(a, b) < 1e-7);
                }
            }
        }
    }

    #[test]
    fn zero_width_is_identity() {
        let a = mollified_reduction(3, 2.5, 1.0, &MollifierSpec::gaussian(0.0)).unwrap();
        assert_eq!(a, momentum_integral(3, 2.5, 1.0).unwrap());
    }

    #[test]
    fn gaussian_mollifier_is_monotone_in_width() {
        let mut prev = momentum_integral(3, 2.5, 1.0).unwrap();
        for &e in &[0.01, 0.05, 0.1, 0.2, 0.5, 1.0] {
            let v = mollified_reduction(3, 2.5, 1.0, &MollifierSpec::gaussian(e)).unwrap();
            assert!(v < prev);
            prev = v;
        }
    }

    #[test]
    fn quadratic_convergence_above_critical_exponent() {
        // s > m/2 + 1: the eps^2 coefficient is finite
        let r = restriction_limit(3, 4.0, 1.0, MollifierShape::Gaussian, &[0.2, 0.1, 0.05]).unwrap();
        for ratio in &r.error_ratios {
            assert!((ratio - 4.0).abs() < 0.5, "{ratio}");
        }
        assert!((r.extrapolated - r.exact).abs() < 1e-6);
    }

    #[test]
    fn logarithmic_convergence_at_critical_exponent() {
        // s = m/2 + 1: error ~ eps^2 log(1/eps), so successive ratios sit
        // below 4 and approach it only slowly
        let r = restriction_limit(3, 2.5, 1.0, MollifierShape::Gaussian, &[0.2, 0.1, 0.05]).unwrap();
        assert!((r.error_ratios[0] - 2.6667).abs() < 1e-3);
        assert!((r.error_ratios[1] - 2.9562).abs() < 1e-3);
        assert!(r.errors.iter().all(|e| *e > 0.0));
    }

    #[test]
    fn ball_mollifier_converges() {
        let exact = momentum_integral(3, 4.0, 1.0).unwrap();
        let mut prev_err = f64::INFINITY;
        for &e in &[0.4, 0.2, 0.1] {
            let v = mollified_reduction(3, 4.0, 1.0, &MollifierSpec::ball(e)).unwrap();
            let err = (exact - v).abs();
            assert!(err < prev_err);
            prev_err = err;
        }
        assert!(prev_err / exact < 1e-2);
        assert!(mollified_reduction(2, 2.0, 1.0, &MollifierSpec::ball(0.1)).is_err());
        let one = mollified_reduction(1, 3.0, 1.0, &MollifierSpec::ball(0.05)).unwrap();
        assert!((one - 0.1875).abs() < 1e-3);
    }

    #[test]
    fn chain_constants() {
        let c = two_step_chain(1.0).unwrap();
        let target = 1.0 / (32.0 * PI * PI);
        assert!(rel(c.combined, target) < 1e-14);
        assert!(rel(c.combined_direct, target) < 1e-14);
        assert!((c.combined - 0.003_166_287_0).abs() < 1e-10);
        assert!(rel(c.nested, target) < 1e-7);
        let c2 = two_step_chain(2.0).unwrap();
        assert!(rel(c2.nested, 1.0 / (64.0 * PI * PI)) < 1e-7);
    }

    #[test]
    fn brane_normalization() {
        let p = ReductionParams::codimension_three(2.0, 3.0).unwrap();
        assert!(rel(p.g, 3.0 / (6.0 * PI * PI)) < 1e-14);
        assert!(rel(p.reduced_multiplier(), p.g / 2.0) < 1e-14);
    }

    #[test]
    fn neville_recovers_quadratic_in_h() {
        let h = [0.04, 0.01, 0.0025];
        let y: Vec<f64> = h.iter().map(|x| 2.0 + 3.0 * x - 5.0 * x * x).collect();
        assert!((neville_at_zero(&h, &y) - 2.0).abs() < 1e-13);
    }
}
