//! Box integrals `Delta_D = int_D int_D |x - y|^{-1}` for rectangular cells.
//!
//! Three independent routes:
//!
//! * `TIntegral`: `1/|r| = pi^{-1/2} int t^{-1/2} exp(-t r^2) dt` factorizes the
//!   double integral into one-dimensional overlaps `I_L(t)`;
//! * `Quadrature3D`: the difference variable `r = x - y` reduces the integral to
//!   `int prod (l_i - |r_i|) / |r| d^3 r`, integrated radially in closed form;
//! * `MonteCarlo`: uniform point pairs.
//!
//! The module also carries the one-dimensional log-concavity scan and the
//! positivity chain that drive the monotonicity of `Delta(alpha)`.

use std::f64::consts::{FRAC_PI_2, PI};
use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_positive, Error, Result};
use crate::mc::{self, MCEstimate};
use crate::quad::{self, geometric_points, QuadOptions};
use crate::specfun::{erf, erfc};

const SQRT_PI: f64 = 1.772_453_850_905_516;

/// Unit-volume cell `[0, alpha] x [0, 1/alpha] x [0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AspectCell {
    pub alpha: f64,
}

impl AspectCell {
    pub fn new(alpha: f64) -> Result<Self> {
        ensure_positive("alpha", alpha)?;
        Ok(Self { alpha })
    }

    pub fn sides(&self) -> [f64; 3] {
        [self.alpha, 1.0 / self.alpha, 1.0]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeltaMethod {
    TIntegral,
    #[serde(rename = "quadrature_3d")]
    Quadrature3D,
    MonteCarlo,
}

/// Accuracy and sampling budget for the box integral routes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaBudget {
    pub rel_tol: f64,
    pub mc_pairs: u64,
    pub seed: u64,
    pub workers: usize,
}

impl Default for DeltaBudget {
    fn default() -> Self {
        Self { rel_tol: 1e-12, mc_pairs: 10_000_000, seed: 42, workers: mc::default_workers() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DeltaValue {
    Deterministic(f64),
    MonteCarlo(MCEstimate),
}

impl DeltaValue {
    pub fn value(&self) -> f64 {
        match self {
            DeltaValue::Deterministic(v) => *v,
            DeltaValue::MonteCarlo(e) => e.mean,
        }
    }
}

/// `j(r) = int_0^r (r - s) exp(-s^2) ds = r A(r) - B(r)`.
pub fn overlap_j(r: f64) -> f64 {
    if r < 0.5 {
        // sum (-1)^k r^{2k+2} / (k! (2k+1) (2k+2))
        let r2 = r * r;
        let mut pow = r2;
        let mut fact = 1.0;
        let mut sum = 0.0;
        for k in 0..20 {
            if k > 0 {
                fact *= k as f64;
                pow *= -r2;
            }
            let kf = k as f64;
            sum += pow / (fact * (2.0 * kf + 1.0) * (2.0 * kf + 2.0));
        }
        sum
    } else {
        let a = 0.5 * SQRT_PI * erf(r);
        let b = -0.5 * (-r * r).exp_m1();
        r * a - b
    }
}

/// `I_L(t) = int_0^L int_0^L exp(-t (x - y)^2) dx dy = (2 / t) j(L sqrt t)`.
pub fn interval_overlap(length: f64, t: f64) -> Result<f64> {
    ensure_positive("L", length)?;
    ensure_positive("t", t)?;
    Ok(overlap_unchecked(length, t))
}

fn overlap_unchecked(length: f64, t: f64) -> f64 {
    if t == 0.0 {
        return length * length;
    }
    2.0 / t * overlap_j(length * t.sqrt())
}

/// `Delta` for the box with the given sides by the requested route.
pub fn box_integral(sides: [f64; 3], method: DeltaMethod, budget: &DeltaBudget) -> Result<DeltaValue> {
    for &l in &sides {
        ensure_positive("side", l)?;
    }
    Ok(match method {
        DeltaMethod::TIntegral => DeltaValue::Deterministic(t_integral(sides, budget.rel_tol)?),
        DeltaMethod::Quadrature3D => DeltaValue::Deterministic(quadrature_3d(sides, budget.rel_tol)?),
        DeltaMethod::MonteCarlo => DeltaValue::MonteCarlo(monte_carlo(sides, budget)?),
    })
}

pub fn delta_alpha(alpha: f64, method: DeltaMethod, budget: &DeltaBudget) -> Result<DeltaValue> {
    box_integral(AspectCell::new(alpha)?.sides(), method, budget)
}

fn t_integral(sides: [f64; 3], rel_tol: f64) -> Result<f64> {
    let opts = QuadOptions { rel_tol, max_intervals: 20_000, ..QuadOptions::default() };
    let prod = |t: f64| sides.iter().map(|&l| overlap_unchecked(l, t)).product::<f64>();
    // [0, 1] with t = u^2
    let head = quad::integrate(|u| 2.0 * prod(u * u), 0.0, 1.0, &opts)?;
    let lmin = sides.iter().copied().fold(f64::INFINITY, f64::min);
    let big_t = (40.0 / (lmin * lmin)).max(1.0);
    let mid = if big_t > 1.0 {
        quad::integrate_points(|t| prod(t) / t.sqrt(), &geometric_points(1.0, big_t, 2.0), &opts)?.value
    } else {
        0.0
    };
    // beyond big_t, I_L(t) = L sqrt(pi / t) - 1 / t up to exp(-t L^2)
    let c: Vec<f64> = sides.iter().map(|&l| l * SQRT_PI).collect();
    let e1 = c[0] + c[1] + c[2];
    let e2 = c[0] * c[1] + c[0] * c[2] + c[1] * c[2];
    let e3 = c[0] * c[1] * c[2];
    let x = big_t.powf(-0.5);
    let tail = 2.0 * (e3 * x.powi(2) / 2.0 - e2 * x.powi(3) / 3.0 + e1 * x.powi(4) / 4.0 - x.powi(5) / 5.0);
    Ok((head.value + mid + tail) / SQRT_PI)
}

/// `int_0^R rho prod (l_i - rho n_i) d rho` in closed form.
fn radial_moment(l: [f64; 3], n: [f64; 3], r: f64) -> f64 {
    let c0 = l[0] * l[1] * l[2];
    let c1 = n[0] * l[1] * l[2] + n[1] * l[0] * l[2] + n[2] * l[0] * l[1];
    let c2 = l[0] * n[1] * n[2] + l[1] * n[0] * n[2] + l[2] * n[0] * n[1];
    let c3 = n[0] * n[1] * n[2];
    let r2 = r * r;
    r2 * (c0 / 2.0 - r * (c1 / 3.0 - r * (c2 / 4.0 - r * c3 / 5.0)))
}

fn quadrature_3d(l: [f64; 3], rel_tol: f64) -> Result<f64> {
    let inner_opts = QuadOptions { rel_tol: rel_tol * 0.1, max_intervals: 2000, ..QuadOptions::default() };
    let outer_opts = QuadOptions { rel_tol, max_intervals: 2000, ..QuadOptions::default() };
    let phi_star = (l[1] / l[0]).atan();
    let inner = |phi: f64| -> Result<f64> {
        let (sp, cp) = phi.sin_cos();
        let rho = (l[0] / cp).min(l[1] / sp);
        let theta_star = (rho / l[2]).atan();
        let f = |theta: f64| {
            let (st, ct) = theta.sin_cos();
            let n = [st * cp, st * sp, ct];
            let r = (l[2] / ct).min(rho / st);
            st * radial_moment(l, n, r)
        };
        Ok(quad::integrate_points(f, &[0.0, theta_star, FRAC_PI_2], &inner_opts)?.value)
    };
    let r = quad::try_integrate_points(inner, &[0.0, phi_star, FRAC_PI_2], &outer_opts)?;
    Ok(8.0 * r.value)
}

fn monte_carlo(l: [f64; 3], budget: &DeltaBudget) -> Result<MCEstimate> {
    let volume = l[0] * l[1] * l[2];
    let scale = volume * volume;
    mc::estimate(budget.mc_pairs, budget.seed, budget.workers, |rng| loop {
        let mut d2 = 0.0;
        for &side in &l {
            let x: f64 = rng.random::<f64>() * side;
            let y: f64 = rng.random::<f64>() * side;
            d2 += (x - y) * (x - y);
        }
        let d = d2.sqrt();
        if d >= 1e-12 {
            return scale / d;
        }
    })
}

/// `Delta_3(-1)` for the unit cube in closed form.
pub fn delta_cube_closed_form() -> f64 {
    let s2 = 2f64.sqrt();
    let s3 = 3f64.sqrt();
    0.4 * (1.0 + s2 - 2.0 * s3) - 2.0 * PI / 3.0 - 6.0 * 2f64.ln()
        + 2.0 * (1.0 + s2).ln()
        + 12.0 * (1.0 + s3).ln()
        - 4.0 * (2.0 + s3).ln()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AspectResult {
    pub alpha: f64,
    pub delta_t_integral: f64,
    pub delta_quadrature: f64,
    pub delta_mc: Option<MCEstimate>,
    /// Largest pairwise deviation among the available methods.
    pub method_spread: f64,
    /// Deterministic routes within `deterministic_tol` and MC within 3 sigma.
    pub consistent: bool,
}

/// Evaluates `Delta(alpha)` by every route; MC is skipped when `mc_pairs == 0`.
pub fn aspect_result(alpha: f64, budget: &DeltaBudget, deterministic_tol: f64) -> Result<AspectResult> {
    let t = delta_alpha(alpha, DeltaMethod::TIntegral, budget)?.value();
    let q = delta_alpha(alpha, DeltaMethod::Quadrature3D, budget)?.value();
    let m = if budget.mc_pairs > 0 {
        match delta_alpha(alpha, DeltaMethod::MonteCarlo, budget)? {
            DeltaValue::MonteCarlo(e) => Some(e),
            DeltaValue::Deterministic(_) => None,
        }
    } else {
        None
    };
    let mut spread = (t - q).abs();
    let mut consistent = spread <= deterministic_tol;
    if let Some(e) = &m {
        spread = spread.max((e.mean - t).abs()).max((e.mean - q).abs());
        consistent &= e.within_sigma(t, 3.0);
    }
    Ok(AspectResult { alpha, delta_t_integral: t, delta_quadrature: q, delta_mc: m, method_spread: spread, consistent })
}

/// Writes `alpha,delta_t_integral,delta_quadrature,delta_mc,delta_mc_stderr`.
pub fn write_delta_csv<W: Write>(out: W, rows: &[AspectResult]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["alpha", "delta_t_integral", "delta_quadrature", "delta_mc", "delta_mc_stderr"])?;
    for r in rows {
        let (mean, se) = r.delta_mc.map(|e| (e.mean.to_string(), e.stderr.to_string())).unwrap_or_default();
        w.write_record([r.alpha.to_string(), r.delta_t_integral.to_string(), r.delta_quadrature.to_string(), mean, se])?;
    }
    w.flush()?;
    Ok(())
}

/// `-(n^2 / a) Q Delta`.
pub fn reference_energy(q: f64, n: u32, a: f64, delta: f64) -> Result<f64> {
    ensure_positive("Q", q)?;
    ensure_positive("a", a)?;
    ensure_positive("Delta", delta)?;
    if n == 0 {
        return Err(Error::InvalidParameter("cell count n must be positive".into()));
    }
    let n = n as f64;
    Ok(-(n * n / a) * q * delta)
}

/// `Q = lambda Q_charge^2 / (4 pi)` for the operator normalization `lambda L_0^{-1}`.
pub fn kernel_coupling(lambda: f64, charge: f64) -> f64 {
    lambda * charge * charge / (4.0 * PI)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConcavityPoint {
    pub t: f64,
    pub u: f64,
    pub second_difference: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcavityReport {
    pub h: f64,
    pub points: Vec<ConcavityPoint>,
    /// Largest second difference on the grid; negative when the scan passes.
    pub margin: f64,
    pub violations: Vec<ConcavityPoint>,
    pub passed: bool,
}

/// Centered second difference of `u -> log I_{e^u}(t)`.
pub fn log_overlap_second_difference(t: f64, u: f64, h: f64) -> Result<f64> {
    ensure_positive("t", t)?;
    ensure_positive("h", h)?;
    // log I = log(2 j(e^u sqrt t)) - log t; the constant drops out
    let st = t.sqrt();
    let g = |v: f64| overlap_j(v.exp() * st).ln();
    Ok((g(u + h) - 2.0 * g(u) + g(u - h)) / (h * h))
}

pub fn default_concavity_grids() -> (Vec<f64>, Vec<f64>, f64) {
    let t: Vec<f64> = (0..25).map(|i| 10f64.powf(-2.0 + 4.0 * i as f64 / 24.0)).collect();
    let u: Vec<f64> = (0..61).map(|i| -3.0 + 0.1 * i as f64).collect();
    (t, u, 1e-3)
}

pub fn log_concavity_scan(t_grid: &[f64], u_grid: &[f64], h: f64) -> Result<ConcavityReport> {
    let mut points = Vec::with_capacity(t_grid.len() * u_grid.len());
    for &t in t_grid {
        for &u in u_grid {
            points.push(ConcavityPoint { t, u, second_difference: log_overlap_second_difference(t, u, h)? });
        }
    }
    let margin = points.iter().map(|p| p.second_difference).fold(f64::NEG_INFINITY, f64::max);
    let violations: Vec<ConcavityPoint> = points.iter().copied().filter(|p| !(p.second_difference < 0.0)).collect();
    Ok(ConcavityReport { h, passed: violations.is_empty() && !points.is_empty(), points, margin, violations })
}

/// `A(r) = int_0^r exp(-s^2) ds`.
fn a_fn(r: f64) -> f64 {
    0.5 * SQRT_PI * erf(r)
}

/// Power-series coefficients (in `r`) of `h` and `k`, for `r < 1` where the
/// closed forms cancel.
struct ChainSeries {
    h: Vec<f64>,
    k: Vec<f64>,
}

impl ChainSeries {
    const DEGREE: usize = 64;

    fn new() -> Self {
        let d = Self::DEGREE;
        let mut a = vec![0.0; d + 1];
        let mut e = vec![0.0; d + 1];
        let mut fact = 1.0;
        for n in 0..=d / 2 {
            if n > 0 {
                fact *= n as f64;
            }
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            e[2 * n] = sign / fact;
            if 2 * n < d {
                a[2 * n + 1] = sign / (fact * (2 * n + 1) as f64);
            }
        }
        let mul = |x: &[f64], y: &[f64]| {
            let mut out = vec![0.0; d + 1];
            for (i, &xi) in x.iter().enumerate() {
                if xi == 0.0 {
                    continue;
                }
                for (j, &yj) in y.iter().enumerate().take(d + 1 - i) {
                    out[i + j] += xi * yj;
                }
            }
            out
        };
        let shift = |x: &[f64], s: usize| {
            let mut out = vec![0.0; d + 1];
            out[s..].copy_from_slice(&x[..=d - s]);
            out
        };
        let mut one_minus_e: Vec<f64> = e.iter().map(|v| -v).collect();
        one_minus_e[0] = 0.0;
        // h = (1 - E)(A + r E) - 2 r^2 A E
        let a_plus_re: Vec<f64> = a.iter().zip(shift(&e, 1)).map(|(x, y)| x + y).collect();
        let first = mul(&one_minus_e, &a_plus_re);
        let second = shift(&mul(&a, &e), 2);
        let h: Vec<f64> = first.iter().zip(&second).map(|(x, y)| x - 2.0 * y).collect();
        // k = r A (2 r^2 - 1) + (1 - r^2)(1 - E)
        let ra = shift(&a, 1);
        let k: Vec<f64> = (0..=d)
            .map(|i| {
                let p = 2.0 * if i >= 2 { ra[i - 2] } else { 0.0 } - ra[i];
                let q = one_minus_e[i] - if i >= 2 { one_minus_e[i - 2] } else { 0.0 };
                p + q
            })
            .collect();
        Self { h, k }
    }

    fn eval(c: &[f64], r: f64) -> f64 {
        c.iter().rev().fold(0.0, |acc, &x| acc * r + x)
    }
}

/// Values of the positivity chain at `r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainPoint {
    pub r: f64,
    pub k: f64,
    pub h: f64,
    /// `2 E(r) k(r)`.
    pub h_prime: f64,
    /// Five-point finite difference of `h`.
    pub h_prime_fd: f64,
    pub rel_err: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositivityReport {
    pub points: Vec<ChainPoint>,
    pub h_at_zero: f64,
    pub min_k: f64,
    pub min_h: f64,
    pub max_rel_err: f64,
    pub passed: bool,
}

/// `k(r) = r A (2 r^2 - 1) + (1 - r^2)(1 - E)` and `h(r) = (1 - E)(A + r E) - 2 r^2 A E`.
pub struct PositivityChain {
    series: ChainSeries,
}

impl Default for PositivityChain {
    fn default() -> Self {
        Self::new()
    }
}

impl PositivityChain {
    pub fn new() -> Self {
        Self { series: ChainSeries::new() }
    }

    pub fn k(&self, r: f64) -> f64 {
        if r < 1.0 {
            ChainSeries::eval(&self.series.k, r)
        } else {
            let e = (-r * r).exp();
            r * a_fn(r) * (2.0 * r * r - 1.0) + (1.0 - r * r) * (1.0 - e)
        }
    }

    pub fn h(&self, r: f64) -> f64 {
        if r < 1.0 {
            ChainSeries::eval(&self.series.h, r)
        } else {
            0.5 * SQRT_PI + self.h_deficit(r)
        }
    }

    /// `h(r) - sqrt(pi)/2`, free of cancellation for large `r`.
    fn h_deficit(&self, r: f64) -> f64 {
        let e = (-r * r).exp();
        let a = a_fn(r);
        -0.5 * SQRT_PI * erfc(r) + r * e - a * e - r * e * e - 2.0 * r * r * a * e
    }

    /// `h` as a smooth function for differencing: the series below 1, the
    /// deficit above.
    fn h_for_difference(&self, r: f64, above: bool) -> f64 {
        if above {
            self.h_deficit(r)
        } else {
            ChainSeries::eval(&self.series.h, r)
        }
    }

    pub fn point(&self, r: f64) -> ChainPoint {
        let e = (-r * r).exp();
        let k = self.k(r);
        let h_prime = 2.0 * e * k;
        let above = r >= 1.0;
        let d = 1e-3 * r.min(1.0 / r);
        let f = |x: f64| self.h_for_difference(x, above);
        let fd = (-f(r + 2.0 * d) + 8.0 * f(r + d) - 8.0 * f(r - d) + f(r - 2.0 * d)) / (12.0 * d);
        ChainPoint { r, k, h: self.h(r), h_prime, h_prime_fd: fd, rel_err: ((fd - h_prime) / h_prime).abs() }
    }
}

pub fn default_chain_grid() -> Vec<f64> {
    (0..=400).map(|i| 10f64.powf(-3.0 + 4.0 * i as f64 / 400.0)).collect()
}

/// Checks `k > 0`, `h > 0` and `h' = 2 E k` (to `fd_tol` relative) on `r_grid`.
pub fn positivity_chain(r_grid: &[f64], fd_tol: f64) -> Result<PositivityReport> {
    for &r in r_grid {
        ensure_positive("r", r)?;
    }
    let chain = PositivityChain::new();
    let points: Vec<ChainPoint> = r_grid.iter().map(|&r| chain.point(r)).collect();
    let min_k = points.iter().map(|p| p.k).fold(f64::INFINITY, f64::min);
    let min_h = points.iter().map(|p| p.h).fold(f64::INFINITY, f64::min);
    let max_rel_err = points.iter().map(|p| p.rel_err).fold(0.0, f64::max);
    let h_at_zero = chain.h(0.0);
    let passed = !points.is_empty() && min_k > 0.0 && min_h > 0.0 && max_rel_err <= fd_tol && h_at_zero == 0.0;
    Ok(PositivityReport { points, h_at_zero, min_k, min_h, max_rel_err, passed })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn budget() -> DeltaBudget {
        DeltaBudget { mc_pairs: 0, ..DeltaBudget::default() }
    }

    fn t_int(alpha: f64) -> f64 {
        delta_alpha(alpha, DeltaMethod::TIntegral, &budget()).unwrap().value()
    }

    /// Two-dimensional adaptive quadrature of the overlap integrand.
    fn overlap_2d(l: f64, t: f64) -> f64 {
        let opts = QuadOptions::rel(1e-13);
        let inner = |x: f64| quad::integrate(|y| (-t * (x - y) * (x - y)).exp(), 0.0, l, &opts).unwrap().value;
        quad::integrate(inner, 0.0, l, &opts).unwrap().value
    }

    #[test]
    fn overlap_against_2d_quadrature() {
        for &(l, t) in &[(1.0, 1.0), (2.0, 0.7), (0.3, 5.0), (1.5, 1e-3), (3.0, 10.0)] {
            let closed = interval_overlap(l, t).unwrap();
            assert!((closed - overlap_2d(l, t)).abs() < 1e-10, "L={l} t={t}");
            let direct = l * (PI / t).sqrt() * erf(l * t.sqrt()) + ((-t * l * l).exp() - 1.0) / t;
            assert!((closed - direct).abs() < 1e-9 * closed, "L={l} t={t}");
        }
        assert!((interval_overlap(1.0, 1e-12).unwrap() - 1.0).abs() < 1e-9);
        assert!(interval_overlap(0.0, 1.0).is_err());
        assert!(interval_overlap(1.0, -1.0).is_err());
    }

    #[test]
    fn overlap_scaling() {
        // I_L(t) = t^{-1} J(L sqrt t) with J = 2 j evaluated by quadrature
        let (l, t) = (2.0f64, 0.7f64);
        let r = l * t.sqrt();
        let j_quad = quad::integrate(|s| (r - s) * (-s * s).exp(), 0.0, r, &QuadOptions::default()).unwrap().value;
        assert!((interval_overlap(l, t).unwrap() - 2.0 * j_quad / t).abs() < 1e-12);
        for &r in &[0.1, 0.49, 0.51, 2.0] {
            assert!((overlap_j(r) - overlap_j_direct(r)).abs() < 1e-14, "r={r}");
        }
    }

    fn overlap_j_direct(r: f64) -> f64 {
        quad::integrate(|s| (r - s) * (-s * s).exp(), 0.0, r, &QuadOptions::rel(1e-13)).unwrap().value
    }

    #[test]
    fn closed_form_value() {
        assert!((delta_cube_closed_form() - 1.88231).abs() < 1e-5);
    }

    #[test]
    fn cube_routes_agree_with_closed_form() {
        let exact = delta_cube_closed_form();
        assert!((t_int(1.0) - exact).abs() < 1e-6);
        let q = delta_alpha(1.0, DeltaMethod::Quadrature3D, &budget()).unwrap().value();
        assert!((q - exact).abs() < 1e-5);
    }

    #[test]
    fn mc_route_is_consistent() {
        let b = DeltaBudget { mc_pairs: 400_000, seed: 3, workers: 4, ..DeltaBudget::default() };
        let e = match delta_alpha(1.0, DeltaMethod::MonteCarlo, &b).unwrap() {
            DeltaValue::MonteCarlo(e) => e,
            _ => unreachable!(),
        };
        assert!(e.within_sigma(delta_cube_closed_form(), 3.0), "z = {}", e.z_score(delta_cube_closed_form()));
    }

    #[test]
    fn three_routes_on_aspect_grid() {
        for &alpha in &[1.5, 2.0, 4.0] {
            let r = aspect_result(alpha, &budget(), 1e-5).unwrap();
            assert!(r.consistent, "{r:?}");
        }
    }

    #[test]
    fn symmetry_and_monotonicity() {
        for &alpha in &[2.0, 5.0, 1.3, 3.7, 0.6] {
            assert!((t_int(alpha) - t_int(1.0 / alpha)).abs() < 1e-8);
        }
        let vals: Vec<f64> = (0..=8).map(|i| t_int((0.25 * i as f64).exp())).collect();
        for w in vals.windows(2) {
            assert!(w[0] - w[1] > 1e-5, "{vals:?}");
        }
    }

    #[test]
    fn maximum_at_cube() {
        let grid = [0.25, 0.5, 0.8, 1.0, 1.25, 2.0, 4.0];
        let best = grid.iter().copied().max_by(|a, b| t_int(*a).total_cmp(&t_int(*b))).unwrap();
        assert_eq!(best, 1.0);
    }

    #[test]
    fn finiteness_bound() {
        let r = 3f64.sqrt();
        assert!(t_int(1.0) <= 2.0 * PI * r * r);
    }

    #[test]
    fn reference_energy_cases() {
        let d = delta_cube_closed_form();
        assert_eq!(reference_energy(1.0, 1, 1.0, d).unwrap(), -d);
        let one = reference_energy(0.7, 1, 1.3, d).unwrap();
        let two = reference_energy(0.7, 2, 1.3, d).unwrap();
        assert!((two - 4.0 * one).abs() < 1e-15);
        let (lambda, charge) = (2.5, 0.8);
        let gamma = lambda / (4.0 * PI);
        let via_gamma = -(1.0 / 1.3) * gamma * charge * charge * d;
        let via_q = reference_energy(kernel_coupling(lambda, charge), 1, 1.3, d).unwrap();
        assert!((via_gamma - via_q).abs() < 1e-15);
        assert!(reference_energy(1.0, 0, 1.0, d).is_err());
    }

    #[test]
    fn concavity_scan_default_grid() {
        let (t, u, h) = default_concavity_grids();
        let rep = log_concavity_scan(&t, &u, h).unwrap();
        assert!(rep.passed, "margin {}", rep.margin);
        assert_eq!(rep.points.len(), 25 * 61);
        assert!(rep.margin < 0.0);
    }

    #[test]
    fn concavity_is_translation_covariant() {
        // D(t, u) depends only on u + log(t) / 2
        for &(t, u) in &[(1.0, 0.3), (0.05, -1.2), (30.0, 2.0), (0.01, 0.0)] {
            let shift: f64 = 0.7;
            let a = log_overlap_second_difference(t, u, 1e-3).unwrap();
            let b = log_overlap_second_difference(t * (2.0 * shift).exp(), u - shift, 1e-3).unwrap();
            assert!((a - b).abs() < 1e-8 * (1.0 + a.abs()), "t={t} u={u}: {a} {b}");
        }
    }

    #[test]
    fn product_decreases_in_beta() {
        let mut prev = f64::INFINITY;
        for i in 0..=60 {
            let beta = 0.05 * i as f64;
            let p = interval_overlap(beta.exp(), 1.0).unwrap() * interval_overlap((-beta).exp(), 1.0).unwrap();
            assert!(p < prev, "beta={beta}");
            prev = p;
        }
    }

    #[test]
    fn chain_on_default_grid() {
        let rep = positivity_chain(&default_chain_grid(), 1e-6).unwrap();
        assert!(rep.passed, "min_k {} min_h {} max_rel {}", rep.min_k, rep.min_h, rep.max_rel_err);
        assert_eq!(rep.h_at_zero, 0.0);
    }

    #[test]
    fn chain_special_points() {
        let c = PositivityChain::new();
        let r0 = std::f64::consts::FRAC_1_SQRT_2;
        assert!(c.k(r0) > 0.0);
        // k >= r^4 (1 + r^2) / 2 below 1/sqrt(2); leading term is 5 r^4 / 6
        let r: f64 = 0.05;
        assert!(c.k(r) >= 0.5 * r.powi(4) * (1.0 + r * r));
        assert!((c.k(r) / (5.0 / 6.0 * r.powi(4)) - 1.0).abs() < 0.05);
        let e3 = (-9.0f64).exp();
        assert!(c.h(3.0) > 0.0);
        assert!(c.k(3.0) >= (1.0 - e3) / 2.0);
        assert!(c.h(1e-3) > 0.0 && c.h(1e-3) < 1e-15);
    }

    #[test]
    fn series_and_closed_forms_agree_near_one() {
        let c = PositivityChain::new();
        for &r in &[0.6f64, 0.8, 0.95, 0.999] {
            let e = (-r * r).exp();
            let a = a_fn(r);
            let h = (1.0 - e) * (a + r * e) - 2.0 * r * r * a * e;
            let k = r * a * (2.0 * r * r - 1.0) + (1.0 - r * r) * (1.0 - e);
            assert!((c.h(r) - h).abs() < 1e-14, "r={r}");
            assert!((c.k(r) - k).abs() < 1e-14, "r={r}");
            assert!((c.h_deficit(r) + 0.5 * SQRT_PI - h).abs() < 1e-14, "r={r}");
        }
    }

    #[test]
    fn csv_table() {
        let rows = vec![aspect_result(1.0, &budget(), 1e-5).unwrap()];
        let mut buf = Vec::new();
        write_delta_csv(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("alpha,delta_t_integral"));
        assert_eq!(text.lines().count(), 2);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(12))]

            #[test]
            fn a5_scaling(alpha in 0.4f64..2.5, a in 0.3f64..3.0) {
                let b = budget();
                let unit = t_int(alpha);
                let sides = [a * alpha, a / alpha, a];
                let scaled = box_integral(sides, DeltaMethod::TIntegral, &b).unwrap().value();
                prop_assert!((scaled / (a.powi(5) * unit) - 1.0).abs() < 1e-10);
            }

            #[test]
            fn concavity_negative_off_grid(t in 1e-2f64..1e2, u in -3.0f64..3.0) {
                prop_assert!(log_overlap_second_difference(t, u, 1e-3).unwrap() < 0.0);
            }

            #[test]
            fn concavity_translation_covariance(t in 1e-2f64..1e2, u in -3.0f64..3.0, s in -1.0f64..1.0) {
                let a = log_overlap_second_difference(t, u, 1e-3).unwrap();
                let b = log_overlap_second_difference(t * (2.0 * s).exp(), u - s, 1e-3).unwrap();
                prop_assert!((a - b).abs() < 1e-8 * (1.0 + a.abs()));
            }
        }
    }
}
