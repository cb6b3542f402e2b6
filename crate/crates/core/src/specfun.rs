//! Real special functions used throughout the crate.
//!
//! `gamma`, `erf` and `erfc` are thin, checked wrappers over the `libm`
//! implementations. The one-dimensional heat sums are evaluated either by
//! their direct spectral series or by the Jacobi-transformed dual series.

use std::f64::consts::PI;

use num_rational::Rational64;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_positive, Error, Result};

/// Which one-dimensional Laplacian the heat sum belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ThetaKind {
    /// `sum_{r >= 1} exp(-t pi^2 r^2 / l^2)`
    Dirichlet,
    /// `sum_{m >= 0} exp(-t pi^2 m^2 / l^2)`
    Neumann,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThetaMode {
    DirectSeries,
    JacobiDual,
    /// Direct series when `pi t / l^2 >= 1`, dual series otherwise.
    Auto,
}

/// A heat-sum value together with a bound on the neglected terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaValue {
    pub value: f64,
    pub tail_bound: f64,
    pub terms: usize,
}

const THETA_TERM_TOL: f64 = 1e-14;
const THETA_MAX_TERMS: usize = 50_000_000;

/// Gamma function on the real line.
///
/// Fails at the poles `0, -1, -2, ...` and when the result is not
/// representable.
pub fn gamma(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::InvalidParameter(format!("gamma argument {x} is not finite")));
    }
    if x <= 0.0 && x == x.floor() {
        return Err(Error::Pole(x));
    }
    let g = libm::tgamma(x);
    if !g.is_finite() {
        return Err(Error::Overflow(x));
    }
    Ok(g)
}

pub fn erf(x: f64) -> f64 {
    libm::erf(x)
}

pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

/// Upper incomplete gamma `Gamma(3/2, z)` for `z >= 0`.
pub fn upper_gamma_three_halves(z: f64) -> f64 {
    let r = z.sqrt();
    0.5 * PI.sqrt() * erfc(r) + r * (-z).exp()
}

/// One-dimensional Dirichlet or Neumann heat sum `Theta(l; t)`.
pub fn theta(kind: ThetaKind, length: f64, t: f64, mode: ThetaMode) -> Result<f64> {
    theta_with_bound(kind, length, t, mode).map(|v| v.value)
}

pub fn theta_with_bound(kind: ThetaKind, length: f64, t: f64, mode: ThetaMode) -> Result<ThetaValue> {
    ensure_positive("length", length)?;
    ensure_positive("t", t)?;
    let x = PI * t / (length * length);
    let use_direct = match mode {
        ThetaMode::DirectSeries => true,
        ThetaMode::JacobiDual => false,
        ThetaMode::Auto => x >= 1.0,
    };
    let dirichlet = if use_direct {
        // sum_{r>=1} exp(-pi x r^2)
        gaussian_series(PI * x)?
    } else {
        // Poisson summation: (l / sqrt(pi t)) * (1/2 + sum_{k>=1} exp(-pi k^2 / x)) - 1/2
        let s = gaussian_series(PI / x)?;
        let pref = length / (PI * t).sqrt();
        ThetaValue {
            value: pref * (0.5 + s.value) - 0.5,
            tail_bound: pref * s.tail_bound,
            terms: s.terms,
        }
    };
    Ok(match kind {
        ThetaKind::Dirichlet => dirichlet,
        ThetaKind::Neumann => ThetaValue { value: 1.0 + dirichlet.value, ..dirichlet },
    })
}

/// `sum_{r >= 1} exp(-c r^2)` truncated once the next term drops below
/// `THETA_TERM_TOL` times the partial sum, so the leading term is always kept
/// even when it is far below unity. The neglected tail is bounded by a
/// geometric series since consecutive term ratios beyond `R` are at most
/// `exp(-c (2R + 3))`.
fn gaussian_series(c: f64) -> Result<ThetaValue> {
    let mut sum = 0.0;
    let mut r = 1usize;
    loop {
        let term = (-c * (r * r) as f64).exp();
        if r > 1 && (term < THETA_TERM_TOL * sum || term == 0.0) {
            let ratio = (-c * (2 * r + 1) as f64).exp();
            let tail_bound = term / (1.0 - ratio);
            return Ok(ThetaValue { value: sum, tail_bound, terms: r - 1 });
        }
        sum += term;
        r += 1;
        if r > THETA_MAX_TERMS {
            return Err(Error::InvalidParameter(format!(
                "direct heat series with exponent {c:e} needs more than {THETA_MAX_TERMS} terms"
            )));
        }
    }
}

/// `zeta(-n)` for odd `n` in `{1, 3, 5, 7}` as an exact rational,
/// `zeta(-n) = -B_{n+1} / (n + 1)`.
pub fn zeta_negative_odd(n: u32) -> Result<Rational64> {
    if !matches!(n, 1 | 3 | 5 | 7) {
        return Err(Error::Unsupported(format!(
            "zeta(-n) is tabulated for n in {{1, 3, 5, 7}}, got n = {n}"
        )));
    }
    let b = bernoulli(n as usize + 1);
    Ok(-b / Rational64::from_integer(n as i64 + 1))
}

/// Bernoulli number `B_n` by the Akiyama-Tanigawa recurrence.
fn bernoulli(n: usize) -> Rational64 {
    let mut a = vec![Rational64::from_integer(0); n + 1];
    for m in 0..=n {
        a[m] = Rational64::new(1, m as i64 + 1);
        for j in (1..=m).rev() {
            a[j - 1] = Rational64::from_integer(j as i64) * (a[j - 1] - a[j]);
        }
    }
    a[0]
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Taylor series of erf summed until terms vanish at f64 precision.
    fn erf_taylor(x: f64) -> f64 {
        let mut term = x;
        let mut sum = 0.0;
        let mut n = 0.0;
        while term.abs() > 1e-20 {
            sum += term / (2.0 * n + 1.0);
            n += 1.0;
            term *= -x * x / n;
        }
        2.0 / PI.sqrt() * sum
    }

    #[test]
    fn gamma_reference_values() {
        assert_eq!(gamma(1.0).unwrap(), 1.0);
        let g = gamma(2.5).unwrap();
        assert!((g - 3.0 * PI.sqrt() / 4.0).abs() < 1e-15);
        assert!((g - 1.329_340_388_179_137).abs() < 1e-15);
        let ratio = gamma(-1.5).unwrap() / gamma(-0.5).unwrap();
        assert!((ratio + 2.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn gamma_errors() {
        assert!(matches!(gamma(0.0), Err(Error::Pole(_))));
        assert!(matches!(gamma(-3.0), Err(Error::Pole(_))));
        assert!(matches!(gamma(200.0), Err(Error::Overflow(_))));
        assert!(gamma(f64::NAN).is_err());
    }

    #[test]
    fn gamma_recurrence_grid() {
        let mut x: f64 = -9.5;
        while x <= 20.0 {
            let near_pole = x <= 0.0 && (x - x.round()).abs() < 0.1;
            let next_near_pole = x + 1.0 <= 0.0 && (x + 1.0 - (x + 1.0).round()).abs() < 0.1;
            if !near_pole && !next_near_pole {
                let lhs = gamma(x + 1.0).unwrap();
                let rhs = x * gamma(x).unwrap();
                assert!(((lhs - rhs) / lhs).abs() < 1e-12, "x = {x}");
            }
            x += 0.05;
        }
    }

    #[test]
    fn erf_values() {
        assert_eq!(erf(0.0), 0.0);
        assert!((erf(10.0) - 1.0).abs() < 1e-15);
        let oracle = erf_taylor(1.0);
        assert!((oracle - 0.842_700_792_949_714_9).abs() < 1e-15);
        assert!((erf(1.0) - oracle).abs() < 1e-13);
        for &x in &[0.1, 0.5, 1.7, 2.5, 3.3] {
            assert!((erf(x) - erf_taylor(x)).abs() < 1e-13, "x = {x}");
            assert_eq!(erf(-x), -erf(x));
        }
    }

    #[test]
    fn neumann_is_dirichlet_plus_one() {
        for &(l, t) in &[(1.0, 0.01), (2.0, 0.3), (0.5, 5.0), (3.0, 1e-4)] {
            let n = theta(ThetaKind::Neumann, l, t, ThetaMode::Auto).unwrap();
            let d = theta(ThetaKind::Dirichlet, l, t, ThetaMode::Auto).unwrap();
            assert!((n - d - 1.0).abs() < 1e-14 * n.max(1.0));
        }
    }

    #[test]
    fn dirichlet_small_time() {
        let t = 0.01;
        let d = theta(ThetaKind::Dirichlet, 1.0, t, ThetaMode::Auto).unwrap();
        let leading = 1.0 / (2.0 * (PI * t).sqrt()) - 0.5;
        assert!((d - leading).abs() < 1e-12);
    }

    #[test]
    fn dirichlet_large_time_first_term() {
        let d = theta(ThetaKind::Dirichlet, 1.0, 10.0, ThetaMode::Auto).unwrap();
        let first = (-10.0 * PI * PI).exp();
        assert!(d < 1e-42);
        assert!(((d - first) / first).abs() < 1e-12);
    }

    #[test]
    fn direct_and_dual_agree_on_overlap() {
        for &l in &[0.5, 1.0, 2.0, 7.0] {
            for i in 0..=20 {
                let x = 0.2 * (25.0f64).powf(i as f64 / 20.0);
                let t = x * l * l / PI;
                for kind in [ThetaKind::Dirichlet, ThetaKind::Neumann] {
                    let a = theta(kind, l, t, ThetaMode::DirectSeries).unwrap();
                    let b = theta(kind, l, t, ThetaMode::JacobiDual).unwrap();
                    assert!((a - b).abs() < 1e-12 * a.abs().max(1.0), "l={l} t={t}");
                }
            }
        }
    }

    #[test]
    fn auto_term_counts_stay_small() {
        for &x in &[0.2, 0.5, 1.0, 1.5, 5.0] {
            let v = theta_with_bound(ThetaKind::Dirichlet, 1.0, x / PI, ThetaMode::Auto).unwrap();
            assert!(v.terms <= 20);
            assert!(v.tail_bound <= 1e-13);
        }
    }

    #[test]
    fn theta_rejects_bad_parameters() {
        assert!(theta(ThetaKind::Dirichlet, 0.0, 1.0, ThetaMode::Auto).is_err());
        assert!(theta(ThetaKind::Neumann, 1.0, -1.0, ThetaMode::Auto).is_err());
    }

    #[test]
    fn zeta_values() {
        assert_eq!(zeta_negative_odd(1).unwrap(), Rational64::new(-1, 12));
        assert_eq!(zeta_negative_odd(3).unwrap(), Rational64::new(1, 120));
        assert_eq!(zeta_negative_odd(5).unwrap(), Rational64::new(-1, 252));
        assert_eq!(zeta_negative_odd(7).unwrap(), Rational64::new(1, 240));
        assert!(zeta_negative_odd(2).is_err());
        assert!(zeta_negative_odd(9).is_err());
    }

    #[test]
    fn upper_gamma_limits() {
        assert!((upper_gamma_three_halves(0.0) - PI.sqrt() / 2.0).abs() < 1e-15);
        // Gamma(3/2, z) ~ sqrt(z) e^{-z} (1 + 1/(2z))
        let z: f64 = 50.0;
        let approx = z.sqrt() * (-z).exp() * (1.0 + 0.5 / z - 0.25 / (z * z));
        assert!(((upper_gamma_three_halves(z) - approx) / approx).abs() < 1e-4);
    }
}
