//! Regulated traces, mixed-cell heat traces and finite-part extraction.
//!
//! The finite part of a regulated trace is the constant term of its small-`tau`
//! expansion once the divergent powers (and optionally a logarithm) are
//! removed. Numerically this is a weighted linear least-squares fit in the
//! basis `{tau^-beta, tau^eta, log(mu^2 tau), 1}`, with a second fit on a
//! nested window as a stability check.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_positive, Error, Result};
use crate::specfun::{theta, ThetaKind, ThetaMode};
use crate::spectrum::{check_area_constraint, EigenStream};
use crate::sum::compensated_sum;

/// Largest admissible ratio of tail bound to trace value.
pub const CUTOFF_RATIO: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeatTraceSample {
    pub tau: f64,
    pub value: f64,
    /// Certified bound on the truncation error of `value`.
    pub tail_bound: f64,
}

/// `(1/2) sum lambda^{1/2} exp(-tau lambda)` over the stream.
pub fn regulated_trace(stream: &EigenStream, tau: f64) -> Result<HeatTraceSample> {
    ensure_positive("tau", tau)?;
    let value = 0.5
        * compensated_sum(
            stream
                .modes
                .iter()
                .map(|m| m.multiplicity as f64 * m.value.sqrt() * (-tau * m.value).exp()),
        );
    let tail_bound = 0.5 * stream.tail_bound(tau)?;
    if tail_bound > CUTOFF_RATIO * value {
        return Err(Error::InsufficientCutoff { tail: tail_bound, value, ratio: CUTOFF_RATIO });
    }
    Ok(HeatTraceSample { tau, value, tail_bound })
}

/// `Theta_N(l1; t) Theta_N(l2; t) Theta_D(a; t)`.
pub fn mixed_cell_heat_trace(l1: f64, l2: f64, a: f64, t: f64) -> Result<f64> {
    let n1 = theta(ThetaKind::Neumann, l1, t, ThetaMode::Auto)?;
    let n2 = theta(ThetaKind::Neumann, l2, t, ThetaMode::Auto)?;
    let d = theta(ThetaKind::Dirichlet, a, t, ThetaMode::Auto)?;
    Ok(n1 * n2 * d)
}

/// `B(l1, l2, a) = (a (l1 + l2) - a^2) / (8 pi)` on the family `l1 l2 = a^2`.
pub fn b_coefficient(l1: f64, l2: f64, a: f64) -> Result<f64> {
    check_area_constraint(l1, l2, a)?;
    Ok((a * (l1 + l2) - a * a) / (8.0 * PI))
}

/// Volume coefficient `l1 l2 a / (8 pi^{3/2})` of `t^{-3/2}`.
pub fn volume_coefficient(l1: f64, l2: f64, a: f64) -> f64 {
    l1 * l2 * a / (8.0 * PI.powf(1.5))
}

/// `n` logarithmically spaced points from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (l0, l1) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| match i {
            0 => lo,
            i if i == n - 1 => hi,
            i => (l0 + (l1 - l0) * i as f64 / (n - 1) as f64).exp(),
        })
        .collect()
}

/// Evaluates `f` on every grid point in parallel, preserving order.
pub fn sample_grid<F>(taus: &[f64], f: F) -> Result<Vec<HeatTraceSample>>
where
    F: Fn(f64) -> Result<HeatTraceSample> + Sync,
{
    taus.par_iter().map(|&t| f(t)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpansionFit {
    /// Coefficient of `t^{-3/2}`.
    pub volume: f64,
    /// Coefficient of `t^{-1}`.
    pub boundary: f64,
    /// Coefficient of `t^{-1/2}`.
    pub edge: f64,
    pub constant: f64,
    pub window: (f64, f64),
    pub residual: f64,
}

/// Small-`t` coefficients of the mixed-cell heat trace by a fit over
/// `t` in `[1e-4, 1e-3]`.
///
/// The product of the theta asymptotics is a polynomial in `t^{-1/2}` up to
/// exponentially small terms, so the basis `{t^{-3/2}, t^{-1}, t^{-1/2}, 1}`
/// is exact there.
pub fn mixed_cell_expansion(l1: f64, l2: f64, a: f64) -> Result<ExpansionFit> {
    let scale = l1.min(l2).min(a).powi(2);
    let ts = log_grid(1e-4 * scale, 1e-3 * scale, 16);
    let samples = ts
        .iter()
        .map(|&t| Ok(HeatTraceSample { tau: t, value: mixed_cell_heat_trace(l1, l2, a, t)?, tail_bound: 0.0 }))
        .collect::<Result<Vec<_>>>()?;
    let spec = FinitePartSpec { exponents: vec![1.5, 1.0, 0.5], stability_tol: 1e-6, ..FinitePartSpec::default() };
    let fit = finite_part(&samples, &spec)?;
    Ok(ExpansionFit {
        volume: fit.divergent[0],
        boundary: fit.divergent[1],
        edge: fit.divergent[2],
        constant: fit.c0,
        window: fit.window,
        residual: fit.residual,
    })
}

/// Fit prescription for [`finite_part`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FinitePartSpec {
    /// Divergent powers `beta` (terms `tau^{-beta}`).
    pub exponents: Vec<f64>,
    /// Vanishing powers `eta` (terms `tau^{eta}`).
    pub positive_powers: Vec<f64>,
    pub include_log: bool,
    /// Reference scale in `log(mu^2 tau)`; irrelevant without the log term.
    pub mu: f64,
    /// Finite local counterterm added to `c0`.
    pub counterterm: f64,
    /// Relative agreement required between full and nested window `c0`.
    pub stability_tol: f64,
    /// Absolute floor for the stability comparison.
    pub stability_floor: f64,
    /// Largest admissible condition number of the normalized design.
    pub max_condition: f64,
    /// Return an unstable fit instead of failing.
    pub allow_unstable: bool,
}

impl Default for FinitePartSpec {
    fn default() -> Self {
        Self {
            exponents: Vec::new(),
            positive_powers: Vec::new(),
            include_log: false,
            mu: 1.0,
            counterterm: 0.0,
            stability_tol: 1e-3,
            stability_floor: 1e-12,
            max_condition: 1e12,
            allow_unstable: false,
        }
    }
}

impl FinitePartSpec {
    pub fn with_exponents(exponents: &[f64]) -> Self {
        Self { exponents: exponents.to_vec(), ..Self::default() }
    }

    fn basis_len(&self) -> usize {
        self.exponents.len() + self.positive_powers.len() + usize::from(self.include_log) + 1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinitePartModel {
    pub exponents: Vec<f64>,
    pub positive_powers: Vec<f64>,
    pub include_log: bool,
    pub mu: f64,
    /// `a_beta`, aligned with `exponents`.
    pub divergent: Vec<f64>,
    /// Aligned with `positive_powers`.
    pub vanishing: Vec<f64>,
    pub log_coefficient: Option<f64>,
    pub counterterm: f64,
    /// Finite part including the counterterm.
    pub c0: f64,
    /// Finite part from the nested window, including the counterterm.
    pub nested_c0: f64,
    pub stable: bool,
    /// Weighted residual 2-norm.
    pub residual: f64,
    pub condition_number: f64,
    pub window: (f64, f64),
    pub samples: usize,
}

struct Fit {
    coefficients: Vec<f64>,
    residual: f64,
    condition: f64,
}

fn fit_window(samples: &[HeatTraceSample], spec: &FinitePartSpec) -> Result<Fit> {
    let k = spec.basis_len();
    let rows = samples.len();
    let wpow = spec.exponents.iter().copied().fold(0.0, f64::max);
    let mut design = DMatrix::<f64>::zeros(rows, k);
    let mut rhs = DVector::<f64>::zeros(rows);
    for (i, s) in samples.iter().enumerate() {
        let w = s.tau.powf(wpow);
        let mut j = 0;
        for &b in &spec.exponents {
            design[(i, j)] = w * s.tau.powf(-b);
            j += 1;
        }
        for &e in &spec.positive_powers {
            design[(i, j)] = w * s.tau.powf(e);
            j += 1;
        }
        if spec.include_log {
            design[(i, j)] = w * (spec.mu * spec.mu * s.tau).ln();
            j += 1;
        }
        design[(i, j)] = w;
        rhs[i] = w * s.value;
    }
    let norms: Vec<f64> = (0..k).map(|j| design.column(j).amax()).collect();
    let mut scaled = design;
    for (j, &n) in norms.iter().enumerate() {
        if n == 0.0 {
            return Err(Error::IllConditioned(f64::INFINITY));
        }
        scaled.column_mut(j).scale_mut(1.0 / n);
    }
    let svd = scaled.clone().svd(true, true);
    let sv = &svd.singular_values;
    let condition = sv.max() / sv.min();
    if !(condition <= spec.max_condition) {
        return Err(Error::IllConditioned(condition));
    }
    let y = svd.solve(&rhs, 0.0).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let residual = (&scaled * &y - &rhs).norm();
    let coefficients = y.iter().zip(&norms).map(|(c, n)| c / n).collect();
    Ok(Fit { coefficients, residual, condition })
}

/// Extracts the finite part of `samples` under the prescription `spec`.
///
/// Samples must span at least a decade in `tau`, number at least two more
/// than the basis, and carry tail bounds within [`CUTOFF_RATIO`] of their
/// values. The nested window drops samples above half the largest `tau`.
pub fn finite_part(samples: &[HeatTraceSample], spec: &FinitePartSpec) -> Result<FinitePartModel> {
    let k = spec.basis_len();
    if samples.len() < k + 2 {
        return Err(Error::InvalidParameter(format!(
            "finite part with {k} basis functions needs at least {} samples, got {}",
            k + 2,
            samples.len()
        )));
    }
    if spec.include_log {
        ensure_positive("mu", spec.mu)?;
    }
    for s in samples {
        ensure_positive("tau", s.tau)?;
        if s.tail_bound > CUTOFF_RATIO * s.value.abs() {
            return Err(Error::InsufficientCutoff { tail: s.tail_bound, value: s.value, ratio: CUTOFF_RATIO });
        }
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.tau.total_cmp(&b.tau));
    let (lo, hi) = (sorted[0].tau, sorted[sorted.len() - 1].tau);
    if hi < 10.0 * lo * (1.0 - 1e-12) {
        return Err(Error::InvalidParameter(format!(
            "fit window [{lo:e}, {hi:e}] spans less than one decade"
        )));
    }
    let full = fit_window(&sorted, spec)?;
    let nested_samples: Vec<HeatTraceSample> =
        sorted.iter().copied().filter(|s| s.tau <= 0.5 * hi * (1.0 + 1e-12)).collect();
    if nested_samples.len() < k {
        return Err(Error::InvalidParameter(format!(
            "nested window keeps {} samples, fewer than the {k} basis functions",
            nested_samples.len()
        )));
    }
    let nested = fit_window(&nested_samples, spec)?;

    let nd = spec.exponents.len();
    let np = spec.positive_powers.len();
    let c0 = full.coefficients[k - 1] + spec.counterterm;
    let nested_c0 = nested.coefficients[k - 1] + spec.counterterm;
    let stable = (c0 - nested_c0).abs() <= spec.stability_tol * c0.abs() + spec.stability_floor;
    if !stable && !spec.allow_unstable {
        return Err(Error::Unstable { full: c0, nested: nested_c0 });
    }
    Ok(FinitePartModel {
        exponents: spec.exponents.clone(),
        positive_powers: spec.positive_powers.clone(),
        include_log: spec.include_log,
        mu: spec.mu,
        divergent: full.coefficients[..nd].to_vec(),
        vanishing: full.coefficients[nd..nd + np].to_vec(),
        log_coefficient: spec.include_log.then(|| full.coefficients[nd + np]),
        counterterm: spec.counterterm,
        c0,
        nested_c0,
        stable,
        residual: full.residual,
        condition_number: full.condition,
        window: (lo, hi),
        samples: sorted.len(),
    })
}
