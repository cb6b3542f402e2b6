//! Scalar Dirichlet parallel plates.
//!
//! Regulated traces on the finite box `T^2_L x [0, a]`, the large-area
//! per-unit-area trace, the finite part by fitting and by zeta continuation,
//! and the comparison coefficient against the flat Green reference energy.

use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::boxint::{self, DeltaBudget, DeltaMethod};
use crate::error::{ensure_positive, Error, Result};
use crate::heattrace::{finite_part, log_grid, regulated_trace, sample_grid, FinitePartModel, FinitePartSpec, HeatTraceSample};
use crate::specfun::{gamma, upper_gamma_three_halves, zeta_negative_odd};
use crate::spectrum::{enumerate, BoxSpec, EigenStream};

/// Tail allowance, relative to the value, when choosing a cutoff automatically.
const AUTO_CUTOFF_RATIO: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Lateral {
    /// Periodic lateral torus of side `period`; area `period^2`.
    FiniteBox { period: f64 },
    /// `n x n` reference cells of side `a`; area `n^2 a^2`.
    Cells { n: u32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlateConfig {
    pub a: f64,
    pub lateral: Lateral,
    pub channels: usize,
    pub tau_grid: Vec<f64>,
}

impl PlateConfig {
    pub fn finite_box(a: f64, period: f64) -> Result<Self> {
        ensure_positive("a", a)?;
        ensure_positive("L", period)?;
        Ok(Self { a, lateral: Lateral::FiniteBox { period }, channels: 1, tau_grid: default_tau_grid(a) })
    }

    pub fn cells(a: f64, n: u32, channels: usize) -> Result<Self> {
        ensure_positive("a", a)?;
        if n == 0 || channels == 0 {
            return Err(Error::InvalidParameter("cell count and channel count must be positive".into()));
        }
        Ok(Self { a, lateral: Lateral::Cells { n }, channels, tau_grid: default_tau_grid(a) })
    }

    pub fn area(&self) -> f64 {
        match self.lateral {
            Lateral::FiniteBox { period } => period * period,
            Lateral::Cells { n } => (n as f64 * self.a).powi(2),
        }
    }
}

/// Regulator samples for the plate fit: 12 log points in `[1e-3, 1e-2] a^2`.
pub fn default_tau_grid(a: f64) -> Vec<f64> {
    log_grid(1e-3 * a * a, 1e-2 * a * a, 12)
}

/// Divergent powers of the per-area trace.
pub const PLATE_EXPONENTS: [f64; 2] = [2.0, 1.5];
/// Positive powers of the per-area trace kept in the fit.
pub const PLATE_POSITIVE_POWERS: [f64; 3] = [1.0, 2.0, 3.0];

/// Fit prescription for the per-area plate trace.
pub fn plate_fit_spec() -> FinitePartSpec {
    FinitePartSpec {
        exponents: PLATE_EXPONENTS.to_vec(),
        positive_powers: PLATE_POSITIVE_POWERS.to_vec(),
        ..FinitePartSpec::default()
    }
}

/// Spectrum of the finite plate box with a cutoff large enough that the
/// heat-weighted tail at `tau` is below `1e-12` of the trace.
pub fn finite_box_stream(a: f64, period: f64, tau: f64) -> Result<EigenStream> {
    ensure_positive("tau", tau)?;
    let spec = BoxSpec::plate(period, a)?;
    let lowest = spec.lowest_eigenvalue();
    // the lowest mode alone bounds the trace from below
    let floor = 0.5 * lowest.sqrt() * (-tau * lowest).exp();
    let mut cutoff = lowest + 10.0 / tau;
    while spec.tail_bound(cutoff, tau)? > 2.0 * AUTO_CUTOFF_RATIO * floor {
        cutoff *= 1.2;
    }
    enumerate(&spec, cutoff)
}

/// `(1/2) sum lambda^{1/2} exp(-tau lambda)` on `T^2_L x [0, a]`.
pub fn finite_box_trace(config: &PlateConfig, tau: f64) -> Result<HeatTraceSample> {
    let period = match config.lateral {
        Lateral::FiniteBox { period } => period,
        Lateral::Cells { .. } => {
            return Err(Error::InvalidParameter("finite_box_trace needs a finite-box configuration".into()))
        }
    };
    regulated_trace(&finite_box_stream(config.a, period, tau)?, tau)
}

/// Large-area trace per unit area,
/// `(1 / (8 pi)) tau^{-3/2} sum_{n >= 1} Gamma(3/2, tau pi^2 n^2 / a^2)`.
pub fn per_area_trace(a: f64, tau: f64) -> Result<HeatTraceSample> {
    ensure_positive("a", a)?;
    ensure_positive("tau", tau)?;
    let c = tau * PI * PI / (a * a);
    // Gamma(3/2, z) <= (sqrt z + 1 / (2 sqrt z)) e^{-z}
    let envelope = |n: f64| {
        let z = c * n * n;
        (z.sqrt() + 0.5 / z.sqrt()) * (-z).exp()
    };
    let mut sum = 0.0;
    let mut n = 1u64;
    loop {
        sum += upper_gamma_three_halves(c * (n * n) as f64);
        let next = envelope((n + 1) as f64);
        // successive envelope ratios beyond n + 1 are at most q
        let q = 2.0 * (-c * (2 * n + 3) as f64).exp();
        if q < 0.5 && next <= 1e-17 * sum {
            let pref = tau.powf(-1.5) / (8.0 * PI);
            return Ok(HeatTraceSample { tau, value: pref * sum, tail_bound: pref * next / (1.0 - q) });
        }
        n += 1;
        if n > 100_000_000 {
            return Err(Error::InvalidParameter(format!("per-area series at tau = {tau:e} does not converge")));
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CasimirMethod {
    HeatFit,
    ZetaRoute,
}

/// Finite part of the per-area trace fitted on `taus`.
pub fn plate_finite_part(a: f64, taus: &[f64]) -> Result<(Vec<HeatTraceSample>, FinitePartModel)> {
    let samples = sample_grid(taus, |t| per_area_trace(a, t))?;
    let model = finite_part(&samples, &plate_fit_spec())?;
    Ok((samples, model))
}

/// Zeta-continued plate energy per unit area,
/// `(1 / (8 pi)) (Gamma(-3/2) / Gamma(-1/2)) (pi / a)^3 zeta(-3) N`.
pub fn zeta_route(a: f64, channels: usize) -> Result<f64> {
    ensure_positive("a", a)?;
    let ratio = gamma(-1.5)? / gamma(-0.5)?;
    let z = zeta_negative_odd(3)?;
    let zeta = *z.numer() as f64 / *z.denom() as f64;
    Ok(channels as f64 * ratio * (PI / a).powi(3) * zeta / (8.0 * PI))
}

/// Scalar Dirichlet plate energy per unit area (`hbar c = 1`).
pub fn casimir_per_area(a: f64, method: CasimirMethod, channels: usize) -> Result<f64> {
    ensure_positive("a", a)?;
    if channels == 0 {
        return Err(Error::InvalidParameter("at least one channel is required".into()));
    }
    match method {
        CasimirMethod::HeatFit => {
            let (_, model) = plate_finite_part(a, &default_tau_grid(a))?;
            Ok(channels as f64 * model.c0)
        }
        CasimirMethod::ZetaRoute => zeta_route(a, channels),
    }
}

/// `-(n^2 / a) N pi^2 / 1440`, the plate energy over area `n^2 a^2`.
pub fn normalized_energy(n: u32, a: f64, channels: usize) -> Result<f64> {
    ensure_positive("a", a)?;
    let n = n as f64;
    Ok(-(n * n / a) * channels as f64 * PI * PI / 1440.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThetaSource {
    ClosedForm,
    Pipeline,
}

/// Relative agreement required between the pipeline and closed-form coefficient.
pub const PIPELINE_TOL: f64 = 5e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub alpha: f64,
    pub channels: usize,
    pub source: ThetaSource,
    /// The coefficient from the requested source.
    pub theta_bar: f64,
    pub delta_used: f64,
    pub pipeline_value: f64,
    pub closed_value: f64,
    pub tolerance: f64,
    pub agree: bool,
}

/// `Delta(alpha)`: the closed form at the cube, the t-integral otherwise.
pub fn reference_delta(alpha: f64) -> Result<f64> {
    if alpha == 1.0 {
        return Ok(boxint::delta_cube_closed_form());
    }
    let budget = DeltaBudget { mc_pairs: 0, ..DeltaBudget::default() };
    Ok(boxint::delta_alpha(alpha, DeltaMethod::TIntegral, &budget)?.value())
}

/// Comparison coefficient `N pi^2 / (1440 Delta(alpha))`, from the closed form
/// and from the fitted finite part over the unit reference energy.
pub fn theta_bar(alpha: f64, channels: usize, source: ThetaSource) -> Result<CalibrationResult> {
    ensure_positive("alpha", alpha)?;
    if channels == 0 {
        return Err(Error::InvalidParameter("at least one channel is required".into()));
    }
    let delta = reference_delta(alpha)?;
    let closed = channels as f64 * PI * PI / (1440.0 * delta);
    let (n, a) = (1u32, 1.0);
    let energy = casimir_per_area(a, CasimirMethod::HeatFit, channels)? * (n as f64 * a).powi(2);
    let pipeline = energy / boxint::reference_energy(1.0, n, a, delta)?;
    let agree = ((pipeline - closed) / closed).abs() <= PIPELINE_TOL;
    let theta_bar = match source {
        ThetaSource::ClosedForm => closed,
        ThetaSource::Pipeline => pipeline,
    };
    Ok(CalibrationResult {
        alpha,
        channels,
        source,
        theta_bar,
        delta_used: delta,
        pipeline_value: pipeline,
        closed_value: closed,
        tolerance: PIPELINE_TOL,
        agree,
    })
}

pub fn write_trace_csv<W: Write>(out: W, samples: &[HeatTraceSample]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["tau", "trace", "tail_bound"])?;
    for s in samples {
        w.write_record([s.tau.to_string(), s.value.to_string(), s.tail_bound.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_theta_csv<W: Write>(out: W, rows: &[CalibrationResult]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["alpha", "channels", "theta_bar_closed", "theta_bar_pipeline", "delta"])?;
    for r in rows {
        w.write_record([
            r.alpha.to_string(),
            r.channels.to_string(),
            r.closed_value.to_string(),
            r.pipeline_value.to_string(),
            r.delta_used.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
