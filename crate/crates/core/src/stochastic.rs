//! The heat-regularized Gaussian source and its quadratic Green energy.
//!
//! Components are `sigma_j = sqrt(hbar_c / g) lambda_j^{3/4} exp(-tau lambda_j / 2) xi_j`
//! and the regulated energy is `U = (g/2) sum |sigma_j|^2 / lambda_j`, whose
//! expectation is the regulated trace `(hbar_c / 2) sum lambda^{1/2} exp(-tau lambda)`
//! per channel.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_positive, Error, Result};
use crate::mc::{self, MCEstimate, McRng};
use crate::spectrum::EigenStream;
use crate::sum::compensated_sum;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum NoiseChannel {
    /// `xi ~ N(0, 1)`, so `Var(xi^2) = 2`.
    #[default]
    Real,
    /// `xi = (x + i y) / sqrt(2)` with `x, y ~ N(0, 1)`: `E|xi|^2 = 1`, `Var|xi|^2 = 1`.
    Complex,
}

impl NoiseChannel {
    /// Real numbers drawn per mode and channel.
    pub fn width(self) -> usize {
        match self {
            NoiseChannel::Real => 1,
            NoiseChannel::Complex => 2,
        }
    }

    /// `Var(|xi|^2)`.
    pub fn fourth_moment_excess(self) -> f64 {
        match self {
            NoiseChannel::Real => 2.0,
            NoiseChannel::Complex => 1.0,
        }
    }
}

/// Brane normalization of the codimension-three mediator at unit ambient
/// coupling, `1 / (6 pi^2)`.
pub fn default_g() -> f64 {
    1.0 / (6.0 * PI * PI)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceSpec {
    pub stream: EigenStream,
    pub tau: f64,
    pub g: f64,
    pub hbar_c: f64,
    pub channel: NoiseChannel,
    /// Number of independent scalar channels.
    pub channels: usize,
}

impl SourceSpec {
    pub fn new(stream: EigenStream, tau: f64) -> Result<Self> {
        let spec = Self { stream, tau, g: default_g(), hbar_c: 1.0, channel: NoiseChannel::Real, channels: 1 };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_g(mut self, g: f64) -> Result<Self> {
        self.g = g;
        self.validate().map(|_| self)
    }

    pub fn with_channel(mut self, channel: NoiseChannel) -> Self {
        self.channel = channel;
        self
    }

    pub fn with_channels(mut self, channels: usize) -> Result<Self> {
        self.channels = channels;
        self.validate().map(|_| self)
    }

    pub fn validate(&self) -> Result<()> {
        ensure_positive("tau", self.tau)?;
        ensure_positive("g", self.g)?;
        ensure_positive("hbar_c", self.hbar_c)?;
        if self.channels == 0 {
            return Err(Error::InvalidParameter("at least one channel is required".into()));
        }
        Ok(())
    }

    /// Real noise variables consumed by one draw.
    pub fn noise_len(&self) -> usize {
        self.stream.mode_count() as usize * self.channels * self.channel.width()
    }

    /// `(lambda_j, lambda_j^{3/4} exp(-tau lambda_j / 2))` for every mode and channel.
    fn profile(&self) -> Vec<(f64, f64)> {
        let mut out = Vec::with_capacity(self.stream.mode_count() as usize * self.channels);
        for l in self.stream.eigenvalues() {
            let w = l.powf(0.75) * (-0.5 * self.tau * l).exp();
            out.extend(std::iter::repeat_n((l, w), self.channels));
        }
        out
    }
}

/// Draws the standard-normal noise for one realization.
pub fn draw_noise(spec: &SourceSpec, rng: &mut McRng) -> Vec<f64> {
    (0..spec.noise_len()).map(|_| rng.sample(StandardNormal)).collect()
}

/// Components `sigma_j` for prescribed noise.
///
/// Modes are listed with multiplicity and, within a mode, by channel. With
/// the complex channel each component contributes two entries, its real and
/// imaginary parts.
pub fn sigma_components(spec: &SourceSpec, noise: &[f64]) -> Result<Vec<f64>> {
    spec.validate()?;
    if noise.len() != spec.noise_len() {
        return Err(Error::InvalidParameter(format!(
            "expected {} noise values, got {}",
            spec.noise_len(),
            noise.len()
        )));
    }
    let amp = (spec.hbar_c / spec.g).sqrt();
    let width = spec.channel.width();
    let norm = match spec.channel {
        NoiseChannel::Real => 1.0,
        NoiseChannel::Complex => std::f64::consts::FRAC_1_SQRT_2,
    };
    let mut out = Vec::with_capacity(noise.len());
    for ((_, w), xi) in spec.profile().into_iter().zip(noise.chunks(width)) {
        for &x in xi {
            out.push(amp * w * (norm * x));
        }
    }
    Ok(out)
}

pub fn sample_sigma_components(spec: &SourceSpec, rng: &mut McRng) -> Result<Vec<f64>> {
    sigma_components(spec, &draw_noise(spec, rng))
}

/// `U = (g/2) sum |sigma_j|^2 / lambda_j` from components laid out as in
/// [`sigma_components`].
pub fn interaction_energy(spec: &SourceSpec, sigma: &[f64]) -> Result<f64> {
    if sigma.len() != spec.noise_len() {
        return Err(Error::InvalidParameter(format!(
            "expected {} components, got {}",
            spec.noise_len(),
            sigma.len()
        )));
    }
    let width = spec.channel.width();
    let s = compensated_sum(
        spec.profile()
            .into_iter()
            .zip(sigma.chunks(width))
            .map(|((l, _), c)| c.iter().map(|x| x * x).sum::<f64>() / l),
    );
    Ok(0.5 * spec.g * s)
}

/// `U` for prescribed noise, computed through the components.
pub fn energy_from_noise(spec: &SourceSpec, noise: &[f64]) -> Result<f64> {
    interaction_energy(spec, &sigma_components(spec, noise)?)
}

pub fn sample_u(spec: &SourceSpec, rng: &mut McRng) -> Result<f64> {
    energy_from_noise(spec, &draw_noise(spec, rng))
}

/// `E[U] = channels (hbar_c / 2) sum lambda^{1/2} exp(-tau lambda)`.
pub fn expected_energy(spec: &SourceSpec) -> Result<f64> {
    spec.validate()?;
    let s = compensated_sum(
        spec.stream
            .modes
            .iter()
            .map(|m| m.multiplicity as f64 * m.value.sqrt() * (-spec.tau * m.value).exp()),
    );
    Ok(spec.channels as f64 * 0.5 * spec.hbar_c * s)
}

/// `Var(U) = channels (hbar_c / 2)^2 Var(|xi|^2) sum lambda exp(-2 tau lambda)`.
pub fn energy_variance(spec: &SourceSpec) -> Result<f64> {
    spec.validate()?;
    let s = compensated_sum(
        spec.stream
            .modes
            .iter()
            .map(|m| m.multiplicity as f64 * m.value * (-2.0 * spec.tau * m.value).exp()),
    );
    Ok(spec.channels as f64 * 0.25 * spec.hbar_c * spec.hbar_c * spec.channel.fourth_moment_excess() * s)
}

/// Monte Carlo estimate of `E[U]` from `n` draws.
///
/// Each draw evaluates `(hbar_c / 2) sum lambda^{1/2} exp(-tau lambda) |xi|^2`
/// directly, which equals [`energy_from_noise`] up to rounding because `g`
/// cancels.
pub fn mc_estimate(spec: &SourceSpec, n: u64, seed: u64, workers: usize) -> Result<MCEstimate> {
    spec.validate()?;
    let weights: Vec<f64> = spec
        .profile()
        .into_iter()
        .map(|(l, _)| 0.5 * spec.hbar_c * l.sqrt() * (-spec.tau * l).exp())
        .collect();
    let channel = spec.channel;
    mc::estimate(n, seed, workers, |rng| {
        let mut acc = 0.0;
        for &w in &weights {
            let q = match channel {
                NoiseChannel::Real => {
                    let x: f64 = rng.sample(StandardNormal);
                    x * x
                }
                NoiseChannel::Complex => {
                    let x: f64 = rng.sample(StandardNormal);
                    let y: f64 = rng.sample(StandardNormal);
                    0.5 * (x * x + y * y)
                }
            };
            acc += w * q;
        }
        acc
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::heattrace::regulated_trace;
    use crate::spectrum::{enumerate, BoundaryCondition, BoxSpec};

    fn cube_spec(tau: f64) -> SourceSpec {
        let b = BoxSpec::cube(1.0, BoundaryCondition::Dirichlet).unwrap();
        SourceSpec::new(enumerate(&b, 200.0).unwrap(), tau).unwrap()
    }

    fn ten_modes() -> EigenStream {
        EigenStream::from_values(&[1.0, 1.5, 2.0, 2.0, 3.0, 4.5, 5.0, 7.0, 8.0, 11.0]).unwrap()
    }

    fn ulps(a: f64, b: f64) -> f64 {
        (a - b).abs() / (f64::EPSILON * a.abs().max(b.abs()))
    }

    #[test]
    fn zero_noise_gives_zero() {
        let spec = cube_spec(0.5);
        let zeros = vec![0.0; spec.noise_len()];
        assert!(sigma_components(&spec, &zeros).unwrap().iter().all(|&x| x == 0.0));
        assert_eq!(energy_from_noise(&spec, &zeros).unwrap(), 0.0);
    }

    #[test]
    fn unit_noise_gives_trace() {
        let spec = cube_spec(0.5);
        let ones = vec![1.0; spec.noise_len()];
        let u = energy_from_noise(&spec, &ones).unwrap();
        let trace = regulated_trace(&spec.stream, 0.5).unwrap().value;
        assert!((u - trace).abs() < 1e-14 * trace);
    }

    #[test]
    fn g_scaling_of_components() {
        let spec = cube_spec(0.3);
        let noise: Vec<f64> = (0..spec.noise_len()).map(|i| (i as f64 * 0.7).sin()).collect();
        let a = sigma_components(&spec, &noise).unwrap();
        let b = sigma_components(&spec.clone().with_g(4.0 * spec.g).unwrap(), &noise).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((y - 0.5 * x).abs() <= 4.0 * f64::EPSILON * x.abs());
        }
    }

    #[test]
    fn g_cancels_in_energy() {
        let spec = cube_spec(0.5);
        let spec10 = spec.clone().with_g(10.0 * spec.g).unwrap();
        let mut rng = mc::worker_rng(11, 0);
        let mut worst: f64 = 0.0;
        for _ in 0..2000 {
            let noise = draw_noise(&spec, &mut rng);
            let a = energy_from_noise(&spec, &noise).unwrap();
            let b = energy_from_noise(&spec10, &noise).unwrap();
            worst = worst.max(ulps(a, b));
        }
        assert!(worst <= 4.0, "{worst} ulp");
    }

    #[test]
    fn samples_are_nonnegative() {
        for channel in [NoiseChannel::Real, NoiseChannel::Complex] {
            let spec = cube_spec(0.2).with_channel(channel);
            let mut rng = mc::worker_rng(5, 3);
            for _ in 0..500 {
                assert!(sample_u(&spec, &mut rng).unwrap() >= 0.0);
            }
        }
    }

    #[test]
    fn component_variance() {
        let spec = SourceSpec::new(ten_modes(), 0.4).unwrap();
        let n = 100_000;
        let mut rng = mc::worker_rng(2024, 0);
        let k = spec.noise_len();
        let mut sumsq = vec![0.0; k];
        for _ in 0..n {
            for (acc, s) in sumsq.iter_mut().zip(sample_sigma_components(&spec, &mut rng).unwrap()) {
                *acc += s * s;
            }
        }
        for (j, l) in spec.stream.eigenvalues().enumerate() {
            let var = spec.hbar_c / spec.g * l.powf(1.5) * (-spec.tau * l).exp();
            let est = sumsq[j] / n as f64;
            let stderr = var * (2.0 / n as f64).sqrt();
            assert!((est - var).abs() <= 3.0 * stderr, "mode {j}: {est} vs {var}");
        }
    }

    #[test]
    fn trace_identity_on_cube() {
        let spec = cube_spec(0.5);
        let e = mc_estimate(&spec, 100_000, 42, 4).unwrap();
        let trace = regulated_trace(&spec.stream, 0.5).unwrap().value;
        assert!(e.within_sigma(trace, 3.0), "z = {}", e.z_score(trace));
    }

    /// Brute-force `E[U^2] - E[U]^2` from `E[xi^2] = 1`, `E[xi^4] = 3` and
    /// independence across modes.
    fn variance_oracle(weights: &[f64]) -> f64 {
        let mut second = 0.0;
        for (i, a) in weights.iter().enumerate() {
            for (j, b) in weights.iter().enumerate() {
                second += a * b * if i == j { 3.0 } else { 1.0 };
            }
        }
        let first: f64 = weights.iter().sum();
        second - first * first
    }

    #[test]
    fn variance_matches_fourth_moment_oracle() {
        let spec = SourceSpec::new(ten_modes(), 0.3).unwrap();
        let w: Vec<f64> = spec.stream.eigenvalues().map(|l| 0.5 * l.sqrt() * (-0.3 * l).exp()).collect();
        let oracle = variance_oracle(&w);
        let closed = energy_variance(&spec).unwrap();
        assert!((oracle - closed).abs() < 1e-13 * closed);
        let e = mc_estimate(&spec, 1_000_000, 7, 4).unwrap();
        assert!((e.variance / closed - 1.0).abs() < 0.05);
    }

    #[test]
    fn deterministic_given_seed() {
        let spec = cube_spec(0.5);
        let a = mc_estimate(&spec, 20_000, 9, 3).unwrap();
        let b = mc_estimate(&spec, 20_000, 9, 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn expectation_decreases_in_tau() {
        let mut prev = f64::INFINITY;
        for i in 0..15 {
            let e = expected_energy(&cube_spec(0.1 + 0.1 * i as f64)).unwrap();
            assert!(e < prev);
            prev = e;
        }
    }

    #[test]
    fn channels_add() {
        let spec = SourceSpec::new(ten_modes(), 0.3).unwrap();
        let single = expected_energy(&spec).unwrap();
        for n in [2usize, 3] {
            let multi = spec.clone().with_channels(n).unwrap();
            assert!((expected_energy(&multi).unwrap() - n as f64 * single).abs() < 1e-14 * single * n as f64);
            let e = mc_estimate(&multi, 200_000, 13, 4).unwrap();
            assert!(e.within_sigma(n as f64 * single, 3.0));
        }
    }

    #[test]
    fn complex_channel_moments() {
        let spec = SourceSpec::new(ten_modes(), 0.3).unwrap().with_channel(NoiseChannel::Complex);
        let e = mc_estimate(&spec, 400_000, 21, 4).unwrap();
        let mean = expected_energy(&spec).unwrap();
        assert!(e.within_sigma(mean, 3.0));
        assert!((e.variance / energy_variance(&spec).unwrap() - 1.0).abs() < 0.05);
        let ones = vec![1.0; spec.noise_len()];
        // |(1 + i) / sqrt 2|^2 = 1
        assert!((energy_from_noise(&spec, &ones).unwrap() - mean).abs() < 1e-14 * mean);
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(SourceSpec::new(ten_modes(), 0.0).is_err());
        assert!(SourceSpec::new(ten_modes(), 1.0).unwrap().with_g(-1.0).is_err());
        assert!(SourceSpec::new(ten_modes(), 1.0).unwrap().with_channels(0).is_err());
        let spec = SourceSpec::new(ten_modes(), 1.0).unwrap();
        assert!(sigma_components(&spec, &[1.0]).is_err());
    }
}
