//! Spectra of separable Laplacians on boxes and torus-interval products.
//!
//! Each axis carries a Dirichlet, Neumann or periodic one-dimensional
//! spectrum; the box spectrum is the set of sums of per-axis eigenvalues.
//! [`enumerate`] lists every eigenvalue up to a cutoff and keeps enough
//! information to bound the heat-weighted remainder above the cutoff.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_positive, Error, Result};
use crate::specfun::{theta, ThetaKind, ThetaMode};

/// Relative tolerance for merging numerically coincident eigenvalues.
pub const MERGE_TOL: f64 = 1e-12;

/// Default cap on the number of modes (with multiplicity) below a cutoff.
pub const DEFAULT_MODE_CAP: usize = 20_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryCondition {
    /// `pi^2 r^2 / l^2`, `r >= 1`
    Dirichlet,
    /// `pi^2 m^2 / l^2`, `m >= 0`
    Neumann,
    /// `(2 pi k / l)^2`, `k` in `Z`
    Periodic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisSpec {
    pub length: f64,
    pub bc: BoundaryCondition,
}

impl AxisSpec {
    pub fn new(length: f64, bc: BoundaryCondition) -> Result<Self> {
        ensure_positive("axis length", length)?;
        Ok(Self { length, bc })
    }

    pub fn dirichlet(length: f64) -> Self {
        Self { length, bc: BoundaryCondition::Dirichlet }
    }

    pub fn neumann(length: f64) -> Self {
        Self { length, bc: BoundaryCondition::Neumann }
    }

    pub fn periodic(length: f64) -> Self {
        Self { length, bc: BoundaryCondition::Periodic }
    }

    fn spacing(&self) -> f64 {
        match self.bc {
            BoundaryCondition::Dirichlet | BoundaryCondition::Neumann => PI / self.length,
            BoundaryCondition::Periodic => 2.0 * PI / self.length,
        }
    }

    pub fn lowest(&self) -> f64 {
        match self.bc {
            BoundaryCondition::Dirichlet => self.spacing().powi(2),
            _ => 0.0,
        }
    }

    /// Sorted `(eigenvalue, multiplicity)` pairs not exceeding `limit`.
    pub fn modes_up_to(&self, limit: f64) -> Vec<(f64, u64)> {
        let k = self.spacing();
        let start = match self.bc {
            BoundaryCondition::Dirichlet => 1u64,
            _ => 0,
        };
        let mut out = Vec::new();
        let mut n = start;
        loop {
            let v = (k * n as f64).powi(2);
            if v > limit {
                break;
            }
            let mult = match self.bc {
                BoundaryCondition::Periodic if n > 0 => 2,
                _ => 1,
            };
            out.push((v, mult));
            n += 1;
        }
        out
    }

    /// `sum_modes exp(-t lambda)` along this axis.
    pub fn heat_sum(&self, t: f64) -> Result<f64> {
        match self.bc {
            BoundaryCondition::Dirichlet => theta(ThetaKind::Dirichlet, self.length, t, ThetaMode::Auto),
            BoundaryCondition::Neumann => theta(ThetaKind::Neumann, self.length, t, ThetaMode::Auto),
            // sum_{k in Z} exp(-t (2 pi k / L)^2) = 2 Theta_N(L/2; t) - 1
            BoundaryCondition::Periodic => {
                theta(ThetaKind::Neumann, 0.5 * self.length, t, ThetaMode::Auto).map(|v| 2.0 * v - 1.0)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxSpec {
    pub axes: Vec<AxisSpec>,
}

impl BoxSpec {
    /// Requires at least one Dirichlet axis so that the lowest eigenvalue is
    /// strictly positive.
    pub fn new(axes: Vec<AxisSpec>) -> Result<Self> {
        if axes.is_empty() {
            return Err(Error::InvalidParameter("a box needs at least one axis".into()));
        }
        for a in &axes {
            ensure_positive("axis length", a.length)?;
        }
        if !axes.iter().any(|a| a.bc == BoundaryCondition::Dirichlet) {
            return Err(Error::InvalidParameter(
                "at least one Dirichlet axis is required for a positive spectral gap".into(),
            ));
        }
        Ok(Self { axes })
    }

    pub fn cube(side: f64, bc: BoundaryCondition) -> Result<Self> {
        Self::new(vec![AxisSpec { length: side, bc }; 3])
    }

    /// Lateral torus of period `period` times a Dirichlet interval of width `a`.
    pub fn plate(period: f64, a: f64) -> Result<Self> {
        Self::new(vec![AxisSpec::periodic(period), AxisSpec::periodic(period), AxisSpec::dirichlet(a)])
    }

    /// Neumann lateral sides `l1, l2`, Dirichlet height `a`.
    pub fn mixed_cell(l1: f64, l2: f64, a: f64) -> Result<Self> {
        Self::new(vec![AxisSpec::neumann(l1), AxisSpec::neumann(l2), AxisSpec::dirichlet(a)])
    }

    pub fn lowest_eigenvalue(&self) -> f64 {
        self.axes.iter().map(AxisSpec::lowest).sum()
    }

    /// Full heat trace `sum exp(-t lambda)` as a product of axis sums.
    pub fn heat_trace(&self, t: f64) -> Result<f64> {
        self.axes.iter().try_fold(1.0, |acc, a| Ok(acc * a.heat_sum(t)?))
    }

    /// Upper bound on `sum_{lambda > cutoff} lambda^{1/2} exp(-t lambda)`.
    ///
    /// Uses `lambda^{1/2} e^{-d lambda} <= (2 e d)^{-1/2}` and
    /// `e^{-v lambda} <= e^{-v cutoff}` above the cutoff, leaving the full heat
    /// trace at `t - d - v`. Each candidate split is a fixed fraction of `t`,
    /// so every candidate and therefore their minimum is nonincreasing in `t`.
    pub fn tail_bound(&self, cutoff: f64, t: f64) -> Result<f64> {
        ensure_positive("t", t)?;
        let mut best = f64::INFINITY;
        for &vf in &[0.5, 0.75, 0.9, 0.97] {
            let v = vf * t;
            let d = 0.5 * (t - v);
            let w = t - v - d;
            let bound = (2.0 * std::f64::consts::E * d).powf(-0.5) * (-v * cutoff).exp() * self.heat_trace(w)?;
            best = best.min(bound);
        }
        // allowance for rounding in the heat sums
        Ok(best * (1.0 + 1e-12))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mode {
    pub value: f64,
    pub multiplicity: u64,
}

/// What lies above the cutoff of an [`EigenStream`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Remainder {
    /// The stream truncates the spectrum of this box.
    Box(BoxSpec),
    /// The stream is the complete (finite) spectrum.
    Exact,
}

/// Sorted eigenvalues up to a cutoff, with multiplicities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenStream {
    pub cutoff: f64,
    pub modes: Vec<Mode>,
    pub remainder: Remainder,
}

impl EigenStream {
    /// A complete finite spectrum given explicitly (one entry per mode).
    pub fn from_values(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidParameter("spectrum must have at least one eigenvalue".into()));
        }
        for &v in values {
            ensure_positive("eigenvalue", v)?;
        }
        let mut raw: Vec<(f64, u64)> = values.iter().map(|&v| (v, 1)).collect();
        raw.sort_by(|a, b| a.0.total_cmp(&b.0));
        let modes = merge(raw);
        let cutoff = modes.last().map(|m| m.value).unwrap_or(0.0);
        Ok(Self { cutoff, modes, remainder: Remainder::Exact })
    }

    pub fn tail_bound(&self, t: f64) -> Result<f64> {
        match &self.remainder {
            Remainder::Box(spec) => spec.tail_bound(self.cutoff, t),
            Remainder::Exact => Ok(0.0),
        }
    }

    /// Number of modes counted with multiplicity.
    pub fn mode_count(&self) -> u64 {
        self.modes.iter().map(|m| m.multiplicity).sum()
    }

    pub fn lowest(&self) -> f64 {
        self.modes[0].value
    }

    /// Every eigenvalue repeated according to its multiplicity.
    pub fn eigenvalues(&self) -> impl Iterator<Item = f64> + '_ {
        self.modes
            .iter()
            .flat_map(|m| std::iter::repeat_n(m.value, m.multiplicity as usize))
    }

    /// The first `count` modes (with multiplicity) as a complete finite spectrum.
    pub fn leading_modes(&self, count: usize) -> Result<Self> {
        let values: Vec<f64> = self.eigenvalues().take(count).collect();
        Self::from_values(&values)
    }
}

fn merge(sorted: Vec<(f64, u64)>) -> Vec<Mode> {
    let mut modes: Vec<Mode> = Vec::with_capacity(sorted.len());
    for (v, mult) in sorted {
        match modes.last_mut() {
            Some(last) if (v - last.value).abs() <= MERGE_TOL * v.abs() => last.multiplicity += mult,
            _ => modes.push(Mode { value: v, multiplicity: mult }),
        }
    }
    modes
}

pub fn enumerate(spec: &BoxSpec, cutoff: f64) -> Result<EigenStream> {
    enumerate_capped(spec, cutoff, DEFAULT_MODE_CAP)
}

/// Complete sorted enumeration of the spectrum of `spec` up to `cutoff`.
pub fn enumerate_capped(spec: &BoxSpec, cutoff: f64, cap: usize) -> Result<EigenStream> {
    let lowest = spec.lowest_eigenvalue();
    if !(cutoff > lowest) {
        return Err(Error::EmptySpectrum { cutoff, lowest });
    }
    let n = spec.axes.len();
    // floor_rest[i] = smallest possible contribution of axes i..n
    let mut floor_rest = vec![0.0; n + 1];
    for i in (0..n).rev() {
        floor_rest[i] = floor_rest[i + 1] + spec.axes[i].lowest();
    }
    let lists: Vec<Vec<(f64, u64)>> = spec
        .axes
        .iter()
        .map(|a| a.modes_up_to(cutoff - (floor_rest[0] - a.lowest())))
        .collect();
    let mut raw = Vec::new();
    let mut counted = 0usize;
    walk(&lists, &floor_rest, 0, 0.0, 1, cutoff, &mut raw, &mut counted, cap)?;
    raw.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(EigenStream { cutoff, modes: merge(raw), remainder: Remainder::Box(spec.clone()) })
}

#[allow(clippy::too_many_arguments)]
fn walk(
    lists: &[Vec<(f64, u64)>],
    floor_rest: &[f64],
    axis: usize,
    partial: f64,
    mult: u64,
    cutoff: f64,
    out: &mut Vec<(f64, u64)>,
    counted: &mut usize,
    cap: usize,
) -> Result<()> {
    if axis == lists.len() {
        *counted += mult as usize;
        if *counted > cap {
            return Err(Error::ResourceLimit { cutoff, cap });
        }
        out.push((partial, mult));
        return Ok(());
    }
    for &(v, m) in &lists[axis] {
        if partial + v + floor_rest[axis + 1] > cutoff {
            break;
        }
        walk(lists, floor_rest, axis + 1, partial + v, mult * m, cutoff, out, counted, cap)?;
    }
    Ok(())
}

/// First positive lateral Neumann eigenvalue `pi^2 / max(l1, l2)^2`.
pub fn lateral_gap(l1: f64, l2: f64) -> f64 {
    let l = l1.max(l2);
    PI * PI / (l * l)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Saturation {
    /// Lateral gap over the transverse Dirichlet scale `pi^2 / a^2`.
    pub ratio: f64,
    pub saturated: bool,
}

/// Lengths must be positive with `l1 * l2 = a^2` to 1e-12 relative.
pub fn check_area_constraint(l1: f64, l2: f64, a: f64) -> Result<()> {
    ensure_positive("l1", l1)?;
    ensure_positive("l2", l2)?;
    ensure_positive("a", a)?;
    if (l1 * l2 - a * a).abs() > 1e-12 * a * a {
        return Err(Error::Constraint(format!(
            "lateral area l1 * l2 = {} must equal a^2 = {}",
            l1 * l2,
            a * a
        )));
    }
    Ok(())
}

/// Compares the lateral gap of an `l1 x l2` cell of area `a^2` with `pi^2 / a^2`.
pub fn saturation_check(l1: f64, l2: f64, a: f64) -> Result<Saturation> {
    check_area_constraint(l1, l2, a)?;
    let ratio = (a / l1.max(l2)).powi(2);
    Ok(Saturation { ratio, saturated: (ratio - 1.0).abs() <= 1e-12 })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Brute-force triple loop over per-axis index ranges.
    fn brute_force(spec: &BoxSpec, cutoff: f64) -> Vec<f64> {
        let per_axis: Vec<Vec<(f64, u64)>> = spec.axes.iter().map(|a| a.modes_up_to(cutoff)).collect();
        let mut out = Vec::new();
        for &(x, mx) in &per_axis[0] {
            for &(y, my) in &per_axis[1] {
                for &(z, mz) in &per_axis[2] {
                    let v = x + y + z;
                    if v <= cutoff {
                        for _ in 0..mx * my * mz {
                            out.push(v);
                        }
                    }
                }
            }
        }
        out.sort_by(f64::total_cmp);
        out
    }

    #[test]
    fn mixed_unit_cube_lowest_mode() {
        let spec = BoxSpec::mixed_cell(1.0, 1.0, 1.0).unwrap();
        let s = enumerate(&spec, 50.0).unwrap();
        assert!((s.modes[0].value - PI * PI).abs() < 1e-12);
        assert_eq!(s.modes[0].multiplicity, 1);
        assert!(s.modes.iter().all(|m| m.value <= 50.0));
    }

    #[test]
    fn plate_lowest_modes() {
        let spec = BoxSpec::plate(2.0 * PI, 1.0).unwrap();
        let s = enumerate(&spec, 15.0).unwrap();
        assert!((s.modes[0].value - PI * PI).abs() < 1e-12);
        assert_eq!(s.modes[0].multiplicity, 1);
        assert!((s.modes[1].value - (1.0 + PI * PI)).abs() < 1e-12);
        assert_eq!(s.modes[1].multiplicity, 4);
    }

    #[test]
    fn dirichlet_cube_count_matches_brute_force() {
        let spec = BoxSpec::cube(1.0, BoundaryCondition::Dirichlet).unwrap();
        let s = enumerate(&spec, 400.0).unwrap();
        let brute = brute_force(&spec, 400.0);
        assert_eq!(s.mode_count() as usize, brute.len());
        let listed: Vec<f64> = s.eigenvalues().collect();
        for (a, b) in listed.iter().zip(&brute) {
            assert!((a - b).abs() <= 1e-12 * b);
        }
    }

    #[test]
    fn weyl_scaling() {
        let spec = BoxSpec::cube(1.0, BoundaryCondition::Dirichlet).unwrap();
        let cutoff = 1e4;
        let s = enumerate(&spec, cutoff).unwrap();
        let weyl = cutoff.powf(1.5) / (6.0 * PI * PI);
        let ratio = s.mode_count() as f64 / weyl;
        assert!((ratio - 1.0).abs() < 0.1, "{ratio}");
    }

    #[test]
    fn errors() {
        let spec = BoxSpec::cube(1.0, BoundaryCondition::Dirichlet).unwrap();
        assert!(matches!(enumerate(&spec, 3.0 * PI * PI), Err(Error::EmptySpectrum { .. })));
        assert!(matches!(enumerate_capped(&spec, 1e4, 100), Err(Error::ResourceLimit { .. })));
        assert!(BoxSpec::cube(1.0, BoundaryCondition::Neumann).is_err());
        assert!(BoxSpec::mixed_cell(1.0, -1.0, 1.0).is_err());
    }

    #[test]
    fn tail_bound_dominates_and_decreases() {
        let spec = BoxSpec::cube(1.0, BoundaryCondition::Dirichlet).unwrap();
        let small = enumerate(&spec, 150.0).unwrap();
        let big = enumerate(&spec, 3000.0).unwrap();
        let mut prev = f64::INFINITY;
        for &t in &[0.02, 0.05, 0.1, 0.3, 1.0] {
            let actual: f64 = big
                .modes
                .iter()
                .filter(|m| m.value > small.cutoff)
                .map(|m| m.multiplicity as f64 * m.value.sqrt() * (-t * m.value).exp())
                .sum();
            let bound = small.tail_bound(t).unwrap();
            assert!(bound >= actual, "t={t} bound={bound} actual={actual}");
            assert!(bound <= prev);
            prev = bound;
        }
    }

    #[test]
    fn heat_trace_matches_mode_sum() {
        let spec = BoxSpec::plate(3.0, 1.0).unwrap();
        let s = enumerate(&spec, 2000.0).unwrap();
        let t = 0.05;
        let direct: f64 = s.modes.iter().map(|m| m.multiplicity as f64 * (-t * m.value).exp()).sum();
        assert!((direct - spec.heat_trace(t).unwrap()).abs() < 1e-10);
    }

    #[test]
    fn lateral_gap_cases() {
        let a = 1.3;
        assert!((lateral_gap(a, a) - PI * PI / (a * a)).abs() < 1e-14);
        let r = lateral_gap(2.0 * a, a / 2.0) / (PI * PI / (a * a));
        assert!((r - 0.25).abs() < 1e-15);
        assert_eq!(lateral_gap(0.7, 2.1), lateral_gap(2.1, 0.7));
    }

    #[test]
    fn saturation_cases() {
        let s = saturation_check(1.0, 1.0, 1.0).unwrap();
        assert!(s.saturated && s.ratio == 1.0);
        let s = saturation_check(3.0, 1.0 / 3.0, 1.0).unwrap();
        assert!(!s.saturated);
        assert!((s.ratio - 1.0 / 9.0).abs() < 1e-15);
        let inv = saturation_check(1.0 / 3.0, 3.0, 1.0).unwrap();
        assert_eq!(s.ratio, inv.ratio);
        assert!(matches!(saturation_check(2.0, 1.0, 1.0), Err(Error::Constraint(_))));
    }

    #[test]
    fn json_shape() {
        let s = EigenStream::from_values(&[2.0, 1.0, 2.0]).unwrap();
        let v = serde_json::to_value(&s).unwrap();
        assert_eq!(v["cutoff"], 2.0);
        assert_eq!(v["modes"][1]["multiplicity"], 2);
        assert_eq!(v["remainder"]["kind"], "exact");
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn axis() -> impl Strategy<Value = AxisSpec> {
            (0.4f64..2.5, 0usize..3).prop_map(|(l, k)| match k {
                0 => AxisSpec::dirichlet(l),
                1 => AxisSpec::neumann(l),
                _ => AxisSpec::periodic(l),
            })
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(48))]

            #[test]
            fn enumeration_is_complete(a in axis(), b in axis(), h in 0.4f64..2.5, extra in 5.0f64..150.0) {
                let spec = BoxSpec::new(vec![a, b, AxisSpec::dirichlet(h)]).unwrap();
                let cutoff = spec.lowest_eigenvalue() + extra;
                let s = enumerate(&spec, cutoff).unwrap();
                let brute = brute_force(&spec, cutoff);
                prop_assert_eq!(s.mode_count() as usize, brute.len());
                let listed: Vec<f64> = s.eigenvalues().collect();
                for (x, y) in listed.iter().zip(&brute) {
                    prop_assert!((x - y).abs() <= 1e-11 * y);
                }
            }

            #[test]
            fn lateral_gap_never_exceeds_transverse(alpha in 0.1f64..10.0, a in 0.2f64..5.0) {
                let g = lateral_gap(alpha * a, a / alpha);
                prop_assert!(g <= PI * PI / (a * a) * (1.0 + 1e-14));
            }
        }
    }
}
