// Copyright 2026 The ionzeno Authors
// SPDX-License-Identifier: Apache-2.0

//! Rotating-frame Hamiltonians, pulse schedules and noise models.
//!
//! Every segment of a [`PulseSchedule`] is constant in the frame rotating
//! with the sideband detuning, so `ψ_rot(t) = exp(−iδ t a†a) ψ_int(t)` and
//! the sideband Hamiltonian picks up a `δ a†a` term. The frame transform is
//! continuous across segment boundaries.

use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::error::{Error, Result};
use crate::hilbert::{
    build_mode_op, build_spin_op, ion_transition, ModeOpKind, OperatorMatrix, SpinLevel,
    SpinOpKind, SystemDims,
};
use crate::linalg::{c, phase, CMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseSegment {
    pub duration: f64,
    /// Sideband Rabi frequency (signed).
    pub omega_s: f64,
    /// Microwave Rabi frequency.
    pub omega_d: f64,
    /// Sideband detuning (signed).
    pub delta: f64,
    pub laser_phase: f64,
    pub microwave_phase: f64,
}

impl PulseSegment {
    pub fn new(duration: f64, omega_s: f64, omega_d: f64, delta: f64) -> Result<Self> {
        let seg = PulseSegment {
            duration,
            omega_s,
            omega_d,
            delta,
            laser_phase: 0.0,
            microwave_phase: 0.0,
        };
        seg.validate()?;
        Ok(seg)
    }

    pub fn with_laser_phase(mut self, phi: f64) -> Self {
        self.laser_phase = phi;
        self
    }

    pub fn with_microwave_phase(mut self, phi: f64) -> Self {
        self.microwave_phase = phi;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration > 0.0) || !self.duration.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "segment duration must be positive, got {}",
                self.duration
            )));
        }
        if !(self.omega_d >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "omega_d must be >= 0, got {}",
                self.omega_d
            )));
        }
        for (name, v) in [
            ("omega_s", self.omega_s),
            ("delta", self.delta),
            ("laser_phase", self.laser_phase),
            ("microwave_phase", self.microwave_phase),
        ] {
            if !v.is_finite() {
                return Err(Error::InvalidArgument(format!("{name} is not finite")));
            }
        }
        Ok(())
    }

    /// Sideband strength with the laser phase folded in, when that phase is
    /// a multiple of π. A phase of π is how a sign flip of Ω_s is realized.
    pub fn signed_omega_s(&self) -> Option<f64> {
        let k = self.laser_phase / PI;
        let r = k.round();
        if (k - r).abs() > 1e-12 {
            return None;
        }
        Some(if (r as i64).rem_euclid(2) == 0 {
            self.omega_s
        } else {
            -self.omega_s
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseSchedule {
    segments: Vec<PulseSegment>,
}

impl PulseSchedule {
    pub fn new(segments: Vec<PulseSegment>) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::InvalidArgument("empty pulse schedule".into()));
        }
        for s in &segments {
            s.validate()?;
        }
        Ok(PulseSchedule { segments })
    }

    pub fn single(segment: PulseSegment) -> Result<Self> {
        PulseSchedule::new(vec![segment])
    }

    pub fn segments(&self) -> &[PulseSegment] {
        &self.segments
    }

    pub fn total_duration(&self) -> f64 {
        self.segments.iter().map(|s| s.duration).sum()
    }

    /// Start time of every segment followed by the end time.
    pub fn boundaries(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.segments.len() + 1);
        let mut t = 0.0;
        out.push(t);
        for s in &self.segments {
            t += s.duration;
            out.push(t);
        }
        out
    }

    /// Prefix of the schedule ending at `total`.
    pub fn truncated(&self, total: f64) -> Result<PulseSchedule> {
        let mut segs = Vec::new();
        let mut t = 0.0;
        for s in &self.segments {
            if t >= total {
                break;
            }
            let d = s.duration.min(total - t);
            if d > 0.0 {
                segs.push(PulseSegment { duration: d, ..*s });
            }
            t += s.duration;
        }
        PulseSchedule::new(segs)
    }

    /// Appends a copy of the last segment so the schedule runs for `extra`
    /// additional seconds.
    pub fn extended(&self, extra: f64) -> Result<PulseSchedule> {
        let mut segs = self.segments.clone();
        let last = *segs.last().expect("schedule is non-empty");
        segs.push(PulseSegment {
            duration: extra,
            ..last
        });
        PulseSchedule::new(segs)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IonGeometry {
    n_ions: usize,
    phase_per_ion: Vec<f64>,
    mode_amplitudes: Vec<f64>,
}

impl IonGeometry {
    pub fn new(phase_per_ion: Vec<f64>, mode_amplitudes: Vec<f64>) -> Result<Self> {
        let n = phase_per_ion.len();
        if !(2..=3).contains(&n) || mode_amplitudes.len() != n {
            return Err(Error::InvalidArgument(format!(
                "geometry needs 2 or 3 ions with matching lengths, got {} phases and {} amplitudes",
                n,
                mode_amplitudes.len()
            )));
        }
        if mode_amplitudes.iter().any(|a| *a == 0.0 || !a.is_finite()) {
            return Err(Error::InvalidArgument(
                "every ion needs a nonzero mode amplitude".into(),
            ));
        }
        Ok(IonGeometry {
            n_ions: n,
            phase_per_ion,
            mode_amplitudes,
        })
    }

    /// Two ions on the out-of-phase (stretch) mode, optical phases equal.
    pub fn two_ion_stretch() -> Self {
        IonGeometry {
            n_ions: 2,
            phase_per_ion: vec![0.0, 0.0],
            mode_amplitudes: vec![FRAC_1_SQRT_2, -FRAC_1_SQRT_2],
        }
    }

    /// Three ions on the center-of-mass mode with the optical phase advancing
    /// by 2π/3 between neighbours.
    pub fn three_ion_com() -> Self {
        let a = 1.0 / 3f64.sqrt();
        IonGeometry {
            n_ions: 3,
            phase_per_ion: vec![2.0 * PI / 3.0, 0.0, -2.0 * PI / 3.0],
            mode_amplitudes: vec![a, a, a],
        }
    }

    pub fn canonical(n_ions: usize) -> Result<Self> {
        match n_ions {
            2 => Ok(IonGeometry::two_ion_stretch()),
            3 => Ok(IonGeometry::three_ion_com()),
            n => Err(Error::InvalidArgument(format!("no canonical geometry for {n} ions"))),
        }
    }

    pub fn n_ions(&self) -> usize {
        self.n_ions
    }

    pub fn phase_per_ion(&self) -> &[f64] {
        &self.phase_per_ion
    }

    pub fn mode_amplitudes(&self) -> &[f64] {
        &self.mode_amplitudes
    }

    /// Sign of each ion's participation in the mode.
    pub fn signs(&self) -> Vec<f64> {
        self.mode_amplitudes.iter().map(|a| a.signum()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct NoiseModel {
    /// `|↑⟩ → |↓⟩`
    pub gamma_du: f64,
    /// `|↓⟩ → |↑⟩`
    pub gamma_ud: f64,
    /// `|↑⟩ → |o⟩`
    pub gamma_ou: f64,
    /// `|↓⟩ → |o⟩`
    pub gamma_od: f64,
    /// Heating rate in quanta/s. The cooling rate is set equal to it.
    pub gamma_heat: f64,
    /// Per-ion differential shifts (rad/s); empty means none.
    pub stark_shifts: Vec<f64>,
    /// Initial thermal occupation of the mode.
    pub n_bar: f64,
}

impl NoiseModel {
    pub fn none() -> Self {
        NoiseModel::default()
    }

    /// Four spin channels set to `gamma` each.
    pub fn uniform_decay(gamma: f64) -> Self {
        NoiseModel {
            gamma_du: gamma,
            gamma_ud: gamma,
            gamma_ou: gamma,
            gamma_od: gamma,
            ..NoiseModel::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("gamma_du", self.gamma_du),
            ("gamma_ud", self.gamma_ud),
            ("gamma_ou", self.gamma_ou),
            ("gamma_od", self.gamma_od),
            ("gamma_heat", self.gamma_heat),
            ("n_bar", self.n_bar),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::InvalidArgument(format!("{name} must be >= 0, got {v}")));
            }
        }
        if self.stark_shifts.iter().any(|s| !s.is_finite()) {
            return Err(Error::InvalidArgument("stark shift is not finite".into()));
        }
        Ok(())
    }

    pub fn needs_leak_level(&self) -> bool {
        self.gamma_ou > 0.0 || self.gamma_od > 0.0
    }

    pub fn has_dissipation(&self) -> bool {
        self.gamma_du > 0.0
            || self.gamma_ud > 0.0
            || self.gamma_ou > 0.0
            || self.gamma_od > 0.0
            || self.gamma_heat > 0.0
    }

    /// Total decay rate out of `|↑↑⟩`.
    pub fn gamma_upup(&self) -> f64 {
        2.0 * (self.gamma_du + self.gamma_ou)
    }

    /// Total decay rate out of `|T⟩`.
    pub fn gamma_triplet(&self) -> f64 {
        self.gamma_ud + self.gamma_du + self.gamma_ou + self.gamma_od
    }

    /// Mean of the `|T⟩` and `|↑↑⟩` decay rates.
    pub fn gamma_mean(&self) -> f64 {
        0.5 * (self.gamma_triplet() + self.gamma_upup())
    }
}

fn check_geometry(dims: SystemDims, geom: &IonGeometry) -> Result<()> {
    if geom.n_ions() != dims.n_ions() {
        return Err(Error::DimensionMismatch(format!(
            "geometry for {} ions, system has {}",
            geom.n_ions(),
            dims.n_ions()
        )));
    }
    Ok(())
}

/// `δ a†a + [Ω_s e^{iφ} Σᵢ sᵢ e^{iθᵢ} σᵢ⁻ a + h.c.]`
pub fn sideband_hamiltonian(
    dims: SystemDims,
    geom: &IonGeometry,
    seg: &PulseSegment,
) -> Result<OperatorMatrix> {
    check_geometry(dims, geom)?;
    let n = dims.dim();
    if dims.n_fock() == 1 {
        // δ a†a vanishes on |0⟩ and there is nothing to absorb.
        if seg.omega_s != 0.0 {
            return Err(Error::InvalidArgument(
                "sideband drive needs n_fock >= 3".into(),
            ));
        }
        return Ok(OperatorMatrix::zeros(dims));
    }
    let num = build_mode_op(dims, ModeOpKind::Number)?;
    let mut h: CMatrix = num.into_matrix() * c(seg.delta, 0.0);
    if seg.omega_s != 0.0 {
        if dims.n_fock() < 3 {
            return Err(Error::InvalidArgument(
                "sideband drive needs n_fock >= 3".into(),
            ));
        }
        let a = build_mode_op(dims, ModeOpKind::Annihilate)?;
        let mut collective = CMatrix::zeros(n, n);
        for (ion, (s, theta)) in geom.signs().iter().zip(geom.phase_per_ion()).enumerate() {
            let lower = build_spin_op(dims, ion, SpinOpKind::Lower)?;
            collective += lower.into_matrix() * (phase(*theta) * *s);
        }
        let coupling = collective * a.matrix() * (phase(seg.laser_phase) * seg.omega_s);
        h += &coupling + coupling.adjoint();
    }
    Ok(OperatorMatrix::from_raw(dims, h, true))
}

/// `Ω_d Σᵢ (e^{iφ} σᵢ⁻ + e^{−iφ} σᵢ⁺)`
pub fn microwave_hamiltonian(dims: SystemDims, omega_d: f64, phi: f64) -> Result<OperatorMatrix> {
    let n = dims.dim();
    let mut lower = CMatrix::zeros(n, n);
    if omega_d != 0.0 {
        for ion in 0..dims.n_ions() {
            lower += build_spin_op(dims, ion, SpinOpKind::Lower)?.into_matrix();
        }
    }
    let term = lower * (phase(phi) * omega_d);
    let h = &term + term.adjoint();
    Ok(OperatorMatrix::from_raw(dims, h, true))
}

/// `Σᵢ (shiftᵢ/2) σᵢᶻ`. An empty slice means no shifts.
pub fn stark_hamiltonian(dims: SystemDims, shifts: &[f64]) -> Result<OperatorMatrix> {
    let n = dims.dim();
    if shifts.is_empty() {
        return Ok(OperatorMatrix::zeros(dims));
    }
    if shifts.len() != dims.n_ions() {
        return Err(Error::DimensionMismatch(format!(
            "{} stark shifts for {} ions",
            shifts.len(),
            dims.n_ions()
        )));
    }
    let mut h = CMatrix::zeros(n, n);
    for (ion, s) in shifts.iter().enumerate() {
        if *s != 0.0 {
            h += build_spin_op(dims, ion, SpinOpKind::Z)?.into_matrix() * c(0.5 * s, 0.0);
        }
    }
    Ok(OperatorMatrix::from_raw(dims, h, true))
}

/// Jump operators for the spin channels of every ion, then heating and
/// cooling of the mode. Channels with zero rate are omitted.
pub fn lindblad_operators(dims: SystemDims, noise: &NoiseModel) -> Result<Vec<OperatorMatrix>> {
    noise.validate()?;
    if noise.needs_leak_level() && !dims.leak_level() {
        return Err(Error::InvalidArgument(
            "leakage rates require the leak level".into(),
        ));
    }
    use SpinLevel::{Down, Leak, Up};
    let channels = [
        (noise.gamma_du, Down, Up),
        (noise.gamma_ud, Up, Down),
        (noise.gamma_ou, Leak, Up),
        (noise.gamma_od, Leak, Down),
    ];
    let mut out = Vec::new();
    for ion in 0..dims.n_ions() {
        for (rate, to, from) in channels {
            if rate > 0.0 {
                let m = ion_transition(dims, ion, to, from)? * c(rate.sqrt(), 0.0);
                out.push(OperatorMatrix::from_raw(dims, m, false));
            }
        }
    }
    if noise.gamma_heat > 0.0 {
        let g = c(noise.gamma_heat.sqrt(), 0.0);
        let create = build_mode_op(dims, ModeOpKind::Create)?.into_matrix() * g;
        let annihilate = build_mode_op(dims, ModeOpKind::Annihilate)?.into_matrix() * g;
        out.push(OperatorMatrix::from_raw(dims, create, false));
        out.push(OperatorMatrix::from_raw(dims, annihilate, false));
    }
    Ok(out)
}

/// `Σᵢ (Γ_ou |↑⟩⟨↑|ᵢ + Γ_od |↓⟩⟨↓|ᵢ)` for a space without the leak level.
///
/// Nothing returns from `|o⟩`, so the `{↑, ↓}` block evolves on its own with
/// these channels acting as pure loss: they enter the anti-Hermitian part of
/// the generator and the trace of the kept block falls by the leaked
/// population. `None` when the space has the leak level or the rates vanish.
pub fn leak_loss_operator(dims: SystemDims, noise: &NoiseModel) -> Result<Option<CMatrix>> {
    noise.validate()?;
    if dims.leak_level() || !noise.needs_leak_level() {
        return Ok(None);
    }
    let n = dims.dim();
    let diag = (0..n).map(|k| {
        let (spins, _) = dims.decode(k);
        let rate: f64 = spins
            .iter()
            .map(|s| match s {
                SpinLevel::Up => noise.gamma_ou,
                SpinLevel::Down => noise.gamma_od,
                SpinLevel::Leak => 0.0,
            })
            .sum();
        c(rate, 0.0)
    });
    Ok(Some(CMatrix::from_diagonal(&crate::linalg::CVector::from_iterator(n, diag))))
}

/// Dimensions, geometry and static shifts of an ion chain: everything needed
/// to turn a [`PulseSegment`] into a Hamiltonian.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainModel {
    pub dims: SystemDims,
    pub geometry: IonGeometry,
    pub stark_shifts: Vec<f64>,
}

impl ChainModel {
    pub fn new(dims: SystemDims, geometry: IonGeometry) -> Result<Self> {
        check_geometry(dims, &geometry)?;
        Ok(ChainModel {
            dims,
            geometry,
            stark_shifts: Vec::new(),
        })
    }

    /// Canonical geometry for `dims.n_ions()`.
    pub fn canonical(dims: SystemDims) -> Result<Self> {
        ChainModel::new(dims, IonGeometry::canonical(dims.n_ions())?)
    }

    pub fn with_stark(mut self, shifts: Vec<f64>) -> Result<Self> {
        if !shifts.is_empty() && shifts.len() != self.dims.n_ions() {
            return Err(Error::DimensionMismatch(format!(
                "{} stark shifts for {} ions",
                shifts.len(),
                self.dims.n_ions()
            )));
        }
        self.stark_shifts = shifts;
        Ok(self)
    }

    /// `H_δ + H_s + H_d + H_stark` for one segment, with `extra_stark` added
    /// to the model's own shifts.
    pub fn segment_hamiltonian_with(&self, seg: &PulseSegment, extra_stark: &[f64]) -> Result<CMatrix> {
        let mut h = sideband_hamiltonian(self.dims, &self.geometry, seg)?.into_matrix();
        h += microwave_hamiltonian(self.dims, seg.omega_d, seg.microwave_phase)?.matrix();
        let shifts = combine_shifts(&self.stark_shifts, extra_stark, self.dims.n_ions())?;
        h += stark_hamiltonian(self.dims, &shifts)?.matrix();
        Ok(h)
    }

    pub fn segment_hamiltonian(&self, seg: &PulseSegment) -> Result<CMatrix> {
        self.segment_hamiltonian_with(seg, &[])
    }
}

fn combine_shifts(a: &[f64], b: &[f64], n_ions: usize) -> Result<Vec<f64>> {
    for s in [a, b] {
        if !s.is_empty() && s.len() != n_ions {
            return Err(Error::DimensionMismatch(format!(
                "{} stark shifts for {n_ions} ions",
                s.len()
            )));
        }
    }
    Ok(match (a.is_empty(), b.is_empty()) {
        (true, true) => Vec::new(),
        (false, true) => a.to_vec(),
        (true, false) => b.to_vec(),
        (false, false) => a.iter().zip(b).map(|(x, y)| x + y).collect(),
    })
}
