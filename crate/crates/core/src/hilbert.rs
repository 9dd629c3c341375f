// Copyright 2026 The ionzeno Authors
// SPDX-License-Identifier: Apache-2.0

//! Composite Hilbert space of `N` ions (two or three levels each) and one
//! truncated motional mode.
//!
//! Basis ordering is spin-major: ion 1 is the slowest index, the Fock index is
//! the fastest, and each ion orders its levels `|↑⟩, |↓⟩, |o⟩`. Nothing outside
//! this module should compute indices by hand; use [`SystemDims::index`] and
//! the constructors below.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c, hermiticity_defect, kron, kron_vec, min_eigenvalue, phase, CMatrix, CVector, ONE, ZERO};

/// Single-ion level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SpinLevel {
    Up,
    Down,
    /// Lumped level outside the qubit manifold.
    Leak,
}

impl SpinLevel {
    pub fn offset(self) -> usize {
        match self {
            SpinLevel::Up => 0,
            SpinLevel::Down => 1,
            SpinLevel::Leak => 2,
        }
    }

    fn from_offset(k: usize) -> SpinLevel {
        match k {
            0 => SpinLevel::Up,
            1 => SpinLevel::Down,
            _ => SpinLevel::Leak,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SystemDims {
    n_ions: usize,
    n_fock: usize,
    leak_level: bool,
}

impl SystemDims {
    pub fn new(n_ions: usize, n_fock: usize, leak_level: bool) -> Result<Self> {
        if !(2..=3).contains(&n_ions) {
            return Err(Error::InvalidArgument(format!(
                "n_ions must be 2 or 3, got {n_ions}"
            )));
        }
        if n_fock == 0 {
            return Err(Error::InvalidArgument("n_fock must be at least 1".into()));
        }
        Ok(SystemDims {
            n_ions,
            n_fock,
            leak_level,
        })
    }

    /// Spin-only space (motion traced out or absent).
    pub fn spins(n_ions: usize, leak_level: bool) -> Result<Self> {
        SystemDims::new(n_ions, 1, leak_level)
    }

    pub fn n_ions(&self) -> usize {
        self.n_ions
    }

    pub fn n_fock(&self) -> usize {
        self.n_fock
    }

    pub fn leak_level(&self) -> bool {
        self.leak_level
    }

    pub fn levels(&self) -> usize {
        if self.leak_level {
            3
        } else {
            2
        }
    }

    pub fn spin_dim(&self) -> usize {
        self.levels().pow(self.n_ions as u32)
    }

    pub fn dim(&self) -> usize {
        self.spin_dim() * self.n_fock
    }

    /// Same spin structure without the motional factor.
    pub fn spin_part(&self) -> SystemDims {
        SystemDims {
            n_fock: 1,
            ..*self
        }
    }

    pub fn with_fock(&self, n_fock: usize) -> Result<SystemDims> {
        SystemDims::new(self.n_ions, n_fock, self.leak_level)
    }

    pub fn spin_index(&self, spins: &[SpinLevel]) -> Result<usize> {
        if spins.len() != self.n_ions {
            return Err(Error::DimensionMismatch(format!(
                "{} spin labels for {} ions",
                spins.len(),
                self.n_ions
            )));
        }
        let levels = self.levels();
        let mut k = 0;
        for s in spins {
            if *s == SpinLevel::Leak && !self.leak_level {
                return Err(Error::InvalidArgument(
                    "leak level requested but not enabled".into(),
                ));
            }
            k = k * levels + s.offset();
        }
        Ok(k)
    }

    pub fn index(&self, spins: &[SpinLevel], fock: usize) -> Result<usize> {
        if fock >= self.n_fock {
            return Err(Error::InvalidArgument(format!(
                "Fock level {fock} outside truncation {}",
                self.n_fock
            )));
        }
        Ok(self.spin_index(spins)? * self.n_fock + fock)
    }

    /// Inverse of [`SystemDims::index`].
    pub fn decode(&self, index: usize) -> (Vec<SpinLevel>, usize) {
        let fock = index % self.n_fock;
        let mut spin = index / self.n_fock;
        let levels = self.levels();
        let mut out = vec![SpinLevel::Up; self.n_ions];
        for slot in out.iter_mut().rev() {
            *slot = SpinLevel::from_offset(spin % levels);
            spin /= levels;
        }
        (out, fock)
    }

    /// Number of ions in `|↑⟩` for each spin basis index.
    pub fn up_count(&self, spin_index: usize) -> usize {
        let (spins, _) = self.spin_part().decode(spin_index);
        spins.iter().filter(|s| **s == SpinLevel::Up).count()
    }

    /// Whether any ion sits in the leak level for this spin basis index.
    pub fn has_leak(&self, spin_index: usize) -> bool {
        let (spins, _) = self.spin_part().decode(spin_index);
        spins.iter().any(|s| *s == SpinLevel::Leak)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    dims: SystemDims,
    amplitudes: CVector,
}

impl PureState {
    pub fn new(dims: SystemDims, amplitudes: CVector) -> Result<Self> {
        if amplitudes.len() != dims.dim() {
            return Err(Error::DimensionMismatch(format!(
                "state of length {} for dimension {}",
                amplitudes.len(),
                dims.dim()
            )));
        }
        let norm = amplitudes.norm();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidState(format!("norm {norm} != 1")));
        }
        Ok(PureState { dims, amplitudes })
    }

    /// Builds and normalizes.
    pub fn normalized(dims: SystemDims, amplitudes: CVector) -> Result<Self> {
        let norm = amplitudes.norm();
        if norm == 0.0 {
            return Err(Error::InvalidState("zero vector".into()));
        }
        PureState::new(dims, amplitudes.unscale(norm))
    }

    pub(crate) fn from_raw(dims: SystemDims, amplitudes: CVector) -> Self {
        PureState { dims, amplitudes }
    }

    pub fn basis(dims: SystemDims, spins: &[SpinLevel], fock: usize) -> Result<Self> {
        let mut v = CVector::zeros(dims.dim());
        v[dims.index(spins, fock)?] = ONE;
        Ok(PureState { dims, amplitudes: v })
    }

    pub fn dims(&self) -> SystemDims {
        self.dims
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    /// `⟨self|other⟩`
    pub fn inner(&self, other: &PureState) -> Result<num_complex::Complex64> {
        if self.dims != other.dims {
            return Err(Error::DimensionMismatch("inner product across spaces".into()));
        }
        Ok(self.amplitudes.dotc(&other.amplitudes))
    }

    /// Tensor with a Fock state. Only valid on spin-only states.
    pub fn with_fock(&self, dims: SystemDims, fock: usize) -> Result<PureState> {
        if self.dims != dims.spin_part() {
            return Err(Error::DimensionMismatch(
                "spin state does not match target spin structure".into(),
            ));
        }
        if fock >= dims.n_fock() {
            return Err(Error::InvalidArgument(format!(
                "Fock level {fock} outside truncation {}",
                dims.n_fock()
            )));
        }
        let mut f = CVector::zeros(dims.n_fock());
        f[fock] = ONE;
        Ok(PureState {
            dims,
            amplitudes: kron_vec(&self.amplitudes, &f),
        })
    }

    pub fn to_density(&self) -> DensityOperator {
        DensityOperator {
            dims: self.dims,
            matrix: &self.amplitudes * self.amplitudes.adjoint(),
        }
    }

    /// Probability of each Fock level, summed over spins.
    pub fn fock_populations(&self) -> Vec<f64> {
        let nf = self.dims.n_fock();
        let mut out = vec![0.0; nf];
        for (k, a) in self.amplitudes.iter().enumerate() {
            out[k % nf] += a.norm_sqr();
        }
        out
    }

    /// Reduced spin density operator (motion traced out).
    pub fn spin_reduced(&self) -> DensityOperator {
        self.to_density().spin_reduced()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityOperator {
    dims: SystemDims,
    matrix: CMatrix,
}

impl DensityOperator {
    pub fn new(dims: SystemDims, matrix: CMatrix) -> Result<Self> {
        let rho = DensityOperator { dims, matrix };
        rho.validate(1e-9)?;
        Ok(rho)
    }

    pub(crate) fn from_raw(dims: SystemDims, matrix: CMatrix) -> Self {
        DensityOperator { dims, matrix }
    }

    /// Checks Hermiticity (1e-10), unit trace (1e-9) and the eigenvalue floor.
    pub fn validate(&self, eigen_floor: f64) -> Result<()> {
        let n = self.dims.dim();
        if self.matrix.shape() != (n, n) {
            return Err(Error::DimensionMismatch(format!(
                "density matrix {:?} for dimension {n}",
                self.matrix.shape()
            )));
        }
        let defect = hermiticity_defect(&self.matrix);
        if defect > 1e-10 {
            return Err(Error::InvalidState(format!("not Hermitian (defect {defect:.3e})")));
        }
        let tr = self.trace();
        if (tr - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidState(format!("trace {tr} != 1")));
        }
        let min = min_eigenvalue(&self.matrix);
        if min < -eigen_floor {
            return Err(Error::InvalidState(format!("negative eigenvalue {min:.3e}")));
        }
        Ok(())
    }

    pub fn maximally_mixed(dims: SystemDims) -> Self {
        let n = dims.dim();
        DensityOperator {
            dims,
            matrix: CMatrix::identity(n, n).unscale(n as f64),
        }
    }

    pub fn dims(&self) -> SystemDims {
        self.dims
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    /// `⟨v|ρ|v⟩` for a (not necessarily normalized) vector.
    pub fn expectation_vec(&self, v: &CVector) -> f64 {
        v.dotc(&(&self.matrix * v)).re
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dims.dim()).map(|k| self.matrix[(k, k)].re).collect()
    }

    pub fn fock_populations(&self) -> Vec<f64> {
        let nf = self.dims.n_fock();
        let mut out = vec![0.0; nf];
        for (k, p) in self.diagonal().into_iter().enumerate() {
            out[k % nf] += p;
        }
        out
    }

    pub fn spin_reduced(&self) -> DensityOperator {
        let nf = self.dims.n_fock();
        let ns = self.dims.spin_dim();
        let mut out = CMatrix::zeros(ns, ns);
        for a in 0..ns {
            for b in 0..ns {
                let mut acc = ZERO;
                for n in 0..nf {
                    acc += self.matrix[(a * nf + n, b * nf + n)];
                }
                out[(a, b)] = acc;
            }
        }
        DensityOperator {
            dims: self.dims.spin_part(),
            matrix: out,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    dims: SystemDims,
    matrix: CMatrix,
    hermitian: bool,
}

impl OperatorMatrix {
    pub fn new(dims: SystemDims, matrix: CMatrix, hermitian: bool) -> Result<Self> {
        let n = dims.dim();
        if matrix.shape() != (n, n) {
            return Err(Error::DimensionMismatch(format!(
                "operator {:?} for dimension {n}",
                matrix.shape()
            )));
        }
        if hermitian {
            let defect = hermiticity_defect(&matrix);
            if defect > 1e-12 * (1.0 + crate::linalg::max_abs(&matrix)) {
                return Err(Error::InvalidArgument(format!(
                    "operator flagged Hermitian has defect {defect:.3e}"
                )));
            }
        }
        Ok(OperatorMatrix {
            dims,
            matrix,
            hermitian,
        })
    }

    pub(crate) fn from_raw(dims: SystemDims, matrix: CMatrix, hermitian: bool) -> Self {
        OperatorMatrix {
            dims,
            matrix,
            hermitian,
        }
    }

    pub fn zeros(dims: SystemDims) -> Self {
        let n = dims.dim();
        OperatorMatrix {
            dims,
            matrix: CMatrix::zeros(n, n),
            hermitian: true,
        }
    }

    pub fn dims(&self) -> SystemDims {
        self.dims
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn adjoint(&self) -> OperatorMatrix {
        OperatorMatrix {
            dims: self.dims,
            matrix: self.matrix.adjoint(),
            hermitian: self.hermitian,
        }
    }

    pub fn apply(&self, psi: &PureState) -> Result<CVector> {
        if psi.dims() != self.dims {
            return Err(Error::DimensionMismatch("operator/state spaces differ".into()));
        }
        Ok(&self.matrix * psi.amplitudes())
    }

    /// `⟨a|O|b⟩`
    pub fn element(&self, a: &PureState, b: &PureState) -> Result<num_complex::Complex64> {
        Ok(a.amplitudes().dotc(&self.apply(b)?))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SpinOpKind {
    /// `σ⁻ = |↓⟩⟨↑|`
    Lower,
    /// `σ⁺ = |↑⟩⟨↓|`
    Raise,
    X,
    /// `|↑⟩⟨↑| − |↓⟩⟨↓|`
    Z,
    /// `|o⟩⟨o|`
    ProjectLeak,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModeOpKind {
    Annihilate,
    Create,
    Number,
}

fn single_ion_matrix(levels: usize, kind: SpinOpKind) -> CMatrix {
    let mut m = CMatrix::zeros(levels, levels);
    let (u, d) = (SpinLevel::Up.offset(), SpinLevel::Down.offset());
    match kind {
        SpinOpKind::Lower => m[(d, u)] = ONE,
        SpinOpKind::Raise => m[(u, d)] = ONE,
        SpinOpKind::X => {
            m[(d, u)] = ONE;
            m[(u, d)] = ONE;
        }
        SpinOpKind::Z => {
            m[(u, u)] = ONE;
            m[(d, d)] = -ONE;
        }
        SpinOpKind::ProjectLeak => m[(2, 2)] = ONE,
    }
    m
}

/// Embeds a single-ion `levels × levels` matrix on `ion`, identity elsewhere
/// (including the motional factor).
pub fn embed_single_ion(dims: SystemDims, ion: usize, op: &CMatrix) -> Result<CMatrix> {
    if ion >= dims.n_ions() {
        return Err(Error::IonOutOfRange {
            ion,
            n_ions: dims.n_ions(),
        });
    }
    let levels = dims.levels();
    if op.shape() != (levels, levels) {
        return Err(Error::DimensionMismatch(format!(
            "single-ion operator {:?} for {levels} levels",
            op.shape()
        )));
    }
    let before = levels.pow(ion as u32);
    let after = levels.pow((dims.n_ions() - ion - 1) as u32) * dims.n_fock();
    let left = kron(&CMatrix::identity(before, before), op);
    Ok(kron(&left, &CMatrix::identity(after, after)))
}

/// Single-ion jump `|to⟩⟨from|` on `ion`.
pub fn ion_transition(dims: SystemDims, ion: usize, to: SpinLevel, from: SpinLevel) -> Result<CMatrix> {
    if (to == SpinLevel::Leak || from == SpinLevel::Leak) && !dims.leak_level() {
        return Err(Error::InvalidArgument("leak level not enabled".into()));
    }
    let mut m = CMatrix::zeros(dims.levels(), dims.levels());
    m[(to.offset(), from.offset())] = ONE;
    embed_single_ion(dims, ion, &m)
}

pub fn build_spin_op(dims: SystemDims, ion: usize, kind: SpinOpKind) -> Result<OperatorMatrix> {
    if kind == SpinOpKind::ProjectLeak && !dims.leak_level() {
        return Err(Error::InvalidArgument(
            "leak projector requires the leak level".into(),
        ));
    }
    let m = embed_single_ion(dims, ion, &single_ion_matrix(dims.levels(), kind))?;
    let hermitian = matches!(kind, SpinOpKind::X | SpinOpKind::Z | SpinOpKind::ProjectLeak);
    Ok(OperatorMatrix::from_raw(dims, m, hermitian))
}

/// Ladder operators on the truncated mode. `create` is the adjoint of the
/// truncated `annihilate`, so `create|n_fock−1⟩ = 0`.
pub fn build_mode_op(dims: SystemDims, kind: ModeOpKind) -> Result<OperatorMatrix> {
    let nf = dims.n_fock();
    if nf < 2 {
        return Err(Error::InvalidArgument(
            "mode operators need n_fock >= 2".into(),
        ));
    }
    let mut a = CMatrix::zeros(nf, nf);
    for n in 1..nf {
        a[(n - 1, n)] = c((n as f64).sqrt(), 0.0);
    }
    let (m, hermitian) = match kind {
        ModeOpKind::Annihilate => (a, false),
        ModeOpKind::Create => (a.adjoint(), false),
        ModeOpKind::Number => (a.adjoint() * &a, true),
    };
    let ns = dims.spin_dim();
    Ok(OperatorMatrix::from_raw(
        dims,
        kron(&CMatrix::identity(ns, ns), &m),
        hermitian,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NamedState {
    /// `|↑↑⟩`
    UpUp,
    /// `|↓↓⟩`
    DownDown,
    /// `(|↑↓⟩ + |↓↑⟩)/√2`
    Triplet,
    /// `(|↑↓⟩ − |↓↑⟩)/√2`
    Singlet,
    /// `(|↑↑↓⟩ + |↑↓↑⟩ + |↓↑↑⟩)/√3`
    W,
    /// `(|↑↓↓⟩ + |↓↑↓⟩ + |↓↓↑⟩)/√3`
    WBar,
    WClockwise,
    WAnticlockwise,
    WBarClockwise,
    WBarAnticlockwise,
    UpUpUp,
    DownDownDown,
}

impl NamedState {
    pub fn n_ions(self) -> usize {
        match self {
            NamedState::UpUp | NamedState::DownDown | NamedState::Triplet | NamedState::Singlet => 2,
            _ => 3,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            NamedState::UpUp => "uu",
            NamedState::DownDown => "dd",
            NamedState::Triplet => "T",
            NamedState::Singlet => "S",
            NamedState::W => "W",
            NamedState::WBar => "Wbar",
            NamedState::WClockwise => "Wc",
            NamedState::WAnticlockwise => "Wac",
            NamedState::WBarClockwise => "Wbar_c",
            NamedState::WBarAnticlockwise => "Wbar_ac",
            NamedState::UpUpUp => "uuu",
            NamedState::DownDownDown => "ddd",
        }
    }

    pub fn from_label(label: &str) -> Option<NamedState> {
        use NamedState::*;
        [
            UpUp,
            DownDown,
            Triplet,
            Singlet,
            W,
            WBar,
            WClockwise,
            WAnticlockwise,
            WBarClockwise,
            WBarAnticlockwise,
            UpUpUp,
            DownDownDown,
        ]
        .into_iter()
        .find(|s| s.label() == label)
    }

    /// `(coefficient, spins)` terms before normalization.
    fn terms(self) -> Vec<(num_complex::Complex64, [SpinLevel; 3])> {
        use SpinLevel::{Down as D, Up as U};
        let w = phase(2.0 * PI / 3.0);
        let wc = w.conj();
        match self {
            NamedState::UpUp => vec![(ONE, [U, U, U])],
            NamedState::DownDown => vec![(ONE, [D, D, U])],
            NamedState::Triplet => vec![(ONE, [U, D, U]), (ONE, [D, U, U])],
            NamedState::Singlet => vec![(ONE, [U, D, U]), (-ONE, [D, U, U])],
            NamedState::W => vec![(ONE, [U, U, D]), (ONE, [U, D, U]), (ONE, [D, U, U])],
            NamedState::WBar => vec![(ONE, [U, D, D]), (ONE, [D, U, D]), (ONE, [D, D, U])],
            NamedState::WClockwise => vec![(w, [U, U, D]), (ONE, [U, D, U]), (wc, [D, U, U])],
            NamedState::WAnticlockwise => vec![(wc, [U, U, D]), (ONE, [U, D, U]), (w, [D, U, U])],
            NamedState::WBarClockwise => vec![(w, [D, D, U]), (ONE, [D, U, D]), (wc, [U, D, D])],
            NamedState::WBarAnticlockwise => {
                vec![(wc, [D, D, U]), (ONE, [D, U, D]), (w, [U, D, D])]
            }
            NamedState::UpUpUp => vec![(ONE, [U, U, U])],
            NamedState::DownDownDown => vec![(ONE, [D, D, D])],
        }
    }
}

/// Spin-only vector of a named state in the spin factor of `dims`.
pub fn named_spin_state(dims: SystemDims, name: NamedState) -> Result<PureState> {
    if name.n_ions() != dims.n_ions() {
        return Err(Error::InvalidArgument(format!(
            "state {} needs {} ions, system has {}",
            name.label(),
            name.n_ions(),
            dims.n_ions()
        )));
    }
    let spin_dims = dims.spin_part();
    let mut v = CVector::zeros(spin_dims.dim());
    for (coef, spins) in name.terms() {
        v[spin_dims.spin_index(&spins[..dims.n_ions()])?] += coef;
    }
    PureState::normalized(spin_dims, v)
}

pub fn named_state(dims: SystemDims, name: NamedState, fock_n: usize) -> Result<PureState> {
    named_spin_state(dims, name)?.with_fock(dims, fock_n)
}

/// Probability of the truncated thermal distribution beyond the last kept
/// level, `(n̄/(1+n̄))^{n_fock}`.
pub fn thermal_tail(n_bar: f64, n_fock: usize) -> f64 {
    if n_bar == 0.0 {
        return 0.0;
    }
    (n_bar / (1.0 + n_bar)).powi(n_fock as i32)
}

/// Truncated and renormalized thermal occupation probabilities.
pub fn thermal_weights(n_bar: f64, n_fock: usize) -> Vec<f64> {
    let ratio = if n_bar == 0.0 { 0.0 } else { n_bar / (1.0 + n_bar) };
    let raw: Vec<f64> = (0..n_fock).map(|n| ratio.powi(n as i32)).collect();
    let z: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / z).collect()
}

/// `|spin⟩⟨spin| ⊗ ρ_thermal(n̄)`
pub fn thermal_product_state(dims: SystemDims, spin: &PureState, n_bar: f64) -> Result<DensityOperator> {
    if !(n_bar >= 0.0) {
        return Err(Error::InvalidArgument(format!("n_bar must be >= 0, got {n_bar}")));
    }
    if spin.dims() != dims.spin_part() {
        return Err(Error::DimensionMismatch(
            "spin state does not match the system's spin factor".into(),
        ));
    }
    let tail = thermal_tail(n_bar, dims.n_fock());
    if tail >= 1e-6 {
        return Err(Error::InvalidArgument(format!(
            "Fock truncation {} too small for n_bar = {n_bar} (tail weight {tail:.2e})",
            dims.n_fock()
        )));
    }
    let weights = thermal_weights(n_bar, dims.n_fock());
    let motion = CMatrix::from_diagonal(&CVector::from_iterator(
        weights.len(),
        weights.iter().map(|w| c(*w, 0.0)),
    ));
    let s = spin.amplitudes();
    let spin_rho = s * s.adjoint();
    Ok(DensityOperator::from_raw(dims, kron(&spin_rho, &motion)))
}

/// Two-ion `{|↑↑⟩, |T⟩, |S⟩, |↓↓⟩}` basis on the spin factor.
pub fn two_ion_dicke_basis(dims: SystemDims) -> Result<[PureState; 4]> {
    Ok([
        named_spin_state(dims, NamedState::UpUp)?,
        named_spin_state(dims, NamedState::Triplet)?,
        named_spin_state(dims, NamedState::Singlet)?,
        named_spin_state(dims, NamedState::DownDown)?,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs;
    use proptest::prelude::*;

    fn two() -> SystemDims {
        SystemDims::new(2, 4, false).unwrap()
    }

    #[test]
    fn dimension_formula() {
        assert_eq!(SystemDims::new(3, 16, true).unwrap().dim(), 27 * 16);
        assert_eq!(SystemDims::new(2, 10, false).unwrap().dim(), 40);
        assert!(SystemDims::new(4, 3, false).is_err());
        assert!(SystemDims::new(2, 0, false).is_err());
    }

    #[test]
    fn decode_inverts_index() {
        let d = SystemDims::new(3, 5, true).unwrap();
        for k in 0..d.dim() {
            let (spins, n) = d.decode(k);
            assert_eq!(d.index(&spins, n).unwrap(), k);
        }
    }

    #[test]
    fn lowering_ion_one() {
        let d = two();
        let s1 = build_spin_op(d, 0, SpinOpKind::Lower).unwrap();
        let uu = PureState::basis(d, &[SpinLevel::Up, SpinLevel::Up], 0).unwrap();
        let du = PureState::basis(d, &[SpinLevel::Down, SpinLevel::Up], 0).unwrap();
        let out = s1.apply(&uu).unwrap();
        assert!((out - du.amplitudes()).norm() < 1e-15);
    }

    #[test]
    fn collective_x_on_upup_gives_sqrt2_triplet() {
        let d = two();
        let x = build_spin_op(d, 0, SpinOpKind::X).unwrap().into_matrix()
            + build_spin_op(d, 1, SpinOpKind::X).unwrap().into_matrix();
        let uu = named_state(d, NamedState::UpUp, 0).unwrap();
        let t = named_state(d, NamedState::Triplet, 0).unwrap();
        let amp = t.amplitudes().dotc(&(&x * uu.amplitudes()));
        assert!((amp - c(2f64.sqrt(), 0.0)).norm() < 1e-14);
    }

    #[test]
    fn raise_is_adjoint_of_lower() {
        let d = SystemDims::new(3, 3, true).unwrap();
        for ion in 0..3 {
            let lo = build_spin_op(d, ion, SpinOpKind::Lower).unwrap();
            let hi = build_spin_op(d, ion, SpinOpKind::Raise).unwrap();
            assert_eq!(lo.matrix().adjoint(), *hi.matrix());
        }
    }

    #[test]
    fn spin_op_errors() {
        let d = two();
        assert_eq!(
            build_spin_op(d, 2, SpinOpKind::X).unwrap_err(),
            Error::IonOutOfRange { ion: 2, n_ions: 2 }
        );
        assert!(build_spin_op(d, 0, SpinOpKind::ProjectLeak).is_err());
    }

    #[test]
    fn ladder_conventions() {
        let d = two();
        let a = build_mode_op(d, ModeOpKind::Annihilate).unwrap();
        let one = PureState::basis(d, &[SpinLevel::Up, SpinLevel::Up], 1).unwrap();
        let zero = PureState::basis(d, &[SpinLevel::Up, SpinLevel::Up], 0).unwrap();
        assert!((a.apply(&one).unwrap() - zero.amplitudes()).norm() < 1e-15);

        let ad = build_mode_op(d, ModeOpKind::Create).unwrap();
        let top = PureState::basis(d, &[SpinLevel::Up, SpinLevel::Up], d.n_fock() - 1).unwrap();
        assert!(ad.apply(&top).unwrap().norm() < 1e-15);
        assert_eq!(*ad.matrix(), a.matrix().adjoint());
        assert!(build_mode_op(SystemDims::spins(2, false).unwrap(), ModeOpKind::Number).is_err());
    }

    #[test]
    fn number_expectation_on_thermal_state() {
        let d = SystemDims::new(2, 16, false).unwrap();
        let n_bar = 0.006;
        let spin = named_spin_state(d, NamedState::UpUp).unwrap();
        let rho = thermal_product_state(d, &spin, n_bar).unwrap();
        let num = build_mode_op(d, ModeOpKind::Number).unwrap();
        let expect = (num.matrix() * rho.matrix()).trace().re;
        // independent geometric sum over the kept levels
        let r: f64 = n_bar / (1.0 + n_bar);
        let z: f64 = (0..16).map(|n| r.powi(n)).sum();
        let oracle: f64 = (0..16).map(|n| n as f64 * r.powi(n)).sum::<f64>() / z;
        assert!((expect - oracle).abs() < 1e-15);
        assert!((expect - n_bar).abs() < 1e-12);
    }

    #[test]
    fn thermal_state_weights() {
        let d = SystemDims::new(2, 16, false).unwrap();
        let spin = named_spin_state(d, NamedState::Triplet).unwrap();
        let zero = thermal_product_state(d, &spin, 0.0).unwrap();
        let pure = named_state(d, NamedState::Triplet, 0).unwrap().to_density();
        assert!(max_abs(&(zero.matrix() - pure.matrix())) < 1e-15);

        let rho = thermal_product_state(d, &spin, 0.006).unwrap();
        let pops = rho.fock_populations();
        let r: f64 = 0.006 / 1.006;
        let z: f64 = (0..16).map(|n| r.powi(n)).sum();
        assert!((pops[1] - r / z).abs() < 1e-14);
        assert!((pops[1] - 0.00596).abs() < 1e-4);
        assert!((rho.trace() - 1.0).abs() < 1e-12);
        rho.validate(1e-12).unwrap();

        let small = SystemDims::new(2, 3, false).unwrap();
        assert!(thermal_product_state(small, &named_spin_state(small, NamedState::UpUp).unwrap(), 0.5).is_err());
    }

    #[test]
    fn named_state_orthogonality() {
        let d = two();
        let t = named_state(d, NamedState::Triplet, 0).unwrap();
        let s = named_state(d, NamedState::Singlet, 0).unwrap();
        assert!(t.inner(&s).unwrap().norm() < 1e-15);
        assert!((t.fock_populations()[0] - 1.0).abs() < 1e-14);

        let d3 = SystemDims::new(3, 2, false).unwrap();
        let w = named_state(d3, NamedState::W, 0).unwrap();
        let wc = named_state(d3, NamedState::WClockwise, 0).unwrap();
        let wac = named_state(d3, NamedState::WAnticlockwise, 0).unwrap();
        assert!(w.inner(&wc).unwrap().norm() < 1e-15);
        assert!(wc.inner(&wac).unwrap().norm() < 1e-15);
        assert!(w.inner(&wac).unwrap().norm() < 1e-15);

        assert!(named_state(d, NamedState::W, 0).is_err());
        assert!(named_state(d, NamedState::Triplet, 4).is_err());
    }

    #[test]
    fn w_clockwise_phases() {
        let d3 = SystemDims::spins(3, false).unwrap();
        let wc = named_spin_state(d3, NamedState::WClockwise).unwrap();
        use SpinLevel::{Down as D, Up as U};
        let k = d3.spin_index(&[U, U, D]).unwrap();
        let expected = phase(2.0 * PI / 3.0) / 3f64.sqrt();
        assert!((wc.amplitudes()[k] - expected).norm() < 1e-15);
    }

    #[test]
    fn dicke_basis_is_orthonormal_and_complete() {
        let d = two();
        let basis = two_ion_dicke_basis(d).unwrap();
        let mut proj = CMatrix::zeros(4, 4);
        for (i, a) in basis.iter().enumerate() {
            for (j, b) in basis.iter().enumerate() {
                let g = a.inner(b).unwrap();
                let expected = if i == j { ONE } else { ZERO };
                assert!((g - expected).norm() < 1e-12);
            }
            proj += a.amplitudes() * a.amplitudes().adjoint();
        }
        assert!(max_abs(&(proj - CMatrix::identity(4, 4))) < 1e-12);
    }

    fn kind_strategy() -> impl Strategy<Value = SpinOpKind> {
        prop_oneof![
            Just(SpinOpKind::Lower),
            Just(SpinOpKind::Raise),
            Just(SpinOpKind::X),
            Just(SpinOpKind::Z),
            Just(SpinOpKind::ProjectLeak),
        ]
    }

    proptest! {
        #[test]
        fn distinct_ions_commute(
            n_ions in 2usize..=3,
            i in 0usize..3,
            j in 0usize..3,
            ka in kind_strategy(),
            kb in kind_strategy(),
        ) {
            let d = SystemDims::new(n_ions, 2, true).unwrap();
            prop_assume!(i < n_ions && j < n_ions && i != j);
            let a = build_spin_op(d, i, ka).unwrap();
            let b = build_spin_op(d, j, kb).unwrap();
            let comm = a.matrix() * b.matrix() - b.matrix() * a.matrix();
            prop_assert!(max_abs(&comm) == 0.0);
        }
    }
}
