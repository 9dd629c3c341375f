// Copyright 2026 The ionzeno Authors
// SPDX-License-Identifier: Apache-2.0

//! Analysis rotations, the "n ions bright" projectors and the linear
//! fidelity functional built from them.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{named_spin_state, NamedState, PureState, SystemDims};
use crate::linalg::{c, kron, CMatrix, C64, I, ONE, ZERO};

/// Largest allowed residual of the fidelity-functional solve.
pub const FUNCTIONAL_RESIDUAL: f64 = 1e-10;

/// Single-ion rotation `cos(Θ/2)·1 − i sin(Θ/2)(cos Φ σx + sin Φ σy)` in the
/// `(↑, ↓)` basis.
pub fn rotation(theta: f64, phi: f64) -> CMatrix {
    let (s, co) = (0.5 * theta).sin_cos();
    let off = -I * s;
    CMatrix::from_row_slice(
        2,
        2,
        &[
            c(co, 0.0),
            off * C64::from_polar(1.0, -phi),
            off * C64::from_polar(1.0, phi),
            c(co, 0.0),
        ],
    )
}

/// The same rotation applied to every ion.
pub fn global_rotation(n_ions: usize, theta: f64, phi: f64) -> CMatrix {
    let r = rotation(theta, phi);
    (1..n_ions).fold(r.clone(), |acc, _| kron(&acc, &r))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalysisSetting {
    pub theta: f64,
    pub phi: f64,
}

impl AnalysisSetting {
    pub const IDENTITY: AnalysisSetting = AnalysisSetting { theta: 0.0, phi: 0.0 };
}

#[derive(Debug, Clone)]
pub struct MeasurementDesign {
    pub n_ions: usize,
    pub settings: Vec<AnalysisSetting>,
    /// `U_i` for each setting.
    pub unitaries: Vec<CMatrix>,
    /// Diagonal projectors `A_n` onto exactly `n` ions in `|↑⟩`.
    pub projectors: Vec<CMatrix>,
    pub target_name: NamedState,
    pub target: PureState,
    /// `coefficients[i][n]` with `Σ c_{i,n} U_i†A_nU_i = |target⟩⟨target|`.
    pub coefficients: Vec<Vec<f64>>,
    pub residual: f64,
    /// `U_i†A_nU_i`, indexed `[i][n]`.
    effects: Vec<Vec<CMatrix>>,
}

impl MeasurementDesign {
    pub fn spin_dim(&self) -> usize {
        1 << self.n_ions
    }

    pub fn n_classes(&self) -> usize {
        self.n_ions + 1
    }

    pub fn n_settings(&self) -> usize {
        self.settings.len()
    }

    /// `U_i†A_nU_i`.
    pub fn effect(&self, setting: usize, n: usize) -> &CMatrix {
        &self.effects[setting][n]
    }

    /// `tr(A_n U_i ρ U_i†)` for every `n`.
    pub fn class_populations(&self, setting: usize, rho: &CMatrix) -> Vec<f64> {
        self.effects[setting].iter().map(|e| trace_product(e, rho)).collect()
    }

    /// `Σ c_{i,n} P_i(n)` over a table of populations indexed `[i][n]`.
    pub fn fidelity_from_populations(&self, pops: &[Vec<f64>]) -> f64 {
        self.coefficients
            .iter()
            .zip(pops)
            .map(|(ci, pi)| ci.iter().zip(pi).map(|(a, b)| a * b).sum::<f64>())
            .sum()
    }

    pub fn target_fidelity(&self, rho: &CMatrix) -> f64 {
        let v = self.target.amplitudes();
        (v.adjoint() * rho * v)[(0, 0)].re
    }
}

/// `Re tr(A B)` for Hermitian `A`, `B`.
pub(crate) fn trace_product(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter().zip(b.transpose().iter()).map(|(x, y)| (x * y).re).sum()
}

fn bright_projectors(n_ions: usize) -> Result<Vec<CMatrix>> {
    let dims = SystemDims::spins(n_ions, false)?;
    let d = dims.spin_dim();
    Ok((0..=n_ions)
        .map(|n| CMatrix::from_fn(d, d, |i, j| if i == j && dims.up_count(i) == n { ONE } else { ZERO }))
        .collect())
}

/// Analysis phases `πN/10`, `N = 0..19`.
pub fn analysis_phases() -> Vec<f64> {
    (0..20).map(|n| PI * n as f64 / 10.0).collect()
}

/// Identity plus twenty global `(Θ, πN/10)` rotations, with `Θ = π/2` for
/// `|T⟩` and `Θ = arccos(1/3)` for `|W⟩`.
pub fn analysis_design(target: NamedState) -> Result<MeasurementDesign> {
    let theta = match target {
        NamedState::Triplet => PI / 2.0,
        NamedState::W => (1.0f64 / 3.0).acos(),
        other => {
            return Err(Error::InvalidArgument(format!(
                "no analysis design for target {}",
                other.label()
            )))
        }
    };
    let settings = std::iter::once(AnalysisSetting::IDENTITY)
        .chain(analysis_phases().into_iter().map(|phi| AnalysisSetting { theta, phi }))
        .collect();
    design_with_settings(target, settings)
}

/// Design for arbitrary settings. Fails when the target projector is not in
/// the span of the effects.
pub fn design_with_settings(target: NamedState, settings: Vec<AnalysisSetting>) -> Result<MeasurementDesign> {
    let n_ions = target.n_ions();
    let spin = SystemDims::spins(n_ions, false)?;
    let state = named_spin_state(spin, target)?;
    let projectors = bright_projectors(n_ions)?;
    let unitaries: Vec<CMatrix> = settings
        .iter()
        .map(|s| global_rotation(n_ions, s.theta, s.phi))
        .collect();
    let effects: Vec<Vec<CMatrix>> = unitaries
        .iter()
        .map(|u| projectors.iter().map(|a| u.adjoint() * a * u).collect())
        .collect();

    // Real linear system over the real and imaginary parts of all entries.
    let d = spin.spin_dim();
    let n_cols = effects.len() * projectors.len();
    let n_rows = 2 * d * d;
    let flatten = |m: &CMatrix| -> Vec<f64> { m.iter().map(|z| z.re).chain(m.iter().map(|z| z.im)).collect() };
    let mut a = DMatrix::<f64>::zeros(n_rows, n_cols);
    for (col, e) in effects.iter().flatten().enumerate() {
        a.set_column(col, &DVector::from_vec(flatten(e)));
    }
    let v = state.amplitudes();
    let proj = v * v.adjoint();
    let b = DVector::from_vec(flatten(&proj));
    // Minimum-norm least squares through the eigenvectors of AᵀA; the
    // system is heavily rank deficient.
    let gram = a.transpose() * &a;
    let rhs = a.transpose() * &b;
    let eig = gram.symmetric_eigen();
    let cutoff = 1e-12 * eig.eigenvalues.amax();
    let mut x = DVector::<f64>::zeros(n_cols);
    for (k, &lam) in eig.eigenvalues.iter().enumerate() {
        if lam > cutoff {
            let v = eig.eigenvectors.column(k);
            x += v * (v.dot(&rhs) / lam);
        }
    }
    let residual = (&a * &x - &b).amax();
    if residual > FUNCTIONAL_RESIDUAL {
        return Err(Error::InvalidArgument(format!(
            "analysis settings cannot express the {} projector (residual {residual:.3e})",
            target.label()
        )));
    }
    let k = projectors.len();
    let coefficients = (0..effects.len())
        .map(|i| (0..k).map(|n| x[i * k + n]).collect())
        .collect();
    Ok(MeasurementDesign {
        n_ions,
        settings,
        unitaries,
        projectors,
        target_name: target,
        target: state,
        coefficients,
        residual,
        effects,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs;
    use proptest::prelude::*;

    fn random_density(d: usize, seed: &[f64]) -> CMatrix {
        let g = CMatrix::from_fn(d, d, |i, j| c(seed[(i * d + j) % seed.len()], seed[(i * d + j + 7) % seed.len()]));
        let rho = &g * g.adjoint();
        let tr = rho.trace();
        rho / tr
    }

    #[test]
    fn rotations_compose() {
        let full = rotation(PI / 2.0, 0.0) * rotation(1.5 * PI, 0.0);
        assert!(max_abs(&(full + CMatrix::identity(2, 2))) < 1e-12);
        let u = rotation(1.0, 0.4);
        assert!(max_abs(&(u.adjoint() * &u - CMatrix::identity(2, 2))) < 1e-12);
    }

    #[test]
    fn two_ion_functional_is_exact() {
        let d = analysis_design(NamedState::Triplet).unwrap();
        assert_eq!(d.n_settings(), 21);
        assert!(d.residual < 1e-10);
    }

    #[test]
    fn three_ion_functional_is_exact() {
        let d = analysis_design(NamedState::W).unwrap();
        assert!(d.residual < 1e-10);
    }

    #[test]
    fn singlet_is_invariant() {
        let d = analysis_design(NamedState::Triplet).unwrap();
        let s = named_spin_state(SystemDims::spins(2, false).unwrap(), NamedState::Singlet).unwrap();
        let rho = s.amplitudes() * s.amplitudes().adjoint();
        for i in 1..d.n_settings() {
            let p = d.class_populations(i, &rho);
            assert!((p[1] - 1.0).abs() < 1e-12, "setting {i}: {p:?}");
        }
    }

    #[test]
    fn chiral_w_keeps_two_thirds_in_p2() {
        let d = analysis_design(NamedState::W).unwrap();
        let dims = SystemDims::spins(3, false).unwrap();
        for name in [NamedState::WClockwise, NamedState::WAnticlockwise] {
            let s = named_spin_state(dims, name).unwrap();
            let rho = s.amplitudes() * s.amplitudes().adjoint();
            for i in 1..d.n_settings() {
                let p = d.class_populations(i, &rho);
                assert!((p[2] - 2.0 / 3.0).abs() < 1e-12, "{:?} setting {i}: {p:?}", name);
            }
        }
    }

    #[test]
    fn identity_alone_is_rejected() {
        assert!(design_with_settings(NamedState::Triplet, vec![AnalysisSetting::IDENTITY]).is_err());
        assert!(analysis_design(NamedState::UpUp).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]
        #[test]
        fn functional_matches_overlap(seed in proptest::collection::vec(-1.0f64..1.0, 32), three in any::<bool>()) {
            let target = if three { NamedState::W } else { NamedState::Triplet };
            let d = analysis_design(target).unwrap();
            let rho = random_density(d.spin_dim(), &seed);
            let pops: Vec<Vec<f64>> = (0..d.n_settings()).map(|i| d.class_populations(i, &rho)).collect();
            let f = d.fidelity_from_populations(&pops);
            prop_assert!((f - d.target_fidelity(&rho)).abs() < 1e-9);
        }
    }
}
