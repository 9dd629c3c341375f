// Copyright 2026 The ionzeno Authors
// SPDX-License-Identifier: Apache-2.0

//! Three-ion restriction: the sideband leaves `|↑↑↑,0⟩` and `|W,0⟩` alone and
//! shifts `|W̄,0⟩` through its coupling to `|W_c,1⟩`, so the microwave
//! effectively drives a two-level system `|↑↑↑⟩ ↔ |W⟩`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::hilbert::{named_state, NamedState, PureState, SystemDims};
use crate::linalg::{CMatrix, C64};
use crate::model::{microwave_hamiltonian, sideband_hamiltonian, IonGeometry, PulseSegment};

/// Fock truncation used for the restricted matrices; `|W_c,1⟩` is the
/// highest state reached.
const LADDER_FOCK: usize = 3;

#[derive(Debug, Clone)]
pub struct ThreeIonLadder {
    pub omega_s: f64,
    pub omega_d: f64,
    pub delta: f64,
    /// `(label, state)` in the order uuu,0 / W,0 / Wbar,0 / Wc,1 / ddd,0.
    pub states: Vec<(String, PureState)>,
    /// `⟨i|H_s′|j⟩` over `states`.
    pub sideband: CMatrix,
    /// `⟨i|H_d′|j⟩` over `states`.
    pub drive: CMatrix,
    /// `‖H_s′|s⟩‖` in the full space for each state; nonzero values for
    /// states outside the ladder show where it is left.
    pub sideband_norms: Vec<f64>,
}

impl ThreeIonLadder {
    pub fn index(&self, label: &str) -> Option<usize> {
        self.states.iter().position(|(l, _)| l == label)
    }

    pub fn sideband_element(&self, to: &str, from: &str) -> Option<C64> {
        Some(self.sideband[(self.index(to)?, self.index(from)?)])
    }

    pub fn drive_element(&self, to: &str, from: &str) -> Option<C64> {
        Some(self.drive[(self.index(to)?, self.index(from)?)])
    }
}

/// `π/(2√3 Ω_d′)`, the effective `|↑↑↑⟩ → |W⟩` transfer time.
pub fn effective_pi_time(omega_d: f64) -> f64 {
    PI / (2.0 * 3f64.sqrt() * omega_d)
}

/// Rejects geometries whose sideband does not cancel on `|W,0⟩`.
pub fn check_dark_geometry(geom: &IonGeometry) -> Result<()> {
    if geom.n_ions() != 3 {
        return Err(Error::InvalidArgument(format!(
            "three-ion ladder needs 3 ions, geometry has {}",
            geom.n_ions()
        )));
    }
    let sum: C64 = geom
        .signs()
        .iter()
        .zip(geom.phase_per_ion())
        .map(|(s, th)| C64::from_polar(*s, -th))
        .sum();
    if sum.norm() > 1e-12 {
        return Err(Error::InvalidArgument(format!(
            "geometry does not make |W,0> dark (residual {:.3e})",
            sum.norm()
        )));
    }
    Ok(())
}

pub fn three_ion_ladder(omega_s: f64, omega_d: f64) -> Result<ThreeIonLadder> {
    three_ion_ladder_with(&IonGeometry::three_ion_com(), omega_s, omega_d, 0.0)
}

/// Ladder for an explicit geometry and sideband detuning `δ′`.
pub fn three_ion_ladder_with(geom: &IonGeometry, omega_s: f64, omega_d: f64, delta: f64) -> Result<ThreeIonLadder> {
    check_dark_geometry(geom)?;
    let dims = SystemDims::new(3, LADDER_FOCK, false)?;
    let seg = PulseSegment::new(1.0, omega_s, 0.0, delta)?;
    let hs = sideband_hamiltonian(dims, geom, &seg)?.into_matrix();
    let hd = microwave_hamiltonian(dims, omega_d, 0.0)?.into_matrix();

    let mut states = vec![
        ("uuu,0".to_string(), named_state(dims, NamedState::UpUpUp, 0)?),
        ("W,0".to_string(), named_state(dims, NamedState::W, 0)?),
        ("Wbar,0".to_string(), named_state(dims, NamedState::WBar, 0)?),
        ("Wc,1".to_string(), named_state(dims, NamedState::WClockwise, 1)?),
        ("ddd,0".to_string(), named_state(dims, NamedState::DownDownDown, 0)?),
    ];
    // With a reversed phase pattern the partner is the anticlockwise state.
    if omega_s != 0.0 {
        let wbar = states[2].1.amplitudes().clone();
        let image = &hs * &wbar;
        let wc = states[3].1.amplitudes().dotc(&image).norm();
        let wac_state = named_state(dims, NamedState::WAnticlockwise, 1)?;
        let wac = wac_state.amplitudes().dotc(&image).norm();
        if wac > wc {
            states[3] = ("Wac,1".to_string(), wac_state);
        }
    }

    let n = states.len();
    let restrict = |h: &CMatrix| {
        CMatrix::from_fn(n, n, |i, j| {
            let hv = h * states[j].1.amplitudes();
            states[i].1.amplitudes().dotc(&hv)
        })
    };
    let sideband = restrict(&hs);
    let drive = restrict(&hd);
    let sideband_norms = states.iter().map(|(_, s)| (&hs * s.amplitudes()).norm()).collect();
    Ok(ThreeIonLadder {
        omega_s,
        omega_d,
        delta,
        states,
        sideband,
        drive,
        sideband_norms,
    })
}
