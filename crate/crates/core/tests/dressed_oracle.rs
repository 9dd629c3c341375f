// Copyright 2026 The ionzeno Authors
// SPDX-License-Identifier: Apache-2.0

//! Perturbative dressed amplitudes against full unitary propagation.

use ionzeno::dressed::{dressed_spectrum, optimal_detuning, perturbative_composite, perturbative_single, undesired_hamiltonian};
use ionzeno::dynamics::PureEvolution;
use ionzeno::hilbert::{named_state, NamedState, PureState, SystemDims};
use ionzeno::linalg::C64;
use ionzeno::model::{ChainModel, PulseSchedule, PulseSegment};

fn subspace(dims: SystemDims) -> [PureState; 3] {
    [
        named_state(dims, NamedState::DownDown, 0).unwrap(),
        named_state(dims, NamedState::Singlet, 1).unwrap(),
        named_state(dims, NamedState::UpUp, 2).unwrap(),
    ]
}

fn dressed_amplitude(basis: &[PureState; 3], psi_n: &[f64; 3], state: &PureState) -> C64 {
    basis
        .iter()
        .zip(psi_n)
        .map(|(b, &w)| b.inner(state).unwrap() * w)
        .sum()
}

#[test]
fn model_reproduces_undesired_block() {
    let dims = SystemDims::new(2, 6, false).unwrap();
    let model = ChainModel::canonical(dims).unwrap();
    let (omega_s, delta) = (1.3, 0.4);
    let seg = PulseSegment::new(1.0, omega_s, 0.0, delta).unwrap();
    let h = model.segment_hamiltonian(&seg).unwrap();
    let basis = subspace(dims);
    let hu = undesired_hamiltonian(omega_s, delta);
    for i in 0..3 {
        let hv = &h * basis[i].amplitudes();
        for j in 0..3 {
            let e: C64 = basis[j].amplitudes().dotc(&hv);
            assert!((e.re - hu[(j, i)]).abs() < 1e-12 && e.im.abs() < 1e-12, "({j},{i}) {e}");
        }
    }
}

fn max_relative_deviation(composite: bool, ratio: f64) -> [f64; 3] {
    let omega_s = 1.0;
    let omega_d = omega_s / ratio;
    let delta = optimal_detuning(omega_s);
    let spec = dressed_spectrum(omega_s, delta, omega_d).unwrap();
    let tp = spec.t_pi();
    let dims = SystemDims::new(2, 10, false).unwrap();
    let model = ChainModel::canonical(dims).unwrap();
    let schedule = if composite {
        let t1 = tp / 3.0;
        PulseSchedule::new(vec![
            PulseSegment::new(t1, omega_s, omega_d, delta).unwrap(),
            PulseSegment::new(tp - t1, omega_s, omega_d, -delta)
                .unwrap()
                .with_laser_phase(std::f64::consts::PI),
        ])
        .unwrap()
    } else {
        PulseSchedule::single(PulseSegment::new(tp, omega_s, omega_d, delta).unwrap()).unwrap()
    };
    let initial = named_state(dims, NamedState::UpUp, 0).unwrap();
    let run = PureEvolution::new(&schedule, &model, &initial).unwrap();
    let times: Vec<f64> = (0..=300).map(|k| tp * k as f64 / 300.0).collect();
    let trace = if composite {
        perturbative_composite(&spec, tp / 3.0, &times, false).unwrap()
    } else {
        perturbative_single(&spec, &times, false).unwrap()
    };
    let basis = subspace(dims);
    let mut out = [0.0; 3];
    for n in 0..3 {
        let scale = trace.c_n1[n].iter().map(|z| z.norm()).fold(0.0, f64::max);
        let dev = times
            .iter()
            .enumerate()
            .map(|(k, &t)| {
                let sim = dressed_amplitude(&basis, &spec.eigenvectors[n], &run.state_at(t));
                (sim - trace.c_n1[n][k]).norm()
            })
            .fold(0.0, f64::max);
        out[n] = dev / scale;
    }
    out
}

#[test]
fn single_pulse_amplitudes_follow_unitary_oracle() {
    let dev = max_relative_deviation(false, 12.0);
    for (n, d) in dev.iter().enumerate() {
        assert!(*d < 0.05, "psi_{} deviation {d}", n + 1);
    }
}

#[test]
fn composite_amplitudes_follow_unitary_oracle() {
    let dev = max_relative_deviation(true, 12.0);
    for (n, d) in dev.iter().take(2).enumerate() {
        assert!(*d < 0.05, "psi_{} deviation {d}", n + 1);
    }
    // ψ₃ is weakly populated, so its residual is relatively larger but still
    // shrinks with the drive ratio
    let finer = max_relative_deviation(true, 24.0);
    for n in 0..3 {
        assert!(finer[n] < 0.6 * dev[n], "psi_{}: {} -> {}", n + 1, dev[n], finer[n]);
    }
}
