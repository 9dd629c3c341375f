// Copyright 2026 The ionzeno Authors
// SPDX-License-Identifier: Apache-2.0

//! Dressed-state analysis of the two-ion undesired subspace
//! `{|↓↓,0⟩, |S,1⟩, |↑↑,2⟩}` and first-order perturbative leakage.
//!
//! For `Ω_s > 0` the three eigenfrequencies are labelled by branch:
//! `Δ₁` is the middle eigenvalue, `Δ₂` the smallest and `Δ₃` the largest.
//! The Hamiltonian is an irreducible tridiagonal matrix, so the branches never
//! cross and this labelling is continuous in `δ`. At `δ = √(7/3)Ω_s` it gives
//! `Δ₁ = +2Ω_s/√3`, `Δ₂ = −Δ₁`, `Δ₃ = √21 Ω_s`.
//!
//! Reversing the signs of both `Ω_s` and `δ` negates `H_u`, so the spectrum at
//! `(−Ω_s, −δ)` is reported with negated eigenfrequencies and the same
//! eigenvectors and branch labels.

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c, C64, I};

/// `δ = √(7/3) Ω_s`, where `Δ₁ = −Δ₂`.
pub fn optimal_detuning(omega_s: f64) -> f64 {
    (7.0f64 / 3.0).sqrt() * omega_s
}

/// `H_u = δ diag(0,1,2)` with `⟨S,1|H|↓↓,0⟩ = √2Ω_s`, `⟨↑↑,2|H|S,1⟩ = −2Ω_s`.
pub fn undesired_hamiltonian(omega_s: f64, delta: f64) -> Matrix3<f64> {
    let a = 2f64.sqrt() * omega_s;
    let b = -2.0 * omega_s;
    Matrix3::new(0.0, a, 0.0, a, delta, b, 0.0, b, 2.0 * delta)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DressedSpectrum {
    pub omega_s: f64,
    pub delta: f64,
    pub omega_d: f64,
    /// `[Δ₁, Δ₂, Δ₃]`
    pub eigenfrequencies: [f64; 3],
    /// `ψₙ` over `(|↓↓,0⟩, |S,1⟩, |↑↑,2⟩)`; real, with a positive `|↑↑,2⟩`
    /// component.
    pub eigenvectors: [[f64; 3]; 3],
    /// `[Ω₀, Ω₁, Ω₂, Ω₃]` with `Ω₀ = √2 Ω_d` and `Ωₙ = √2 Ω_d ψₙ(|↓↓,0⟩)`.
    pub couplings: [f64; 4],
}

impl DressedSpectrum {
    pub fn omega_0(&self) -> f64 {
        self.couplings[0]
    }

    /// `π/(2Ω₀)`
    pub fn t_pi(&self) -> f64 {
        std::f64::consts::PI / (2.0 * self.omega_0())
    }

    pub fn eigenvector(&self, n: usize) -> Vector3<f64> {
        Vector3::from(self.eigenvectors[n])
    }
}

/// Eigen-decomposition for `Ω_s > 0`, labelled by branch.
fn positive_branch(omega_s: f64, delta: f64) -> Result<([f64; 3], [[f64; 3]; 3])> {
    let eig = SymmetricEigen::new(undesired_hamiltonian(omega_s, delta));
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| {
        eig.eigenvalues[a]
            .partial_cmp(&eig.eigenvalues[b])
            .expect("finite eigenvalues")
    });
    let scale = omega_s.abs().max(delta.abs());
    for w in order.windows(2) {
        let gap = eig.eigenvalues[w[1]] - eig.eigenvalues[w[0]];
        if gap < 1e-9 * scale {
            return Err(Error::Degenerate(gap));
        }
    }
    // middle, smallest, largest
    let picks = [order[1], order[0], order[2]];
    let mut values = [0.0; 3];
    let mut vectors = [[0.0; 3]; 3];
    for (slot, &k) in picks.iter().enumerate() {
        values[slot] = eig.eigenvalues[k];
        let mut v: Vector3<f64> = eig.eigenvectors.column(k).into();
        if v[2] < 0.0 {
            v = -v;
        }
        vectors[slot] = [v[0], v[1], v[2]];
    }
    Ok((values, vectors))
}

pub fn dressed_spectrum(omega_s: f64, delta: f64, omega_d: f64) -> Result<DressedSpectrum> {
    if omega_s == 0.0 || !omega_s.is_finite() || !delta.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "dressed spectrum needs a finite nonzero omega_s, got {omega_s}"
        )));
    }
    let (values, vectors) = if omega_s > 0.0 {
        positive_branch(omega_s, delta)?
    } else {
        let (v, vecs) = positive_branch(-omega_s, -delta)?;
        ([-v[0], -v[1], -v[2]], vecs)
    };
    let o0 = 2f64.sqrt() * omega_d;
    let couplings = [o0, o0 * vectors[0][0], o0 * vectors[1][0], o0 * vectors[2][0]];
    Ok(DressedSpectrum {
        omega_s,
        delta,
        omega_d,
        eigenfrequencies: values,
        eigenvectors: vectors,
        couplings,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetuningScan {
    pub omega_s: f64,
    pub deltas: Vec<f64>,
    /// Branch-tracked `[Δ₁, Δ₂, Δ₃]` at each detuning.
    pub eigenfrequencies: Vec<[f64; 3]>,
}

fn permutations3() -> [[usize; 3]; 6] {
    [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]]
}

/// Eigenfrequencies on a uniform detuning grid. Each point is matched to the
/// previous one by maximal eigenvector overlap, so branches stay continuous.
pub fn scan_detuning(omega_s: f64, delta_lo: f64, delta_hi: f64, n_points: usize) -> Result<DetuningScan> {
    if n_points < 2 {
        return Err(Error::InvalidArgument("n_points must be at least 2".into()));
    }
    let mut deltas = Vec::with_capacity(n_points);
    let mut values = Vec::with_capacity(n_points);
    let mut prev: Option<[[f64; 3]; 3]> = None;
    for k in 0..n_points {
        let delta = delta_lo + (delta_hi - delta_lo) * k as f64 / (n_points - 1) as f64;
        let spec = dressed_spectrum(omega_s, delta, 0.0)?;
        let (vals, vecs) = match prev {
            None => (spec.eigenfrequencies, spec.eigenvectors),
            Some(p) => {
                let overlap = |a: &[f64; 3], b: &[f64; 3]| (a[0] * b[0] + a[1] * b[1] + a[2] * b[2]).abs();
                let best = permutations3()
                    .into_iter()
                    .max_by(|x, y| {
                        let sx: f64 = (0..3).map(|i| overlap(&p[i], &spec.eigenvectors[x[i]])).sum();
                        let sy: f64 = (0..3).map(|i| overlap(&p[i], &spec.eigenvectors[y[i]])).sum();
                        sx.partial_cmp(&sy).expect("finite overlaps")
                    })
                    .expect("six permutations");
                (
                    [
                        spec.eigenfrequencies[best[0]],
                        spec.eigenfrequencies[best[1]],
                        spec.eigenfrequencies[best[2]],
                    ],
                    [
                        spec.eigenvectors[best[0]],
                        spec.eigenvectors[best[1]],
                        spec.eigenvectors[best[2]],
                    ],
                )
            }
        };
        prev = Some(vecs);
        deltas.push(delta);
        values.push(vals);
    }
    Ok(DetuningScan {
        omega_s,
        deltas,
        eigenfrequencies: values,
    })
}

/// Detunings inside the scan where two eigenfrequencies have equal magnitude
/// and opposite sign, refined by bisection.
pub fn pairwise_cancellation_loci(scan: &DetuningScan) -> Result<Vec<f64>> {
    let pairs = [(0usize, 1usize), (0, 2), (1, 2)];
    let sum_at = |delta: f64, (i, j): (usize, usize)| -> Result<f64> {
        let s = dressed_spectrum(scan.omega_s, delta, 0.0)?;
        Ok(s.eigenfrequencies[i] + s.eigenfrequencies[j])
    };
    let mut out: Vec<f64> = Vec::new();
    for w in 0..scan.deltas.len() - 1 {
        for &(i, j) in &pairs {
            let fa = scan.eigenfrequencies[w][i] + scan.eigenfrequencies[w][j];
            let fb = scan.eigenfrequencies[w + 1][i] + scan.eigenfrequencies[w + 1][j];
            let (mut a, mut b) = (scan.deltas[w], scan.deltas[w + 1]);
            if fa == 0.0 {
                out.push(a);
                continue;
            }
            if fa * fb >= 0.0 {
                continue;
            }
            let mut fa = fa;
            for _ in 0..200 {
                let m = 0.5 * (a + b);
                let fm = sum_at(m, (i, j))?;
                if fm == 0.0 || (b - a).abs() < 1e-15 * scan.omega_s.abs().max(1.0) {
                    a = m;
                    b = m;
                    break;
                }
                if fa * fm < 0.0 {
                    b = m;
                } else {
                    a = m;
                    fa = fm;
                }
            }
            out.push(0.5 * (a + b));
        }
    }
    if let Some(&last) = scan.deltas.last() {
        let e = scan.eigenfrequencies.last().expect("non-empty");
        for &(i, j) in &pairs {
            if e[i] + e[j] == 0.0 {
                out.push(last);
            }
        }
    }
    out.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let tol = 1e-9 * scan.omega_s.abs();
    out.dedup_by(|a, b| (*a - *b).abs() <= tol);
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PerturbativeVariant {
    SingleExact,
    SingleSimplified,
    CompositeExact,
    CompositeSimplified,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbativeTrace {
    pub times: Vec<f64>,
    /// Zeroth-order `|T⟩` amplitude `−i sin(Ω₀t)`.
    pub c_t0: Vec<C64>,
    /// First-order dressed amplitudes, `c_n1[n][k]` at `times[k]`.
    pub c_n1: [Vec<C64>; 3],
    pub variant: PerturbativeVariant,
}

fn check_resonance(spec: &DressedSpectrum) -> Result<()> {
    let o0 = spec.omega_0();
    for d in spec.eigenfrequencies {
        let scale = d.abs().max(o0.abs());
        if (d.abs() - o0).abs() <= 1e-6 * scale {
            return Err(Error::Resonance(d));
        }
    }
    Ok(())
}

/// `iΩₙ/(Δₙ²−Ω₀²)·[Δₙ sin Ω₀t + iΩ₀(cos Ω₀t − e^{−iΔₙt})]`
fn single_exact(omega_n: f64, delta_n: f64, o0: f64, t: f64) -> C64 {
    let pre = I * omega_n / (delta_n * delta_n - o0 * o0);
    let bracket = c(delta_n * (o0 * t).sin(), 0.0) + I * o0 * (c((o0 * t).cos(), 0.0) - C64::from_polar(1.0, -delta_n * t));
    pre * bracket
}

/// `(iΩₙ/Δₙ) sin Ω₀t`
fn single_simple(omega_n: f64, delta_n: f64, o0: f64, t: f64) -> C64 {
    I * (omega_n / delta_n) * (o0 * t).sin()
}

/// Amplitude after the sign flip at `t1`:
/// `−iΩₙ/(Δₙ²−Ω₀²)·[Δₙ(sin Ω₀t − 2 sin Ω₀t₁ e^{iΔₙ(t−t₁)}) − iΩ₀(cos Ω₀t − e^{iΔₙ(t−2t₁)})]`
fn composite_exact(omega_n: f64, delta_n: f64, o0: f64, t1: f64, t: f64) -> C64 {
    let pre = -I * omega_n / (delta_n * delta_n - o0 * o0);
    let first = ((o0 * t).sin() - 2.0 * (o0 * t1).sin() * C64::from_polar(1.0, delta_n * (t - t1))) * delta_n;
    let second = -I * o0 * (c((o0 * t).cos(), 0.0) - C64::from_polar(1.0, delta_n * (t - 2.0 * t1)));
    pre * (first + second)
}

/// `−(iΩₙ/Δₙ)(sin Ω₀t − 2 sin Ω₀t₁ e^{iΔₙ(t−t₁)})`
fn composite_simple(omega_n: f64, delta_n: f64, o0: f64, t1: f64, t: f64) -> C64 {
    -I * (omega_n / delta_n) * ((o0 * t).sin() - 2.0 * (o0 * t1).sin() * C64::from_polar(1.0, delta_n * (t - t1)))
}

fn zeroth_order(o0: f64, times: &[f64]) -> Vec<C64> {
    times.iter().map(|t| -I * (o0 * t).sin()).collect()
}

/// First-order dressed amplitudes for a constant drive.
pub fn perturbative_single(spec: &DressedSpectrum, times: &[f64], simplified: bool) -> Result<PerturbativeTrace> {
    if !simplified {
        check_resonance(spec)?;
    }
    let o0 = spec.omega_0();
    let c_n1 = std::array::from_fn(|n| {
        let (om, d) = (spec.couplings[n + 1], spec.eigenfrequencies[n]);
        times
            .iter()
            .map(|&t| {
                if simplified {
                    single_simple(om, d, o0, t)
                } else {
                    single_exact(om, d, o0, t)
                }
            })
            .collect()
    });
    Ok(PerturbativeTrace {
        times: times.to_vec(),
        c_t0: zeroth_order(o0, times),
        c_n1,
        variant: if simplified {
            PerturbativeVariant::SingleSimplified
        } else {
            PerturbativeVariant::SingleExact
        },
    })
}

/// First-order dressed amplitudes when `Δₙ → −Δₙ` at `t1`.
pub fn perturbative_composite(
    spec: &DressedSpectrum,
    t1: f64,
    times: &[f64],
    simplified: bool,
) -> Result<PerturbativeTrace> {
    let t_max = times.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(t1 > 0.0) || !(t1 < t_max) {
        return Err(Error::InvalidArgument(format!(
            "switch time {t1} must lie inside (0, {t_max})"
        )));
    }
    if !simplified {
        check_resonance(spec)?;
    }
    let o0 = spec.omega_0();
    let c_n1 = std::array::from_fn(|n| {
        let (om, d) = (spec.couplings[n + 1], spec.eigenfrequencies[n]);
        times
            .iter()
            .map(|&t| match (simplified, t <= t1) {
                (false, true) => single_exact(om, d, o0, t),
                (false, false) => composite_exact(om, d, o0, t1, t),
                (true, true) => single_simple(om, d, o0, t),
                (true, false) => composite_simple(om, d, o0, t1, t),
            })
            .collect()
    });
    Ok(PerturbativeTrace {
        times: times.to_vec(),
        c_t0: zeroth_order(o0, times),
        c_n1,
        variant: if simplified {
            PerturbativeVariant::CompositeSimplified
        } else {
            PerturbativeVariant::CompositeExact
        },
    })
}

/// Leakage estimate `1/(4(1+2m)²)` of the synchronized single pulse.
pub fn single_pulse_leakage(m: u32) -> f64 {
    let k = 1.0 + 2.0 * m as f64;
    1.0 / (4.0 * k * k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    /// Roots of det(H_u − λ) by the trigonometric cubic formula.
    fn cubic_roots(omega_s: f64, delta: f64) -> [f64; 3] {
        // λ³ − 3δλ² + (2δ² − 6Ω²)λ + 4Ω²δ = 0
        let o2 = omega_s * omega_s;
        let (a, b, cc) = (-3.0 * delta, 2.0 * delta * delta - 6.0 * o2, 4.0 * o2 * delta);
        let p = b - a * a / 3.0;
        let q = 2.0 * a * a * a / 27.0 - a * b / 3.0 + cc;
        let r = 2.0 * (-p / 3.0).sqrt();
        let arg = (3.0 * q / (p * r)).clamp(-1.0, 1.0);
        let phi = arg.acos() / 3.0;
        let mut roots = [0.0; 3];
        for (k, root) in roots.iter_mut().enumerate() {
            *root = r * (phi - 2.0 * PI * k as f64 / 3.0).cos() - a / 3.0;
        }
        roots.sort_by(|x, y| x.partial_cmp(y).unwrap());
        roots
    }

    fn sorted(v: [f64; 3]) -> [f64; 3] {
        let mut v = v;
        v.sort_by(|x, y| x.partial_cmp(y).unwrap());
        v
    }

    #[test]
    fn resonant_spectrum() {
        let s = dressed_spectrum(1.0, 0.0, 0.0).unwrap();
        let v = sorted(s.eigenfrequencies);
        let r6 = 6f64.sqrt();
        assert!((v[0] + r6).abs() < 1e-12 && v[1].abs() < 1e-12 && (v[2] - r6).abs() < 1e-12);
    }

    #[test]
    fn optimal_detuning_spectrum() {
        let s = dressed_spectrum(1.0, optimal_detuning(1.0), 1.0).unwrap();
        let d1 = 2.0 / 3f64.sqrt();
        assert!((s.eigenfrequencies[0] - d1).abs() < 1e-12);
        assert!((s.eigenfrequencies[1] + d1).abs() < 1e-12);
        assert!((s.eigenfrequencies[2] - 21f64.sqrt()).abs() < 1e-12);
        let r59 = 59f64.sqrt();
        let psi3 = [-(2.0f64 / 59.0).sqrt(), -(21.0f64 / 59.0).sqrt(), 6.0 / r59];
        for k in 0..3 {
            assert!((s.eigenvectors[2][k] - psi3[k]).abs() < 1e-12);
        }
        let r7 = 7f64.sqrt();
        let expected = [
            (3.0 * (19.0 - r7) / 59.0).sqrt(),
            -(3.0 * (19.0 + r7) / 59.0).sqrt(),
            -2.0 / r59,
        ];
        for n in 0..3 {
            assert!((s.couplings[n + 1] - expected[n]).abs() < 1e-12, "{n}");
        }
        assert!((s.eigenfrequencies[2] / s.eigenfrequencies[0] - 3.968).abs() < 1e-3);
    }

    #[test]
    fn diagonal_limit_is_rejected_but_scan_is_fine_near_it() {
        assert!(dressed_spectrum(0.0, 1.0, 0.0).is_err());
        let s = dressed_spectrum(1e-6, 1.0, 0.0).unwrap();
        let v = sorted(s.eigenfrequencies);
        for (a, b) in v.iter().zip([0.0, 1.0, 2.0]) {
            assert!((a - b).abs() < 1e-9);
        }
        let m = undesired_hamiltonian(0.0, 1.5);
        assert_eq!(m, Matrix3::from_diagonal(&Vector3::new(0.0, 1.5, 3.0)));
    }

    #[test]
    fn scan_finds_cancellation_loci() {
        let scan = scan_detuning(1.0, -3.0, 3.0, 301).unwrap();
        let loci = pairwise_cancellation_loci(&scan).unwrap();
        let r = (7.0f64 / 3.0).sqrt();
        for target in [-r, 0.0, r] {
            assert!(loci.iter().any(|l| (l - target).abs() < 1e-9), "{target} not in {loci:?}");
        }
        assert_eq!(loci.len(), 3);
        // the zero mode at δ = 0
        let mid = scan.deltas.iter().position(|d| d.abs() < 1e-12).unwrap();
        assert!(scan.eigenfrequencies[mid].iter().any(|e| e.abs() < 1e-12));
    }

    #[test]
    fn couplings_resolve_the_microwave_row() {
        let s = dressed_spectrum(2.0, 0.7, 0.3).unwrap();
        let sum: f64 = s.couplings[1..].iter().map(|x| x * x).sum();
        assert!((sum - 2.0 * 0.3 * 0.3).abs() < 1e-14);
    }

    #[test]
    fn single_trace_initial_and_weak_drive_limit() {
        let omega_s = 1.0;
        let omega_d = 1e-3;
        let s = dressed_spectrum(omega_s, optimal_detuning(omega_s), omega_d).unwrap();
        let times: Vec<f64> = (0..=200).map(|k| s.t_pi() * k as f64 / 200.0).collect();
        let tr = perturbative_single(&s, &times, false).unwrap();
        for n in 0..3 {
            assert_eq!(tr.c_n1[n][0], c(0.0, 0.0));
            // leading term (Ωₙ/Δₙ)² sin²(Ω₀t)
            for (k, t) in times.iter().enumerate() {
                let lead = (s.couplings[n + 1] / s.eigenfrequencies[n]).powi(2) * (s.omega_0() * t).sin().powi(2);
                let p = tr.c_n1[n][k].norm_sqr();
                assert!((p - lead).abs() < 5e-3 * (s.couplings[n + 1] / s.eigenfrequencies[n]).powi(2));
            }
        }
    }

    #[test]
    fn exact_solves_the_amplitude_equation() {
        // i ċ = Δ c + Ω c_T⁽⁰⁾ integrated with RK4
        let (om, d, o0) = (0.3, 1.7, 0.4);
        let rhs = |t: f64, y: C64| -> C64 { -I * (d * y + om * (-I * (o0 * t).sin())) };
        let (mut y, mut t, h) = (c(0.0, 0.0), 0.0, 1e-4);
        while t < 5.0 - 1e-12 {
            let k1 = rhs(t, y);
            let k2 = rhs(t + h / 2.0, y + k1 * (h / 2.0));
            let k3 = rhs(t + h / 2.0, y + k2 * (h / 2.0));
            let k4 = rhs(t + h, y + k3 * h);
            y += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
            t += h;
        }
        assert!((y - single_exact(om, d, o0, t)).norm() < 1e-10);

        // continue with −Δ after t1
        let t1 = t;
        let rhs2 = |t: f64, y: C64| -> C64 { -I * (-d * y + om * (-I * (o0 * t).sin())) };
        while t < 8.0 - 1e-12 {
            let k1 = rhs2(t, y);
            let k2 = rhs2(t + h / 2.0, y + k1 * (h / 2.0));
            let k3 = rhs2(t + h / 2.0, y + k2 * (h / 2.0));
            let k4 = rhs2(t + h, y + k3 * h);
            y += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
            t += h;
        }
        assert!((y - composite_exact(om, d, o0, t1, t)).norm() < 1e-10);
    }

    #[test]
    fn composite_limits() {
        let s = dressed_spectrum(1.0, optimal_detuning(1.0), 1.0 / (3.0 * 6f64.sqrt())).unwrap();
        let tp = s.t_pi();
        let times = vec![0.0, 0.5 * tp, tp];
        let comp = perturbative_composite(&s, tp * (1.0 - 1e-12), &times, false).unwrap();
        let single = perturbative_single(&s, &times, false).unwrap();
        for n in 0..3 {
            assert!((comp.c_n1[n][2] - single.c_n1[n][2]).norm() < 1e-9);
        }
        // first-order cancellation of ψ₁, ψ₂ at exact synchronization
        let simple = perturbative_composite(&s, tp / 3.0, &times, true).unwrap();
        for n in 0..2 {
            assert!(simple.c_n1[n][2].norm() < 1e-12);
        }
        assert!(perturbative_composite(&s, 2.0 * tp, &times, false).is_err());
    }

    #[test]
    fn resonance_is_rejected() {
        // m = 0 synchronization puts Ω₀ exactly on |Δ₁|
        let d1 = 2.0 / 3f64.sqrt();
        let s = dressed_spectrum(1.0, optimal_detuning(1.0), d1 / 2f64.sqrt()).unwrap();
        assert!(matches!(perturbative_single(&s, &[0.0, 1.0], false), Err(Error::Resonance(_))));
    }

    #[test]
    fn simplified_deviation_is_second_order() {
        let dev = |ratio: f64| -> f64 {
            let s = dressed_spectrum(1.0, optimal_detuning(1.0), ratio).unwrap();
            let times: Vec<f64> = (0..=400).map(|k| s.t_pi() * k as f64 / 400.0).collect();
            let a = perturbative_single(&s, &times, false).unwrap();
            let b = perturbative_single(&s, &times, true).unwrap();
            (0..3)
                .flat_map(|n| a.c_n1[n].iter().zip(&b.c_n1[n]).map(|(x, y)| (x - y).norm()).collect::<Vec<_>>())
                .fold(0.0, f64::max)
        };
        let r = dev(1.0 / 20.0) / dev(1.0 / 40.0);
        assert!((r - 4.0).abs() < 0.4, "ratio {r}");
    }

    #[test]
    fn leakage_estimates() {
        assert_eq!(single_pulse_leakage(0), 0.25);
        assert!((single_pulse_leakage(1) - 1.0 / 36.0).abs() < 1e-15);
        assert_eq!(single_pulse_leakage(2), 0.01);
    }

    proptest! {
        #[test]
        fn eigenvalues_match_cubic_oracle(omega_s in 0.05f64..5.0, delta in -10.0f64..10.0) {
            let s = dressed_spectrum(omega_s, delta, 0.0).unwrap();
            let v = sorted(s.eigenfrequencies);
            let o = cubic_roots(omega_s, delta);
            let scale = omega_s.max(delta.abs());
            for k in 0..3 {
                prop_assert!((v[k] - o[k]).abs() < 1e-9 * scale);
            }
        }

        #[test]
        fn eigenvectors_orthonormal(omega_s in -5.0f64..5.0, delta in -10.0f64..10.0) {
            prop_assume!(omega_s.abs() > 0.05);
            let s = dressed_spectrum(omega_s, delta, 0.0).unwrap();
            for i in 0..3 {
                for j in 0..3 {
                    let dot: f64 = (0..3).map(|k| s.eigenvectors[i][k] * s.eigenvectors[j][k]).sum();
                    let e = if i == j { 1.0 } else { 0.0 };
                    prop_assert!((dot - e).abs() < 1e-10);
                }
            }
        }

        #[test]
        fn sign_reversal_symmetry(omega_s in 0.05f64..5.0, delta in -10.0f64..10.0) {
            let a = dressed_spectrum(omega_s, delta, 0.2).unwrap();
            let b = dressed_spectrum(-omega_s, -delta, 0.2).unwrap();
            for n in 0..3 {
                prop_assert!((a.eigenfrequencies[n] + b.eigenfrequencies[n]).abs() < 1e-12 * omega_s.max(delta.abs()));
                prop_assert_eq!(a.eigenvectors[n], b.eigenvectors[n]);
            }
            // and agrees with a direct diagonalization of −H_u
            let direct = SymmetricEigen::new(undesired_hamiltonian(-omega_s, -delta));
            let mut dv: Vec<f64> = direct.eigenvalues.iter().cloned().collect();
            dv.sort_by(|x, y| x.partial_cmp(y).unwrap());
            let bv = sorted(b.eigenfrequencies);
            for k in 0..3 {
                prop_assert!((dv[k] - bv[k]).abs() < 1e-9 * omega_s.max(delta.abs()));
            }
        }
    }
}
