// Copyright 2026 The ionzeno Authors
// SPDX-License-Identifier: Apache-2.0

//! Joint maximum-likelihood fit of the binned class distributions and the
//! spin density matrix.
//!
//! The likelihood covers reference histograms (known class populations) and
//! data histograms (populations `tr(A_n U_i ρ U_i†)`). Each outer iteration
//! takes one EM step on the class distributions with `ρ` fixed, then one
//! `RρR` step on `ρ` with the class distributions fixed. If the plain `RρR`
//! step lowers the likelihood it is diluted, `(1 + λR)/(1 + λ)`, halving `λ`
//! from 0.5 until it does not.

use serde::{Deserialize, Serialize};

use super::binning::{em_class_distributions, Binning};
use super::design::MeasurementDesign;
use super::detection::{reference_populations, CountHistogram};
use crate::error::{Error, Result};
use crate::linalg::{CMatrix, C64};

/// Binned counts with the known class populations of every reference.
#[derive(Debug, Clone, PartialEq)]
pub struct BinnedData {
    pub reference_counts: Vec<Vec<f64>>,
    pub reference_populations: Vec<Vec<f64>>,
    /// One histogram per design setting, in setting order.
    pub data_counts: Vec<Vec<f64>>,
}

impl BinnedData {
    pub fn n_bins(&self) -> usize {
        self.data_counts[0].len()
    }

    pub fn data_shots(&self) -> f64 {
        self.data_counts.iter().flatten().sum()
    }
}

/// Everything needed to (re)run a fit.
#[derive(Debug, Clone)]
pub struct FitInputs {
    pub design: MeasurementDesign,
    pub binning: Binning,
    pub reference_phases: Vec<f64>,
    /// Reference histograms without the held-out part.
    pub references: Vec<CountHistogram>,
    pub data: Vec<CountHistogram>,
    /// Assumed per-ion preparation error of the references.
    pub epsilon: f64,
}

impl FitInputs {
    pub fn reference_populations(&self, epsilon: f64) -> Vec<Vec<f64>> {
        self.reference_phases
            .iter()
            .map(|&phi| reference_populations(self.design.n_ions, phi, epsilon))
            .collect()
    }

    pub fn binned(&self) -> Result<BinnedData> {
        if self.references.is_empty() || self.references.len() != self.reference_phases.len() {
            return Err(Error::InvalidArgument(format!(
                "{} reference histograms for {} phases",
                self.references.len(),
                self.reference_phases.len()
            )));
        }
        if self.data.len() != self.design.n_settings() {
            return Err(Error::InvalidArgument(format!(
                "{} data histograms for {} analysis settings",
                self.data.len(),
                self.design.n_settings()
            )));
        }
        if let Some(h) = self.references.iter().chain(&self.data).find(|h| h.shots == 0) {
            return Err(Error::InsufficientData(format!("histogram '{}' is empty", h.label)));
        }
        let bin = |h: &CountHistogram| -> Vec<f64> {
            self.binning.apply(h).bin_counts.into_iter().map(|c| c as f64).collect()
        };
        Ok(BinnedData {
            reference_counts: self.references.iter().map(bin).collect(),
            reference_populations: self.reference_populations(self.epsilon),
            data_counts: self.data.iter().map(bin).collect(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    /// Stop when the likelihood gain falls below `tolerance·|L|`.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            tolerance: 1e-10,
            max_iterations: 5000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MlFit {
    pub rho: CMatrix,
    /// `q[n][b]`, probability of bin `b` given `n` bright ions.
    pub class_probabilities: Vec<Vec<f64>>,
    pub log_likelihood: f64,
    /// Log-likelihood after every outer iteration, starting value first.
    pub history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub fidelity: f64,
    /// Class populations of the identity setting.
    pub populations: Vec<f64>,
}

/// Bin probabilities predicted for every reference and data histogram.
pub(crate) struct Predicted {
    pub references: Vec<Vec<f64>>,
    pub data: Vec<Vec<f64>>,
}

fn mix(weights: &[f64], q: &[Vec<f64>], n_bins: usize) -> Vec<f64> {
    (0..n_bins)
        .map(|b| weights.iter().zip(q).map(|(w, qn)| w * qn[b]).sum())
        .collect()
}

pub(crate) fn predict(design: &MeasurementDesign, data: &BinnedData, q: &[Vec<f64>], rho: &CMatrix) -> Predicted {
    let nb = data.n_bins();
    Predicted {
        references: data.reference_populations.iter().map(|w| mix(w, q, nb)).collect(),
        data: (0..design.n_settings())
            .map(|i| mix(&design.class_populations(i, rho), q, nb))
            .collect(),
    }
}

fn log_lik_terms(counts: &[Vec<f64>], probs: &[Vec<f64>]) -> f64 {
    let mut s = 0.0;
    for (h, p) in counts.iter().zip(probs) {
        for (&n, &pb) in h.iter().zip(p) {
            if n > 0.0 {
                s += n * pb.max(f64::MIN_POSITIVE).ln();
            }
        }
    }
    s
}

pub fn log_likelihood(design: &MeasurementDesign, data: &BinnedData, q: &[Vec<f64>], rho: &CMatrix) -> f64 {
    let p = predict(design, data, q, rho);
    log_lik_terms(&data.reference_counts, &p.references) + log_lik_terms(&data.data_counts, &p.data)
}

/// `2 Σ n ln(n / (N p))` over all histograms.
pub fn deviance(design: &MeasurementDesign, data: &BinnedData, q: &[Vec<f64>], rho: &CMatrix) -> f64 {
    let p = predict(design, data, q, rho);
    let term = |counts: &[Vec<f64>], probs: &[Vec<f64>]| -> f64 {
        counts
            .iter()
            .zip(probs)
            .map(|(h, pr)| {
                let total: f64 = h.iter().sum();
                h.iter()
                    .zip(pr)
                    .filter(|(n, _)| **n > 0.0)
                    .map(|(n, pb)| 2.0 * n * (n / (total * pb.max(f64::MIN_POSITIVE))).ln())
                    .sum::<f64>()
            })
            .sum()
    };
    term(&data.reference_counts, &p.references) + term(&data.data_counts, &p.data)
}

/// EM step on `q` with `ρ` fixed. Data histograms enter with their current
/// class populations as known mixture weights.
fn q_step(design: &MeasurementDesign, data: &BinnedData, q: &[Vec<f64>], rho: &CMatrix) -> Vec<Vec<f64>> {
    let mut counts = data.reference_counts.clone();
    counts.extend(data.data_counts.iter().cloned());
    let mut weights = data.reference_populations.clone();
    weights.extend((0..design.n_settings()).map(|i| design.class_populations(i, rho)));
    em_class_distributions(&counts, &weights, data.n_bins(), Some(q.to_vec()), 1, 0.0)
}

fn r_operator(design: &MeasurementDesign, data: &BinnedData, q: &[Vec<f64>], rho: &CMatrix) -> CMatrix {
    let d = design.spin_dim();
    let total = data.data_shots();
    let mut r = CMatrix::zeros(d, d);
    for (i, h) in data.data_counts.iter().enumerate() {
        let pops = design.class_populations(i, rho);
        let p = mix(&pops, q, h.len());
        for n in 0..design.n_classes() {
            let w: f64 = h
                .iter()
                .zip(&p)
                .enumerate()
                .filter(|(_, (c, _))| **c > 0.0)
                .map(|(b, (c, pb))| c * q[n][b] / pb.max(f64::MIN_POSITIVE))
                .sum();
            if w != 0.0 {
                r += design.effect(i, n) * C64::new(w / total, 0.0);
            }
        }
    }
    r
}

fn conjugate_normalized(r: &CMatrix, rho: &CMatrix) -> CMatrix {
    let m = r * rho * r;
    let m = (&m + m.adjoint()) * C64::new(0.5, 0.0);
    let tr = m.trace().re;
    m / C64::new(tr, 0.0)
}

/// One likelihood-nondecreasing `RρR` update.
fn rho_step(design: &MeasurementDesign, data: &BinnedData, q: &[Vec<f64>], rho: &CMatrix, current: f64) -> (CMatrix, f64) {
    let r = r_operator(design, data, q, rho);
    let plain = conjugate_normalized(&r, rho);
    let l = log_likelihood(design, data, q, &plain);
    if l >= current {
        return (plain, l);
    }
    let id = CMatrix::identity(r.nrows(), r.ncols());
    let mut lambda = 0.5;
    while lambda > 1e-12 {
        let rl = (&id + &r * C64::new(lambda, 0.0)) / C64::new(1.0 + lambda, 0.0);
        let cand = conjugate_normalized(&rl, rho);
        let l = log_likelihood(design, data, q, &cand);
        if l >= current {
            return (cand, l);
        }
        lambda *= 0.5;
    }
    (rho.clone(), current)
}

/// Fits from an optional warm start `(q, ρ)`; otherwise starts from the
/// reference-only class distributions and the maximally mixed state.
pub fn fit_binned(
    design: &MeasurementDesign,
    data: &BinnedData,
    opts: &FitOptions,
    start: Option<(&[Vec<f64>], &CMatrix)>,
) -> Result<MlFit> {
    if data.data_counts.len() != design.n_settings() {
        return Err(Error::InvalidArgument(format!(
            "{} data histograms for {} analysis settings",
            data.data_counts.len(),
            design.n_settings()
        )));
    }
    if data.data_shots() <= 0.0 {
        return Err(Error::InsufficientData("no data counts".into()));
    }
    let d = design.spin_dim();
    let nb = data.n_bins();
    let (mut q, mut rho) = match start {
        Some((q, rho)) => (q.to_vec(), rho.clone()),
        None => (
            em_class_distributions(&data.reference_counts, &data.reference_populations, nb, None, 200, 1e-12),
            CMatrix::identity(d, d) / C64::new(d as f64, 0.0),
        ),
    };
    let mut l = log_likelihood(design, data, &q, &rho);
    let mut history = vec![l];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iterations {
        iterations += 1;
        q = q_step(design, data, &q, &rho);
        let lq = log_likelihood(design, data, &q, &rho);
        let (next, ln) = rho_step(design, data, &q, &rho, lq);
        rho = next;
        let gain = ln - l;
        l = ln;
        history.push(l);
        if gain < opts.tolerance * l.abs() {
            converged = true;
            break;
        }
    }
    if !l.is_finite() {
        return Err(Error::FitFailure(format!("log-likelihood became {l}")));
    }
    let populations = design.class_populations(0, &rho);
    Ok(MlFit {
        fidelity: design.target_fidelity(&rho).clamp(0.0, 1.0),
        populations,
        rho,
        class_probabilities: q,
        log_likelihood: l,
        history,
        iterations,
        converged,
    })
}

pub fn fit_ml(inputs: &FitInputs, opts: &FitOptions) -> Result<MlFit> {
    fit_binned(&inputs.design, &inputs.binned()?, opts, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::NamedState;
    use crate::linalg::min_eigenvalue;
    use crate::tomography::{synthetic_inputs, target_density, SyntheticConfig};

    #[test]
    fn triplet_round_trip() {
        let cfg = SyntheticConfig::two_ion();
        let rho = target_density(NamedState::Triplet).unwrap();
        let inputs = synthetic_inputs(NamedState::Triplet, &rho, &cfg, 21).unwrap();
        let fit = fit_ml(&inputs, &FitOptions::default()).unwrap();
        assert!((fit.fidelity - 1.0).abs() < 0.005, "F = {}", fit.fidelity);
        assert!((fit.populations[1] - 1.0).abs() < 0.01);
        for w in fit.history.windows(2) {
            assert!(w[1] >= w[0] - 1e-9 * w[0].abs(), "likelihood fell {} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn maximally_mixed_control() {
        let cfg = SyntheticConfig::two_ion();
        let rho = CMatrix::identity(4, 4) / C64::new(4.0, 0.0);
        let inputs = synthetic_inputs(NamedState::Triplet, &rho, &cfg, 22).unwrap();
        let fit = fit_ml(&inputs, &FitOptions::default()).unwrap();
        assert!((fit.fidelity - 0.25).abs() < 0.01, "F = {}", fit.fidelity);
        assert!(min_eigenvalue(&fit.rho) > -1e-9);
        assert!((fit.rho.trace().re - 1.0).abs() < 1e-9);
        assert!(crate::linalg::hermiticity_defect(&fit.rho) < 1e-12);
    }

    #[test]
    fn deterministic_fit() {
        let cfg = SyntheticConfig {
            identity_shots: 3000,
            analysis_shots: 300,
            ..SyntheticConfig::two_ion()
        };
        let rho = target_density(NamedState::Triplet).unwrap();
        let a = fit_ml(&synthetic_inputs(NamedState::Triplet, &rho, &cfg, 5).unwrap(), &FitOptions::default()).unwrap();
        let b = fit_ml(&synthetic_inputs(NamedState::Triplet, &rho, &cfg, 5).unwrap(), &FitOptions::default()).unwrap();
        assert_eq!(a.fidelity, b.fidelity);
        assert_eq!(a.log_likelihood, b.log_likelihood);
    }

    #[test]
    fn empty_histogram_rejected() {
        let cfg = SyntheticConfig::two_ion();
        let rho = target_density(NamedState::Triplet).unwrap();
        let mut inputs = synthetic_inputs(NamedState::Triplet, &rho, &cfg, 3).unwrap();
        inputs.data[4] = CountHistogram::new(vec![], "empty");
        assert!(matches!(fit_ml(&inputs, &FitOptions::default()), Err(Error::InsufficientData(_))));
        inputs.data.pop();
        assert!(fit_ml(&inputs, &FitOptions::default()).is_err());
    }
}
