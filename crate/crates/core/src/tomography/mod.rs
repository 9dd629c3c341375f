// Copyright 2026 The ionzeno Authors
// SPDX-License-Identifier: Apache-2.0

//! Fluorescence detection and maximum-likelihood partial tomography.
//!
//! The pipeline: reference histograms of separable states with known
//! populations ([`detection`]), count binning chosen on a held-out part of
//! those references ([`binning`]), data histograms after global analysis
//! rotations ([`design`]), a joint likelihood fit of class distributions and
//! spin density matrix ([`ml`]), then a parametric bootstrap and a sweep over
//! the assumed reference preparation error ([`bootstrap`]).
//!
//! Only the spin state is reconstructed; motion is traced out before
//! detection.

pub mod binning;
pub mod bootstrap;
pub mod design;
pub mod detection;
pub mod ml;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use binning::{choose_bins, BinnedHistogram, Binning};
pub use bootstrap::{bootstrap, systematic_sweep, BootstrapSummary, SystematicSweep, EPSILON_MAX};
pub use design::{analysis_design, AnalysisSetting, MeasurementDesign};
pub use detection::{reference_protocol, simulate_histogram, CountHistogram, DetectionModel, ReferenceRecord};
pub use ml::{fit_ml, FitInputs, FitOptions, MlFit};

use crate::error::{Error, Result};
use crate::hilbert::{named_spin_state, NamedState, SystemDims};
use crate::linalg::{min_eigenvalue, CMatrix, C64};

/// Fraction of every reference histogram set aside for choosing bins.
pub const HELD_OUT_FRACTION: f64 = 0.1;

/// Default bin numbers for two and three ions.
pub fn default_bins(n_ions: usize) -> usize {
    if n_ions == 3 {
        7
    } else {
        5
    }
}

#[derive(Debug, Clone)]
pub struct TomographyEstimate {
    pub rho_ml: CMatrix,
    pub class_probabilities: Vec<Vec<f64>>,
    pub fidelity: f64,
    /// `P₀..P_N` without an analysis rotation.
    pub populations: Vec<f64>,
    pub ci_lower: f64,
    pub ci_upper: f64,
    pub epsilon_syst: f64,
    pub log_likelihood: f64,
    pub iterations: usize,
    pub converged: bool,
    pub bootstrap: Option<BootstrapSummary>,
}

impl TomographyEstimate {
    pub fn from_fit(fit: MlFit) -> Self {
        TomographyEstimate {
            fidelity: fit.fidelity,
            ci_lower: fit.fidelity,
            ci_upper: fit.fidelity,
            populations: fit.populations,
            rho_ml: fit.rho,
            class_probabilities: fit.class_probabilities,
            epsilon_syst: 0.0,
            log_likelihood: fit.log_likelihood,
            iterations: fit.iterations,
            converged: fit.converged,
            bootstrap: None,
        }
    }

    pub fn epsilon_0(&self) -> f64 {
        self.bootstrap.as_ref().map_or(0.0, |b| b.epsilon_0)
    }

    pub fn lr_percentile(&self) -> Option<f64> {
        self.bootstrap.as_ref().map(|b| b.lr_percentile)
    }

    /// Interval `(F − ε₀ − ε_syst, F + ε₀)`.
    pub(crate) fn refresh_interval(&mut self) {
        let e0 = self.epsilon_0();
        self.ci_lower = self.fidelity - e0 - self.epsilon_syst;
        self.ci_upper = self.fidelity + e0;
    }

    pub fn summary(&self) -> EstimateSummary {
        EstimateSummary {
            fidelity: self.fidelity,
            ci: [self.ci_lower, self.ci_upper],
            populations: self.populations.clone(),
            lr_percentile: self.lr_percentile(),
            epsilon_syst: self.epsilon_syst,
            epsilon_0: self.epsilon_0(),
            converged: self.converged,
        }
    }
}

/// Serializable view of an estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateSummary {
    pub fidelity: f64,
    pub ci: [f64; 2],
    pub populations: Vec<f64>,
    pub lr_percentile: Option<f64>,
    pub epsilon_syst: f64,
    pub epsilon_0: f64,
    pub converged: bool,
}

/// Shot numbers and detection settings for synthetic experiments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub model: DetectionModel,
    pub reference_shots: usize,
    pub identity_shots: usize,
    pub analysis_shots: usize,
    pub n_bins: usize,
}

impl SyntheticConfig {
    pub fn two_ion() -> Self {
        SyntheticConfig {
            model: DetectionModel::two_ion(),
            reference_shots: 6000,
            identity_shots: 30_000,
            analysis_shots: 1500,
            n_bins: default_bins(2),
        }
    }

    pub fn three_ion() -> Self {
        SyntheticConfig {
            model: DetectionModel::three_ion(),
            n_bins: default_bins(3),
            ..SyntheticConfig::two_ion()
        }
    }

    pub fn for_ions(n_ions: usize) -> Self {
        if n_ions == 3 {
            SyntheticConfig::three_ion()
        } else {
            SyntheticConfig::two_ion()
        }
    }
}

/// `|ψ⟩⟨ψ|` on the spin space.
pub fn target_density(name: NamedState) -> Result<CMatrix> {
    let s = named_spin_state(SystemDims::spins(name.n_ions(), false)?, name)?;
    Ok(s.amplitudes() * s.amplitudes().adjoint())
}

/// Data histograms for every setting of `design`.
pub fn simulate_data(design: &MeasurementDesign, rho: &CMatrix, cfg: &SyntheticConfig, seed: u64) -> Result<Vec<CountHistogram>> {
    let d = design.spin_dim();
    if rho.nrows() != d || rho.ncols() != d {
        return Err(Error::DimensionMismatch(format!(
            "state is {}x{}, design acts on dimension {d}",
            rho.nrows(),
            rho.ncols()
        )));
    }
    if (rho.trace().re - 1.0).abs() > 1e-9 || min_eigenvalue(rho) < -1e-9 {
        return Err(Error::InvalidState("data state must be a unit-trace positive matrix".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    design
        .settings
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let pops: Vec<f64> = design.class_populations(i, rho).into_iter().map(|p| p.max(0.0)).collect();
            let z: f64 = pops.iter().sum();
            let pops: Vec<f64> = pops.into_iter().map(|p| p / z).collect();
            let shots = if i == 0 { cfg.identity_shots } else { cfg.analysis_shots };
            let raw = detection::simulate_shots(&pops, &cfg.model, shots, &mut rng)?;
            Ok(CountHistogram::from_shots(&raw, format!("theta={:.6} phi={:.6}", s.theta, s.phi)))
        })
        .collect()
}

/// Assembles fit inputs from reference records and data: bins are chosen on
/// the held-out part of every reference and the remainder is kept.
pub fn prepare_inputs(design: MeasurementDesign, records: &[ReferenceRecord], data: Vec<CountHistogram>, n_bins: usize) -> Result<FitInputs> {
    let n_ions = design.n_ions;
    let (held, rest): (Vec<_>, Vec<_>) = records.iter().map(|r| r.split(HELD_OUT_FRACTION)).unzip();
    let pops: Vec<Vec<f64>> = records
        .iter()
        .map(|r| detection::reference_populations(n_ions, r.phase, 0.0))
        .collect();
    let binning = choose_bins(&held, &pops, n_bins)?;
    Ok(FitInputs {
        design,
        binning,
        reference_phases: records.iter().map(|r| r.phase).collect(),
        references: rest,
        data,
        epsilon: 0.0,
    })
}

/// Simulated references and data for a known spin state `rho`.
pub fn synthetic_inputs(target: NamedState, rho: &CMatrix, cfg: &SyntheticConfig, seed: u64) -> Result<FitInputs> {
    let design = analysis_design(target)?;
    let records = reference_protocol(&cfg.model, cfg.reference_shots, design.n_ions, seed)?;
    let data = simulate_data(&design, rho, cfg, seed.wrapping_add(0x9e37_79b9_7f4a_7c15))?;
    prepare_inputs(design, &records, data, cfg.n_bins)
}

/// Fit followed by the reference-error sweep and, for `resamples > 0`, the
/// bootstrap.
pub fn analyze(inputs: &FitInputs, resamples: usize, seed: u64, opts: &FitOptions) -> Result<(TomographyEstimate, SystematicSweep)> {
    let est = TomographyEstimate::from_fit(fit_ml(inputs, opts)?);
    let sweep = systematic_sweep(inputs, 0.002, 5, opts)?;
    let mut est = est;
    est.epsilon_syst = sweep.epsilon_syst;
    est.refresh_interval();
    let est = bootstrap(inputs, &est, resamples, seed, opts)?;
    Ok((est, sweep))
}

/// Mixes `rho` with the maximally mixed state, `(1 − w)ρ + w·1/d`.
pub fn depolarize(rho: &CMatrix, w: f64) -> CMatrix {
    let d = rho.nrows();
    rho * C64::new(1.0 - w, 0.0) + CMatrix::identity(d, d) * C64::new(w / d as f64, 0.0)
}
