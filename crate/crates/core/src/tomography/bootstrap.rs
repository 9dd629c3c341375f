// Copyright 2026 The ionzeno Authors
// SPDX-License-Identifier: Apache-2.0

//! Parametric bootstrap and the sensitivity to imperfect reference
//! preparation.
//!
//! Resample `k` draws from a ChaCha8 stream selected by `k`, so the resample
//! set does not depend on how the work is scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ml::{deviance, fit_binned, predict, BinnedData, FitInputs, FitOptions};
use super::{depolarize, TomographyEstimate};
use crate::error::{Error, Result};

/// Bound on the per-ion reference preparation error.
pub const EPSILON_MAX: f64 = 0.001;

/// Resample attempts before a failing fit aborts the bootstrap.
const MAX_ATTEMPTS: u64 = 3;

/// Relative deviation from a straight line above which the reference-error
/// response is flagged.
const NONLINEARITY_LIMIT: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapSummary {
    pub resamples: usize,
    /// 0.16 quantile of the resampled fidelities.
    pub lower_quantile: f64,
    /// 0.84 quantile.
    pub upper_quantile: f64,
    pub epsilon_0: f64,
    /// Fraction of resamples whose deviance is at least the observed one.
    pub lr_percentile: f64,
    pub fidelities: Vec<f64>,
}

/// Linear-interpolated quantile of sorted data.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

fn multinomial(rng: &mut ChaCha8Rng, n: u64, probs: &[f64]) -> Vec<f64> {
    let mut left = n;
    let mut mass: f64 = probs.iter().map(|p| p.max(0.0)).sum();
    let mut out = Vec::with_capacity(probs.len());
    for (k, &p) in probs.iter().enumerate() {
        let p = p.max(0.0);
        let draw = if k + 1 == probs.len() || left == 0 {
            left
        } else if mass <= 0.0 {
            0
        } else {
            let frac = (p / mass).clamp(0.0, 1.0);
            Binomial::new(left, frac).expect("probability in [0, 1]").sample(rng)
        };
        out.push(draw as f64);
        left -= draw;
        mass -= p;
    }
    out
}

fn resample(rng: &mut ChaCha8Rng, counts: &[Vec<f64>], probs: &[Vec<f64>]) -> Vec<Vec<f64>> {
    counts
        .iter()
        .zip(probs)
        .map(|(h, p)| multinomial(rng, h.iter().sum::<f64>().round() as u64, p))
        .collect()
}

/// Refits `resamples` data sets drawn from the fitted model and attaches the
/// interval `(F − ε₀ − ε_syst, F + ε₀)`. Zero resamples return the estimate
/// unchanged.
pub fn bootstrap(inputs: &FitInputs, estimate: &TomographyEstimate, resamples: usize, seed: u64, opts: &FitOptions) -> Result<TomographyEstimate> {
    if resamples == 0 {
        return Ok(estimate.clone());
    }
    let design = &inputs.design;
    let data = inputs.binned()?;
    let q = &estimate.class_probabilities;
    let rho = &estimate.rho_ml;
    let observed = deviance(design, &data, q, rho);
    let model = predict(design, &data, q, rho);
    // RρR cannot leave the support of its start, so resample fits start from
    // a slightly mixed state.
    let start_rho = depolarize(rho, 0.05);

    let results = (0..resamples)
        .into_par_iter()
        .map(|k| {
            let mut last = None;
            for attempt in 0..MAX_ATTEMPTS {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(k as u64 + (attempt << 32));
                let sample = BinnedData {
                    reference_counts: resample(&mut rng, &data.reference_counts, &model.references),
                    reference_populations: data.reference_populations.clone(),
                    data_counts: resample(&mut rng, &data.data_counts, &model.data),
                };
                match fit_binned(design, &sample, opts, Some((q, &start_rho))) {
                    Ok(fit) => {
                        let dev = deviance(design, &sample, &fit.class_probabilities, &fit.rho);
                        return Ok((fit.fidelity, dev));
                    }
                    Err(e) => last = Some(e),
                }
            }
            Err(last.unwrap_or_else(|| Error::FitFailure("bootstrap resample".into())))
        })
        .collect::<Result<Vec<(f64, f64)>>>()?;

    let fidelities: Vec<f64> = results.iter().map(|r| r.0).collect();
    let mut sorted = fidelities.clone();
    sorted.sort_by(f64::total_cmp);
    let lower = quantile(&sorted, 0.16);
    let upper = quantile(&sorted, 0.84);
    let exceed = results.iter().filter(|r| r.1 >= observed).count();
    let mut out = estimate.clone();
    out.bootstrap = Some(BootstrapSummary {
        resamples,
        lower_quantile: lower,
        upper_quantile: upper,
        epsilon_0: 0.5 * (upper - lower),
        lr_percentile: exceed as f64 / resamples as f64,
        fidelities,
    });
    out.refresh_interval();
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystematicSweep {
    pub epsilons: Vec<f64>,
    pub infidelities: Vec<f64>,
    /// Slope of inferred infidelity against `ε`.
    pub slope: f64,
    pub intercept: f64,
    /// `|slope|·EPSILON_MAX`.
    pub epsilon_syst: f64,
    /// Largest deviation from the fitted line relative to the change over the
    /// range exceeds the limit.
    pub nonlinear: bool,
}

/// Refits with reference populations computed for a per-ion preparation error
/// `ε ∈ [0, eps_max]` and fits a line to the inferred infidelity.
pub fn systematic_sweep(inputs: &FitInputs, eps_max: f64, n_points: usize, opts: &FitOptions) -> Result<SystematicSweep> {
    if n_points < 2 || !(eps_max > 0.0 && eps_max < 0.5) {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 points on (0, 0.5), got {n_points} up to {eps_max}"
        )));
    }
    let base = inputs.binned()?;
    let epsilons: Vec<f64> = (0..n_points).map(|k| eps_max * k as f64 / (n_points - 1) as f64).collect();
    let infidelities = epsilons
        .par_iter()
        .map(|&eps| {
            let data = BinnedData {
                reference_populations: inputs.reference_populations(eps),
                ..base.clone()
            };
            Ok(1.0 - fit_binned(&inputs.design, &data, opts, None)?.fidelity)
        })
        .collect::<Result<Vec<f64>>>()?;

    let n = n_points as f64;
    let mx = epsilons.iter().sum::<f64>() / n;
    let my = infidelities.iter().sum::<f64>() / n;
    let sxy: f64 = epsilons.iter().zip(&infidelities).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = epsilons.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let span = (slope * eps_max).abs();
    let worst = epsilons
        .iter()
        .zip(&infidelities)
        .map(|(x, y)| (y - intercept - slope * x).abs())
        .fold(0.0, f64::max);
    Ok(SystematicSweep {
        epsilons,
        infidelities,
        slope,
        intercept,
        epsilon_syst: slope.abs() * EPSILON_MAX,
        nonlinear: worst > NONLINEARITY_LIMIT * span,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::NamedState;
    use crate::tomography::{fit_ml, synthetic_inputs, target_density, SyntheticConfig};

    #[test]
    fn quantiles_interpolate() {
        let v = [0.0, 1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&v, 0.5), 2.0);
        assert!((quantile(&v, 0.16) - 0.64).abs() < 1e-12);
    }

    #[test]
    fn multinomial_conserves_shots() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let d = multinomial(&mut rng, 1000, &[0.1, 0.0, 0.6, 0.3]);
        assert_eq!(d.iter().sum::<f64>(), 1000.0);
        assert_eq!(d[1], 0.0);
    }

    fn small_inputs(seed: u64) -> FitInputs {
        let cfg = SyntheticConfig {
            identity_shots: 6000,
            analysis_shots: 300,
            ..SyntheticConfig::two_ion()
        };
        let rho = crate::tomography::depolarize(&target_density(NamedState::Triplet).unwrap(), 0.04);
        synthetic_inputs(NamedState::Triplet, &rho, &cfg, seed).unwrap()
    }

    #[test]
    fn zero_resamples_is_identity() {
        let inputs = small_inputs(2);
        let est = TomographyEstimate::from_fit(fit_ml(&inputs, &FitOptions::default()).unwrap());
        let out = bootstrap(&inputs, &est, 0, 9, &FitOptions::default()).unwrap();
        assert_eq!(out.fidelity, est.fidelity);
        assert!(out.bootstrap.is_none());
        assert_eq!((out.ci_lower, out.ci_upper), (est.fidelity, est.fidelity));
    }

    #[test]
    fn bootstrap_is_deterministic_and_brackets() {
        let inputs = small_inputs(3);
        let est = TomographyEstimate::from_fit(fit_ml(&inputs, &FitOptions::default()).unwrap());
        let a = bootstrap(&inputs, &est, 40, 9, &FitOptions::default()).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| bootstrap(&inputs, &est, 40, 9, &FitOptions::default()).unwrap());
        assert_eq!(a.bootstrap, b.bootstrap);
        assert!(a.ci_lower <= a.fidelity && a.fidelity <= a.ci_upper);
        let s = a.bootstrap.unwrap();
        assert!(s.epsilon_0 > 0.0 && s.epsilon_0 < 0.05);
        assert!((0.0..=1.0).contains(&s.lr_percentile));
    }

    #[test]
    fn sweep_recovers_baseline_at_zero() {
        let inputs = small_inputs(4);
        let est = TomographyEstimate::from_fit(fit_ml(&inputs, &FitOptions::default()).unwrap());
        let s = systematic_sweep(&inputs, 0.002, 3, &FitOptions::default()).unwrap();
        assert_eq!(s.infidelities[0], 1.0 - est.fidelity);
        assert!(s.epsilon_syst >= 0.0 && s.epsilon_syst < 0.02, "{s:?}");
        assert!(systematic_sweep(&inputs, 0.002, 1, &FitOptions::default()).is_err());
    }
}
