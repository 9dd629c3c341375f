// Copyright 2026 The ionzeno Authors
// SPDX-License-Identifier: Apache-2.0

//! Fluorescence count statistics, histograms and the reference sequence.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use super::design::rotation;
use crate::error::{Error, Result};
use crate::linalg::CVector;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionModel {
    /// Mean photons from one bright ion per window.
    pub bright_mean: f64,
    /// Mean photons from one dark ion per window.
    pub dark_mean: f64,
    /// Probability that a bright ion is pumped dark during the window.
    pub pump_prob: f64,
    /// Detection window in seconds (informational).
    pub window: f64,
}

impl DetectionModel {
    pub fn two_ion() -> Self {
        DetectionModel {
            bright_mean: 39.0,
            dark_mean: 3.0,
            pump_prob: 0.02,
            window: 330e-6,
        }
    }

    pub fn three_ion() -> Self {
        DetectionModel {
            bright_mean: 37.0,
            ..DetectionModel::two_ion()
        }
    }

    pub fn for_ions(n_ions: usize) -> Self {
        if n_ions == 3 {
            DetectionModel::three_ion()
        } else {
            DetectionModel::two_ion()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.bright_mean > self.dark_mean) || !(self.dark_mean >= 0.0) || !self.bright_mean.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "need bright_mean > dark_mean >= 0, got {} and {}",
                self.bright_mean, self.dark_mean
            )));
        }
        if !(0.0..1.0).contains(&self.pump_prob) {
            return Err(Error::InvalidArgument(format!("pump_prob must lie in [0, 1), got {}", self.pump_prob)));
        }
        Ok(())
    }
}

/// Photon-count histogram. `counts[k]` is the number of shots with `k`
/// photons.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountHistogram {
    pub counts: Vec<u64>,
    pub shots: u64,
    pub label: String,
}

impl CountHistogram {
    pub fn from_shots(shots: &[u32], label: impl Into<String>) -> Self {
        let max = shots.iter().copied().max().unwrap_or(0) as usize;
        let mut counts = vec![0u64; max + 1];
        for &s in shots {
            counts[s as usize] += 1;
        }
        CountHistogram {
            counts,
            shots: shots.len() as u64,
            label: label.into(),
        }
    }

    pub fn new(counts: Vec<u64>, label: impl Into<String>) -> Self {
        let shots = counts.iter().sum();
        CountHistogram {
            counts,
            shots,
            label: label.into(),
        }
    }

    pub fn max_count(&self) -> usize {
        self.counts.iter().rposition(|&c| c > 0).unwrap_or(0)
    }

    pub fn mean(&self) -> f64 {
        if self.shots == 0 {
            return 0.0;
        }
        self.counts.iter().enumerate().map(|(k, &c)| k as f64 * c as f64).sum::<f64>() / self.shots as f64
    }

    /// Text form: `# shots=`, `# label=` headers then `<count> <occurrences>`.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "# shots={}", self.shots).expect("string write");
        writeln!(s, "# label={}", self.label).expect("string write");
        for (k, &c) in self.counts.iter().enumerate() {
            if c > 0 {
                writeln!(s, "{k} {c}").expect("string write");
            }
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut declared = None;
        let mut label = String::new();
        let mut pairs = Vec::new();
        for (no, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(h) = line.strip_prefix('#') {
                let h = h.trim();
                if let Some(v) = h.strip_prefix("shots=") {
                    declared = Some(v.trim().parse::<u64>().map_err(|e| {
                        Error::InvalidArgument(format!("line {}: bad shots header: {e}", no + 1))
                    })?);
                } else if let Some(v) = h.strip_prefix("label=") {
                    label = v.trim().to_string();
                }
                continue;
            }
            let mut it = line.split_whitespace();
            let (Some(a), Some(b), None) = (it.next(), it.next(), it.next()) else {
                return Err(Error::InvalidArgument(format!("line {}: expected `<count> <occurrences>`", no + 1)));
            };
            let k: usize = a
                .parse()
                .map_err(|e| Error::InvalidArgument(format!("line {}: {e}", no + 1)))?;
            let c: u64 = b
                .parse()
                .map_err(|e| Error::InvalidArgument(format!("line {}: {e}", no + 1)))?;
            pairs.push((k, c));
        }
        let max = pairs.iter().map(|p| p.0).max().unwrap_or(0);
        let mut counts = vec![0u64; max + 1];
        for (k, c) in pairs {
            counts[k] += c;
        }
        let h = CountHistogram::new(counts, label);
        if let Some(n) = declared {
            if n != h.shots {
                return Err(Error::InvalidArgument(format!(
                    "header declares {n} shots but occurrences sum to {}",
                    h.shots
                )));
            }
        }
        Ok(h)
    }
}

fn check_probabilities(p: &[f64]) -> Result<()> {
    if p.is_empty() || p.iter().any(|x| !(*x >= -1e-12) || !x.is_finite()) {
        return Err(Error::InvalidArgument(format!("invalid probability vector {p:?}")));
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!("probabilities sum to {s}, not 1")));
    }
    Ok(())
}

/// Draws the photon count of a single shot with `k` of `n_ions` bright.
fn draw_shot(rng: &mut ChaCha8Rng, model: &DetectionModel, k: usize, n_ions: usize) -> u32 {
    let mut mean = (n_ions - k) as f64 * model.dark_mean;
    for _ in 0..k {
        if model.pump_prob > 0.0 && rng.random::<f64>() < model.pump_prob {
            let u: f64 = rng.random();
            mean += u * model.bright_mean + (1.0 - u) * model.dark_mean;
        } else {
            mean += model.bright_mean;
        }
    }
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).expect("positive mean").sample(rng) as u32
}

/// Ordered photon counts for `shots` repetitions. `bright_probabilities[n]`
/// is the probability of exactly `n` bright ions.
pub fn simulate_shots(bright_probabilities: &[f64], model: &DetectionModel, shots: usize, rng: &mut ChaCha8Rng) -> Result<Vec<u32>> {
    check_probabilities(bright_probabilities)?;
    model.validate()?;
    let n_ions = bright_probabilities.len() - 1;
    let mut cdf = Vec::with_capacity(bright_probabilities.len());
    let mut acc = 0.0;
    for p in bright_probabilities {
        acc += p.max(0.0);
        cdf.push(acc);
    }
    let mut out = Vec::with_capacity(shots);
    for _ in 0..shots {
        let u = rng.random::<f64>() * acc;
        let k = cdf.iter().position(|&c| u < c).unwrap_or(n_ions);
        out.push(draw_shot(rng, model, k, n_ions));
    }
    Ok(out)
}

pub fn simulate_histogram(bright_probabilities: &[f64], model: &DetectionModel, shots: usize, seed: u64) -> Result<CountHistogram> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = simulate_shots(bright_probabilities, model, shots, &mut rng)?;
    Ok(CountHistogram::from_shots(&s, "simulated"))
}

/// Reference phases `Nπ/4`, `N = 0..7`.
pub fn reference_phases() -> Vec<f64> {
    (0..8).map(|n| n as f64 * std::f64::consts::FRAC_PI_4).collect()
}

/// Single-ion bright probability after `{3π/2,0}-{π/2,Φ}` from `|↑⟩`.
pub fn reference_bright_probability(phase: f64) -> f64 {
    let u = rotation(std::f64::consts::FRAC_PI_2, phase) * rotation(1.5 * std::f64::consts::PI, 0.0);
    let up = CVector::from_vec(vec![crate::linalg::ONE, crate::linalg::ZERO]);
    let out = u * up;
    out[0].norm_sqr()
}

/// Binomial class populations for `n_ions` independent ions that are each
/// bright with probability `p`.
pub fn binomial_populations(n_ions: usize, p: f64) -> Vec<f64> {
    (0..=n_ions)
        .map(|k| {
            let binom = (0..k).fold(1.0, |acc, j| acc * (n_ions - j) as f64 / (j + 1) as f64);
            binom * p.powi(k as i32) * (1.0 - p).powi((n_ions - k) as i32)
        })
        .collect()
}

/// Class populations of a reference histogram when each ion starts in `|↑⟩`
/// only with probability `1 − ε`.
pub fn reference_populations(n_ions: usize, phase: f64, epsilon: f64) -> Vec<f64> {
    let p = reference_bright_probability(phase);
    binomial_populations(n_ions, (1.0 - epsilon) * p + epsilon * (1.0 - p))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceRecord {
    pub phase: f64,
    /// Photon counts in acquisition order.
    pub shots: Vec<u32>,
}

impl ReferenceRecord {
    /// Held-out histogram of the first `⌈fraction·shots⌉` shots and the
    /// histogram of the remainder.
    pub fn split(&self, fraction: f64) -> (CountHistogram, CountHistogram) {
        let n = ((fraction * self.shots.len() as f64).ceil() as usize).min(self.shots.len());
        let label = format!("ref phi={:.4}", self.phase);
        (
            CountHistogram::from_shots(&self.shots[..n], format!("{label} held-out")),
            CountHistogram::from_shots(&self.shots[n..], label),
        )
    }
}

/// Eight reference acquisitions of ideal separable states.
pub fn reference_protocol(model: &DetectionModel, shots_per_phase: usize, n_ions: usize, seed: u64) -> Result<Vec<ReferenceRecord>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    reference_phases()
        .into_iter()
        .map(|phase| {
            let pops = reference_populations(n_ions, phase, 0.0);
            Ok(ReferenceRecord {
                phase,
                shots: simulate_shots(&pops, model, shots_per_phase, &mut rng)?,
            })
        })
        .collect()
}
