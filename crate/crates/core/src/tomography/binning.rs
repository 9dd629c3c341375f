// Copyright 2026 The ionzeno Authors
// SPDX-License-Identifier: Apache-2.0

//! Contiguous rebinning of photon counts.
//!
//! Boundaries are placed to keep the binned class distributions as far apart
//! as possible: the score is the summed symmetric Kullback-Leibler divergence
//! over all pairs of "n ions bright" classes, which is additive over bins, so
//! the best partition for a given bin number follows from dynamic
//! programming.

use serde::{Deserialize, Serialize};

use super::detection::CountHistogram;
use crate::error::{Error, Result};

/// Smallest effective number of held-out shots per class.
pub const MIN_CLASS_COUNTS: f64 = 100.0;

/// Pseudo-count added to every photon-count cell of every class before
/// scoring a partition.
const PSEUDO_COUNT: f64 = 0.5;

/// Cut points `e₀ < e₁ < …`; bin `j` holds counts in `[e_{j−1}, e_j)`, the
/// first bin starts at 0 and the last one is open-ended.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Binning {
    pub boundaries: Vec<usize>,
}

impl Binning {
    pub fn new(boundaries: Vec<usize>) -> Result<Self> {
        if boundaries.first() == Some(&0) || boundaries.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument(format!(
                "bin boundaries must be positive and strictly ascending, got {boundaries:?}"
            )));
        }
        Ok(Binning { boundaries })
    }

    /// One bin per photon count up to `max_count`.
    pub fn identity(max_count: usize) -> Self {
        Binning {
            boundaries: (1..=max_count).collect(),
        }
    }

    pub fn n_bins(&self) -> usize {
        self.boundaries.len() + 1
    }

    pub fn bin_of(&self, count: usize) -> usize {
        self.boundaries.partition_point(|&e| e <= count)
    }

    pub fn apply(&self, h: &CountHistogram) -> BinnedHistogram {
        let mut bin_counts = vec![0u64; self.n_bins()];
        for (k, &c) in h.counts.iter().enumerate() {
            bin_counts[self.bin_of(k)] += c;
        }
        BinnedHistogram {
            boundaries: self.boundaries.clone(),
            bin_counts,
            label: h.label.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinnedHistogram {
    pub boundaries: Vec<usize>,
    pub bin_counts: Vec<u64>,
    pub label: String,
}

impl BinnedHistogram {
    pub fn shots(&self) -> u64 {
        self.bin_counts.iter().sum()
    }
}

/// Class-conditional cell distributions `q[n][k]` for histograms whose class
/// mixture weights `weights[r][n]` are known, by expectation maximization.
/// Starts from `start` when given, otherwise from the uniform distribution.
pub(crate) fn em_class_distributions(
    counts: &[Vec<f64>],
    weights: &[Vec<f64>],
    n_cells: usize,
    start: Option<Vec<Vec<f64>>>,
    max_iter: usize,
    tol: f64,
) -> Vec<Vec<f64>> {
    let n_classes = weights[0].len();
    let mut q = start.unwrap_or_else(|| vec![vec![1.0 / n_cells as f64; n_cells]; n_classes]);
    let mut last = f64::NEG_INFINITY;
    for _ in 0..max_iter {
        let mut next = vec![vec![0.0; n_cells]; n_classes];
        let mut ll = 0.0;
        for (h, w) in counts.iter().zip(weights) {
            for k in 0..n_cells {
                if h[k] == 0.0 {
                    continue;
                }
                let p: f64 = (0..n_classes).map(|n| w[n] * q[n][k]).sum();
                if p <= 0.0 {
                    continue;
                }
                ll += h[k] * p.ln();
                for n in 0..n_classes {
                    next[n][k] += h[k] * w[n] * q[n][k] / p;
                }
            }
        }
        for (qn, nn) in q.iter_mut().zip(next) {
            let s: f64 = nn.iter().sum();
            if s > 0.0 {
                *qn = nn.into_iter().map(|x| x / s).collect();
            }
        }
        if ll - last <= tol * ll.abs() {
            break;
        }
        last = ll;
    }
    q
}

fn symmetric_kl(p: &[f64]) -> f64 {
    let mut s = 0.0;
    for a in 0..p.len() {
        for b in a + 1..p.len() {
            s += (p[a] - p[b]) * (p[a] / p[b]).ln();
        }
    }
    s
}

/// Boundaries for `n_bins` bins from held-out reference histograms with known
/// class populations `populations[r][n]`.
pub fn choose_bins(held_out: &[CountHistogram], populations: &[Vec<f64>], n_bins: usize) -> Result<Binning> {
    if n_bins < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 bins, got {n_bins}")));
    }
    if held_out.is_empty() || held_out.len() != populations.len() {
        return Err(Error::InvalidArgument(format!(
            "{} held-out histograms but {} population vectors",
            held_out.len(),
            populations.len()
        )));
    }
    let n_classes = populations[0].len();
    let effective: Vec<f64> = (0..n_classes)
        .map(|n| held_out.iter().zip(populations).map(|(h, p)| h.shots as f64 * p[n]).sum())
        .collect();
    if let Some((n, c)) = effective.iter().enumerate().find(|(_, c)| **c < MIN_CLASS_COUNTS) {
        return Err(Error::InsufficientData(format!(
            "class with {n} bright ions has {c:.1} effective held-out counts, need {MIN_CLASS_COUNTS}"
        )));
    }
    let n_cells = held_out.iter().map(|h| h.max_count()).max().unwrap_or(0) + 1;
    if n_bins > n_cells {
        return Err(Error::InvalidArgument(format!(
            "{n_bins} bins requested but held-out counts only span {n_cells} values"
        )));
    }
    let counts: Vec<Vec<f64>> = held_out
        .iter()
        .map(|h| (0..n_cells).map(|k| h.counts.get(k).copied().unwrap_or(0) as f64).collect())
        .collect();
    let q = em_class_distributions(&counts, populations, n_cells, None, 5000, 1e-12);
    let smoothed: Vec<Vec<f64>> = q
        .iter()
        .zip(&effective)
        .map(|(qn, &eff)| {
            let z = eff + PSEUDO_COUNT * n_cells as f64;
            qn.iter().map(|x| (eff * x + PSEUDO_COUNT) / z).collect()
        })
        .collect();
    // prefix[k][n] = Σ_{j<k} q̃_n(j)
    let mut prefix = vec![vec![0.0; n_classes]; n_cells + 1];
    for k in 0..n_cells {
        for n in 0..n_classes {
            prefix[k + 1][n] = prefix[k][n] + smoothed[n][k];
        }
    }
    let score = |a: usize, b: usize| -> f64 {
        let p: Vec<f64> = (0..n_classes).map(|n| prefix[b][n] - prefix[a][n]).collect();
        symmetric_kl(&p)
    };

    // best[j][b]: best score of j+1 bins covering cells [0, b)
    let mut best = vec![vec![f64::NEG_INFINITY; n_cells + 1]; n_bins];
    let mut arg = vec![vec![0usize; n_cells + 1]; n_bins];
    for b in 1..=n_cells {
        best[0][b] = score(0, b);
    }
    for j in 1..n_bins {
        for b in j + 1..=n_cells {
            for a in j..b {
                let v = best[j - 1][a] + score(a, b);
                // strict comparison keeps the lowest cut on ties
                if v > best[j][b] + 1e-12 * v.abs() {
                    best[j][b] = v;
                    arg[j][b] = a;
                }
            }
        }
    }
    let mut cuts = Vec::with_capacity(n_bins - 1);
    let mut b = n_cells;
    for j in (1..n_bins).rev() {
        let a = arg[j][b];
        cuts.push(a);
        b = a;
    }
    cuts.reverse();
    Binning::new(cuts)
}
