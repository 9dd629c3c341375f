// Copyright 2026 The ionzeno Authors
// SPDX-License-Identifier: Apache-2.0

//! Fidelity landscapes over drive ratio and switching time. Grid points are
//! independent simulations evaluated in parallel; results do not depend on
//! the thread count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::NoiseModel;
use crate::protocol::{plan_composite, plan_single, simulate_plan, Merit, SimOptions};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sweep1d {
    pub x: Vec<f64>,
    pub fidelity: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sweep2d {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// `fidelity[i][j]` at `(x[i], y[j])`.
    pub fidelity: Vec<Vec<f64>>,
}

impl Sweep2d {
    /// `(x, y, fidelity)` of the best grid point.
    pub fn argmax(&self) -> (f64, f64, f64) {
        let mut best = (self.x[0], self.y[0], f64::NEG_INFINITY);
        for (i, row) in self.fidelity.iter().enumerate() {
            for (j, &f) in row.iter().enumerate() {
                if f > best.2 {
                    best = (self.x[i], self.y[j], f);
                }
            }
        }
        best
    }
}

/// `n` evenly spaced points on `[lo, hi]`.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect(),
    }
}

fn sweep_opts(merit: Merit) -> SimOptions {
    SimOptions {
        n_samples: 8,
        merit,
        ..SimOptions::default()
    }
}

/// Single-pulse fidelity against `Ω_s/Ω_d` at fixed `Ω_s` and `δ = √(7/3)Ω_s`,
/// each point run for its own `t_π`.
pub fn single_ratio_sweep(omega_s: f64, ratios: &[f64], noise: &NoiseModel, merit: Merit) -> Result<Sweep1d> {
    let base = plan_single(omega_s, 0)?;
    let fidelity = ratios
        .par_iter()
        .map(|&r| {
            if !(r > 0.0) {
                return Err(Error::InvalidArgument(format!("ratio must be positive, got {r}")));
            }
            let plan = base.with_omega_d(omega_s / r);
            Ok(simulate_plan(&plan, noise, &sweep_opts(merit))?.merit(merit))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(Sweep1d {
        x: ratios.to_vec(),
        fidelity,
    })
}

/// Composite end fidelity over `Ω_s/Ω_d` (x) and `t₁/t_π` (y) with
/// `t₂ = t_π − t₁`.
pub fn composite_sweep(omega_s: f64, ratios: &[f64], t1_fractions: &[f64], noise: &NoiseModel) -> Result<Sweep2d> {
    let base = plan_composite(omega_s, 1)?;
    let cells: Vec<(usize, usize)> = (0..ratios.len())
        .flat_map(|i| (0..t1_fractions.len()).map(move |j| (i, j)))
        .collect();
    let values = cells
        .par_iter()
        .map(|&(i, j)| {
            let (r, f) = (ratios[i], t1_fractions[j]);
            if !(r > 0.0) || !(f > 0.0 && f < 1.0) {
                return Err(Error::InvalidArgument(format!(
                    "need ratio > 0 and 0 < t1/t_pi < 1, got {r}, {f}"
                )));
            }
            let p = base.with_omega_d(omega_s / r);
            let p = p.with_times(f * p.t_pi, (1.0 - f) * p.t_pi);
            Ok(simulate_plan(&p, noise, &sweep_opts(Merit::End))?.end_fidelity)
        })
        .collect::<Result<Vec<f64>>>()?;
    let fidelity = values.chunks(t1_fractions.len()).map(|c| c.to_vec()).collect();
    Ok(Sweep2d {
        x: ratios.to_vec(),
        y: t1_fractions.to_vec(),
        fidelity,
    })
}

/// Interior local maxima, refined by a parabola through the three
/// neighbouring samples. Assumes a uniform grid.
pub fn local_maxima(x: &[f64], y: &[f64]) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for k in 1..y.len().saturating_sub(1) {
        if y[k] > y[k - 1] && y[k] >= y[k + 1] {
            let (a, b, c) = (y[k - 1], y[k], y[k + 1]);
            let denom = a - 2.0 * b + c;
            let h = x[k + 1] - x[k];
            let (dx, peak) = if denom < 0.0 {
                let d = 0.5 * (a - c) / denom;
                (d * h, b - 0.25 * (a - c) * d)
            } else {
                (0.0, b)
            };
            out.push((x[k] + dx, peak));
        }
    }
    out
}
