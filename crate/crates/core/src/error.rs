// Copyright 2026 The ionzeno Authors
// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("ion index {ion} out of range for a chain of {n_ions} ions")]
    IonOutOfRange { ion: usize, n_ions: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("Fock truncation overflow: top level holds {population:.3e} at t = {time:.6e} s")]
    TruncationOverflow { population: f64, time: f64 },

    #[error("positivity violated: minimum eigenvalue {min_eigenvalue:.3e} at t = {time:.6e} s")]
    PositivityViolation { min_eigenvalue: f64, time: f64 },

    #[error("integrator did not converge: {0}")]
    NonConvergence(String),

    #[error("resonant denominator: |Δ² - Ω₀²| = {0:.3e} relative")]
    Resonance(f64),

    #[error("degenerate dressed spectrum (gap {0:.3e})")]
    Degenerate(f64),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("fit failed: {0}")]
    FitFailure(String),
}
