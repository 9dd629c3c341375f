// Copyright 2026 The ionzeno Authors
// SPDX-License-Identifier: Apache-2.0

//! Simulation and analysis of Zeno-protected entangling gates in small
//! trapped-ion chains.
//!
//! The crate is layered bottom-up:
//!
//! * [`hilbert`]: spin ⊗ truncated-Fock state space, operators, named states.
//! * [`model`]: rotating-frame Hamiltonians, pulse schedules and noise.
//! * [`dynamics`]: exact unitary propagation and Lindblad integration.
//! * [`dressed`], [`dressed3`]: analysis of the coupled undesired subspaces.
//! * [`protocol`]: pulse plans, error budgets and numerical fine tuning.
//! * [`tomography`]: detection histograms, binning, maximum-likelihood
//!   partial tomography and bootstrap.
//!
//! Units: ħ = 1, all rates and frequencies are angular (rad/s), all times
//! are in seconds. [`units`] has the conversions used by the examples.

pub mod dressed;
pub mod dressed3;
pub mod dynamics;
pub mod error;
pub mod hilbert;
pub mod linalg;
pub mod model;
pub mod optim;
pub mod protocol;
pub mod sweep;
pub mod tomography;
pub mod units;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book;
