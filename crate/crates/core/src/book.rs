// Copyright 2026 The ionzeno Authors
// SPDX-License-Identifier: Apache-2.0

// Book chapters compiled as doctests, one module per chapter so a failure
// points at its file.

#[doc = include_str!("../../../book/src/introduction.md")]
mod introduction {}
#[doc = include_str!("../../../book/src/state-space.md")]
mod state_space {}
#[doc = include_str!("../../../book/src/hamiltonians.md")]
mod hamiltonians {}
#[doc = include_str!("../../../book/src/dynamics.md")]
mod dynamics {}
#[doc = include_str!("../../../book/src/dressed.md")]
mod dressed {}
#[doc = include_str!("../../../book/src/protocols.md")]
mod protocols {}
#[doc = include_str!("../../../book/src/three-ions.md")]
mod three_ions {}
#[doc = include_str!("../../../book/src/tomography.md")]
mod tomography {}
#[doc = include_str!("../../../book/src/cli.md")]
mod cli {}
