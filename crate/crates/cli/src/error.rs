// Copyright 2026 The ionzeno Authors
// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("cannot write {path}: {source}")]
    Output { path: String, source: std::io::Error },

    #[error("numerical assertion failed: {0}")]
    Numerical(ionzeno::Error),

    #[error("fit failed: {0}")]
    Fit(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Output { .. } => 2,
            CliError::Numerical(_) => 3,
            CliError::Fit(_) => 4,
        }
    }
}

impl From<ionzeno::Error> for CliError {
    fn from(e: ionzeno::Error) -> Self {
        use ionzeno::Error as E;
        match e {
            E::InvalidArgument(m) => CliError::Config(m),
            E::IonOutOfRange { .. } => CliError::Config(e.to_string()),
            E::InsufficientData(_) | E::FitFailure(_) => CliError::Fit(e.to_string()),
            other => CliError::Numerical(other),
        }
    }
}
