// Copyright 2026 The ionzeno Authors
// SPDX-License-Identifier: Apache-2.0

//! Conversions into the crate's base units (rad/s and seconds).

use std::f64::consts::TAU;

/// Angular frequency for a cyclic frequency given in kHz.
pub fn khz(f: f64) -> f64 {
    TAU * 1e3 * f
}

/// Angular frequency for a cyclic frequency given in MHz.
pub fn mhz(f: f64) -> f64 {
    TAU * 1e6 * f
}

/// Angular frequency for a cyclic frequency given in Hz.
pub fn hz(f: f64) -> f64 {
    TAU * f
}

pub fn us(t: f64) -> f64 {
    t * 1e-6
}

pub fn to_khz(omega: f64) -> f64 {
    omega / (TAU * 1e3)
}

pub fn to_us(t: f64) -> f64 {
    t * 1e6
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        assert!((to_khz(khz(17.6)) - 17.6).abs() < 1e-12);
        assert!((to_us(us(25.4)) - 25.4).abs() < 1e-12);
        assert_eq!(mhz(1.0), khz(1000.0));
        assert_eq!(hz(1000.0), khz(1.0));
    }
}
