// Copyright 2026 The ionzeno Authors
// SPDX-License-Identifier: Apache-2.0

//! Small derivative-free 1-D helpers.

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section search for a maximum of a unimodal `f` on `[lo, hi]`.
/// Returns `(x, f(x))`.
pub fn golden_max(f: impl Fn(f64) -> f64, lo: f64, hi: f64, x_tol: f64) -> (f64, f64) {
    let (mut a, mut b) = (lo.min(hi), lo.max(hi));
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a) > x_tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    if fc >= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Dense scan followed by golden refinement around the best grid point.
pub fn scan_then_refine(f: impl Fn(f64) -> f64, lo: f64, hi: f64, n_scan: usize, x_tol: f64) -> (f64, f64) {
    let n = n_scan.max(2);
    let step = (hi - lo) / (n - 1) as f64;
    let mut best = (lo, f(lo));
    for k in 1..n {
        let x = lo + step * k as f64;
        let v = f(x);
        if v > best.1 {
            best = (x, v);
        }
    }
    let a = (best.0 - step).max(lo);
    let b = (best.0 + step).min(hi);
    let refined = golden_max(&f, a, b, x_tol);
    if refined.1 >= best.1 {
        refined
    } else {
        best
    }
}
