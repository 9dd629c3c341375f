// Copyright 2026 The ionzeno Authors
// SPDX-License-Identifier: Apache-2.0

use ionzeno::hilbert::NamedState;
use ionzeno::tomography::{
    analyze, bootstrap, depolarize, fit_ml, prepare_inputs, reference_protocol, simulate_data, synthetic_inputs,
    target_density, analysis_design, Binning, FitOptions, SyntheticConfig, TomographyEstimate,
};

#[test]
fn five_bins_match_full_resolution() {
    let cfg = SyntheticConfig::two_ion();
    let rho = depolarize(&target_density(NamedState::Triplet).unwrap(), 0.05);
    let inputs = synthetic_inputs(NamedState::Triplet, &rho, &cfg, 101).unwrap();
    let coarse = fit_ml(&inputs, &FitOptions::default()).unwrap();
    let max = inputs
        .references
        .iter()
        .chain(&inputs.data)
        .map(|h| h.max_count())
        .max()
        .unwrap();
    let mut full = inputs.clone();
    full.binning = Binning::identity(max);
    let fine = fit_ml(&full, &FitOptions::default()).unwrap();
    let diff = (coarse.fidelity - fine.fidelity).abs();
    println!("5 bins {:.5}, full {:.5}", coarse.fidelity, fine.fidelity);
    assert!(diff < 0.003, "difference {diff}");
}

#[test]
fn w_state_round_trip() {
    let cfg = SyntheticConfig::three_ion();
    let rho = target_density(NamedState::W).unwrap();
    let inputs = synthetic_inputs(NamedState::W, &rho, &cfg, 102).unwrap();
    let fit = fit_ml(&inputs, &FitOptions::default()).unwrap();
    println!("F_W = {:.5} after {} iterations", fit.fidelity, fit.iterations);
    assert!((fit.fidelity - 1.0).abs() < 0.01);
    assert!((fit.populations[2] - 1.0).abs() < 0.01);
}

#[test]
fn interval_coverage() {
    let cfg = SyntheticConfig {
        reference_shots: 3000,
        identity_shots: 3000,
        analysis_shots: 300,
        ..SyntheticConfig::two_ion()
    };
    let rho = depolarize(&target_density(NamedState::Triplet).unwrap(), 0.1);
    let truth = analysis_design(NamedState::Triplet).unwrap().target_fidelity(&rho);
    let design = analysis_design(NamedState::Triplet).unwrap();
    let mut covered = 0;
    for run in 0..20u64 {
        let records = reference_protocol(&cfg.model, cfg.reference_shots, 2, 1000 + run).unwrap();
        let data = simulate_data(&design, &rho, &cfg, 2000 + run).unwrap();
        let inputs = prepare_inputs(design.clone(), &records, data, 5).unwrap();
        let est = TomographyEstimate::from_fit(fit_ml(&inputs, &FitOptions::default()).unwrap());
        let est = bootstrap(&inputs, &est, 60, run, &FitOptions::default()).unwrap();
        if est.ci_lower <= truth && truth <= est.ci_upper {
            covered += 1;
        }
    }
    println!("covered {covered}/20");
    assert!(covered >= 10);
}

#[test]
fn full_analysis_reports_consistent_interval() {
    let cfg = SyntheticConfig {
        identity_shots: 6000,
        analysis_shots: 300,
        ..SyntheticConfig::two_ion()
    };
    let rho = depolarize(&target_density(NamedState::Triplet).unwrap(), 0.02);
    let inputs = synthetic_inputs(NamedState::Triplet, &rho, &cfg, 103).unwrap();
    let (est, sweep) = analyze(&inputs, 30, 7, &FitOptions::default()).unwrap();
    let s = est.summary();
    println!("{s:?} slope {:.4} nonlinear {}", sweep.slope, sweep.nonlinear);
    assert!(s.ci[0] <= s.fidelity && s.fidelity <= s.ci[1]);
    assert!((s.fidelity - s.ci[0] - s.epsilon_0 - s.epsilon_syst).abs() < 1e-12);
    assert!(s.lr_percentile.is_some());
}
