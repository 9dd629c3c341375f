// Copyright 2026 The ionzeno Authors
// SPDX-License-Identifier: Apache-2.0

//! Scenario execution. Each scenario writes its tables and a JSON summary
//! into the output directory.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use ionzeno::dressed::{dressed_spectrum, optimal_detuning, pairwise_cancellation_loci, scan_detuning, DressedSpectrum};
use ionzeno::dynamics::PopulationRecord;
use ionzeno::hilbert::NamedState;
use ionzeno::model::NoiseModel;
use ionzeno::protocol::{
    error_budget, fine_tune, plan_composite, plan_single, plan_three_ion, simulate_plan, three_ion_preset, trace_plan,
    two_ion_preset, ErrorBudget, FreeParam, Merit, ProtocolPlan, Scheme, SimOptions,
};
use ionzeno::sweep::{linspace, local_maxima};
use ionzeno::tomography::{
    analysis_design, analyze, depolarize, synthetic_inputs, target_density, EstimateSummary, FitOptions, SyntheticConfig,
    SystematicSweep,
};

use crate::config::{Dimension, Quantity, RawConfig, Scenario, SweepAxis, TomographySection};
use crate::error::CliError;
use crate::output::{Header, OutputDir, Table};

pub const DEFAULT_OUTPUT: &str = "ionzeno-out";
const DEFAULT_RESAMPLES: usize = 100;

/// Files written by a run and lines for the terminal.
#[derive(Debug)]
pub struct RunReport {
    pub written: Vec<PathBuf>,
    pub lines: Vec<String>,
}

fn required(q: &Option<Quantity>, key: &str, dim: Dimension) -> Result<f64, CliError> {
    q.as_ref()
        .ok_or_else(|| CliError::Config(format!("{key} is required for this scenario")))?
        .resolve(key, dim)
}

fn optional(q: &Option<Quantity>, key: &str, dim: Dimension) -> Result<Option<f64>, CliError> {
    q.as_ref().map(|q| q.resolve(key, dim)).transpose()
}

pub fn run(raw: &RawConfig, out: Option<&Path>, seed: Option<u64>) -> Result<RunReport, CliError> {
    let scenario = raw
        .scenario
        .ok_or_else(|| CliError::Config("no scenario given (set `scenario` or use a preset)".into()))?;
    let seed = seed.or(raw.seed).unwrap_or(0);
    let root = out
        .map(Path::to_path_buf)
        .or_else(|| raw.output.clone())
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT));
    let mut header = Header::default();
    header.push("scenario", scenario.name());
    if let Some(p) = &raw.preset {
        header.push("preset", p);
    }
    header.push("seed", seed);
    header.push("units", "rad/s, s");

    let mut dir = OutputDir::create(&root)?;
    let mut lines = Vec::new();
    match scenario {
        Scenario::TwoIonSingle | Scenario::TwoIonComposite | Scenario::ThreeIonW => {
            run_protocol(raw, scenario, seed, &mut header, &mut dir, &mut lines)?
        }
        Scenario::DressedScan => run_dressed_scan(raw, &mut header, &mut dir, &mut lines)?,
        Scenario::TomographyDemo => run_tomography_demo(raw, seed, &mut header, &mut dir, &mut lines)?,
        Scenario::Sweep => run_sweep(raw, &mut header, &mut dir, &mut lines)?,
    }
    Ok(RunReport {
        written: dir.written,
        lines,
    })
}

pub fn build_plan(raw: &RawConfig, scheme: Scheme, n_ions: usize) -> Result<ProtocolPlan, CliError> {
    let p = &raw.pulse;
    let omega_s = required(&p.omega_s, "pulse.omega_s", Dimension::Frequency)?;
    let omega_d = optional(&p.omega_d, "pulse.omega_d", Dimension::Frequency)?;
    let delta = optional(&p.delta, "pulse.delta", Dimension::Frequency)?;
    let t1 = optional(&p.t1, "pulse.t1", Dimension::Time)?;
    let t2 = optional(&p.t2, "pulse.t2", Dimension::Time)?;
    let m = p.m.unwrap_or(1);
    let mut plan = if n_ions == 3 {
        let od = omega_d.ok_or_else(|| CliError::Config("pulse.omega_d is required for three ions".into()))?;
        plan_three_ion(omega_s, od)?
    } else {
        let base = match scheme {
            Scheme::Single => plan_single(omega_s, m)?,
            Scheme::Composite => plan_composite(omega_s, m)?,
        };
        match omega_d {
            Some(od) if od > 0.0 => base.with_omega_d(od),
            Some(od) => return Err(CliError::Config(format!("pulse.omega_d must be positive, got {od}"))),
            None => base,
        }
    };
    if let Some(d) = delta {
        plan = plan.with_delta(d);
    }
    if scheme == Scheme::Composite {
        let a = t1.or(plan.t1).expect("composite plan has t1");
        let b = t2.or(plan.t2).expect("composite plan has t2");
        plan = plan.with_times(a, b);
    } else if t1.is_some() || t2.is_some() {
        return Err(CliError::Config("pulse.t1/pulse.t2 only apply to the composite scheme".into()));
    }
    plan.validate()?;
    Ok(plan)
}

pub fn build_noise(raw: &RawConfig, plan: &ProtocolPlan) -> Result<NoiseModel, CliError> {
    let n = &raw.noise;
    let mut noise = match n.preset.as_deref() {
        None | Some("none") => NoiseModel::none(),
        Some("experimental") => {
            if plan.n_ions == 3 {
                three_ion_preset(plan)?
            } else {
                two_ion_preset(plan)?
            }
        }
        Some(other) => {
            return Err(CliError::Config(format!(
                "noise.preset {other:?} unknown; use none or experimental"
            )))
        }
    };
    for (key, slot, q) in [
        ("noise.gamma_du", &mut noise.gamma_du, &n.gamma_du),
        ("noise.gamma_ud", &mut noise.gamma_ud, &n.gamma_ud),
        ("noise.gamma_ou", &mut noise.gamma_ou, &n.gamma_ou),
        ("noise.gamma_od", &mut noise.gamma_od, &n.gamma_od),
        ("noise.gamma_heat", &mut noise.gamma_heat, &n.gamma_heat),
    ] {
        if let Some(v) = optional(q, key, Dimension::Rate)? {
            *slot = v;
        }
    }
    if let Some(nb) = n.n_bar {
        noise.n_bar = nb;
    }
    if let Some(shifts) = &n.stark_shifts {
        noise.stark_shifts = shifts
            .iter()
            .enumerate()
            .map(|(k, q)| q.resolve(&format!("noise.stark_shifts[{k}]"), Dimension::Frequency))
            .collect::<Result<_, _>>()?;
        if !noise.stark_shifts.is_empty() && noise.stark_shifts.len() != plan.n_ions {
            return Err(CliError::Config(format!(
                "noise.stark_shifts needs {} entries, got {}",
                plan.n_ions,
                noise.stark_shifts.len()
            )));
        }
    }
    noise.validate()?;
    Ok(noise)
}

pub fn build_options(raw: &RawConfig) -> Result<SimOptions, CliError> {
    let r = &raw.run;
    let merit = match r.merit.as_deref() {
        None | Some("end") => Merit::End,
        Some("peak") => Merit::Peak,
        Some(other) => return Err(CliError::Config(format!("run.merit {other:?} unknown; use end or peak"))),
    };
    let opts = SimOptions {
        n_fock: r.n_fock,
        horizon: r.horizon.unwrap_or(1.0),
        n_samples: r.n_samples.unwrap_or(400),
        merit,
        ..SimOptions::default()
    };
    if !(opts.horizon >= 1.0) || opts.n_samples == 0 {
        return Err(CliError::Config("run.horizon must be >= 1 and run.n_samples > 0".into()));
    }
    Ok(opts)
}

fn push_plan(h: &mut Header, plan: &ProtocolPlan) {
    h.push("scheme", format!("{:?}", plan.scheme).to_lowercase());
    h.push("n_ions", plan.n_ions);
    h.push("m", plan.m);
    h.push("omega_s", plan.omega_s);
    h.push("omega_d", plan.omega_d);
    h.push("delta", plan.delta);
    h.push("t_pi", plan.t_pi);
    if let (Some(a), Some(b)) = (plan.t1, plan.t2) {
        h.push("t1", a);
        h.push("t2", b);
    }
}

fn push_noise(h: &mut Header, noise: &NoiseModel) {
    h.push("gamma_du", noise.gamma_du);
    h.push("gamma_ud", noise.gamma_ud);
    h.push("gamma_ou", noise.gamma_ou);
    h.push("gamma_od", noise.gamma_od);
    h.push("gamma_heat", noise.gamma_heat);
    h.push("n_bar", noise.n_bar);
    let shifts: Vec<String> = noise.stark_shifts.iter().map(f64::to_string).collect();
    h.push("stark_shifts", format!("[{}]", shifts.join(", ")));
}

fn push_options(h: &mut Header, opts: &SimOptions) {
    h.push("horizon", opts.horizon);
    h.push("n_samples", opts.n_samples);
    h.push("merit", format!("{:?}", opts.merit).to_lowercase());
    if let Some(nf) = opts.n_fock {
        h.push("n_fock", nf);
    }
}

fn parse_free(names: &[String]) -> Result<Vec<FreeParam>, CliError> {
    names
        .iter()
        .map(|n| match n.as_str() {
            "omega_d" => Ok(FreeParam::OmegaD),
            "delta" => Ok(FreeParam::Delta),
            "t1" => Ok(FreeParam::T1),
            "t2" => Ok(FreeParam::T2),
            other => Err(CliError::Config(format!(
                "pulse.fine_tune: unknown parameter {other:?}; use omega_d, delta, t1 or t2"
            ))),
        })
        .collect()
}

#[derive(Debug, Serialize)]
struct FineTuneReport {
    parameters: Vec<String>,
    initial_fidelity: f64,
    fidelity: f64,
    improved: bool,
    evaluations: usize,
}

#[derive(Debug, Serialize)]
struct ProtocolSummary {
    scenario: &'static str,
    plan: ProtocolPlan,
    noise: NoiseModel,
    end_fidelity: f64,
    peak_fidelity: f64,
    peak_time: f64,
    fine_tune: Option<FineTuneReport>,
    budget: ErrorBudget,
}

fn trace_table(rec: &PopulationRecord) -> Table {
    let n = rec.p_up_counts.first().map_or(0, Vec::len);
    let mut cols = vec!["t".to_string()];
    cols.extend((0..n).map(|k| format!("P{k}")));
    cols.push(format!("F_{}", rec.target_label));
    cols.push("lost".into());
    cols.extend(rec.aux_populations.iter().map(|(l, _)| format!("P_{l}")));
    let mut table = Table::new(cols);
    for (k, &t) in rec.times.iter().enumerate() {
        let mut row = vec![t];
        row.extend(&rec.p_up_counts[k]);
        row.push(rec.target_fidelity[k]);
        let kept: f64 = rec.p_up_counts[k].iter().sum();
        row.push((1.0 - kept).max(0.0));
        row.extend(rec.aux_populations.iter().map(|(_, v)| v[k]));
        table.rows.push(row);
    }
    table
}

fn run_protocol(
    raw: &RawConfig,
    scenario: Scenario,
    seed: u64,
    header: &mut Header,
    dir: &mut OutputDir,
    lines: &mut Vec<String>,
) -> Result<(), CliError> {
    let (scheme, n_ions) = match scenario {
        Scenario::TwoIonSingle => (Scheme::Single, 2),
        Scenario::TwoIonComposite => (Scheme::Composite, 2),
        _ => (Scheme::Single, 3),
    };
    let mut plan = build_plan(raw, scheme, n_ions)?;
    let noise = build_noise(raw, &plan)?;
    let opts = build_options(raw)?;
    let free = parse_free(raw.pulse.fine_tune.as_deref().unwrap_or(&[]))?;
    let tuned = if free.is_empty() {
        None
    } else {
        let r = fine_tune(&plan, &free, &noise, &opts)?;
        plan = r.plan;
        lines.push(format!(
            "fine tune: {:.6} -> {:.6} after {} evaluations",
            r.initial_fidelity, r.fidelity, r.evaluations
        ));
        Some(FineTuneReport {
            parameters: raw.pulse.fine_tune.clone().unwrap_or_default(),
            initial_fidelity: r.initial_fidelity,
            fidelity: r.fidelity,
            improved: r.improved,
            evaluations: r.evaluations,
        })
    };
    push_plan(header, &plan);
    push_noise(header, &noise);
    push_options(header, &opts);

    let rec = trace_plan(&plan, &noise, &opts)?;
    dir.write_table("trace.tsv", header, &trace_table(&rec))?;
    let t_end = plan.total_duration();
    let k_end = rec
        .times
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - t_end).abs().total_cmp(&(b.1 - t_end).abs()))
        .map(|(k, _)| k)
        .expect("non-empty trace");
    let end_fidelity = rec.target_fidelity[k_end];
    let (k_peak, peak_fidelity) = rec
        .target_fidelity
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |a, (k, f)| if f > a.1 { (k, f) } else { a });
    lines.push(format!(
        "{}: end fidelity {end_fidelity:.6}, peak {peak_fidelity:.6} at t = {:.3e} s",
        scenario.name(),
        rec.times[k_peak]
    ));

    let budget = error_budget(&plan, &noise, &opts)?;
    let mut text = String::new();
    for (k, v) in header.entries() {
        text.push_str(&format!("# {k} = {v}\n"));
    }
    text.push_str("channel\tinfidelity\n");
    for (name, v) in [
        ("leakage", budget.leakage),
        ("spontaneous", budget.spontaneous),
        ("thermal", budget.thermal),
        ("heating", budget.heating),
        ("stark", budget.stark),
        ("total_predicted", budget.total_predicted),
        ("simulated_end", 1.0 - end_fidelity),
        ("simulated_peak", 1.0 - peak_fidelity),
    ] {
        text.push_str(&format!("{name}\t{v:e}\n"));
    }
    dir.write_text("budget.tsv", &text)?;
    dir.write_json(
        "summary.json",
        &ProtocolSummary {
            scenario: scenario.name(),
            plan,
            noise,
            end_fidelity,
            peak_fidelity,
            peak_time: rec.times[k_peak],
            fine_tune: tuned,
            budget,
        },
    )?;

    if raw.tomography.enabled.unwrap_or(false) {
        // Stand-in spin state: the target mixed with white noise to the
        // simulated end fidelity.
        let target = plan_target(&plan);
        let d = (1usize << plan.n_ions) as f64;
        let w = ((1.0 - end_fidelity) / (1.0 - 1.0 / d)).clamp(0.0, 1.0);
        run_tomography(target, w, &raw.tomography, seed, header, dir, lines)?;
    }
    Ok(())
}

fn plan_target(plan: &ProtocolPlan) -> NamedState {
    if plan.n_ions == 3 {
        NamedState::W
    } else {
        NamedState::Triplet
    }
}

#[derive(Debug, Serialize)]
struct TomographyReport {
    target: String,
    true_fidelity: f64,
    estimate: EstimateSummary,
    log_likelihood: f64,
    iterations: usize,
    bin_boundaries: Vec<usize>,
    systematic: SystematicSweep,
}

fn synthetic_config(t: &TomographySection, n_ions: usize) -> Result<SyntheticConfig, CliError> {
    let base = SyntheticConfig::for_ions(n_ions);
    let cfg = SyntheticConfig {
        reference_shots: t.reference_shots.unwrap_or(base.reference_shots),
        identity_shots: t.identity_shots.unwrap_or(base.identity_shots),
        analysis_shots: t.analysis_shots.unwrap_or(base.analysis_shots),
        n_bins: t.n_bins.unwrap_or(base.n_bins),
        ..base
    };
    if cfg.reference_shots == 0 || cfg.identity_shots == 0 || cfg.analysis_shots == 0 || cfg.n_bins < 2 {
        return Err(CliError::Config("tomography shot numbers must be positive and n_bins >= 2".into()));
    }
    Ok(cfg)
}

fn run_tomography(
    target: NamedState,
    w: f64,
    t: &TomographySection,
    seed: u64,
    header: &mut Header,
    dir: &mut OutputDir,
    lines: &mut Vec<String>,
) -> Result<(), CliError> {
    let cfg = synthetic_config(t, target.n_ions())?;
    let resamples = t.resamples.unwrap_or(DEFAULT_RESAMPLES);
    header.push("tomography_target", target.label());
    header.push("tomography_depolarize", w);
    header.push("reference_shots", cfg.reference_shots);
    header.push("identity_shots", cfg.identity_shots);
    header.push("analysis_shots", cfg.analysis_shots);
    header.push("n_bins", cfg.n_bins);
    header.push("resamples", resamples);

    let rho = depolarize(&target_density(target)?, w);
    let true_fidelity = analysis_design(target)?.target_fidelity(&rho);
    let inputs = synthetic_inputs(target, &rho, &cfg, seed)?;
    let (est, sweep) = analyze(&inputs, resamples, seed, &FitOptions::default())?;
    let summary = est.summary();
    lines.push(format!(
        "tomography: F = {:.5} in [{:.5}, {:.5}] (true {:.5})",
        summary.fidelity, summary.ci[0], summary.ci[1], true_fidelity
    ));
    if sweep.nonlinear {
        lines.push("warning: reference-error response is not linear".into());
    }

    let mut table = Table::new(vec!["resample".into(), "fidelity".into()]);
    if let Some(b) = &est.bootstrap {
        for (k, f) in b.fidelities.iter().enumerate() {
            table.rows.push(vec![k as f64, *f]);
        }
    }
    dir.write_table("bootstrap.tsv", header, &table)?;
    dir.write_json(
        "tomography.json",
        &TomographyReport {
            target: target.label().to_string(),
            true_fidelity,
            estimate: summary,
            log_likelihood: est.log_likelihood,
            iterations: est.iterations,
            bin_boundaries: inputs.binning.boundaries.clone(),
            systematic: sweep,
        },
    )?;
    if !est.converged {
        return Err(CliError::Fit(format!(
            "likelihood maximization stopped after {} iterations without converging",
            est.iterations
        )));
    }
    Ok(())
}

fn run_tomography_demo(
    raw: &RawConfig,
    seed: u64,
    header: &mut Header,
    dir: &mut OutputDir,
    lines: &mut Vec<String>,
) -> Result<(), CliError> {
    let t = &raw.tomography;
    let target = match t.target.as_deref() {
        None | Some("T") => NamedState::Triplet,
        Some("W") => NamedState::W,
        Some(other) => return Err(CliError::Config(format!("tomography.target {other:?} unknown; use T or W"))),
    };
    let w = t.depolarize.unwrap_or(0.02);
    if !(0.0..=1.0).contains(&w) {
        return Err(CliError::Config(format!("tomography.depolarize must lie in [0, 1], got {w}")));
    }
    run_tomography(target, w, t, seed, header, dir, lines)
}

#[derive(Debug, Serialize)]
struct SpotValues {
    delta: f64,
    eigenfrequencies: [f64; 3],
    eigenvectors: [[f64; 3]; 3],
    couplings: [f64; 4],
    t_pi: f64,
}

impl From<&DressedSpectrum> for SpotValues {
    fn from(s: &DressedSpectrum) -> Self {
        SpotValues {
            delta: s.delta,
            eigenfrequencies: s.eigenfrequencies,
            eigenvectors: s.eigenvectors,
            couplings: s.couplings,
            t_pi: s.t_pi(),
        }
    }
}

#[derive(Debug, Serialize)]
struct DressedSummary {
    omega_s: f64,
    omega_d: f64,
    delta_opt: f64,
    at_zero: SpotValues,
    at_optimum: SpotValues,
    cancellation_loci: Vec<f64>,
}

fn run_dressed_scan(raw: &RawConfig, header: &mut Header, dir: &mut OutputDir, lines: &mut Vec<String>) -> Result<(), CliError> {
    let omega_s = required(&raw.pulse.omega_s, "pulse.omega_s", Dimension::Frequency)?;
    let omega_d = optional(&raw.pulse.omega_d, "pulse.omega_d", Dimension::Frequency)?.unwrap_or(0.0);
    let lo = optional(&raw.scan.delta_from, "scan.delta_from", Dimension::Frequency)?.unwrap_or(-4.0 * omega_s);
    let hi = optional(&raw.scan.delta_to, "scan.delta_to", Dimension::Frequency)?.unwrap_or(4.0 * omega_s);
    let points = raw.scan.points.unwrap_or(401);
    if !(hi > lo) {
        return Err(CliError::Config(format!("scan range is empty: {lo} .. {hi}")));
    }
    header.push("omega_s", omega_s);
    header.push("omega_d", omega_d);
    header.push("delta_from", lo);
    header.push("delta_to", hi);
    header.push("points", points);

    let scan = scan_detuning(omega_s, lo, hi, points)?;
    let mut table = Table::new(vec!["delta".into(), "Delta1".into(), "Delta2".into(), "Delta3".into()]);
    for (d, e) in scan.deltas.iter().zip(&scan.eigenfrequencies) {
        table.rows.push(vec![*d, e[0], e[1], e[2]]);
    }
    dir.write_table("dressed.tsv", header, &table)?;

    let delta_opt = optimal_detuning(omega_s);
    let at_zero = dressed_spectrum(omega_s, 0.0, omega_d)?;
    let at_opt = dressed_spectrum(omega_s, delta_opt, omega_d)?;
    lines.push(format!(
        "dressed scan: {points} points, delta_opt = {delta_opt:.6e} rad/s, eigenfrequencies there {:?}",
        at_opt.eigenfrequencies
    ));
    dir.write_json(
        "summary.json",
        &DressedSummary {
            omega_s,
            omega_d,
            delta_opt,
            at_zero: (&at_zero).into(),
            at_optimum: (&at_opt).into(),
            cancellation_loci: pairwise_cancellation_loci(&scan)?,
        },
    )?;
    Ok(())
}

fn axis_values(axis: SweepAxis, from: &Option<Quantity>, to: &Option<Quantity>, points: Option<usize>, suffix: &str) -> Result<Vec<f64>, CliError> {
    let dim = if axis == SweepAxis::Gamma {
        Dimension::Rate
    } else {
        Dimension::Dimensionless
    };
    let lo = required(from, &format!("sweep.from{suffix}"), dim)?;
    let hi = required(to, &format!("sweep.to{suffix}"), dim)?;
    let n = points.ok_or_else(|| CliError::Config(format!("sweep.points{suffix} is required")))?;
    if n == 0 || hi < lo {
        return Err(CliError::Config(format!(
            "sweep axis {suffix:?}: need points >= 1 and from <= to"
        )));
    }
    let values = linspace(lo, hi, n);
    let ok = |v: f64| match axis {
        SweepAxis::OmegaRatio => v > 0.0,
        SweepAxis::T1 => v > 0.0 && v < 1.0,
        SweepAxis::NBar | SweepAxis::Gamma => v >= 0.0,
    };
    if let Some(v) = values.iter().find(|v| !ok(**v)) {
        return Err(CliError::Config(format!("sweep value {v} is outside the axis domain")));
    }
    Ok(values)
}

fn axis_name(a: SweepAxis) -> &'static str {
    match a {
        SweepAxis::OmegaRatio => "omega_ratio",
        SweepAxis::T1 => "t1_over_t_pi",
        SweepAxis::NBar => "n_bar",
        SweepAxis::Gamma => "gamma",
    }
}

/// Plan and noise at one grid point. The drive ratio is applied before the
/// switching time because it rescales `t_π`.
fn grid_point(plan: &ProtocolPlan, noise: &NoiseModel, coords: &[(SweepAxis, f64)]) -> (ProtocolPlan, NoiseModel) {
    let mut plan = *plan;
    let mut noise = noise.clone();
    let mut ordered = coords.to_vec();
    ordered.sort_by_key(|(a, _)| *a != SweepAxis::OmegaRatio);
    for (axis, v) in ordered {
        match axis {
            SweepAxis::OmegaRatio => plan = plan.with_omega_d(plan.omega_s / v),
            SweepAxis::T1 => plan = plan.with_times(v * plan.t_pi, (1.0 - v) * plan.t_pi),
            SweepAxis::NBar => noise.n_bar = v,
            SweepAxis::Gamma => {
                noise.gamma_du = v;
                noise.gamma_ud = v;
                noise.gamma_ou = v;
                noise.gamma_od = v;
            }
        }
    }
    (plan, noise)
}

#[derive(Debug, Serialize)]
struct SweepSummary {
    axes: Vec<&'static str>,
    best: Vec<f64>,
    best_fidelity: f64,
    /// 1-D sweeps only.
    local_maxima: Vec<(f64, f64)>,
}

fn run_sweep(raw: &RawConfig, header: &mut Header, dir: &mut OutputDir, lines: &mut Vec<String>) -> Result<(), CliError> {
    let s = &raw.sweep;
    let scheme = match s.scheme.as_deref() {
        None | Some("single") => Scheme::Single,
        Some("composite") => Scheme::Composite,
        Some(other) => return Err(CliError::Config(format!("sweep.scheme {other:?} unknown; use single or composite"))),
    };
    let axis = s.axis.ok_or_else(|| CliError::Config("sweep.axis is required".into()))?;
    let mut axes = vec![(axis, axis_values(axis, &s.from, &s.to, s.points, "")?)];
    if let Some(a2) = s.axis2 {
        if a2 == axis {
            return Err(CliError::Config("sweep.axis2 repeats sweep.axis".into()));
        }
        axes.push((a2, axis_values(a2, &s.from2, &s.to2, s.points2, "2")?));
    }
    if scheme == Scheme::Single && axes.iter().any(|(a, _)| *a == SweepAxis::T1) {
        return Err(CliError::Config("the t1 axis needs sweep.scheme = \"composite\"".into()));
    }
    let plan = build_plan(raw, scheme, 2)?;
    let noise = build_noise(raw, &plan)?;
    let opts = build_options(raw)?;
    push_plan(header, &plan);
    push_noise(header, &noise);
    push_options(header, &opts);
    for (k, (a, v)) in axes.iter().enumerate() {
        let suffix = if k == 0 { "" } else { "2" };
        header.push(&format!("axis{suffix}"), axis_name(*a));
        header.push(&format!("points{suffix}"), v.len());
    }

    let grid: Vec<Vec<(SweepAxis, f64)>> = match axes.as_slice() {
        [(a, xs)] => xs.iter().map(|&x| vec![(*a, x)]).collect(),
        [(a, xs), (b, ys)] => xs
            .iter()
            .flat_map(|&x| ys.iter().map(move |&y| vec![(*a, x), (*b, y)]))
            .collect(),
        _ => unreachable!("one or two axes"),
    };
    let sim = SimOptions { n_samples: 8, ..opts };
    let fidelity = grid
        .par_iter()
        .map(|coords| {
            let (p, n) = grid_point(&plan, &noise, coords);
            Ok(simulate_plan(&p, &n, &sim)?.merit(opts.merit))
        })
        .collect::<Result<Vec<f64>, ionzeno::Error>>()?;

    let mut cols: Vec<String> = axes.iter().map(|(a, _)| axis_name(*a).to_string()).collect();
    cols.push("fidelity".into());
    let mut table = Table::new(cols);
    for (coords, f) in grid.iter().zip(&fidelity) {
        let mut row: Vec<f64> = coords.iter().map(|c| c.1).collect();
        row.push(*f);
        table.rows.push(row);
    }
    dir.write_table("sweep.tsv", header, &table)?;

    let (k_best, best_fidelity) = fidelity
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |a, (k, f)| if f > a.1 { (k, f) } else { a });
    let best: Vec<f64> = grid[k_best].iter().map(|c| c.1).collect();
    let maxima = if axes.len() == 1 {
        local_maxima(&axes[0].1, &fidelity)
    } else {
        Vec::new()
    };
    lines.push(format!("sweep: {} points, best {best_fidelity:.6} at {best:?}", grid.len()));
    dir.write_json(
        "summary.json",
        &SweepSummary {
            axes: axes.iter().map(|(a, _)| axis_name(*a)).collect(),
            best,
            best_fidelity,
            local_maxima: maxima,
        },
    )?;
    Ok(())
}
