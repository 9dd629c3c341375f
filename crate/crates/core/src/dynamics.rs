// Copyright 2026 The ionzeno Authors
// SPDX-License-Identifier: Apache-2.0

//! Propagation of pure states and density operators under a
//! [`PulseSchedule`].
//!
//! Unitary segments use the exact eigen-propagator of the constant
//! rotating-frame Hamiltonian. Open-system runs integrate the Lindblad
//! equation with classical RK4 on sparse operators, with a fixed step that
//! is halved until two successive runs agree.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{DensityOperator, PureState, SystemDims};
use crate::linalg::{c, min_eigenvalue, CMatrix, CVector, HermitianPropagator, SparseMatrix, C64, ZERO};
use crate::model::{leak_loss_operator, lindblad_operators, ChainModel, NoiseModel, PulseSchedule};
use crate::optim::scan_then_refine;

/// Top Fock-level population that triggers the truncation assertion.
pub const TRUNCATION_LIMIT: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct Trajectory<S> {
    pub times: Vec<f64>,
    pub states: Vec<S>,
    pub schedule: PulseSchedule,
}

/// Sample grid: multiples of `sample_dt` merged with segment boundaries.
pub fn sample_times(schedule: &PulseSchedule, sample_dt: f64) -> Result<Vec<f64>> {
    if !(sample_dt > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "sample_dt must be positive, got {sample_dt}"
        )));
    }
    let total = schedule.total_duration();
    let n = (total / sample_dt).floor() as usize;
    let mut times: Vec<f64> = (0..=n).map(|k| k as f64 * sample_dt).collect();
    times.extend(schedule.boundaries());
    times.sort_by(|a, b| a.partial_cmp(b).expect("finite times"));
    let eps = 1e-12 * total.max(f64::MIN_POSITIVE);
    let mut out: Vec<f64> = Vec::with_capacity(times.len());
    for t in times {
        if t > total + eps {
            continue;
        }
        match out.last() {
            Some(&last) if (t - last).abs() <= eps => {
                // prefer exact boundary values
                if schedule.boundaries().contains(&t) {
                    *out.last_mut().expect("non-empty") = t;
                }
            }
            _ => out.push(t),
        }
    }
    Ok(out)
}

/// Default sampling: 400 intervals over the schedule.
pub fn default_sample_dt(schedule: &PulseSchedule) -> f64 {
    schedule.total_duration() / 400.0
}

fn top_fock_population_vec(dims: SystemDims, psi: &CVector) -> f64 {
    let nf = dims.n_fock();
    if nf == 1 {
        return 0.0;
    }
    (0..dims.spin_dim()).map(|s| psi[s * nf + nf - 1].norm_sqr()).sum()
}

fn top_fock_population_mat(dims: SystemDims, rho: &CMatrix) -> f64 {
    let nf = dims.n_fock();
    if nf == 1 {
        return 0.0;
    }
    (0..dims.spin_dim())
        .map(|s| {
            let k = s * nf + nf - 1;
            rho[(k, k)].re
        })
        .sum()
}

/// Exact piecewise-constant unitary evolution from a fixed initial state.
#[derive(Debug, Clone)]
pub struct PureEvolution {
    dims: SystemDims,
    starts: Vec<f64>,
    propagators: Vec<HermitianPropagator>,
    /// State at the start of each segment, plus the final state.
    checkpoints: Vec<CVector>,
    total: f64,
}

impl PureEvolution {
    pub fn new(schedule: &PulseSchedule, model: &ChainModel, initial: &PureState) -> Result<Self> {
        if initial.dims() != model.dims {
            return Err(Error::DimensionMismatch(
                "initial state does not match the model dimensions".into(),
            ));
        }
        let norm = initial.norm();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidState(format!("initial norm {norm} != 1")));
        }
        let mut starts = Vec::new();
        let mut propagators = Vec::new();
        let mut checkpoints = vec![initial.amplitudes().clone()];
        let mut t = 0.0;
        for seg in schedule.segments() {
            let h = model.segment_hamiltonian(seg)?;
            let prop = HermitianPropagator::new(&h);
            let next = prop.apply(seg.duration, checkpoints.last().expect("non-empty"));
            starts.push(t);
            propagators.push(prop);
            checkpoints.push(next);
            t += seg.duration;
        }
        Ok(PureEvolution {
            dims: model.dims,
            starts,
            propagators,
            checkpoints,
            total: t,
        })
    }

    pub fn total_duration(&self) -> f64 {
        self.total
    }

    /// Amplitudes at time `t` (clamped to the schedule).
    pub fn amplitudes_at(&self, t: f64) -> CVector {
        let t = t.clamp(0.0, self.total);
        if t >= self.total {
            return self.checkpoints.last().expect("non-empty").clone();
        }
        let k = match self.starts.iter().rposition(|s| *s <= t) {
            Some(k) => k,
            None => 0,
        };
        self.propagators[k].apply(t - self.starts[k], &self.checkpoints[k])
    }

    pub fn state_at(&self, t: f64) -> PureState {
        PureState::from_raw(self.dims, self.amplitudes_at(t))
    }

    pub fn final_state(&self) -> PureState {
        PureState::from_raw(self.dims, self.checkpoints.last().expect("non-empty").clone())
    }

    /// Maximum of the target fidelity on `[t_lo, t_hi]`, located by a scan
    /// of `n_scan` points and golden-section refinement.
    pub fn peak_fidelity(&self, target: &Target, t_lo: f64, t_hi: f64, n_scan: usize) -> (f64, f64) {
        let f = |t: f64| target.fidelity_vec(&self.amplitudes_at(t));
        scan_then_refine(f, t_lo, t_hi, n_scan, 1e-6 * (t_hi - t_lo).abs().max(1e-300))
    }
}

/// Samples an exact unitary evolution every `sample_dt` and at segment
/// boundaries. Fails if the top Fock level reaches [`TRUNCATION_LIMIT`].
pub fn evolve_pure(
    schedule: &PulseSchedule,
    model: &ChainModel,
    initial: &PureState,
    sample_dt: f64,
) -> Result<Trajectory<PureState>> {
    let times = sample_times(schedule, sample_dt)?;
    let evo = PureEvolution::new(schedule, model, initial)?;
    let mut states = Vec::with_capacity(times.len());
    for &t in &times {
        let psi = evo.amplitudes_at(t);
        let top = top_fock_population_vec(model.dims, &psi);
        if top >= TRUNCATION_LIMIT {
            return Err(Error::TruncationOverflow {
                population: top,
                time: t,
            });
        }
        states.push(PureState::from_raw(model.dims, psi));
    }
    Ok(Trajectory {
        times,
        states,
        schedule: schedule.clone(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityOptions {
    /// Maximum entrywise difference accepted between runs at `h` and `h/2`.
    pub tol: f64,
    /// Spacing of stored samples; `None` keeps 400 intervals.
    pub sample_dt: Option<f64>,
    pub max_halvings: usize,
    /// Upper bound on how many samples get a full eigenvalue check.
    pub positivity_checks: usize,
}

impl Default for DensityOptions {
    fn default() -> Self {
        DensityOptions {
            tol: 1e-6,
            sample_dt: None,
            max_halvings: 6,
            positivity_checks: 16,
        }
    }
}

/// Result of an observed Lindblad run: `values[k] = observe(times[k], ρ)`
/// at every integrator step of the accepted run.
#[derive(Debug, Clone)]
pub struct ObservedRun<T> {
    pub times: Vec<f64>,
    pub values: Vec<T>,
    pub sample_times: Vec<f64>,
    pub samples: Vec<DensityOperator>,
    pub final_state: DensityOperator,
    pub step: f64,
}

struct SegmentGenerator {
    h_eff: SparseMatrix,
    jumps: Vec<SparseMatrix>,
}

struct Workspace {
    x: CMatrix,
    y: CMatrix,
    z: CMatrix,
}

impl SegmentGenerator {
    /// `out = −i H_eff ρ + (−i H_eff ρ)† + Σ L ρ L†`
    fn rhs(&self, rho: &CMatrix, out: &mut CMatrix, ws: &mut Workspace) {
        let n = rho.nrows();
        self.h_eff.mul_dense_into(rho, &mut ws.x);
        for j in 0..n {
            for i in 0..n {
                let a = ws.x[(i, j)];
                let b = ws.x[(j, i)];
                // −i a + conj(−i b) = −i a + i conj(b)
                out[(i, j)] = C64::new(a.im + b.im, b.re - a.re);
            }
        }
        for l in &self.jumps {
            l.mul_dense_into(rho, &mut ws.y);
            ws.y.adjoint_to(&mut ws.z);
            l.mul_dense_into(&ws.z, &mut ws.y);
            *out += &ws.y;
        }
    }
}

fn build_generators(
    schedule: &PulseSchedule,
    model: &ChainModel,
    noise: &NoiseModel,
) -> Result<(Vec<SegmentGenerator>, f64)> {
    let lossless = NoiseModel {
        gamma_ou: if model.dims.leak_level() { noise.gamma_ou } else { 0.0 },
        gamma_od: if model.dims.leak_level() { noise.gamma_od } else { 0.0 },
        ..noise.clone()
    };
    let jumps = lindblad_operators(model.dims, &lossless)?;
    let n = model.dims.dim();
    let mut decay = leak_loss_operator(model.dims, noise)?.unwrap_or_else(|| CMatrix::zeros(n, n));
    for l in &jumps {
        decay += l.matrix().adjoint() * l.matrix();
    }
    let sparse_jumps: Vec<SparseMatrix> = jumps.iter().map(|l| SparseMatrix::from_dense(l.matrix())).collect();
    let mut omega_max: f64 = 0.0;
    let mut gens = Vec::new();
    for seg in schedule.segments() {
        let h = model.segment_hamiltonian_with(seg, &noise.stark_shifts)?;
        omega_max = omega_max.max(HermitianPropagator::new(&h).spectral_radius());
        let h_eff = h - &decay * c(0.0, 0.5);
        gens.push(SegmentGenerator {
            h_eff: SparseMatrix::from_dense(&h_eff),
            jumps: sparse_jumps.clone(),
        });
    }
    Ok((gens, omega_max))
}

/// Base step `min(2π/(50 ω_max), τ_min/20)`.
fn base_step(schedule: &PulseSchedule, omega_max: f64) -> f64 {
    let tau_min = schedule
        .segments()
        .iter()
        .map(|s| s.duration)
        .fold(f64::INFINITY, f64::min);
    let h_spec = if omega_max > 0.0 {
        std::f64::consts::TAU / (50.0 * omega_max)
    } else {
        f64::INFINITY
    };
    h_spec.min(tau_min / 20.0)
}

struct RunOutput<T> {
    times: Vec<f64>,
    values: Vec<T>,
    samples: Vec<CMatrix>,
    final_state: CMatrix,
}

#[allow(clippy::too_many_arguments)]
fn integrate<T>(
    gens: &[SegmentGenerator],
    schedule: &PulseSchedule,
    checkpoints: &[f64],
    rho0: &CMatrix,
    h_max: f64,
    observe: &dyn Fn(f64, &CMatrix) -> T,
    keep_samples: bool,
    dims: SystemDims,
) -> Result<RunOutput<T>> {
    let n = rho0.nrows();
    let mut rho = rho0.clone();
    let mut ws = Workspace {
        x: CMatrix::zeros(n, n),
        y: CMatrix::zeros(n, n),
        z: CMatrix::zeros(n, n),
    };
    let mut k1 = CMatrix::zeros(n, n);
    let mut k2 = CMatrix::zeros(n, n);
    let mut k3 = CMatrix::zeros(n, n);
    let mut k4 = CMatrix::zeros(n, n);
    let mut tmp = CMatrix::zeros(n, n);
    let bounds = schedule.boundaries();

    let mut times = vec![0.0];
    let mut values = vec![observe(0.0, &rho)];
    let mut samples = Vec::new();
    if keep_samples {
        samples.push(rho.clone());
    }
    for w in checkpoints.windows(2) {
        let (a, b) = (w[0], w[1]);
        let mid = 0.5 * (a + b);
        let seg = bounds
            .windows(2)
            .position(|s| mid >= s[0] && mid <= s[1])
            .unwrap_or(gens.len() - 1);
        let g = &gens[seg];
        let steps = ((b - a) / h_max).ceil().max(1.0) as usize;
        let h = (b - a) / steps as f64;
        let hc = c(h, 0.0);
        for s in 0..steps {
            g.rhs(&rho, &mut k1, &mut ws);
            tmp.copy_from(&rho);
            axpy(&mut tmp, c(0.5 * h, 0.0), &k1);
            g.rhs(&tmp, &mut k2, &mut ws);
            tmp.copy_from(&rho);
            axpy(&mut tmp, c(0.5 * h, 0.0), &k2);
            g.rhs(&tmp, &mut k3, &mut ws);
            tmp.copy_from(&rho);
            axpy(&mut tmp, hc, &k3);
            g.rhs(&tmp, &mut k4, &mut ws);
            k1 += &k4;
            k2 += &k3;
            axpy(&mut rho, c(h / 6.0, 0.0), &k1);
            axpy(&mut rho, c(h / 3.0, 0.0), &k2);
            let t = if s + 1 == steps { b } else { a + h * (s + 1) as f64 };
            times.push(t);
            values.push(observe(t, &rho));
        }
        let top = top_fock_population_mat(dims, &rho);
        if top >= TRUNCATION_LIMIT {
            return Err(Error::TruncationOverflow {
                population: top,
                time: b,
            });
        }
        if keep_samples {
            samples.push(rho.clone());
        }
    }
    Ok(RunOutput {
        times,
        values,
        samples,
        final_state: rho,
    })
}

/// `y += a x`
fn axpy(y: &mut CMatrix, a: C64, x: &CMatrix) {
    for (yi, xi) in y.as_mut_slice().iter_mut().zip(x.as_slice()) {
        *yi += a * xi;
    }
}

/// Lindblad integration with an observer evaluated at every step of the
/// accepted run. Stored samples follow `opts.sample_dt`.
pub fn evolve_density_observed<T>(
    schedule: &PulseSchedule,
    model: &ChainModel,
    noise: &NoiseModel,
    initial: &DensityOperator,
    opts: &DensityOptions,
    observe: impl Fn(f64, &CMatrix) -> T,
) -> Result<ObservedRun<T>> {
    if initial.dims() != model.dims {
        return Err(Error::DimensionMismatch(
            "initial state does not match the model dimensions".into(),
        ));
    }
    initial.validate(1e-9)?;
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidArgument("tol must be positive".into()));
    }
    let sample_dt = opts.sample_dt.unwrap_or_else(|| default_sample_dt(schedule));
    let checkpoints = sample_times(schedule, sample_dt)?;
    let (gens, omega_max) = build_generators(schedule, model, noise)?;
    let mut h = base_step(schedule, omega_max);
    let rho0 = initial.matrix().clone();
    let dims = model.dims;

    // Only the accepted (finer) run keeps observations and samples.
    let mut coarse_final = integrate(&gens, schedule, &checkpoints, &rho0, h, &|_, _| (), false, dims)?.final_state;
    let mut accepted = None;
    let mut last_diff = f64::INFINITY;
    for _ in 0..=opts.max_halvings {
        h /= 2.0;
        let fine = integrate(&gens, schedule, &checkpoints, &rho0, h, &observe, true, dims)?;
        last_diff = crate::linalg::max_abs(&(&fine.final_state - &coarse_final));
        if last_diff <= opts.tol {
            accepted = Some(fine);
            break;
        }
        coarse_final = fine.final_state;
    }
    let run = accepted.ok_or_else(|| {
        Error::NonConvergence(format!(
            "step halving did not reach tol {:.1e} (last difference {last_diff:.2e})",
            opts.tol
        ))
    })?;

    let lossy = !model.dims.leak_level() && noise.needs_leak_level();
    let n_samples = run.samples.len();
    let stride = (n_samples / opts.positivity_checks.max(1)).max(1);
    for (k, rho) in run.samples.iter().enumerate() {
        let t = checkpoints[k];
        let tr = rho.trace().re;
        let drifted = if lossy { tr > 1.0 + 1e-8 || tr < 0.0 } else { (tr - 1.0).abs() > 1e-8 };
        if drifted {
            return Err(Error::InvalidState(format!("trace drifted to {tr} at t = {t:e}")));
        }
        if k % stride == 0 || k + 1 == n_samples {
            let min = min_eigenvalue(rho);
            if min < -1e-7 {
                return Err(Error::PositivityViolation {
                    min_eigenvalue: min,
                    time: t,
                });
            }
        }
    }
    let samples = run
        .samples
        .into_iter()
        .map(|m| DensityOperator::from_raw(dims, m))
        .collect();
    Ok(ObservedRun {
        times: run.times,
        values: run.values,
        sample_times: checkpoints,
        samples,
        final_state: DensityOperator::from_raw(dims, run.final_state),
        step: h,
    })
}

pub fn evolve_density(
    schedule: &PulseSchedule,
    model: &ChainModel,
    noise: &NoiseModel,
    initial: &DensityOperator,
    opts: &DensityOptions,
) -> Result<Trajectory<DensityOperator>> {
    let run = evolve_density_observed(schedule, model, noise, initial, opts, |_, _| ())?;
    Ok(Trajectory {
        times: run.sample_times,
        states: run.samples,
        schedule: schedule.clone(),
    })
}

/// Overlap target. A target on the full space is compared including the
/// motional factor; a spin-only target is compared after tracing out motion.
#[derive(Debug, Clone, PartialEq)]
pub struct Target {
    full: bool,
    n_fock: usize,
    /// (spin index or full index, conj amplitude)
    support: Vec<(usize, C64)>,
    state: PureState,
}

impl Target {
    pub fn new(system: SystemDims, state: PureState) -> Result<Self> {
        let full = if state.dims() == system {
            true
        } else if state.dims() == system.spin_part() {
            false
        } else {
            return Err(Error::DimensionMismatch(
                "target matches neither the system nor its spin factor".into(),
            ));
        };
        let support = state
            .amplitudes()
            .iter()
            .enumerate()
            .filter(|(_, a)| a.norm_sqr() > 0.0)
            .map(|(k, a)| (k, a.conj()))
            .collect();
        Ok(Target {
            full,
            n_fock: system.n_fock(),
            support,
            state,
        })
    }

    pub fn state(&self) -> &PureState {
        &self.state
    }

    pub fn is_motion_traced(&self) -> bool {
        !self.full
    }

    pub fn fidelity_vec(&self, psi: &CVector) -> f64 {
        if self.full {
            let mut acc = ZERO;
            for (k, a) in &self.support {
                acc += a * psi[*k];
            }
            return acc.norm_sqr();
        }
        let nf = self.n_fock;
        (0..nf)
            .map(|n| {
                let mut acc = ZERO;
                for (s, a) in &self.support {
                    acc += a * psi[s * nf + n];
                }
                acc.norm_sqr()
            })
            .sum()
    }

    pub fn fidelity_mat(&self, rho: &CMatrix) -> f64 {
        let (nf, stride) = if self.full { (1, 1) } else { (self.n_fock, self.n_fock) };
        let mut total = 0.0;
        for n in 0..nf {
            let mut acc = ZERO;
            for (i, a) in &self.support {
                for (j, b) in &self.support {
                    acc += a * rho[(i * stride + n, j * stride + n)] * b.conj();
                }
            }
            total += acc.re;
        }
        total
    }
}

/// Anything from which spin populations and target fidelities can be read.
pub trait SpinResolved {
    fn dims(&self) -> SystemDims;
    /// Population of each spin basis state, motion traced out.
    fn spin_populations(&self) -> Vec<f64>;
    fn fidelity(&self, target: &Target) -> f64;
}

impl SpinResolved for PureState {
    fn dims(&self) -> SystemDims {
        PureState::dims(self)
    }

    fn spin_populations(&self) -> Vec<f64> {
        let nf = self.dims().n_fock();
        let mut out = vec![0.0; self.dims().spin_dim()];
        for (k, a) in self.amplitudes().iter().enumerate() {
            out[k / nf] += a.norm_sqr();
        }
        out
    }

    fn fidelity(&self, target: &Target) -> f64 {
        target.fidelity_vec(self.amplitudes())
    }
}

impl SpinResolved for DensityOperator {
    fn dims(&self) -> SystemDims {
        DensityOperator::dims(self)
    }

    fn spin_populations(&self) -> Vec<f64> {
        let nf = self.dims().n_fock();
        let mut out = vec![0.0; self.dims().spin_dim()];
        for (k, p) in self.diagonal().into_iter().enumerate() {
            out[k / nf] += p;
        }
        out
    }

    fn fidelity(&self, target: &Target) -> f64 {
        target.fidelity_mat(self.matrix())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationRecord {
    pub times: Vec<f64>,
    /// `p_up_counts[t][k]`: probability that exactly `k` ions are in `|↑⟩`
    /// (with no ion in the leak level).
    pub p_up_counts: Vec<Vec<f64>>,
    /// Population with at least one ion in the leak level.
    pub leakage: Vec<f64>,
    pub target_label: String,
    pub target_fidelity: Vec<f64>,
    pub aux_populations: Vec<(String, Vec<f64>)>,
}

/// Up-count distribution and leakage from spin populations.
pub fn up_count_distribution(dims: SystemDims, spin_pops: &[f64]) -> (Vec<f64>, f64) {
    let mut p = vec![0.0; dims.n_ions() + 1];
    let mut leak = 0.0;
    for (s, v) in spin_pops.iter().enumerate() {
        if dims.has_leak(s) {
            leak += v;
        } else {
            p[dims.up_count(s)] += v;
        }
    }
    (p, leak)
}

/// The first target fills `target_fidelity`, the rest go to
/// `aux_populations`.
pub fn extract_populations<S: SpinResolved>(
    traj: &Trajectory<S>,
    targets: &[(String, Target)],
) -> Result<PopulationRecord> {
    let (first, rest) = targets
        .split_first()
        .ok_or_else(|| Error::InvalidArgument("at least one target is required".into()))?;
    let mut rec = PopulationRecord {
        times: traj.times.clone(),
        p_up_counts: Vec::with_capacity(traj.states.len()),
        leakage: Vec::with_capacity(traj.states.len()),
        target_label: first.0.clone(),
        target_fidelity: Vec::with_capacity(traj.states.len()),
        aux_populations: rest.iter().map(|(l, _)| (l.clone(), Vec::new())).collect(),
    };
    for state in &traj.states {
        let (p, leak) = up_count_distribution(state.dims(), &state.spin_populations());
        rec.p_up_counts.push(p);
        rec.leakage.push(leak);
        rec.target_fidelity.push(state.fidelity(&first.1));
        for (slot, (_, t)) in rec.aux_populations.iter_mut().zip(rest) {
            slot.1.push(state.fidelity(t));
        }
    }
    Ok(rec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{named_spin_state, named_state, thermal_product_state, NamedState};
    use crate::model::{IonGeometry, PulseSegment};
    use proptest::prelude::*;

    fn two_ion(nf: usize, leak: bool) -> ChainModel {
        ChainModel::canonical(SystemDims::new(2, nf, leak).unwrap()).unwrap()
    }

    fn triplet_target(model: &ChainModel) -> Target {
        Target::new(model.dims, named_state(model.dims, NamedState::Triplet, 0).unwrap()).unwrap()
    }

    #[test]
    fn sample_grid_includes_boundaries() {
        let s = PulseSchedule::new(vec![
            PulseSegment::new(1.0, 0.0, 1.0, 0.0).unwrap(),
            PulseSegment::new(0.55, 0.0, 1.0, 0.0).unwrap(),
        ])
        .unwrap();
        let t = sample_times(&s, 0.5).unwrap();
        assert_eq!(t, vec![0.0, 0.5, 1.0, 1.5, 1.55]);
        assert!(sample_times(&s, 0.0).is_err());
    }

    #[test]
    fn microwave_only_matches_product_rotation() {
        let m = two_ion(3, false);
        let omega_d = 0.8;
        let s = PulseSchedule::single(PulseSegment::new(4.0, 0.0, omega_d, 0.0).unwrap()).unwrap();
        let psi0 = named_state(m.dims, NamedState::UpUp, 0).unwrap();
        let traj = evolve_pure(&s, &m, &psi0, 0.05).unwrap();
        let target = triplet_target(&m);
        for (t, psi) in traj.times.iter().zip(&traj.states) {
            // each spin rotates independently: cos|↑⟩ − i sin|↓⟩
            let oracle = 0.5 * (2.0 * omega_d * t).sin().powi(2);
            assert!((psi.fidelity(&target) - oracle).abs() < 1e-12);
            assert!((psi.norm() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_like_schedule_keeps_state() {
        let m = two_ion(4, false);
        let s = PulseSchedule::single(PulseSegment::new(1e-300, 1.0, 1.0, 1.0).unwrap()).unwrap();
        let psi0 = named_state(m.dims, NamedState::UpUp, 0).unwrap();
        let evo = PureEvolution::new(&s, &m, &psi0).unwrap();
        assert!((evo.final_state().amplitudes() - psi0.amplitudes()).norm() < 1e-13);
    }

    #[test]
    fn experimental_single_pulse_peak_near_116_us() {
        use crate::units::{khz, us};
        let m = two_ion(10, false);
        let od = khz(1.52);
        let t_pi = std::f64::consts::PI / (2.0 * 2f64.sqrt() * od);
        let s = PulseSchedule::single(PulseSegment::new(1.3 * t_pi, khz(17.6), od, khz(27.1)).unwrap()).unwrap();
        let psi0 = named_state(m.dims, NamedState::UpUp, 0).unwrap();
        let evo = PureEvolution::new(&s, &m, &psi0).unwrap();
        let (t_peak, f) = evo.peak_fidelity(&triplet_target(&m), 0.5 * t_pi, 1.3 * t_pi, 200);
        assert!((t_peak - us(116.0)).abs() < us(116.0) * 0.05, "{t_peak}");
        assert!(f > 0.98);
    }

    #[test]
    fn composition_property() {
        let m = two_ion(8, false);
        let a = PulseSegment::new(1.3, 1.0, 0.2, 1.5).unwrap();
        let b = PulseSegment::new(0.7, -1.0, 0.2, -1.5).unwrap();
        let psi0 = named_state(m.dims, NamedState::UpUp, 0).unwrap();
        let both = PureEvolution::new(&PulseSchedule::new(vec![a, b]).unwrap(), &m, &psi0).unwrap();
        let first = PureEvolution::new(&PulseSchedule::single(a).unwrap(), &m, &psi0).unwrap();
        let second = PureEvolution::new(&PulseSchedule::single(b).unwrap(), &m, &first.final_state()).unwrap();
        assert!((both.final_state().amplitudes() - second.final_state().amplitudes()).norm() < 1e-12);
    }

    #[test]
    fn subspace_closure() {
        let m = two_ion(10, false);
        let s = PulseSchedule::single(PulseSegment::new(8.0, 1.0, 0.09, 1.527).unwrap()).unwrap();
        let psi0 = named_state(m.dims, NamedState::UpUp, 0).unwrap();
        let traj = evolve_pure(&s, &m, &psi0, 0.1).unwrap();
        // Symmetric sector reachable from |↑↑,0⟩: even n with spins in
        // {↑↑, T, ↓↓}, odd n with spin S.
        let mut allowed = Vec::new();
        for n in 0..m.dims.n_fock() {
            let names: &[NamedState] = if n % 2 == 0 {
                &[NamedState::UpUp, NamedState::Triplet, NamedState::DownDown]
            } else {
                &[NamedState::Singlet]
            };
            for name in names {
                allowed.push(named_state(m.dims, *name, n).unwrap());
            }
        }
        for psi in &traj.states {
            let inside: f64 = allowed.iter().map(|a| a.inner(psi).unwrap().norm_sqr()).sum();
            assert!(1.0 - inside < 1e-6);
        }
    }

    #[test]
    fn truncation_overflow_detected() {
        let m = two_ion(3, false);
        let s = PulseSchedule::single(PulseSegment::new(3.0, 1.0, 0.5, 0.0).unwrap()).unwrap();
        let psi0 = named_state(m.dims, NamedState::UpUp, 0).unwrap();
        let err = evolve_pure(&s, &m, &psi0, 0.1).unwrap_err();
        assert!(matches!(err, Error::TruncationOverflow { .. }));
    }

    #[test]
    fn noiseless_lindblad_matches_unitary() {
        let m = two_ion(8, false);
        let s = PulseSchedule::new(vec![
            PulseSegment::new(2.0, 1.0, 0.15, 1.5).unwrap(),
            PulseSegment::new(1.0, -1.0, 0.15, -1.5).unwrap(),
        ])
        .unwrap();
        let psi0 = named_state(m.dims, NamedState::UpUp, 0).unwrap();
        let opts = DensityOptions {
            tol: 1e-8,
            ..DensityOptions::default()
        };
        let traj = evolve_density(&s, &m, &NoiseModel::none(), &psi0.to_density(), &opts).unwrap();
        let evo = PureEvolution::new(&s, &m, &psi0).unwrap();
        for (t, rho) in traj.times.iter().zip(&traj.states) {
            let exact = evo.state_at(*t).to_density();
            assert!(crate::linalg::max_abs(&(rho.matrix() - exact.matrix())) < 1e-6);
            assert!((rho.trace() - 1.0).abs() < 1e-8);
            assert!(crate::linalg::hermiticity_defect(rho.matrix()) < 1e-9);
        }
    }

    #[test]
    fn pure_decay_of_up_state() {
        // |↑↑⟩ with only ↑→↓ decay and no drive: P(↑↑) = e^{−2γt}
        let m = two_ion(1, false);
        let gamma = 0.3;
        let noise = NoiseModel {
            gamma_du: gamma,
            ..NoiseModel::default()
        };
        let s = PulseSchedule::single(PulseSegment::new(2.0, 0.0, 0.0, 0.0).unwrap()).unwrap();
        let psi0 = named_state(m.dims, NamedState::UpUp, 0).unwrap();
        let target = Target::new(m.dims, psi0.clone()).unwrap();
        let run = evolve_density_observed(
            &s,
            &m,
            &noise,
            &psi0.to_density(),
            &DensityOptions::default(),
            |_, rho| target.fidelity_mat(rho),
        )
        .unwrap();
        for (t, f) in run.times.iter().zip(&run.values) {
            assert!((f - (-2.0 * gamma * t).exp()).abs() < 1e-7);
        }
    }

    #[test]
    fn extract_populations_basics() {
        let m = two_ion(4, false);
        let s = PulseSchedule::single(PulseSegment::new(1.0, 1.0, 0.2, 1.5).unwrap()).unwrap();
        let psi0 = named_state(m.dims, NamedState::UpUp, 0).unwrap();
        let traj = evolve_pure(&s, &m, &psi0, 0.25).unwrap();
        let t_spin = named_spin_state(m.dims, NamedState::Triplet).unwrap();
        let s_spin = named_spin_state(m.dims, NamedState::Singlet).unwrap();
        let targets = vec![
            ("T".to_string(), Target::new(m.dims, t_spin).unwrap()),
            ("S".to_string(), Target::new(m.dims, s_spin).unwrap()),
        ];
        let rec = extract_populations(&traj, &targets).unwrap();
        assert!((rec.p_up_counts[0][2] - 1.0).abs() < 1e-12);
        for k in 0..rec.times.len() {
            let total: f64 = rec.p_up_counts[k].iter().sum::<f64>() + rec.leakage[k];
            assert!((total - 1.0).abs() < 1e-8);
            let diff = rec.p_up_counts[k][1] - rec.target_fidelity[k];
            assert!((diff - rec.aux_populations[0].1[k]).abs() < 1e-12);
        }

        let ideal = Trajectory {
            times: vec![0.0],
            states: vec![named_state(m.dims, NamedState::Triplet, 0).unwrap()],
            schedule: s.clone(),
        };
        let rec = extract_populations(&ideal, &targets).unwrap();
        assert!((rec.p_up_counts[0][1] - 1.0).abs() < 1e-12);
        assert!((rec.target_fidelity[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn thermal_run_with_leak_level() {
        let m = ChainModel::new(SystemDims::new(2, 6, true).unwrap(), IonGeometry::two_ion_stretch()).unwrap();
        let spin = named_spin_state(m.dims, NamedState::UpUp).unwrap();
        let rho0 = thermal_product_state(m.dims, &spin, 0.01).unwrap();
        let s = PulseSchedule::single(PulseSegment::new(2.0, 1.0, 0.1, 1.5).unwrap()).unwrap();
        let noise = NoiseModel {
            gamma_heat: 0.001,
            ..NoiseModel::uniform_decay(0.01)
        };
        let traj = evolve_density(&s, &m, &noise, &rho0, &DensityOptions::default()).unwrap();
        let last = traj.states.last().unwrap();
        last.validate(1e-7).unwrap();
        let (_, leak) = up_count_distribution(m.dims, &last.spin_populations());
        assert!(leak > 0.0);
    }

    #[test]
    fn leak_as_loss_matches_explicit_level() {
        let s = PulseSchedule::single(PulseSegment::new(2.0, 1.0, 0.1, 1.5).unwrap()).unwrap();
        let noise = NoiseModel {
            gamma_heat: 0.002,
            ..NoiseModel::uniform_decay(0.02)
        };
        let fidelity = |leak: bool| {
            let m = ChainModel::new(SystemDims::new(2, 6, leak).unwrap(), IonGeometry::two_ion_stretch()).unwrap();
            let spin = named_spin_state(m.dims, NamedState::UpUp).unwrap();
            let rho0 = thermal_product_state(m.dims, &spin, 0.01).unwrap();
            let target = Target::new(m.dims, named_spin_state(m.dims, NamedState::Triplet).unwrap()).unwrap();
            let run = evolve_density_observed(&s, &m, &noise, &rho0, &DensityOptions::default(), |_, r| {
                (target.fidelity_mat(r), r.trace().re)
            })
            .unwrap();
            *run.values.last().unwrap()
        };
        let (f_leak, tr_leak) = fidelity(true);
        let (f_loss, tr_loss) = fidelity(false);
        assert!((f_leak - f_loss).abs() < 1e-9, "{f_leak} vs {f_loss}");
        assert!((tr_leak - 1.0).abs() < 1e-9);
        assert!(tr_loss < 1.0 - 1e-3);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn unitary_norm_preserved(
            omega_s in -2.0f64..2.0,
            omega_d in 0.0f64..1.0,
            delta in -3.0f64..3.0,
            dur in 0.1f64..3.0,
        ) {
            let m = two_ion(12, false);
            let s = PulseSchedule::single(PulseSegment::new(dur, omega_s, omega_d, delta).unwrap()).unwrap();
            let psi0 = named_state(m.dims, NamedState::UpUp, 0).unwrap();
            let evo = PureEvolution::new(&s, &m, &psi0).unwrap();
            for k in 0..=10 {
                let psi = evo.state_at(dur * k as f64 / 10.0);
                prop_assert!((psi.norm() - 1.0).abs() < 1e-9);
            }
        }
    }
}
