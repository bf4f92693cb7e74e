//! Fixed-step fourth-order integration of the Schrödinger and Lindblad
//! equations on the small labeled bases built by [`crate::quantum`].
//!
//! Time-dependent coefficients are sampled once per run on the half-step grid
//! (`t_k`, `t_k + h/2`), so each RK4 step builds the Hamiltonian twice.
//!
//! The diagonal of every model Hamiltonian has the form `D₀ + D₁ δ(t)` with
//! `δ = Δ₁ + Δ₂(t)` the two-photon detuning and `D₀` constant (blockade
//! shifts, intermediate-level detuning). The phase `θ(t) = D₁ ∫₀ᵗ δ` is known
//! exactly, so the stepper integrates `φ = e^{iθ} ψ`, whose generator keeps
//! the couplings and `D₀` only, and maps back on output. Chirps that sweep δ
//! far from resonance therefore cost no accuracy.
//! Wavefunctions are never renormalized; norm (or trace) drift is measured and
//! compared against [`IntegratorOptions::norm_tolerance`].

mod model;
mod noise;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

pub use model::{CollapseOp, DecayModel, ModelSpec, RateProfile};
pub use noise::{run_monte_carlo, sample_trial, BlockadeDistribution, MonteCarloResult, NoiseSpec, TrialDraw};

use crate::error::{Error, NumericFailure, Result};
use crate::linalg::{matmul_into, matvec_into, norm_sqr, CMatrix, I, ZERO};
use crate::photon::ExcitationDistribution;
use crate::pulse::{adiabaticity_ratio, chirp_integral, DriveSample, PulseSchedule, TimeGrid};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorOptions {
    /// Requested step in µs; the actual step divides the duration evenly.
    pub step: f64,
    /// Largest tolerated `|‖ψ‖² − 1|` (or `|tr ρ − 1|`) over the run.
    pub norm_tolerance: f64,
    /// Integration steps per recorded sample. The final time is always recorded.
    pub dense_output_stride: usize,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        Self {
            step: 5e-4,
            norm_tolerance: 1e-6,
            dense_output_stride: 10,
        }
    }
}

impl IntegratorOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0) {
            return Err(Error::invalid("integrator step must be > 0"));
        }
        if !(self.norm_tolerance > 0.0) {
            return Err(Error::invalid("norm tolerance must be > 0"));
        }
        if self.dense_output_stride == 0 {
            return Err(Error::invalid("dense output stride must be ≥ 1"));
        }
        Ok(())
    }

    /// Record only the initial and final states.
    pub fn endpoints_only(mut self) -> Self {
        self.dense_output_stride = usize::MAX;
        self
    }
}

/// Smallest eigenvalue tolerated for a density matrix.
pub const POSITIVITY_TOLERANCE: f64 = -1e-8;

/// Time evolution record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub basis: Vec<String>,
    pub times: Vec<f64>,
    /// `populations[label][sample]`
    pub populations: Vec<Vec<f64>>,
    /// `amplitudes[sample][label]`, pure-state runs only.
    pub amplitudes: Option<Vec<Vec<C64>>>,
    /// Adiabaticity ratio of the effective two-level problem at each sample.
    pub adiabaticity: Vec<f64>,
    pub final_distribution: ExcitationDistribution,
    /// Largest `|‖ψ‖² − 1|` or `|tr ρ − 1|` seen at any step.
    pub max_norm_drift: f64,
    /// Smallest density-matrix eigenvalue over the recorded samples.
    pub min_eigenvalue: Option<f64>,
    pub steps: usize,
}

impl Trajectory {
    pub fn population(&self, label: &str) -> Option<&[f64]> {
        let k = self.basis.iter().position(|b| b == label)?;
        Some(&self.populations[k])
    }

    pub fn final_population(&self, label: &str) -> Option<f64> {
        self.population(label).and_then(|p| p.last().copied())
    }
}

/// Drive coefficients and frame phases on the half-step grid: index `2k` is
/// `t_k`, `2k+1` is `t_k + h/2`.
struct SampledDrive {
    samples: Vec<DriveSample>,
    /// `e^{iθ_a}` per sample and basis state.
    phases: Vec<Vec<C64>>,
    /// Excitation weight `D₁` of each basis state.
    weights: Vec<f64>,
}

impl SampledDrive {
    fn new(model: &ModelSpec, schedule: &PulseSchedule, grid: &TimeGrid) -> Self {
        let half = 0.5 * grid.step();
        let weights = detuning_weights(model, schedule);
        let mut samples = Vec::with_capacity(2 * grid.steps() + 1);
        let mut phases = Vec::with_capacity(2 * grid.steps() + 1);
        for j in 0..=2 * grid.steps() {
            let t = j as f64 * half;
            samples.push(schedule.sample(t));
            let area = schedule.delta1 * t + chirp_integral(&schedule.chirp, t);
            phases.push(weights.iter().map(|w| C64::from_polar(1.0, w * area)).collect());
        }
        Self {
            samples,
            phases,
            weights,
        }
    }

    /// Interaction-picture generator at sample `j`: off-diagonal entries
    /// `H_ab e^{i(θ_a − θ_b)}`, diagonal `H_aa − D₁ δ`.
    fn fill_frame(&self, model: &ModelSpec, j: usize, out: &mut CMatrix) {
        let s = &self.samples[j];
        model.fill_hamiltonian(s, out);
        rotate(out, &self.phases[j]);
        let delta = s.two_photon_detuning();
        for (a, w) in self.weights.iter().enumerate() {
            out[(a, a)] -= w * delta;
        }
    }
}

/// `M_ab ← M_ab e^{i(θ_a − θ_b)}`.
fn rotate(m: &mut CMatrix, phases: &[C64]) {
    let dim = m.dim();
    for a in 0..dim {
        for b in 0..dim {
            if a != b {
                m[(a, b)] *= phases[a] * phases[b].conj();
            }
        }
    }
}

/// `D₁` with `diag H = D₀ + D₁ δ`, read off two probe samples. The diagonal
/// never depends on the drive amplitudes.
fn detuning_weights(model: &ModelSpec, schedule: &PulseSchedule) -> Vec<f64> {
    let dim = model.dim();
    let mut m = CMatrix::zeros(dim);
    let mut probe = |delta2: f64| -> Vec<f64> {
        let s = DriveSample {
            omega1: 0.0,
            omega2: 0.0,
            delta1: schedule.delta1,
            delta2,
        };
        model.fill_hamiltonian(&s, &mut m);
        (0..dim).map(|a| m[(a, a)].re).collect()
    };
    let d0 = probe(0.0);
    probe(1.0).iter().zip(&d0).map(|(x, y)| x - y).collect()
}

fn output_indices(steps: usize, stride: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..=steps).step_by(stride.min(steps.max(1))).collect();
    if *idx.last().unwrap() != steps {
        idx.push(steps);
    }
    idx
}

fn effective_adiabaticity(model: &ModelSpec, schedule: &PulseSchedule, grid: &TimeGrid, at: &[usize]) -> Vec<f64> {
    match schedule.effective_trace(model.collective_n(), grid) {
        Ok((omega, delta)) => {
            let r = adiabaticity_ratio(&omega, &delta, grid.step());
            at.iter().map(|&k| r[k]).collect()
        }
        Err(_) => Vec::new(),
    }
}

fn distribution_from_populations(model: &ModelSpec, pops: &[f64]) -> ExcitationDistribution {
    let mut probs = vec![0.0; 3];
    for (p, &n) in pops.iter().zip(model.excitation_numbers().iter()) {
        probs[n] += p;
    }
    while probs.len() > 1 && *probs.last().unwrap() == 0.0 && model.max_excitation() < probs.len() - 1 {
        probs.pop();
    }
    ExcitationDistribution::normalized(probs)
}

/// Classic RK4 scratch space for a flat complex state.
struct Rk4 {
    k1: Vec<C64>,
    k2: Vec<C64>,
    k3: Vec<C64>,
    k4: Vec<C64>,
    tmp: Vec<C64>,
}

impl Rk4 {
    fn new(len: usize) -> Self {
        Self {
            k1: vec![ZERO; len],
            k2: vec![ZERO; len],
            k3: vec![ZERO; len],
            k4: vec![ZERO; len],
            tmp: vec![ZERO; len],
        }
    }

    /// One step; `f(stage, y, dy)` with stage 0 = start, 1 = midpoint, 2 = end.
    fn step(&mut self, y: &mut [C64], h: f64, mut f: impl FnMut(usize, &[C64], &mut [C64])) {
        f(0, y, &mut self.k1);
        for (t, (y, k)) in self.tmp.iter_mut().zip(y.iter().zip(&self.k1)) {
            *t = y + k * (0.5 * h);
        }
        f(1, &self.tmp, &mut self.k2);
        for (t, (y, k)) in self.tmp.iter_mut().zip(y.iter().zip(&self.k2)) {
            *t = y + k * (0.5 * h);
        }
        f(1, &self.tmp, &mut self.k3);
        for (t, (y, k)) in self.tmp.iter_mut().zip(y.iter().zip(&self.k3)) {
            *t = y + k * h;
        }
        f(2, &self.tmp, &mut self.k4);
        let w = h / 6.0;
        for (i, yi) in y.iter_mut().enumerate() {
            *yi += (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]) * w;
        }
    }
}

fn check_schedule(model: &ModelSpec, schedule: &PulseSchedule, opts: &IntegratorOptions) -> Result<TimeGrid> {
    model.validate()?;
    schedule.validate()?;
    opts.validate()?;
    if model.requires_elimination() && schedule.delta1 == 0.0 {
        return Err(Error::EliminationUndefined);
    }
    TimeGrid::new(schedule.duration, opts.step)
}

/// Solves `i ψ̇ = H(t) ψ` over `[0, duration]`.
pub fn evolve_schrodinger(
    model: &ModelSpec,
    schedule: &PulseSchedule,
    psi0: &[C64],
    opts: &IntegratorOptions,
) -> Result<Trajectory> {
    let grid = check_schedule(model, schedule, opts)?;
    let dim = model.dim();
    if psi0.len() != dim {
        return Err(Error::invalid(format!(
            "initial state has {} amplitudes, basis has {dim}",
            psi0.len()
        )));
    }
    let norm0: f64 = psi0.iter().map(|z| z.norm_sqr()).sum();
    if (norm0 - 1.0).abs() > 1e-12 {
        return Err(Error::invalid(format!("initial state not normalized (‖ψ‖² = {norm0})")));
    }

    let drive = SampledDrive::new(model, schedule, &grid);
    let outputs = output_indices(grid.steps(), opts.dense_output_stride);
    let mut hs = [CMatrix::zeros(dim), CMatrix::zeros(dim), CMatrix::zeros(dim)];
    let mut rk = Rk4::new(dim);
    let mut phi = psi0.to_vec();
    let h = grid.step();

    let mut times = Vec::with_capacity(outputs.len());
    let mut pops = vec![Vec::with_capacity(outputs.len()); dim];
    let mut amps = Vec::with_capacity(outputs.len());
    let mut record = |k: usize, phi: &[C64], times: &mut Vec<f64>| {
        times.push(grid.time(k));
        for (j, z) in phi.iter().enumerate() {
            pops[j].push(z.norm_sqr());
        }
        let ph = &drive.phases[2 * k];
        amps.push(phi.iter().zip(ph).map(|(z, p)| z * p.conj()).collect());
    };

    let mut next_out = 0;
    let mut max_drift: f64 = 0.0;
    drive.fill_frame(model, 0, &mut hs[2]);
    for k in 0..=grid.steps() {
        if outputs[next_out] == k {
            record(k, &phi, &mut times);
            next_out += 1;
        }
        if k == grid.steps() {
            break;
        }
        hs.swap(0, 2);
        drive.fill_frame(model, 2 * k + 1, &mut hs[1]);
        drive.fill_frame(model, 2 * k + 2, &mut hs[2]);
        rk.step(&mut phi, h, |stage, y, dy| {
            matvec_into(hs[stage].as_slice(), y, dy, dim);
            dy.iter_mut().for_each(|z| *z *= -I);
        });
        let drift = (norm_sqr(&phi) - 1.0).abs();
        let t = grid.time(k + 1);
        if !drift.is_finite() {
            return Err(NumericFailure::NonFinite { t }.into());
        }
        max_drift = max_drift.max(drift);
        if drift > opts.norm_tolerance {
            return Err(NumericFailure::NormDrift {
                drift,
                tolerance: opts.norm_tolerance,
                t,
            }
            .into());
        }
    }

    let final_pops: Vec<f64> = phi.iter().map(|z| z.norm_sqr()).collect();
    Ok(Trajectory {
        basis: model.basis(),
        times,
        populations: pops,
        amplitudes: Some(amps),
        adiabaticity: effective_adiabaticity(model, schedule, &grid, &outputs),
        final_distribution: distribution_from_populations(model, &final_pops),
        max_norm_drift: max_drift,
        min_eigenvalue: None,
        steps: grid.steps(),
    })
}

/// Precomputed pieces of one dissipator term.
struct Dissipator {
    jump: CMatrix,
    /// `L†L`
    decay: CMatrix,
    rate: RateProfile,
}

/// Lindblad generator pieces at one RK4 stage time.
struct Stage {
    k: CMatrix,
    rates: Vec<f64>,
    jumps: Vec<CMatrix>,
    jumps_adj: Vec<CMatrix>,
}

impl Stage {
    fn new(dim: usize, dissipators: &[Dissipator]) -> Self {
        Self {
            k: CMatrix::zeros(dim),
            rates: vec![0.0; dissipators.len()],
            jumps: vec![CMatrix::zeros(dim); dissipators.len()],
            jumps_adj: vec![CMatrix::zeros(dim); dissipators.len()],
        }
    }
}

/// Integrates `ρ̇ = −i[H, ρ] + Σ_k γ_k(t) (L_k ρ L_k† − ½{L_k†L_k, ρ})`.
pub fn evolve_lindblad(
    model: &ModelSpec,
    schedule: &PulseSchedule,
    rho0: &CMatrix,
    collapse_ops: &[CollapseOp],
    opts: &IntegratorOptions,
) -> Result<Trajectory> {
    let grid = check_schedule(model, schedule, opts)?;
    let dim = model.dim();
    if rho0.dim() != dim {
        return Err(Error::invalid(format!(
            "initial density matrix is {}×{}, basis has {dim}",
            rho0.dim(),
            rho0.dim()
        )));
    }
    if rho0.hermiticity_defect() > 1e-12 {
        return Err(Error::invalid("initial density matrix is not Hermitian"));
    }
    if (rho0.trace().re - 1.0).abs() > 1e-12 {
        return Err(Error::invalid("initial density matrix does not have unit trace"));
    }
    if rho0.min_eigenvalue() < POSITIVITY_TOLERANCE {
        return Err(Error::invalid("initial density matrix is not positive semidefinite"));
    }
    if let Some(bad) = collapse_ops.iter().find(|c| c.jump.dim() != dim) {
        return Err(Error::invalid(format!("collapse operator `{}` has wrong dimension", bad.label)));
    }

    let dissipators: Vec<Dissipator> = collapse_ops
        .iter()
        .map(|c| Dissipator {
            decay: c.jump.adjoint().matmul(&c.jump),
            jump: c.jump.clone(),
            rate: c.rate,
        })
        .collect();

    let drive = SampledDrive::new(model, schedule, &grid);
    let outputs = output_indices(grid.steps(), opts.dense_output_stride);
    let h = grid.step();
    let n2 = dim * dim;

    // Per stage, in the interaction frame: K = H − (i/2) Σ γ L†L, the rates
    // and the rotated jump operators.
    let mut stages: [Stage; 3] = std::array::from_fn(|_| Stage::new(dim, &dissipators));
    let build = |j: usize, st: &mut Stage| {
        drive.fill_frame(model, j, &mut st.k);
        let s = &drive.samples[j];
        for (i, d) in dissipators.iter().enumerate() {
            let rate = d.rate.evaluate(s);
            st.rates[i] = rate;
            if rate == 0.0 {
                continue;
            }
            let w = C64::new(0.0, -0.5 * rate);
            st.jumps[i].as_mut_slice().copy_from_slice(d.jump.as_slice());
            rotate(&mut st.jumps[i], &drive.phases[j]);
            st.jumps_adj[i] = st.jumps[i].adjoint();
            let mut decay = d.decay.clone();
            rotate(&mut decay, &drive.phases[j]);
            for (kij, dij) in st.k.as_mut_slice().iter_mut().zip(decay.as_slice()) {
                *kij += w * dij;
            }
        }
    };

    let mut rho = rho0.as_slice().to_vec();
    let mut rk = Rk4::new(n2);
    let mut work_a = vec![ZERO; n2];
    let mut work_b = vec![ZERO; n2];

    let mut times = Vec::with_capacity(outputs.len());
    let mut pops = vec![Vec::with_capacity(outputs.len()); dim];
    let mut min_eig = f64::INFINITY;
    let mut next_out = 0;
    let mut max_drift: f64 = 0.0;

    build(0, &mut stages[2]);
    for k in 0..=grid.steps() {
        if outputs[next_out] == k {
            let t = grid.time(k);
            times.push(t);
            for (j, p) in pops.iter_mut().enumerate() {
                p.push(rho[j * dim + j].re);
            }
            // same spectrum as the lab-frame matrix
            let mut m = CMatrix::zeros(dim);
            m.as_mut_slice().copy_from_slice(&rho);
            let e = m.min_eigenvalue();
            min_eig = min_eig.min(e);
            if e < POSITIVITY_TOLERANCE {
                return Err(NumericFailure::Positivity { min_eigenvalue: e, t }.into());
            }
            next_out += 1;
        }
        if k == grid.steps() {
            break;
        }
        stages.swap(0, 2);
        {
            let [_, mid, end] = &mut stages;
            build(2 * k + 1, mid);
            build(2 * k + 2, end);
        }

        rk.step(&mut rho, h, |stage, y, dy| {
            let st = &stages[stage];
            let kmat = st.k.as_slice();
            // −i (K ρ − ρ K†)
            for i in 0..dim {
                for j in 0..dim {
                    let mut acc = ZERO;
                    for l in 0..dim {
                        acc += kmat[i * dim + l] * y[l * dim + j] - y[i * dim + l] * kmat[j * dim + l].conj();
                    }
                    dy[i * dim + j] = -I * acc;
                }
            }
            for (i, &rate) in st.rates.iter().enumerate() {
                if rate == 0.0 {
                    continue;
                }
                matmul_into(st.jumps[i].as_slice(), y, &mut work_a, dim);
                matmul_into(&work_a, st.jumps_adj[i].as_slice(), &mut work_b, dim);
                for (o, v) in dy.iter_mut().zip(&work_b) {
                    *o += v * rate;
                }
            }
        });
        let t = grid.time(k + 1);
        let tr: f64 = (0..dim).map(|j| rho[j * dim + j].re).sum();
        let drift = (tr - 1.0).abs();
        if !drift.is_finite() {
            return Err(NumericFailure::NonFinite { t }.into());
        }
        max_drift = max_drift.max(drift);
        if drift > opts.norm_tolerance {
            return Err(NumericFailure::TraceDrift {
                drift,
                tolerance: opts.norm_tolerance,
                t,
            }
            .into());
        }
    }

    let final_pops: Vec<f64> = (0..dim).map(|j| rho[j * dim + j].re).collect();
    Ok(Trajectory {
        basis: model.basis(),
        times,
        populations: pops,
        amplitudes: None,
        adiabaticity: effective_adiabaticity(model, schedule, &grid, &outputs),
        final_distribution: distribution_from_populations(model, &final_pops),
        max_norm_drift: max_drift,
        min_eigenvalue: Some(min_eig),
        steps: grid.steps(),
    })
}

/// Runs the model from its ground state, choosing the density-matrix path
/// when the model carries dissipation.
pub fn evolve_from_ground(model: &ModelSpec, schedule: &PulseSchedule, opts: &IntegratorOptions) -> Result<Trajectory> {
    let ops = model.collapse_ops();
    let dim = model.dim();
    if ops.is_empty() {
        let mut psi = vec![ZERO; dim];
        psi[0] = C64::new(1.0, 0.0);
        evolve_schrodinger(model, schedule, &psi, opts)
    } else {
        evolve_lindblad(model, schedule, &CMatrix::transition(dim, 0, 0), &ops, opts)
    }
}

/// Landau–Zener transfer probability `1 − exp(−π Ω_N² / (2|α|))` for a
/// linear sweep of δ at rate `alpha` through resonance.
pub fn landau_zener_probability(omega_n: f64, alpha: f64) -> Result<f64> {
    if alpha == 0.0 {
        return Err(Error::invalid("Landau–Zener formula needs a non-zero sweep rate"));
    }
    Ok(1.0 - (-std::f64::consts::PI * omega_n * omega_n / (2.0 * alpha.abs())).exp())
}
