//! Bases, effective parameters and rotating-frame Hamiltonians for the three
//! model tiers: the blockaded superatom (Dicke ladder truncated at two
//! excitations), the single-atom three-level ladder, and the brute-force
//! N-atom ensemble used as an oracle.
//!
//! Sign convention: every excited level carries `−Δ` on the diagonal, so a
//! red-detuned intermediate state (Δ₁ < 0) sits above the ground state and
//! a positive chirp of Δ₂ sweeps the two-photon detuning δ upward.

use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::pulse::PulseSchedule;

/// Largest ensemble the brute-force model accepts.
pub const FULL_ENSEMBLE_MAX_ATOMS: usize = 8;

/// Single-atom ladder `|g⟩ ↔ |e⟩ ↔ |r⟩`. All rates in rad/µs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LadderParams {
    pub omega1: f64,
    pub omega2: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub gamma_e: f64,
    pub gamma_r: f64,
}

impl LadderParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("omega1", self.omega1),
            ("omega2", self.omega2),
            ("gamma_e", self.gamma_e),
            ("gamma_r", self.gamma_r),
        ] {
            if !(v >= 0.0) {
                return Err(Error::invalid(format!("{name} must be non-negative, got {v}")));
            }
        }
        if self.delta1 == 0.0 {
            return Err(Error::EliminationUndefined);
        }
        Ok(())
    }

    pub fn two_photon_detuning(&self) -> f64 {
        self.delta1 + self.delta2
    }
}

/// Adiabatic elimination of the intermediate level: returns the signed
/// single-atom Rabi frequency `Ω₁Ω₂/(2Δ₁)` and the two-photon detuning
/// `Δ₁ + Δ₂`.
pub fn effective_two_level(p: &LadderParams) -> Result<(f64, f64)> {
    if p.delta1 == 0.0 {
        return Err(Error::EliminationUndefined);
    }
    let guard = 5.0 * p.omega1.abs().max(p.omega2.abs());
    if p.delta1.abs() < guard {
        log::warn!(
            "|Δ₁| = {:.3} rad/µs is below 5·max(Ω₁, Ω₂) = {:.3} rad/µs; elimination is approximate",
            p.delta1.abs(),
            guard
        );
    }
    Ok((p.omega1 * p.omega2 / (2.0 * p.delta1), p.two_photon_detuning()))
}

/// `θ = ½·atan2(Ω_N, δ)`. For `Ω_N > 0` this lies in `(0, π/2)` and falls
/// monotonically as δ grows, reaching π/4 on resonance.
pub fn mixing_angle(omega_n: f64, delta: f64) -> Result<f64> {
    if omega_n == 0.0 && delta == 0.0 {
        return Err(Error::UndefinedAngle);
    }
    Ok(0.5 * omega_n.atan2(delta))
}

/// Dressed states of the blockaded two-level system on the basis `(|G⟩, |R⟩)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DressedStates {
    pub theta: f64,
    /// `sin θ |G⟩ + cos θ |R⟩`
    pub plus: [C64; 2],
    /// `cos θ |G⟩ − sin θ |R⟩`
    pub minus: [C64; 2],
    pub plus_energy: f64,
    pub minus_energy: f64,
}

/// The 2×2 Hamiltonian whose eigenvectors are the dressed states.
///
/// `omega_n` is the collective Rabi magnitude. With red single-photon
/// detuning the signed collective coupling is negative, so the matrix is the
/// superatom Hamiltonian with `H[G,R] = −Ω_N/2`.
pub fn dressed_hamiltonian(omega_n: f64, delta: f64) -> CMatrix {
    let c = -0.5 * omega_n;
    CMatrix::from_real_rows(&[&[0.0, c], &[c, -delta]])
}

pub fn dressed_states(omega_n: f64, delta: f64) -> Result<DressedStates> {
    let theta = mixing_angle(omega_n, delta)?;
    let (s, c) = theta.sin_cos();
    let gap = omega_n.hypot(delta);
    let re = |x: f64| C64::new(x, 0.0);
    Ok(DressedStates {
        theta,
        plus: [re(s), re(c)],
        minus: [re(c), re(-s)],
        plus_energy: -0.5 * delta - 0.5 * gap,
        minus_energy: -0.5 * delta + 0.5 * gap,
    })
}

/// Resonant dressed states `(|G⟩ ± |R⟩)/√2`.
pub fn resonant_dressed_states() -> ([C64; 2], [C64; 2]) {
    let a = C64::new(FRAC_1_SQRT_2, 0.0);
    ([a, a], [a, -a])
}

/// Population of `psi` in the eigenstate of `h` that has the largest weight
/// on basis state `label_index` (the adiabatic continuation of that state).
pub fn eigenstate_population(h: &CMatrix, psi: &[C64], label_index: usize) -> f64 {
    let (_, vectors) = h.eigh();
    let v = vectors
        .iter()
        .max_by(|a, b| a[label_index].norm_sqr().total_cmp(&b[label_index].norm_sqr()))
        .expect("non-empty basis");
    crate::linalg::inner(v, psi).norm_sqr()
}

/// A Hermitian operator together with the labels of its basis.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledOperator {
    pub basis: Vec<String>,
    pub matrix: CMatrix,
}

impl LabeledOperator {
    pub fn new(basis: Vec<String>, matrix: CMatrix) -> Self {
        debug_assert_eq!(basis.len(), matrix.dim());
        Self { basis, matrix }
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.basis.iter().position(|b| b == label)
    }

    pub fn entry(&self, row: &str, col: &str) -> Option<C64> {
        Some(self.matrix[(self.index_of(row)?, self.index_of(col)?)])
    }
}

/// Blockaded ensemble parameters. `omega_eff` is the signed single-atom
/// Rabi frequency; the collective coupling is `√N · omega_eff`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuperatomParams {
    pub n_atoms: f64,
    pub omega_eff: f64,
    pub delta_two_photon: f64,
    /// Energy shift `V` of the doubly excited level.
    pub blockade_shift: f64,
    pub include_double: bool,
}

impl SuperatomParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.n_atoms >= 1.0) {
            return Err(Error::invalid(format!("n_atoms must be ≥ 1, got {}", self.n_atoms)));
        }
        Ok(())
    }

    pub fn collective_rabi(&self) -> f64 {
        self.n_atoms.sqrt() * self.omega_eff
    }

    pub fn basis(&self) -> Vec<String> {
        superatom_basis(self.include_double)
    }

    /// Hamiltonian at the stored `omega_eff` and `delta_two_photon`.
    pub fn hamiltonian(&self) -> LabeledOperator {
        hamiltonian_superatom(self, self.collective_rabi(), self.delta_two_photon)
    }
}

pub fn superatom_basis(include_double: bool) -> Vec<String> {
    let mut b = vec!["G".to_string(), "R".to_string()];
    if include_double {
        b.push("RR".to_string());
    }
    b
}

/// Ratio of the `|R⟩ ↔ |RR⟩` coupling to the `|G⟩ ↔ |R⟩` coupling on the
/// symmetric Dicke ladder.
#[inline]
pub fn dicke_second_rung_factor(n_atoms: f64) -> f64 {
    (2.0 * (n_atoms - 1.0) / n_atoms).max(0.0).sqrt()
}

/// Writes the superatom matrix into `out` (dimension 2 or 3).
pub(crate) fn fill_superatom(
    out: &mut CMatrix,
    n_atoms: f64,
    blockade_shift: f64,
    include_double: bool,
    omega_n: f64,
    delta: f64,
) {
    out.fill_zero();
    let g = C64::new(0.5 * omega_n, 0.0);
    out[(0, 1)] = g;
    out[(1, 0)] = g;
    out[(1, 1)] = C64::new(-delta, 0.0);
    if include_double {
        let g2 = g * dicke_second_rung_factor(n_atoms);
        out[(1, 2)] = g2;
        out[(2, 1)] = g2;
        out[(2, 2)] = C64::new(-2.0 * delta + blockade_shift, 0.0);
    }
}

/// Superatom Hamiltonian for an instantaneous collective Rabi frequency
/// `omega_n` and two-photon detuning `delta`.
pub fn hamiltonian_superatom(p: &SuperatomParams, omega_n: f64, delta: f64) -> LabeledOperator {
    let basis = p.basis();
    let mut m = CMatrix::zeros(basis.len());
    fill_superatom(&mut m, p.n_atoms, p.blockade_shift, p.include_double, omega_n, delta);
    LabeledOperator::new(basis, m)
}

pub fn ladder_basis() -> Vec<String> {
    vec!["g".to_string(), "e".to_string(), "r".to_string()]
}

pub(crate) fn fill_ladder3(out: &mut CMatrix, omega1: f64, omega2: f64, delta1: f64, delta2: f64) {
    let dim = out.dim();
    out.fill_zero();
    let a = C64::new(0.5 * omega1, 0.0);
    let b = C64::new(0.5 * omega2, 0.0);
    out[(0, 1)] = a;
    out[(1, 0)] = a;
    out[(1, 2)] = b;
    out[(2, 1)] = b;
    out[(1, 1)] = C64::new(-delta1, 0.0);
    out[(2, 2)] = C64::new(-(delta1 + delta2), 0.0);
    // an optional loss level (index 3) is uncoupled
    debug_assert!(dim == 3 || dim == 4);
}

/// Three-level ladder Hamiltonian at fixed parameters.
pub fn ladder3_hamiltonian(p: &LadderParams) -> LabeledOperator {
    let mut m = CMatrix::zeros(3);
    fill_ladder3(&mut m, p.omega1, p.omega2, p.delta1, p.delta2);
    LabeledOperator::new(ladder_basis(), m)
}

/// Three-level ladder Hamiltonian sampled from a pulse schedule at time `t`.
pub fn hamiltonian_ladder3(schedule: &PulseSchedule, t: f64) -> Result<LabeledOperator> {
    let s = schedule.sample_checked(t)?;
    let mut m = CMatrix::zeros(3);
    fill_ladder3(&mut m, s.omega1, s.omega2, s.delta1, s.delta2);
    Ok(LabeledOperator::new(ladder_basis(), m))
}

/// Symmetric pair-shift table `V_ij`, stored for `i < j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairShifts {
    n: usize,
    upper: Vec<f64>,
}

impl PairShifts {
    pub fn uniform(n: usize, v: f64) -> Self {
        Self {
            n,
            upper: vec![v; n * n.saturating_sub(1) / 2],
        }
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut upper = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for i in 0..n {
            for j in (i + 1)..n {
                upper.push(f(i, j));
            }
        }
        Self { n, upper }
    }

    pub fn n_atoms(&self) -> usize {
        self.n
    }

    /// `V_ij`; symmetric in its arguments. Panics on `i == j`.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        assert!(i != j, "no self pair shift");
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        self.upper[pair_index(self.n, a, b)]
    }
}

#[inline]
fn pair_index(n: usize, i: usize, j: usize) -> usize {
    // row-major over i < j
    i * (2 * n - i - 1) / 2 + (j - i - 1)
}

/// Brute-force N-atom parameters. `pair_shifts = None` removes the doubly
/// excited states (perfect blockade).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FullEnsembleParams {
    pub n_atoms: usize,
    pub omega_eff: f64,
    pub delta_two_photon: f64,
    pub pair_shifts: Option<PairShifts>,
}

impl FullEnsembleParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_atoms == 0 {
            return Err(Error::invalid("n_atoms must be ≥ 1"));
        }
        if self.n_atoms > FULL_ENSEMBLE_MAX_ATOMS {
            return Err(Error::SizeLimit {
                n: self.n_atoms,
                max: FULL_ENSEMBLE_MAX_ATOMS,
            });
        }
        if let Some(ps) = &self.pair_shifts {
            if ps.n_atoms() != self.n_atoms {
                return Err(Error::invalid("pair shift table size does not match n_atoms"));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        full_ensemble_dim(self.n_atoms, self.pair_shifts.is_some())
    }

    pub fn basis(&self) -> Vec<String> {
        let n = self.n_atoms;
        let mut b = vec!["G".to_string()];
        b.extend((1..=n).map(|i| format!("r{i}")));
        if self.pair_shifts.is_some() {
            for i in 1..=n {
                for j in (i + 1)..=n {
                    b.push(format!("r{i}r{j}"));
                }
            }
        }
        b
    }

    /// Number of Rydberg excitations in each basis state.
    pub fn excitation_numbers(&self) -> Vec<usize> {
        let n = self.n_atoms;
        let mut v = vec![0];
        v.extend(std::iter::repeat_n(1, n));
        if self.pair_shifts.is_some() {
            v.extend(std::iter::repeat_n(2, n * (n - 1) / 2));
        }
        v
    }
}

pub fn full_ensemble_dim(n: usize, with_pairs: bool) -> usize {
    1 + n + if with_pairs { n * (n - 1) / 2 } else { 0 }
}

pub(crate) fn fill_full_ensemble(
    out: &mut CMatrix,
    n: usize,
    pair_shifts: Option<&PairShifts>,
    omega: f64,
    delta: f64,
) {
    out.fill_zero();
    let g = C64::new(0.5 * omega, 0.0);
    for i in 0..n {
        let ri = 1 + i;
        out[(0, ri)] = g;
        out[(ri, 0)] = g;
        out[(ri, ri)] = C64::new(-delta, 0.0);
    }
    if let Some(ps) = pair_shifts {
        let mut k = 1 + n;
        for i in 0..n {
            for j in (i + 1)..n {
                out[(k, k)] = C64::new(-2.0 * delta + ps.get(i, j), 0.0);
                for a in [i, j] {
                    out[(1 + a, k)] = g;
                    out[(k, 1 + a)] = g;
                }
                k += 1;
            }
        }
    }
}

pub fn hamiltonian_full_n(p: &FullEnsembleParams) -> Result<LabeledOperator> {
    p.validate()?;
    let mut m = CMatrix::zeros(p.dim());
    fill_full_ensemble(&mut m, p.n_atoms, p.pair_shifts.as_ref(), p.omega_eff, p.delta_two_photon);
    Ok(LabeledOperator::new(p.basis(), m))
}

/// `N = Ω_N² / Ω²`, not rounded.
pub fn estimate_atom_number(omega_n: f64, omega_eff: f64) -> Result<f64> {
    if omega_eff == 0.0 {
        return Err(Error::invalid("single-atom Rabi frequency is zero"));
    }
    Ok((omega_n / omega_eff).powi(2))
}
