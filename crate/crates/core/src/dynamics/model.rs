use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::pulse::DriveSample;
use crate::quantum::{
    fill_full_ensemble, fill_ladder3, fill_superatom, full_ensemble_dim, ladder_basis, superatom_basis,
    FullEnsembleParams, PairShifts, FULL_ENSEMBLE_MAX_ATOMS,
};

/// Dissipation attached to a model (rad/µs). Defaults to none.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecayModel {
    /// Intermediate-state decay rate Γ_e.
    #[serde(default)]
    pub gamma_e: f64,
    /// Rydberg dephasing rate.
    #[serde(default)]
    pub gamma_r: f64,
    /// Route decays into an extra uncoupled `loss` level instead of back to
    /// the ground state.
    #[serde(default)]
    pub loss_level: bool,
}

impl DecayModel {
    pub fn is_dissipative(&self) -> bool {
        self.gamma_e > 0.0 || self.gamma_r > 0.0
    }
}

/// Which Hamiltonian to integrate. Drive values come from the pulse schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "tier", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModelSpec {
    /// Blockaded ensemble on `|G⟩, |R⟩[, |RR⟩]` after eliminating `|e⟩`.
    Superatom {
        n_atoms: f64,
        /// Shift `V` of `|RR⟩`; ignored without the double level.
        blockade_shift: f64,
        include_double: bool,
        /// Add the intermediate-state light shifts of `|g⟩` and `|r⟩` to δ.
        #[serde(default)]
        light_shifts: bool,
        #[serde(default)]
        decay: DecayModel,
    },
    /// One atom on `|g⟩, |e⟩, |r⟩`.
    Ladder3 {
        #[serde(default)]
        decay: DecayModel,
    },
    /// Every atom resolved, at most two Rydberg excitations. Pure-state only.
    FullEnsemble {
        n_atoms: usize,
        pair_shifts: Option<PairShifts>,
    },
}

/// Time dependence of a collapse rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum RateProfile {
    Constant { rate: f64 },
    /// Scattering through the intermediate level admixed into `|r⟩` by the
    /// upper drive: `m · Γ_e · ½(1 − |Δ₂|/√(Δ₂² + Ω₂²))`, which is
    /// `m · Γ_e Ω₂²/(4Δ₂²)` far from resonance.
    UpperAdmixture { gamma_e: f64, multiplicity: f64 },
}

impl RateProfile {
    #[inline]
    pub fn evaluate(&self, s: &DriveSample) -> f64 {
        match *self {
            RateProfile::Constant { rate } => rate,
            RateProfile::UpperAdmixture { gamma_e, multiplicity } => {
                if s.omega2 == 0.0 {
                    return 0.0;
                }
                let admix = 0.5 * (1.0 - s.delta2.abs() / s.delta2.hypot(s.omega2));
                multiplicity * gamma_e * admix
            }
        }
    }
}

/// A Lindblad jump operator with its (possibly time-dependent) rate.
#[derive(Debug, Clone, PartialEq)]
pub struct CollapseOp {
    pub label: String,
    pub jump: CMatrix,
    pub rate: RateProfile,
}

impl ModelSpec {
    /// Superatom without dissipation.
    pub fn superatom(n_atoms: f64, blockade_shift: f64, include_double: bool) -> Self {
        ModelSpec::Superatom {
            n_atoms,
            blockade_shift,
            include_double,
            light_shifts: false,
            decay: DecayModel::default(),
        }
    }

    /// Turns the intermediate-state light shifts on or off (superatom only).
    pub fn with_light_shifts(mut self, on: bool) -> Self {
        if let ModelSpec::Superatom { light_shifts, .. } = &mut self {
            *light_shifts = on;
        }
        self
    }

    /// Perfectly blockaded two-level superatom.
    pub fn full_blockade(n_atoms: f64) -> Self {
        Self::superatom(n_atoms, 0.0, false)
    }

    pub fn with_decay(mut self, new_decay: DecayModel) -> Self {
        match &mut self {
            ModelSpec::Superatom { decay, .. } | ModelSpec::Ladder3 { decay } => *decay = new_decay,
            ModelSpec::FullEnsemble { .. } => {}
        }
        self
    }

    pub fn decay(&self) -> DecayModel {
        match self {
            ModelSpec::Superatom { decay, .. } | ModelSpec::Ladder3 { decay } => *decay,
            ModelSpec::FullEnsemble { .. } => DecayModel::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ModelSpec::Superatom { n_atoms, decay, .. } => {
                if !(*n_atoms >= 1.0) {
                    return Err(Error::invalid(format!("n_atoms must be ≥ 1, got {n_atoms}")));
                }
                validate_decay(decay)
            }
            ModelSpec::Ladder3 { decay } => validate_decay(decay),
            ModelSpec::FullEnsemble { n_atoms, pair_shifts } => FullEnsembleParams {
                n_atoms: *n_atoms,
                omega_eff: 0.0,
                delta_two_photon: 0.0,
                pair_shifts: pair_shifts.clone(),
            }
            .validate(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            ModelSpec::Superatom { include_double, decay, .. } => {
                2 + usize::from(*include_double) + usize::from(decay.loss_level)
            }
            ModelSpec::Ladder3 { decay } => 3 + usize::from(decay.loss_level),
            ModelSpec::FullEnsemble { n_atoms, pair_shifts } => {
                full_ensemble_dim((*n_atoms).min(FULL_ENSEMBLE_MAX_ATOMS), pair_shifts.is_some())
            }
        }
    }

    pub fn basis(&self) -> Vec<String> {
        let mut b = match self {
            ModelSpec::Superatom { include_double, .. } => superatom_basis(*include_double),
            ModelSpec::Ladder3 { .. } => ladder_basis(),
            ModelSpec::FullEnsemble { n_atoms, pair_shifts } => FullEnsembleParams {
                n_atoms: *n_atoms,
                omega_eff: 0.0,
                delta_two_photon: 0.0,
                pair_shifts: pair_shifts.clone(),
            }
            .basis(),
        };
        if self.decay().loss_level {
            b.push("loss".to_string());
        }
        b
    }

    /// Rydberg excitation count of each basis state.
    pub fn excitation_numbers(&self) -> Vec<usize> {
        let mut v = match self {
            ModelSpec::Superatom { include_double, .. } => {
                let mut v = vec![0, 1];
                if *include_double {
                    v.push(2);
                }
                v
            }
            ModelSpec::Ladder3 { .. } => vec![0, 0, 1],
            ModelSpec::FullEnsemble { n_atoms, pair_shifts } => FullEnsembleParams {
                n_atoms: *n_atoms,
                omega_eff: 0.0,
                delta_two_photon: 0.0,
                pair_shifts: pair_shifts.clone(),
            }
            .excitation_numbers(),
        };
        if self.decay().loss_level {
            v.push(0);
        }
        v
    }

    pub fn max_excitation(&self) -> usize {
        self.excitation_numbers().into_iter().max().unwrap_or(0)
    }

    /// Atom number entering `Ω_N = √N Ω` for the effective two-level picture.
    pub fn collective_n(&self) -> f64 {
        match self {
            ModelSpec::Superatom { n_atoms, .. } => *n_atoms,
            ModelSpec::Ladder3 { .. } => 1.0,
            ModelSpec::FullEnsemble { n_atoms, .. } => *n_atoms as f64,
        }
    }

    /// Writes `H` for the drive sample into `out`.
    #[inline]
    pub fn fill_hamiltonian(&self, s: &DriveSample, out: &mut CMatrix) {
        match self {
            ModelSpec::Superatom {
                n_atoms,
                blockade_shift,
                include_double,
                light_shifts,
                ..
            } => {
                let omega_n = n_atoms.sqrt() * s.omega_eff();
                let mut delta = s.two_photon_detuning();
                if *light_shifts {
                    delta += s.differential_light_shift();
                }
                fill_superatom(out, *n_atoms, *blockade_shift, *include_double, omega_n, delta);
            }
            ModelSpec::Ladder3 { .. } => fill_ladder3(out, s.omega1, s.omega2, s.delta1, s.delta2),
            ModelSpec::FullEnsemble { n_atoms, pair_shifts } => {
                fill_full_ensemble(out, *n_atoms, pair_shifts.as_ref(), s.omega_eff(), s.two_photon_detuning())
            }
        }
    }

    /// Default dissipators. Intermediate-state decay returns to the ground
    /// level unless a loss level is configured.
    pub fn collapse_ops(&self) -> Vec<CollapseOp> {
        let dim = self.dim();
        let decay = self.decay();
        let loss = decay.loss_level.then_some(dim - 1);
        let mut ops = Vec::new();
        match self {
            ModelSpec::Superatom { include_double, .. } => {
                if decay.gamma_e > 0.0 {
                    ops.push(CollapseOp {
                        label: "scatter R".into(),
                        jump: CMatrix::transition(dim, loss.unwrap_or(0), 1),
                        rate: RateProfile::UpperAdmixture {
                            gamma_e: decay.gamma_e,
                            multiplicity: 1.0,
                        },
                    });
                    if *include_double {
                        ops.push(CollapseOp {
                            label: "scatter RR".into(),
                            jump: CMatrix::transition(dim, 1, 2),
                            rate: RateProfile::UpperAdmixture {
                                gamma_e: decay.gamma_e,
                                multiplicity: 2.0,
                            },
                        });
                    }
                }
                if decay.gamma_r > 0.0 {
                    ops.push(CollapseOp {
                        label: "dephase".into(),
                        jump: excitation_number_operator(dim, &self.excitation_numbers()),
                        rate: RateProfile::Constant { rate: decay.gamma_r },
                    });
                }
            }
            ModelSpec::Ladder3 { .. } => {
                if decay.gamma_e > 0.0 {
                    ops.push(CollapseOp {
                        label: "decay e".into(),
                        jump: CMatrix::transition(dim, loss.unwrap_or(0), 1),
                        rate: RateProfile::Constant { rate: decay.gamma_e },
                    });
                }
                if decay.gamma_r > 0.0 {
                    ops.push(CollapseOp {
                        label: "dephase r".into(),
                        jump: CMatrix::transition(dim, 2, 2),
                        rate: RateProfile::Constant { rate: decay.gamma_r },
                    });
                }
            }
            ModelSpec::FullEnsemble { .. } => {}
        }
        ops
    }

    /// Needs a non-zero Δ₁ to define the effective coupling.
    pub fn requires_elimination(&self) -> bool {
        !matches!(self, ModelSpec::Ladder3 { .. })
    }
}

fn validate_decay(d: &DecayModel) -> Result<()> {
    if !(d.gamma_e >= 0.0 && d.gamma_r >= 0.0) {
        return Err(Error::invalid("decay rates must be non-negative"));
    }
    Ok(())
}

fn excitation_number_operator(dim: usize, numbers: &[usize]) -> CMatrix {
    let mut m = CMatrix::zeros(dim);
    for (k, &n) in numbers.iter().enumerate() {
        m[(k, k)] = (n as f64).into();
    }
    m
}
