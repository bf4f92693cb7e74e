//! Seeded shot-to-shot fluctuations and the Monte-Carlo driver.
//!
//! Trial `k` draws from a ChaCha stream seeded with `seed ⊕ k`, so results do
//! not depend on which worker runs which trial. With antithetic pairing,
//! trials `2m` and `2m+1` share a stream and the odd one mirrors the blockade
//! shift about the centre of its distribution. With stratification each
//! random dimension is Latin-hypercube sampled over the streams of a run and
//! mapped through its inverse CDF.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, DiscreteCDF};

use super::{evolve_from_ground, IntegratorOptions, ModelSpec, Trajectory};
use crate::error::{Error, Result};
use crate::photon::ExcitationDistribution;
use crate::pulse::PulseSchedule;

/// Sampling law for the doubly-excited level shift `V` (rad/µs).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum BlockadeDistribution {
    PointMass { value: f64 },
    /// Normal truncated to `[min, max]` by rejection.
    Normal { mean: f64, std: f64, min: f64, max: f64 },
    /// `|V|` log-uniform on `[min, max]`; with `signed` the sign is a fair coin.
    LogUniform { min: f64, max: f64, signed: bool },
}

impl BlockadeDistribution {
    pub fn validate(&self, antithetic: bool) -> Result<()> {
        match *self {
            BlockadeDistribution::PointMass { value } => {
                if !value.is_finite() {
                    return Err(Error::invalid("point-mass blockade shift must be finite"));
                }
            }
            BlockadeDistribution::Normal { mean, std, min, max } => {
                if !(std >= 0.0) || !(min <= mean && mean <= max) {
                    return Err(Error::invalid("normal blockade distribution needs std ≥ 0 and min ≤ mean ≤ max"));
                }
                let (lo, hi) = (mean - min, max - mean);
                if antithetic && (lo - hi).abs() > 1e-12 * lo.abs().max(hi.abs()).max(1.0) && lo.is_finite() {
                    return Err(Error::invalid("antithetic pairing needs bounds symmetric about the mean"));
                }
            }
            BlockadeDistribution::LogUniform { min, max, signed } => {
                if !(min > 0.0 && min <= max && max.is_finite()) {
                    return Err(Error::invalid("log-uniform blockade distribution needs 0 < min ≤ max < ∞"));
                }
                if antithetic && !signed {
                    return Err(Error::invalid("antithetic pairing needs a signed log-uniform distribution"));
                }
            }
        }
        Ok(())
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        match *self {
            BlockadeDistribution::PointMass { value } => value,
            BlockadeDistribution::Normal { mean, std, min, max } => {
                if std == 0.0 {
                    return mean;
                }
                let normal = Normal::new(mean, std).expect("validated std");
                for _ in 0..10_000 {
                    let v = normal.sample(rng);
                    if (min..=max).contains(&v) {
                        return v;
                    }
                }
                mean
            }
            BlockadeDistribution::LogUniform { min, max, signed } => {
                let v = (rng.random_range(0.0..=1.0) * (max / min).ln()).exp() * min;
                if signed && rng.random_bool(0.5) {
                    -v
                } else {
                    v
                }
            }
        }
    }

    /// Inverse CDF; `u` in (0, 1).
    fn quantile(&self, u: f64) -> f64 {
        match *self {
            BlockadeDistribution::PointMass { value } => value,
            BlockadeDistribution::Normal { mean, std, min, max } => {
                if std == 0.0 {
                    return mean;
                }
                let n = statrs::distribution::Normal::new(mean, std).expect("validated std");
                let (lo, hi) = (n.cdf(min), n.cdf(max));
                n.inverse_cdf(lo + u * (hi - lo)).clamp(min, max)
            }
            BlockadeDistribution::LogUniform { min, max, signed } => {
                let (w, negative) = if signed {
                    if u < 0.5 {
                        (1.0 - 2.0 * u, true)
                    } else {
                        (2.0 * u - 1.0, false)
                    }
                } else {
                    (u, false)
                };
                let v = (w * (max / min).ln()).exp() * min;
                if negative {
                    -v
                } else {
                    v
                }
            }
        }
    }

    fn mirror(&self, v: f64) -> f64 {
        match *self {
            BlockadeDistribution::PointMass { value } => value,
            BlockadeDistribution::Normal { mean, .. } => 2.0 * mean - v,
            BlockadeDistribution::LogUniform { .. } => -v,
        }
    }
}

/// Shot-to-shot fluctuations of the superatom parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    pub mean_atoms: f64,
    /// Draw `N` from a Poisson law of mean `mean_atoms` (clamped to ≥ 1).
    pub poisson_atoms: bool,
    pub blockade: BlockadeDistribution,
    #[serde(default)]
    pub antithetic: bool,
    /// Relative standard deviation of the shot-to-shot coupling-laser amplitude.
    #[serde(default)]
    pub intensity_jitter: f64,
    /// Latin-hypercube sampling across the trials of one run.
    #[serde(default)]
    pub stratified: bool,
    pub seed: u64,
}

impl NoiseSpec {
    /// No fluctuations at all.
    pub fn none(mean_atoms: f64, blockade_shift: f64) -> Self {
        Self {
            mean_atoms,
            poisson_atoms: false,
            blockade: BlockadeDistribution::PointMass { value: blockade_shift },
            antithetic: false,
            intensity_jitter: 0.0,
            stratified: false,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mean_atoms >= 1.0) {
            return Err(Error::invalid(format!("mean atom number must be ≥ 1, got {}", self.mean_atoms)));
        }
        if !(0.0..0.5).contains(&self.intensity_jitter) {
            return Err(Error::invalid(format!(
                "intensity jitter must lie in [0, 0.5), got {}",
                self.intensity_jitter
            )));
        }
        self.blockade.validate(self.antithetic)
    }
}

/// One trial's sampled parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialDraw {
    pub n_atoms: f64,
    pub blockade_shift: f64,
    /// Multiplier on the coupling-laser amplitude for this shot.
    pub omega2_scale: f64,
}

/// Draws trial `trial` of a run of `trials`.
pub fn sample_trial(noise: &NoiseSpec, trial: usize, trials: usize) -> TrialDraw {
    let stream = if noise.antithetic { trial / 2 } else { trial };
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed ^ (if noise.antithetic { trial & !1 } else { trial }) as u64);
    let mut draw = if noise.stratified {
        let streams = if noise.antithetic { trials.div_ceil(2) } else { trials }.max(stream + 1);
        let u = |dim: u64, rng: &mut ChaCha8Rng| {
            let mut perm: Vec<usize> = (0..streams).collect();
            perm.shuffle(&mut ChaCha8Rng::seed_from_u64(noise.seed.rotate_left(17) ^ dim));
            let r: f64 = rng.random_range(0.0..1.0);
            ((perm[stream] as f64 + r) / streams as f64).clamp(1e-12, 1.0 - 1e-12)
        };
        let (un, uv, uj) = (u(1, &mut rng), u(2, &mut rng), u(3, &mut rng));
        let n_atoms = if noise.poisson_atoms {
            let p = statrs::distribution::Poisson::new(noise.mean_atoms).expect("validated mean");
            (p.inverse_cdf(un) as f64).max(1.0)
        } else {
            noise.mean_atoms
        };
        let z = statrs::distribution::Normal::standard().inverse_cdf(uj);
        TrialDraw {
            n_atoms,
            blockade_shift: noise.blockade.quantile(uv),
            omega2_scale: jitter_scale(noise.intensity_jitter, z),
        }
    } else {
        let n_atoms = if noise.poisson_atoms {
            let p = Poisson::new(noise.mean_atoms).expect("validated mean");
            let n: f64 = p.sample(&mut rng);
            n.max(1.0)
        } else {
            noise.mean_atoms
        };
        let v = noise.blockade.sample(&mut rng);
        let z: f64 = if noise.intensity_jitter > 0.0 { rng.sample(rand_distr::StandardNormal) } else { 0.0 };
        TrialDraw {
            n_atoms,
            blockade_shift: v,
            omega2_scale: jitter_scale(noise.intensity_jitter, z),
        }
    };
    if noise.antithetic && trial % 2 == 1 {
        draw.blockade_shift = noise.blockade.mirror(draw.blockade_shift);
    }
    draw
}

fn jitter_scale(jitter: f64, z: f64) -> f64 {
    if jitter > 0.0 {
        (1.0 + jitter * z).max(0.0)
    } else {
        1.0
    }
}

/// Applies a draw to the superatom tier; other tiers are returned unchanged.
fn apply_draw(model: &ModelSpec, draw: &TrialDraw) -> ModelSpec {
    match model {
        ModelSpec::Superatom {
            include_double,
            light_shifts,
            decay,
            ..
        } => ModelSpec::Superatom {
            n_atoms: draw.n_atoms,
            blockade_shift: draw.blockade_shift,
            include_double: *include_double,
            light_shifts: *light_shifts,
            decay: *decay,
        },
        other => other.clone(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloResult {
    /// Trial-averaged populations and adiabaticity; no amplitudes.
    pub mean: Trajectory,
    pub per_trial: Vec<ExcitationDistribution>,
    pub draws: Vec<TrialDraw>,
    /// Average of the per-trial distributions.
    pub pooled: ExcitationDistribution,
}

/// Evolves `trials` independently drawn models from the ground state.
pub fn run_monte_carlo(
    model: &ModelSpec,
    schedule: &PulseSchedule,
    noise: &NoiseSpec,
    trials: usize,
    opts: &IntegratorOptions,
) -> Result<MonteCarloResult> {
    if trials == 0 {
        return Err(Error::invalid("Monte-Carlo run needs at least one trial"));
    }
    noise.validate()?;
    let runs: Vec<Result<(TrialDraw, Trajectory)>> = (0..trials)
        .into_par_iter()
        .map(|k| {
            let draw = sample_trial(noise, k, trials);
            let shot = if draw.omega2_scale == 1.0 {
                schedule.clone()
            } else {
                schedule.clone().scale_omega2(draw.omega2_scale)
            };
            let traj = evolve_from_ground(&apply_draw(model, &draw), &shot, opts).map_err(|e| match e {
                Error::Numeric(source) => Error::Trial { trial: k, source },
                other => other,
            })?;
            Ok((draw, traj))
        })
        .collect();
    let mut draws = Vec::with_capacity(trials);
    let mut trajs = Vec::with_capacity(trials);
    for r in runs {
        let (d, t) = r?;
        draws.push(d);
        trajs.push(t);
    }

    let first = &trajs[0];
    let scale = 1.0 / trials as f64;
    let mut populations = vec![vec![0.0; first.times.len()]; first.basis.len()];
    let mut adiabaticity = vec![0.0; first.adiabaticity.len()];
    let mut max_drift: f64 = 0.0;
    let mut min_eig: Option<f64> = None;
    for t in &trajs {
        for (acc, p) in populations.iter_mut().zip(&t.populations) {
            for (a, v) in acc.iter_mut().zip(p) {
                *a += v * scale;
            }
        }
        for (a, v) in adiabaticity.iter_mut().zip(&t.adiabaticity) {
            *a += v * scale;
        }
        max_drift = max_drift.max(t.max_norm_drift);
        if let Some(e) = t.min_eigenvalue {
            min_eig = Some(min_eig.map_or(e, |m: f64| m.min(e)));
        }
    }
    let per_trial: Vec<ExcitationDistribution> = trajs.iter().map(|t| t.final_distribution.clone()).collect();
    let pooled = ExcitationDistribution::mixture(per_trial.iter())?;
    let mean = Trajectory {
        basis: first.basis.clone(),
        times: first.times.clone(),
        populations,
        amplitudes: None,
        adiabaticity,
        final_distribution: pooled.clone(),
        max_norm_drift: max_drift,
        min_eigenvalue: min_eig,
        steps: first.steps,
    };
    Ok(MonteCarloResult {
        mean,
        per_trial,
        draws,
        pooled,
    })
}
