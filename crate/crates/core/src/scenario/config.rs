//! JSON scenario configuration. Frequencies are cyclic MHz, times ns and
//! chirp rates multiples of the 12 MHz/µs unit; [`ScenarioConfig`] converts
//! them to the angular µs units of the library.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::dynamics::{BlockadeDistribution, DecayModel, IntegratorOptions, ModelSpec, NoiseSpec};
use crate::error::{Error, Result};
use crate::photon::RetrievalModel;
use crate::pulse::{ChirpSpec, PulseSchedule, PulseShape, TimeGrid};
use crate::units::{chirp_unit, mhz, ns};

/// Drive parameters of the excitation sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicsConfig {
    pub omega1_mhz: f64,
    pub omega2_mhz: f64,
    pub delta1_mhz: f64,
    /// Centre of the Δ₂ sweep.
    pub delta2_center_mhz: f64,
    /// Total sequence length `2T`.
    pub duration_ns: f64,
    pub omega1_fwhm_ns: f64,
    /// Raised-cosine rise and fall of the lower-transition pulse.
    pub omega1_edge_ns: f64,
    pub omega2_fwhm_ns: f64,
    pub chirp_rate_u: f64,
    pub mean_atoms: f64,
}

/// Superatom options.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// Keep `|RR⟩`; without it the ensemble is perfectly blockaded.
    pub include_double: bool,
    #[serde(default)]
    pub light_shifts: bool,
    #[serde(default)]
    pub gamma_e_mhz: f64,
    #[serde(default)]
    pub gamma_r_mhz: f64,
    #[serde(default)]
    pub loss_level: bool,
}

/// Sampling law of the doubly-excited level shift, in MHz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum BlockadeConfig {
    PointMass {
        value_mhz: f64,
    },
    Normal {
        mean_mhz: f64,
        std_mhz: f64,
        min_mhz: f64,
        max_mhz: f64,
    },
    LogUniform {
        min_mhz: f64,
        max_mhz: f64,
        signed: bool,
    },
}

impl BlockadeConfig {
    pub fn to_distribution(self) -> BlockadeDistribution {
        match self {
            BlockadeConfig::PointMass { value_mhz } => BlockadeDistribution::PointMass { value: mhz(value_mhz) },
            BlockadeConfig::Normal {
                mean_mhz,
                std_mhz,
                min_mhz,
                max_mhz,
            } => BlockadeDistribution::Normal {
                mean: mhz(mean_mhz),
                std: mhz(std_mhz),
                min: mhz(min_mhz),
                max: mhz(max_mhz),
            },
            BlockadeConfig::LogUniform { min_mhz, max_mhz, signed } => BlockadeDistribution::LogUniform {
                min: mhz(min_mhz),
                max: mhz(max_mhz),
                signed,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    pub poisson_atoms: bool,
    pub blockade: BlockadeConfig,
    #[serde(default)]
    pub antithetic: bool,
    #[serde(default)]
    pub stratified: bool,
    #[serde(default)]
    pub intensity_jitter: f64,
    /// Every sweep point reuses the run seed instead of its own derived seed,
    /// so all points see the same trial draws.
    #[serde(default = "yes")]
    pub common_random_numbers: bool,
}

fn yes() -> bool {
    true
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RetrievalConfig {
    pub eta_retrieval: f64,
    pub eta_detection: f64,
    pub splitter_ratio: f64,
    /// Fraction of multiply-excited population retrieved into the collected
    /// mode; the remainder emits nothing.
    #[serde(default = "one")]
    pub pair_retrieval: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorConfig {
    pub step_ns: f64,
    pub norm_tolerance: f64,
}

/// `points` evenly spaced values from `start` to `stop` inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Range {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

impl Range {
    pub fn values(&self) -> Vec<f64> {
        match self.points {
            0 => Vec::new(),
            1 => vec![self.start],
            n => (0..n)
                .map(|k| self.start + (self.stop - self.start) * k as f64 / (n - 1) as f64)
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RabiScanConfig {
    /// Square pulses of these lengths at the configured peak amplitudes.
    pub durations_ns: Range,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AreaScanConfig {
    /// Collective pulse area in units of π, set by scaling the Ω₂ peak.
    pub areas_pi: Range,
    pub chirp_rates_u: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetuningScanConfig {
    pub delta1_mhz: Range,
    pub chirp_rate_u: f64,
    pub chirped_fwhm_ns: f64,
    pub pi_fwhm_ns: f64,
    /// Search interval for the Ω₂ scale factor that maximises the click sum
    /// at the configured Δ₁.
    pub scale_bounds: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    pub rabi: RabiScanConfig,
    pub area: AreaScanConfig,
    pub detuning: DetuningScanConfig,
}

/// Everything a scenario run depends on. Hashing the canonical JSON form
/// gives the provenance hash attached to every output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub label: String,
    #[serde(default)]
    pub description: String,
    /// Provenance remarks keyed by dotted config path.
    #[serde(default)]
    pub notes: BTreeMap<String, String>,
    pub physics: PhysicsConfig,
    pub model: ModelConfig,
    pub noise: NoiseConfig,
    pub retrieval: RetrievalConfig,
    pub integrator: IntegratorConfig,
    pub scans: ScanConfig,
    pub trials: usize,
    pub seed: u64,
}

const DEFAULTS_JSON: &str = include_str!("../../../../configs/defaults.json");
const CALIBRATION_JSON: &str = include_str!("../../../../configs/calibration.json");

impl ScenarioConfig {
    /// Published experimental parameters, noiseless perfectly blockaded model.
    pub fn defaults() -> Self {
        Self::from_json(DEFAULTS_JSON).expect("shipped defaults parse")
    }

    /// The shipped damping calibration (not measured values).
    pub fn calibration() -> Self {
        Self::from_json(CALIBRATION_JSON).expect("shipped calibration parses")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text).map_err(|e| Error::config("<root>", e.to_string()))?;
        Self::from_value(value)
    }

    fn from_value(value: Value) -> Result<Self> {
        let cfg: Self = serde_path_to_error(value)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 of the compact JSON form, hex encoded.
    pub fn hash(&self) -> String {
        let body = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&body))
    }

    /// Replaces the value at a dotted path (`physics.omega2_mhz`) with `raw`,
    /// parsed as JSON when possible and as a string otherwise. The key must
    /// already exist and the result must still deserialize and validate.
    pub fn apply_override(&self, key: &str, raw: &str) -> Result<Self> {
        let mut root = serde_json::to_value(self).expect("config serializes");
        let mut slot = &mut root;
        for part in key.split('.') {
            slot = match slot {
                Value::Object(map) => map.get_mut(part),
                Value::Array(items) => part.parse::<usize>().ok().and_then(|i| items.get_mut(i)),
                _ => None,
            }
            .ok_or_else(|| Error::config(key, "unknown key"))?;
        }
        let new: Value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
        if json_kind(slot) != json_kind(&new) && !(slot.is_object() && new.is_object()) {
            return Err(Error::config(
                key,
                format!("expected {}, got {}", json_kind(slot), json_kind(&new)),
            ));
        }
        *slot = new;
        Self::from_value(root).map_err(|e| match e {
            Error::Config { message, .. } => Error::config(key, message),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let p = &self.physics;
        let positive = [
            ("physics.duration_ns", p.duration_ns),
            ("physics.omega1_fwhm_ns", p.omega1_fwhm_ns),
            ("physics.omega2_fwhm_ns", p.omega2_fwhm_ns),
            ("physics.mean_atoms", p.mean_atoms),
            ("integrator.step_ns", self.integrator.step_ns),
            ("integrator.norm_tolerance", self.integrator.norm_tolerance),
            ("scans.detuning.chirped_fwhm_ns", self.scans.detuning.chirped_fwhm_ns),
            ("scans.detuning.pi_fwhm_ns", self.scans.detuning.pi_fwhm_ns),
        ];
        for (key, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(key, format!("must be a positive finite number, got {v}")));
            }
        }
        if p.delta1_mhz == 0.0 || !p.delta1_mhz.is_finite() {
            return Err(Error::config("physics.delta1_mhz", "must be finite and non-zero"));
        }
        if !(p.omega1_edge_ns >= 0.0 && p.omega1_fwhm_ns + p.omega1_edge_ns <= p.duration_ns + 1e-9) {
            return Err(Error::config(
                "physics.omega1_edge_ns",
                "lower-transition pulse (fwhm + edge) must fit inside the sequence",
            ));
        }
        if p.mean_atoms < 1.0 {
            return Err(Error::config("physics.mean_atoms", "must be ≥ 1"));
        }
        for (key, v) in [
            ("model.gamma_e_mhz", self.model.gamma_e_mhz),
            ("model.gamma_r_mhz", self.model.gamma_r_mhz),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::config(key, format!("must be ≥ 0, got {v}")));
            }
        }
        let r = &self.retrieval;
        for (key, v) in [
            ("retrieval.eta_retrieval", r.eta_retrieval),
            ("retrieval.eta_detection", r.eta_detection),
            ("retrieval.splitter_ratio", r.splitter_ratio),
            ("retrieval.pair_retrieval", r.pair_retrieval),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::config(key, format!("must lie in [0, 1], got {v}")));
            }
        }
        if self.trials == 0 {
            return Err(Error::config("trials", "must be ≥ 1"));
        }
        for (key, range) in [
            ("scans.rabi.durations_ns", &self.scans.rabi.durations_ns),
            ("scans.area.areas_pi", &self.scans.area.areas_pi),
            ("scans.detuning.delta1_mhz", &self.scans.detuning.delta1_mhz),
        ] {
            if range.points == 0 {
                return Err(Error::config(format!("{key}.points"), "sweep axis is empty"));
            }
            if !(range.start.is_finite() && range.stop.is_finite()) {
                return Err(Error::config(key, "bounds must be finite"));
            }
        }
        if self.scans.rabi.durations_ns.values().iter().any(|&t| t <= 0.0) {
            return Err(Error::config("scans.rabi.durations_ns", "durations must be > 0"));
        }
        if self.scans.area.areas_pi.values().iter().any(|&a| a < 0.0) {
            return Err(Error::config("scans.area.areas_pi", "areas must be ≥ 0"));
        }
        if self.scans.detuning.delta1_mhz.values().contains(&0.0) {
            return Err(Error::config("scans.detuning.delta1_mhz", "Δ₁ = 0 is not allowed"));
        }
        let (lo, hi) = self.scans.detuning.scale_bounds;
        if !(lo > 0.0 && hi > lo) {
            return Err(Error::config("scans.detuning.scale_bounds", "needs 0 < low < high"));
        }
        if self.scans.area.chirp_rates_u.is_empty() {
            return Err(Error::config("scans.area.chirp_rates_u", "needs at least one chirp rate"));
        }
        self.noise_spec(self.seed)
            .validate()
            .map_err(|e| Error::config("noise", e.to_string()))?;
        self.integrator_options()
            .validate()
            .map_err(|e| Error::config("integrator", e.to_string()))?;
        Ok(())
    }

    /// Chirped sequence: smoothed-square Ω₁ and Gaussian Ω₂ centred at `T`,
    /// Δ₂ swept linearly through its centre over the whole sequence.
    pub fn schedule(&self) -> PulseSchedule {
        let p = &self.physics;
        let duration = ns(p.duration_ns);
        let center = 0.5 * duration;
        PulseSchedule {
            omega1: PulseShape::smoothed_square(mhz(p.omega1_mhz), center, ns(p.omega1_fwhm_ns), ns(p.omega1_edge_ns)),
            omega2: PulseShape::gaussian(mhz(p.omega2_mhz), center, ns(p.omega2_fwhm_ns)),
            delta1: mhz(p.delta1_mhz),
            chirp: ChirpSpec {
                center_detuning: mhz(p.delta2_center_mhz),
                rate: p.chirp_rate_u * chirp_unit(),
                window: (0.0, duration),
            },
            duration,
        }
    }

    /// Square pulses of length `duration_ns` at the configured peaks, no chirp.
    pub fn square_schedule(&self, duration_ns: f64) -> PulseSchedule {
        let p = &self.physics;
        let duration = ns(duration_ns);
        PulseSchedule {
            omega1: PulseShape::constant(mhz(p.omega1_mhz)),
            omega2: PulseShape::constant(mhz(p.omega2_mhz)),
            delta1: mhz(p.delta1_mhz),
            chirp: ChirpSpec::fixed(mhz(p.delta2_center_mhz), (0.0, duration)),
            duration,
        }
    }

    /// Superatom at the mean atom number; noise draws replace `N` and `V`.
    pub fn model_spec(&self) -> ModelSpec {
        let m = &self.model;
        let v = match self.noise.blockade {
            BlockadeConfig::PointMass { value_mhz } => mhz(value_mhz),
            _ => 0.0,
        };
        ModelSpec::superatom(self.physics.mean_atoms, v, m.include_double)
            .with_light_shifts(m.light_shifts)
            .with_decay(DecayModel {
                gamma_e: mhz(m.gamma_e_mhz),
                gamma_r: mhz(m.gamma_r_mhz),
                loss_level: m.loss_level,
            })
    }

    pub fn noise_spec(&self, seed: u64) -> NoiseSpec {
        NoiseSpec {
            mean_atoms: self.physics.mean_atoms,
            poisson_atoms: self.noise.poisson_atoms,
            blockade: self.noise.blockade.to_distribution(),
            antithetic: self.noise.antithetic,
            intensity_jitter: self.noise.intensity_jitter,
            stratified: self.noise.stratified,
            seed,
        }
    }

    /// Every trial would be identical.
    pub fn is_deterministic(&self) -> bool {
        !self.noise.poisson_atoms
            && matches!(self.noise.blockade, BlockadeConfig::PointMass { .. })
            && self.noise.intensity_jitter == 0.0
    }

    /// Trials actually run per point.
    pub fn effective_trials(&self) -> usize {
        if self.is_deterministic() {
            1
        } else {
            self.trials
        }
    }

    pub fn retrieval_model(&self) -> RetrievalModel {
        RetrievalModel {
            eta_retrieval: self.retrieval.eta_retrieval,
            eta_detection: self.retrieval.eta_detection,
            splitter_ratio: self.retrieval.splitter_ratio,
        }
    }

    pub fn integrator_options(&self) -> IntegratorOptions {
        IntegratorOptions {
            step: ns(self.integrator.step_ns),
            norm_tolerance: self.integrator.norm_tolerance,
            dense_output_stride: usize::MAX,
        }
    }

    pub fn time_grid(&self, schedule: &PulseSchedule) -> Result<TimeGrid> {
        TimeGrid::new(schedule.duration, ns(self.integrator.step_ns))
    }
}

fn json_kind(v: &Value) -> &'static str {
    match v {
        Value::Null => "null",
        Value::Bool(_) => "boolean",
        Value::Number(_) => "number",
        Value::String(_) => "string",
        Value::Array(_) => "array",
        Value::Object(_) => "object",
    }
}

/// Deserializes and reports the dotted path of the first offending field.
fn serde_path_to_error(value: Value) -> Result<ScenarioConfig> {
    let mut track = serde_path_to_error::Track::new();
    let de = serde_path_to_error::Deserializer::new(value, &mut track);
    ScenarioConfig::deserialize(de).map_err(|e| {
        let path = track.path().to_string();
        let key = if path == "." || path.is_empty() { "<root>".to_string() } else { path };
        Error::config(key, e.to_string())
    })
}
