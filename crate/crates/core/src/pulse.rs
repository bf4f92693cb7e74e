//! Pulse envelopes, the linear chirp of the upper-transition detuning, and the
//! quantities derived from a schedule: effective collective Rabi frequency,
//! pulse area and the pointwise adiabaticity ratio.

use std::f64::consts::{LN_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShapeKind {
    Gaussian,
    /// Flat top with raised-cosine edges of width `edge`, centred on the
    /// half-maximum points.
    SmoothedSquare,
    Constant,
}

/// Envelope of one drive. `peak` in rad/µs, times in µs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseShape {
    pub kind: ShapeKind,
    pub peak: f64,
    pub center: f64,
    pub fwhm: f64,
    #[serde(default)]
    pub edge: f64,
}

impl PulseShape {
    pub fn gaussian(peak: f64, center: f64, fwhm: f64) -> Self {
        Self {
            kind: ShapeKind::Gaussian,
            peak,
            center,
            fwhm,
            edge: 0.0,
        }
    }

    pub fn smoothed_square(peak: f64, center: f64, fwhm: f64, edge: f64) -> Self {
        Self {
            kind: ShapeKind::SmoothedSquare,
            peak,
            center,
            fwhm,
            edge,
        }
    }

    pub fn constant(peak: f64) -> Self {
        Self {
            kind: ShapeKind::Constant,
            peak,
            center: 0.0,
            fwhm: f64::INFINITY,
            edge: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.peak >= 0.0) {
            return Err(Error::invalid(format!("pulse peak must be ≥ 0, got {}", self.peak)));
        }
        if !(self.fwhm > 0.0) {
            return Err(Error::invalid(format!("pulse FWHM must be > 0, got {}", self.fwhm)));
        }
        if self.kind == ShapeKind::SmoothedSquare && !(self.edge >= 0.0 && self.edge <= self.fwhm) {
            return Err(Error::invalid(format!(
                "smoothed-square edge must lie in [0, fwhm], got {}",
                self.edge
            )));
        }
        Ok(())
    }

    pub fn with_peak(mut self, peak: f64) -> Self {
        self.peak = peak;
        self
    }

    /// Time interval outside which the envelope vanishes (or is negligible
    /// for a Gaussian, where the centre is returned as a degenerate interval).
    fn support(&self) -> Option<(f64, f64)> {
        match self.kind {
            ShapeKind::SmoothedSquare => {
                let half = 0.5 * (self.fwhm + self.edge);
                Some((self.center - half, self.center + half))
            }
            ShapeKind::Gaussian => Some((self.center, self.center)),
            ShapeKind::Constant => None,
        }
    }

    /// Gaussian standard deviation for the configured FWHM.
    pub fn sigma(&self) -> f64 {
        self.fwhm / (2.0 * (2.0 * LN_2).sqrt())
    }
}

/// Envelope value at time `t`.
pub fn shape_value(s: &PulseShape, t: f64) -> f64 {
    match s.kind {
        ShapeKind::Gaussian => {
            let x = (t - s.center) / s.fwhm;
            s.peak * (-4.0 * LN_2 * x * x).exp()
        }
        ShapeKind::SmoothedSquare => {
            let d = (t - s.center).abs();
            let half = 0.5 * s.fwhm;
            if s.edge == 0.0 {
                return if d < half {
                    s.peak
                } else if d == half {
                    0.5 * s.peak
                } else {
                    0.0
                };
            }
            let inner = half - 0.5 * s.edge;
            if d <= inner {
                s.peak
            } else if d >= half + 0.5 * s.edge {
                0.0
            } else {
                0.5 * s.peak * (1.0 + (PI * (d - inner) / s.edge).cos())
            }
        }
        ShapeKind::Constant => s.peak,
    }
}

/// Linear sweep of the upper-transition detuning Δ₂, clamped outside its window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChirpSpec {
    pub center_detuning: f64,
    /// rad/µs per µs, signed.
    pub rate: f64,
    pub window: (f64, f64),
}

impl ChirpSpec {
    pub fn fixed(center_detuning: f64, window: (f64, f64)) -> Self {
        Self {
            center_detuning,
            rate: 0.0,
            window,
        }
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.window.0 + self.window.1)
    }
}

pub fn chirp_value(c: &ChirpSpec, t: f64) -> f64 {
    let tc = t.clamp(c.window.0, c.window.1);
    c.center_detuning + c.rate * (tc - c.midpoint())
}

/// Exact `∫₀ᵗ Δ₂(s) ds` of the clamped linear chirp.
pub fn chirp_integral(c: &ChirpSpec, t: f64) -> f64 {
    let m = c.midpoint();
    let (a, b) = (c.window.0 - m, c.window.1 - m);
    // antiderivative of clamp(s) − m, zero at the midpoint
    let g = |s: f64| {
        let x = s - m;
        if x <= a {
            0.5 * a * a + a * (x - a)
        } else if x >= b {
            0.5 * b * b + b * (x - b)
        } else {
            0.5 * x * x
        }
    };
    c.center_detuning * t + c.rate * (g(t) - g(0.0))
}

/// Drive parameters at one instant (rad/µs).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DriveSample {
    pub omega1: f64,
    pub omega2: f64,
    pub delta1: f64,
    pub delta2: f64,
}

impl DriveSample {
    /// Signed single-atom two-photon Rabi frequency `Ω₁Ω₂/(2Δ₁)`.
    #[inline]
    pub fn omega_eff(&self) -> f64 {
        self.omega1 * self.omega2 / (2.0 * self.delta1)
    }

    #[inline]
    pub fn two_photon_detuning(&self) -> f64 {
        self.delta1 + self.delta2
    }

    /// Change of δ from the intermediate-state light shifts of `|g⟩` (by Ω₁
    /// across Δ₁) and `|r⟩` (by Ω₂ across Δ₂), each the exact two-level
    /// dressed shift; `Ω₁²/(4Δ₁) + Ω₂²/(4Δ₂)` when far detuned.
    #[inline]
    pub fn differential_light_shift(&self) -> f64 {
        dressed_shift(self.omega1, self.delta1) + dressed_shift(self.omega2, self.delta2)
    }
}

/// `sgn(Δ) · ½(√(Δ² + Ω²) − |Δ|)`, zero on resonance.
#[inline]
fn dressed_shift(omega: f64, delta: f64) -> f64 {
    if delta == 0.0 || omega == 0.0 {
        return 0.0;
    }
    let a = delta.abs();
    delta.signum() * 0.5 * omega * omega / (a.hypot(omega) + a)
}

/// Complete two-photon excitation sequence of duration `2T`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseSchedule {
    pub omega1: PulseShape,
    pub omega2: PulseShape,
    pub delta1: f64,
    pub chirp: ChirpSpec,
    pub duration: f64,
}

const SUPPORT_SLACK: f64 = 1e-9;

impl PulseSchedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.duration > 0.0) {
            return Err(Error::invalid(format!("duration must be > 0, got {}", self.duration)));
        }
        self.omega1.validate()?;
        self.omega2.validate()?;
        let (w0, w1) = self.chirp.window;
        if !(w0 <= w1) {
            return Err(Error::invalid(format!("chirp window ({w0}, {w1}) is not ordered")));
        }
        let inside = |a: f64, b: f64| a >= -SUPPORT_SLACK && b <= self.duration + SUPPORT_SLACK;
        if !inside(w0, w1) {
            return Err(Error::invalid("chirp window extends outside [0, duration]"));
        }
        for (name, s) in [("omega1", &self.omega1), ("omega2", &self.omega2)] {
            if let Some((a, b)) = s.support() {
                if !inside(a, b) {
                    return Err(Error::invalid(format!(
                        "{name} support [{a}, {b}] µs extends outside [0, {}] µs",
                        self.duration
                    )));
                }
            }
        }
        Ok(())
    }

    #[inline]
    pub fn sample(&self, t: f64) -> DriveSample {
        DriveSample {
            omega1: shape_value(&self.omega1, t),
            omega2: shape_value(&self.omega2, t),
            delta1: self.delta1,
            delta2: chirp_value(&self.chirp, t),
        }
    }

    pub fn sample_checked(&self, t: f64) -> Result<DriveSample> {
        if !(t >= -SUPPORT_SLACK && t <= self.duration + SUPPORT_SLACK) {
            return Err(Error::OutOfRange {
                t,
                duration: self.duration,
            });
        }
        Ok(self.sample(t))
    }

    /// Schedule whose single-atom effective drive is the constant `omega_eff`
    /// with `δ(t)` swept linearly at `rate` through `delta_center` at `duration/2`.
    /// Uses `Δ₁ = 1`, `Ω₁ = 2`, so `Ω = Ω₂`.
    pub fn two_level(omega_eff: f64, delta_center: f64, rate: f64, duration: f64) -> Self {
        let delta1 = 1.0;
        let (omega2, delta1) = if omega_eff < 0.0 {
            (-omega_eff, -delta1)
        } else {
            (omega_eff, delta1)
        };
        Self {
            omega1: PulseShape::constant(2.0),
            omega2: PulseShape::constant(omega2),
            delta1,
            chirp: ChirpSpec {
                center_detuning: delta_center - delta1,
                rate,
                window: (0.0, duration),
            },
            duration,
        }
    }

    /// Same schedule with the upper-transition peak scaled by `s`.
    pub fn scale_omega2(mut self, s: f64) -> Self {
        self.omega2.peak *= s;
        self
    }

    /// Samples `Ω_N(t)` and `δ(t)` on a grid.
    pub fn effective_trace(&self, n_atoms: f64, grid: &TimeGrid) -> Result<(Vec<f64>, Vec<f64>)> {
        if self.delta1 == 0.0 {
            return Err(Error::EliminationUndefined);
        }
        let root_n = n_atoms.sqrt();
        let mut omega = Vec::with_capacity(grid.len());
        let mut delta = Vec::with_capacity(grid.len());
        for t in grid.times() {
            let s = self.sample(t);
            omega.push(root_n * s.omega_eff());
            delta.push(s.two_photon_detuning());
        }
        Ok((omega, delta))
    }

    /// `∫|Ω_N| dt` on the given grid.
    pub fn collective_area(&self, n_atoms: f64, grid: &TimeGrid) -> Result<f64> {
        let (omega, _) = self.effective_trace(n_atoms, grid)?;
        Ok(pulse_area(&omega, grid.step()))
    }
}

/// `(Ω_N(t), δ(t))` with `Ω_N = √N · Ω₁Ω₂/(2Δ₁)` and `δ = Δ₁ + Δ₂(t)`.
pub fn effective_rabi_and_delta(schedule: &PulseSchedule, n_atoms: f64, t: f64) -> Result<(f64, f64)> {
    let s = schedule.sample_checked(t)?;
    if s.delta1 == 0.0 {
        return Err(Error::EliminationUndefined);
    }
    Ok((n_atoms.sqrt() * s.omega_eff(), s.two_photon_detuning()))
}

/// Uniform grid `t_k = k·h`, `k = 0..=n`, with `h` the largest step not
/// exceeding the requested one that divides the duration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    steps: usize,
    step: f64,
}

impl TimeGrid {
    pub fn new(duration: f64, max_step: f64) -> Result<Self> {
        if !(duration > 0.0) || !(max_step > 0.0) {
            return Err(Error::invalid("time grid needs positive duration and step"));
        }
        let steps = ((duration / max_step) - 1e-9).ceil().max(1.0) as usize;
        Ok(Self {
            steps,
            step: duration / steps as f64,
        })
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Number of grid points (`steps + 1`).
    pub fn len(&self) -> usize {
        self.steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.step
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.steps).map(move |k| self.time(k))
    }
}

/// Value returned by [`adiabaticity_ratio`] where the instantaneous gap closes.
pub const GAP_CLOSED: f64 = f64::INFINITY;

/// Pointwise `|Ω̇_N δ − Ω_N δ̇| / (2 (Ω_N² + δ²)^{3/2})`.
pub fn adiabaticity_ratio_at(omega_n: f64, omega_n_dot: f64, delta: f64, delta_dot: f64) -> f64 {
    let gap_sq = omega_n * omega_n + delta * delta;
    if gap_sq == 0.0 {
        return GAP_CLOSED;
    }
    (omega_n_dot * delta - omega_n * delta_dot).abs() / (2.0 * gap_sq.powf(1.5))
}

/// Adiabaticity ratio along uniformly sampled `Ω_N(t)`, `δ(t)`. Derivatives
/// are central differences with the grid step (one-sided at the ends).
pub fn adiabaticity_ratio(omega_n: &[f64], delta: &[f64], step: f64) -> Vec<f64> {
    assert_eq!(omega_n.len(), delta.len());
    let n = omega_n.len();
    let deriv = |y: &[f64], k: usize| -> f64 {
        if n < 2 {
            0.0
        } else if k == 0 {
            (y[1] - y[0]) / step
        } else if k == n - 1 {
            (y[n - 1] - y[n - 2]) / step
        } else {
            (y[k + 1] - y[k - 1]) / (2.0 * step)
        }
    };
    (0..n)
        .map(|k| adiabaticity_ratio_at(omega_n[k], deriv(omega_n, k), delta[k], deriv(delta, k)))
        .collect()
}

/// Trapezoidal `∫|Ω_N(t)| dt` over uniformly spaced samples.
pub fn pulse_area(omega_n: &[f64], step: f64) -> f64 {
    if omega_n.len() < 2 {
        return 0.0;
    }
    let inner: f64 = omega_n[1..omega_n.len() - 1].iter().map(|w| w.abs()).sum();
    step * (inner + 0.5 * (omega_n[0].abs() + omega_n[omega_n.len() - 1].abs()))
}
