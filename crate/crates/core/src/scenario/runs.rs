//! Scenario runners: Rabi duration scan, pulse-area scans per chirp rate,
//! their peak summary, the Δ₁ detuning scan and the adiabaticity trace.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::config::ScenarioConfig;
use super::sweep::{sweep_execute, PointContext, PointRecord, Provenance, SweepResult, VERSION};
use crate::dynamics::{run_monte_carlo, ModelSpec};
use crate::error::{Error, Result};
use crate::fitting::{
    fit_asymmetric_gaussian, fit_damped_rabi_auto, peak_metrics, robustness_ratio, FitResult, PeakMetrics, ScanCurve,
};
use crate::photon::{hbt_probabilities, retain_multiples, MAX_QUANTA};
use crate::pulse::{adiabaticity_ratio, pulse_area, PulseSchedule};
use crate::quantum::estimate_atom_number;
use crate::units::{chirp_unit, mhz, ns, to_mhz, to_ns};

/// Fewest points a curve needs before it is fitted.
pub const MIN_FIT_POINTS: usize = 8;

pub fn provenance(cfg: &ScenarioConfig, scenario: &str) -> Provenance {
    Provenance {
        scenario: scenario.to_string(),
        config_label: cfg.label.clone(),
        config_hash: cfg.hash(),
        seed: cfg.seed,
        version: VERSION.to_string(),
    }
}

/// Runs the configured ensemble through `schedule` and maps the result
/// through retrieval and the HBT setup.
pub fn observe(cfg: &ScenarioConfig, model: &ModelSpec, schedule: &PulseSchedule, x: f64, seed: u64) -> Result<PointRecord> {
    let trials = cfg.effective_trials();
    let mc = run_monte_carlo(model, schedule, &cfg.noise_spec(seed), trials, &cfg.integrator_options())?;
    let retrieval = cfg.retrieval_model();
    let keep = cfg.retrieval.pair_retrieval;
    let per_trial: Vec<f64> = mc
        .per_trial
        .iter()
        .map(|d| hbt_probabilities(&retain_multiples(d, keep), &retrieval).p_click_sum)
        .collect();
    let pooled = hbt_probabilities(&retain_multiples(&mc.pooled, keep), &retrieval);
    let mut distribution = mc.pooled.probabilities().to_vec();
    distribution.resize(MAX_QUANTA + 1, 0.0);
    Ok(PointRecord {
        x,
        click_sum: pooled.p_click_sum,
        click_sum_stderr: standard_error(&per_trial, cfg.noise.antithetic),
        coincidence: pooled.p_coincidence,
        g2_measured: pooled.g2_measured,
        distribution,
    })
}

/// Standard error of the mean, treating antithetic pairs as one sample.
fn standard_error(values: &[f64], paired: bool) -> f64 {
    let groups: Vec<f64> = if paired {
        values.chunks(2).map(|c| c.iter().sum::<f64>() / c.len() as f64).collect()
    } else {
        values.to_vec()
    };
    let n = groups.len();
    if n < 2 {
        return 0.0;
    }
    let mean = groups.iter().sum::<f64>() / n as f64;
    let var = groups.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (var / n as f64).sqrt()
}

fn noise_seed(cfg: &ScenarioConfig, ctx: &PointContext) -> u64 {
    if cfg.noise.common_random_numbers {
        cfg.seed
    } else {
        ctx.seed
    }
}

/// Smallest fit uncertainty, as a fraction of the largest standard error of
/// the curve.
pub const SIGMA_FLOOR: f64 = 0.1;

/// Fit input. Points are weighted by their Monte-Carlo standard errors,
/// floored at `SIGMA_FLOOR` of the largest; noiseless runs are unweighted.
fn curve_of(records: &[PointRecord]) -> Result<ScanCurve> {
    let largest = records.iter().map(|r| r.click_sum_stderr).fold(0.0, f64::max);
    let sigma = (largest > 0.0).then(|| {
        records
            .iter()
            .map(|r| r.click_sum_stderr.max(SIGMA_FLOOR * largest))
            .collect()
    });
    ScanCurve::new(
        records.iter().map(|r| r.x).collect(),
        records.iter().map(|r| r.click_sum).collect(),
        sigma,
    )
}

fn fit_if_possible(records: &[PointRecord], fit: impl Fn(&ScanCurve) -> Result<FitResult>) -> Result<(Option<FitResult>, Option<PeakMetrics>)> {
    if records.len() < MIN_FIT_POINTS {
        return Ok((None, None));
    }
    let result = fit(&curve_of(records)?)?;
    let metrics = if result.degenerate { None } else { Some(peak_metrics(&result)?) };
    Ok((Some(result), metrics))
}

/// Click sum versus square-pulse length (µs axis). The damped-Rabi fit gives
/// `Ω_N` directly as `d`, and `N = Ω_N²/Ω²`.
pub fn run_rabi_scan(cfg: &ScenarioConfig, workers: usize) -> Result<SweepResult> {
    if cfg.physics.chirp_rate_u != 0.0 {
        return Err(Error::config("physics.chirp_rate_u", "the Rabi scan needs an unchirped drive"));
    }
    let model = cfg.model_spec();
    let axis: Vec<f64> = cfg.scans.rabi.durations_ns.values().into_iter().map(ns).collect();
    let records = sweep_execute(&axis, cfg.seed, workers, |ctx| {
        observe(cfg, &model, &cfg.square_schedule(to_ns(ctx.x)), ctx.x, noise_seed(cfg, &ctx))
    })?;
    let (fit, metrics) = fit_if_possible(&records, fit_damped_rabi_auto)?;

    let omega_eff = cfg.square_schedule(1.0).sample(0.0).omega_eff();
    let mut derived = BTreeMap::new();
    derived.insert("omega_eff_mhz".into(), to_mhz(omega_eff.abs()));
    derived.insert("omega_n_input_mhz".into(), to_mhz(cfg.physics.mean_atoms.sqrt() * omega_eff.abs()));
    if let Some(f) = fit.as_ref().filter(|f| !f.degenerate) {
        let d = f.params[3];
        derived.insert("omega_n_fit_mhz".into(), to_mhz(d));
        derived.insert("atom_number_estimate".into(), estimate_atom_number(d, omega_eff)?);
    }
    Ok(SweepResult {
        curve: "rabi".into(),
        axis_name: "duration".into(),
        axis_unit: "us".into(),
        parameters: BTreeMap::new(),
        records,
        fit,
        metrics,
        derived,
        provenance: provenance(cfg, "rabi"),
    })
}

/// Curve label for a chirp rate in units of u.
pub fn chirp_label(rate_u: f64) -> String {
    if rate_u == 0.0 {
        "alpha=0u".to_string()
    } else {
        format!("alpha={rate_u:+}u")
    }
}

/// Nominal collective area `∫|Ω_N| dt` of the configured sequence at mean `N`.
pub fn nominal_area(cfg: &ScenarioConfig) -> Result<f64> {
    let s = cfg.schedule();
    s.collective_area(cfg.physics.mean_atoms, &cfg.time_grid(&s)?)
}

/// Click sum versus collective pulse area (units of π) for each chirp rate,
/// the area being set by scaling the Ω₂ peak.
pub fn run_area_scan(cfg: &ScenarioConfig, chirp_rates_u: &[f64], workers: usize) -> Result<Vec<SweepResult>> {
    if chirp_rates_u.is_empty() {
        return Err(Error::config("scans.area.chirp_rates_u", "needs at least one chirp rate"));
    }
    let model = cfg.model_spec();
    let a0 = nominal_area(cfg)?;
    if a0 <= 0.0 {
        return Err(Error::config("physics.omega2_mhz", "sequence has zero pulse area"));
    }
    let axis = cfg.scans.area.areas_pi.values();
    chirp_rates_u
        .iter()
        .map(|&rate| {
            let mut base = cfg.schedule();
            base.chirp.rate = rate * chirp_unit();
            let records = sweep_execute(&axis, cfg.seed, workers, |ctx| {
                let s = base.scale_omega2(ctx.x * PI / a0);
                observe(cfg, &model, &s, ctx.x, noise_seed(cfg, &ctx))
            })?;
            let (fit, metrics) = fit_if_possible(&records, fit_damped_rabi_auto)?;
            let mut parameters = BTreeMap::new();
            parameters.insert("chirp_rate_u".into(), rate);
            let mut derived = BTreeMap::new();
            derived.insert("area_pi_at_configured_peak".into(), a0 / PI);
            Ok(SweepResult {
                curve: chirp_label(rate),
                axis_name: "area".into(),
                axis_unit: "pi".into(),
                parameters,
                records,
                fit,
                metrics,
                derived,
                provenance: provenance(cfg, "area-scan"),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChirpSummaryRow {
    pub chirp_rate_u: f64,
    pub peak_position_pi: f64,
    pub peak_value: f64,
    pub width80_pi: f64,
    /// `g2_measured` of the sampled point nearest the fitted peak.
    pub g2_at_peak: Option<f64>,
    /// `width80 / width80(α = 0)`.
    pub robustness: f64,
    pub edge_peak: bool,
    pub plateau: bool,
    pub oscillating: bool,
    pub fit_converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChirpSummary {
    pub rows: Vec<ChirpSummaryRow>,
    pub provenance: Provenance,
}

/// Peak position, value and 80 % width of every fitted area scan, and the
/// width relative to the unchirped curve.
pub fn run_chirp_summary(results: &[SweepResult]) -> Result<ChirpSummary> {
    if results.len() < 2 {
        return Err(Error::invalid("chirp summary needs at least two chirp rates"));
    }
    let rate = |r: &SweepResult| {
        r.parameters
            .get("chirp_rate_u")
            .copied()
            .ok_or_else(|| Error::invalid(format!("curve {} has no chirp rate", r.curve)))
    };
    let mut reference = None;
    for r in results {
        if rate(r)? == 0.0 {
            reference = r.metrics.map(|m| m.width80);
        }
    }
    let reference = reference.ok_or_else(|| Error::invalid("chirp summary needs a fitted α = 0 curve"))?;
    let rows = results
        .iter()
        .map(|r| {
            let m = r
                .metrics
                .ok_or_else(|| Error::invalid(format!("curve {} has no fitted peak", r.curve)))?;
            let nearest = r
                .records
                .iter()
                .min_by(|a, b| (a.x - m.peak_position).abs().total_cmp(&(b.x - m.peak_position).abs()))
                .expect("fitted curves are non-empty");
            Ok(ChirpSummaryRow {
                chirp_rate_u: rate(r)?,
                peak_position_pi: m.peak_position,
                peak_value: m.peak_value,
                width80_pi: m.width80,
                g2_at_peak: nearest.g2_measured,
                robustness: robustness_ratio(m.width80, reference)?,
                edge_peak: m.edge_peak,
                plateau: m.plateau,
                oscillating: m.secondary_minimum,
                fit_converged: r.fit.as_ref().is_some_and(|f| f.converged),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut provenance = results[0].provenance.clone();
    provenance.scenario = "chirp-summary".into();
    Ok(ChirpSummary { rows, provenance })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetuningScan {
    pub chirped: SweepResult,
    pub pi_pulse: SweepResult,
    /// `width80(chirped) / width80(π-pulse)`, in MHz of Δ₁.
    pub width_ratio: f64,
    pub chirped_sigma_left_mhz: f64,
    pub chirped_sigma_right_mhz: f64,
    /// The chirped curve falls off more slowly on the side where `|Δ₁|` shrinks.
    pub slower_falloff_toward_smaller_abs_delta1: bool,
}

fn detuning_schedule(cfg: &ScenarioConfig, fwhm_ns: f64, rate_u: f64) -> PulseSchedule {
    let mut s = cfg.schedule();
    s.omega2.fwhm = ns(fwhm_ns);
    s.chirp.rate = rate_u * chirp_unit();
    s
}

/// Ω₂ scale in `bounds` maximising the click sum at the configured Δ₁:
/// a coarse grid followed by golden-section refinement around its best point.
pub fn optimize_omega2_scale(
    cfg: &ScenarioConfig,
    model: &ModelSpec,
    base: &PulseSchedule,
    bounds: (f64, f64),
    workers: usize,
) -> Result<(f64, f64)> {
    const GRID: usize = 13;
    const REFINE: usize = 14;
    let (lo, hi) = bounds;
    let grid: Vec<f64> = (0..GRID).map(|k| lo + (hi - lo) * k as f64 / (GRID - 1) as f64).collect();
    let eval = |s: f64| observe(cfg, model, &base.scale_omega2(s), s, cfg.seed).map(|r| r.click_sum);
    let coarse = sweep_execute(&grid, cfg.seed, workers, |ctx| {
        observe(cfg, model, &base.scale_omega2(ctx.x), ctx.x, cfg.seed)
    })?;
    let best = (0..GRID)
        .max_by(|&a, &b| coarse[a].click_sum.total_cmp(&coarse[b].click_sum))
        .expect("grid is non-empty");
    let (mut a, mut b) = (grid[best.saturating_sub(1)], grid[(best + 1).min(GRID - 1)]);
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let (mut c, mut d) = (b - r * (b - a), a + r * (b - a));
    let (mut fc, mut fd) = (eval(c)?, eval(d)?);
    for _ in 0..REFINE {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = eval(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = eval(d)?;
        }
    }
    let (s_best, y_best) = if fc > fd { (c, fc) } else { (d, fd) };
    if coarse[best].click_sum > y_best {
        Ok((grid[best], coarse[best].click_sum))
    } else {
        Ok((s_best, y_best))
    }
}

/// Click sum versus Δ₁ (MHz) for the chirped and the π-pulse scheme, each
/// with its Ω₂ scale optimised at the configured Δ₁, fitted with asymmetric
/// Gaussians.
pub fn run_detuning_scan(cfg: &ScenarioConfig, workers: usize) -> Result<DetuningScan> {
    let d = &cfg.scans.detuning;
    let model = cfg.model_spec();
    let axis = d.delta1_mhz.values();
    let scan = |name: &str, fwhm: f64, rate: f64| -> Result<SweepResult> {
        let base = detuning_schedule(cfg, fwhm, rate);
        let (scale, optimum) = optimize_omega2_scale(cfg, &model, &base, d.scale_bounds, workers)?;
        let tuned = base.scale_omega2(scale);
        let records = sweep_execute(&axis, cfg.seed, workers, |ctx| {
            let mut s = tuned;
            s.delta1 = mhz(ctx.x);
            observe(cfg, &model, &s, ctx.x, noise_seed(cfg, &ctx))
        })?;
        let (fit, metrics) = fit_if_possible(&records, fit_asymmetric_gaussian)?;
        let mut parameters = BTreeMap::new();
        parameters.insert("chirp_rate_u".into(), rate);
        parameters.insert("omega2_fwhm_ns".into(), fwhm);
        let mut derived = BTreeMap::new();
        derived.insert("omega2_scale".into(), scale);
        derived.insert("click_sum_at_optimum".into(), optimum);
        Ok(SweepResult {
            curve: name.into(),
            axis_name: "delta1".into(),
            axis_unit: "MHz".into(),
            parameters,
            records,
            fit,
            metrics,
            derived,
            provenance: provenance(cfg, "detuning-scan"),
        })
    };
    let chirped = scan("chirped", d.chirped_fwhm_ns, d.chirp_rate_u)?;
    let pi_pulse = scan("pi-pulse", d.pi_fwhm_ns, 0.0)?;
    let width = |r: &SweepResult| {
        r.metrics
            .map(|m| m.width80)
            .ok_or_else(|| Error::invalid(format!("{} curve could not be fitted", r.curve)))
    };
    let width_ratio = robustness_ratio(width(&chirped)?, width(&pi_pulse)?)?;
    let fit = chirped.fit.as_ref().expect("width implies a fit");
    let (sl, sr) = (fit.params[2], fit.params[3]);
    let slower = if cfg.physics.delta1_mhz < 0.0 { sr > sl } else { sl > sr };
    Ok(DetuningScan {
        chirped,
        pi_pulse,
        width_ratio,
        chirped_sigma_left_mhz: sl,
        chirped_sigma_right_mhz: sr,
        slower_falloff_toward_smaller_abs_delta1: slower,
    })
}

/// Collective Rabi frequency, two-photon detuning and adiabaticity ratio of
/// the configured sequence at the mean atom number.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdiabaticityReport {
    pub times_ns: Vec<f64>,
    pub omega_n_mhz: Vec<f64>,
    pub delta_mhz: Vec<f64>,
    pub ratio: Vec<f64>,
    /// `None` when the gap closes somewhere (`Ω_N = δ = 0`).
    pub max_ratio: Option<f64>,
    pub area_pi: f64,
    pub provenance: Provenance,
}

pub fn run_adiabaticity(cfg: &ScenarioConfig) -> Result<AdiabaticityReport> {
    let s = cfg.schedule();
    let grid = cfg.time_grid(&s)?;
    let (omega, delta) = s.effective_trace(cfg.physics.mean_atoms, &grid)?;
    let ratio = adiabaticity_ratio(&omega, &delta, grid.step());
    let max = ratio.iter().copied().fold(0.0, f64::max);
    Ok(AdiabaticityReport {
        times_ns: grid.times().map(to_ns).collect(),
        omega_n_mhz: omega.iter().map(|&w| to_mhz(w)).collect(),
        delta_mhz: delta.iter().map(|&d| to_mhz(d)).collect(),
        ratio,
        max_ratio: max.is_finite().then_some(max),
        area_pi: pulse_area(&omega, grid.step()) / PI,
        provenance: provenance(cfg, "adiabaticity"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(cfg: ScenarioConfig) -> ScenarioConfig {
        cfg.apply_override("integrator.step_ns", "2")
            .unwrap()
            .apply_override("scans.area.areas_pi", r#"{"start":0.2,"stop":3.0,"points":12}"#)
            .unwrap()
    }

    #[test]
    fn standard_error_pairs() {
        assert_eq!(standard_error(&[1.0], false), 0.0);
        let v = [1.0, 3.0, 2.0, 2.0];
        assert!((standard_error(&v, true) - 0.0).abs() < 1e-15);
        assert!((standard_error(&v, false) - (2.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn chirp_labels() {
        assert_eq!(chirp_label(0.0), "alpha=0u");
        assert_eq!(chirp_label(4.0), "alpha=+4u");
        assert_eq!(chirp_label(-2.0), "alpha=-2u");
    }

    #[test]
    fn ideal_area_scan_peaks_at_pi() {
        let cfg = small(ScenarioConfig::defaults())
            .apply_override("model.gamma_e_mhz", "0")
            .unwrap()
            .apply_override("scans.area.areas_pi", r#"{"start":0.1,"stop":2.0,"points":20}"#)
            .unwrap();
        let r = &run_area_scan(&cfg, &[0.0], 2).unwrap()[0];
        let m = r.metrics.unwrap();
        assert!((m.peak_position - 1.0).abs() < 1e-3, "{m:?}");
        assert!((m.peak_value - 1.0).abs() < 1e-3, "{m:?}");
        assert!(r.records.iter().all(|p| p.g2_measured.is_none() || p.g2_measured == Some(0.0)));
    }

    #[test]
    fn summary_needs_unchirped_curve() {
        let cfg = small(ScenarioConfig::defaults());
        let rs = run_area_scan(&cfg, &[1.0, 2.0], 1).unwrap();
        assert!(run_chirp_summary(&rs).is_err());
        let rs = run_area_scan(&cfg, &[0.0, 2.0], 1).unwrap();
        let s = run_chirp_summary(&rs).unwrap();
        assert_eq!(s.rows.len(), 2);
        assert_eq!(s.rows[0].robustness, 1.0);
        assert!(run_chirp_summary(&rs[..1]).is_err());
    }

    #[test]
    fn rabi_scan_needs_zero_chirp() {
        let cfg = ScenarioConfig::defaults().apply_override("physics.chirp_rate_u", "1").unwrap();
        assert!(matches!(run_rabi_scan(&cfg, 1), Err(Error::Config { .. })));
    }

    #[test]
    fn adiabaticity_trace() {
        let cfg = ScenarioConfig::defaults().apply_override("physics.chirp_rate_u", "4").unwrap();
        let rep = run_adiabaticity(&cfg).unwrap();
        assert_eq!(rep.times_ns.len(), rep.ratio.len());
        assert!((rep.area_pi - nominal_area(&cfg).unwrap() / PI).abs() < 1e-12);
        assert!(rep.max_ratio.is_some());
    }
}
