//! Acceptance suite. Runs every criterion, prints one line each and exits
//! non-zero if any fails.

use std::f64::consts::{LN_2, PI};
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use rydberg_arp::dynamics::{
    evolve_from_ground, evolve_schrodinger, landau_zener_probability, IntegratorOptions, ModelSpec,
};
use rydberg_arp::fitting::{fit_damped_rabi_auto, FitModel, ScanCurve};
use rydberg_arp::linalg::CMatrix;
use rydberg_arp::photon::{g2_of_distribution, hbt_probabilities, thin_distribution, ExcitationDistribution, RetrievalModel};
use rydberg_arp::pulse::{ChirpSpec, PulseSchedule, PulseShape};
use rydberg_arp::quantum::{dressed_hamiltonian, dressed_states, eigenstate_population, PairShifts};
use rydberg_arp::scenario::output::{
    adiabaticity_csv, detuning_summary_json, emit_plot_data, summary_csv, sweep_csv, sweep_summary_json, to_json,
};
use rydberg_arp::scenario::{
    run_adiabaticity, run_area_scan, run_chirp_summary, run_detuning_scan, run_rabi_scan, ScenarioConfig, SweepResult,
};
use rydberg_arp::units::{chirp_unit, mhz};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn opts(step: f64, stride: usize) -> IntegratorOptions {
    IntegratorOptions {
        step,
        norm_tolerance: 1e-6,
        dense_output_stride: stride,
    }
}

/// Largest deviation from `sin²(Ωt/2)` over five periods, and the norm drift.
fn rabi_error(step: f64) -> (f64, f64, usize) {
    let omega = 2.0 * PI;
    let sched = PulseSchedule::two_level(omega, 0.0, 0.0, 5.0);
    let traj = evolve_from_ground(&ModelSpec::full_blockade(1.0), &sched, &opts(step, 1)).unwrap();
    let err = traj
        .times
        .iter()
        .zip(traj.population("R").unwrap())
        .map(|(t, p)| (p - (omega * t / 2.0).sin().powi(2)).abs())
        .fold(0.0, f64::max);
    (err, traj.max_norm_drift, traj.steps)
}

fn rabi_oracle() -> Outcome {
    let (err, _, _) = rabi_error(5e-4);
    outcome(err < 1e-6, format!("max |P_R − sin²| = {err:.2e} (< 1e-6)"))
}

fn hamiltonian_at(model: &ModelSpec, sched: &PulseSchedule, t: f64) -> CMatrix {
    let mut h = CMatrix::zeros(model.dim());
    model.fill_hamiltonian(&sched.sample(t), &mut h);
    h
}

fn landau_zener() -> Outcome {
    let omega_n = 10.0;
    let model = ModelSpec::full_blockade(1.0);
    let mut worst: f64 = 0.0;
    let mut lines = Vec::new();
    for x in [0.1, LN_2, 1.0, 10.0] {
        let alpha = PI * omega_n * omega_n / (2.0 * x);
        // sweep ±20 Ω_N
        let duration = 40.0 * omega_n / alpha;
        let sched = PulseSchedule::two_level(omega_n, 0.0, alpha, duration);
        let (_, vectors) = hamiltonian_at(&model, &sched, 0.0).eigh();
        let psi0 = vectors
            .into_iter()
            .max_by(|a, b| a[0].norm_sqr().total_cmp(&b[0].norm_sqr()))
            .unwrap();
        let traj = evolve_schrodinger(&model, &sched, &psi0, &opts(2e-4, usize::MAX)).unwrap();
        let last = traj.amplitudes.unwrap().pop().unwrap();
        let sim = eigenstate_population(&hamiltonian_at(&model, &sched, duration), &last, 1);
        let exact = 1.0 - (-x).exp();
        let formula = landau_zener_probability(omega_n, alpha).unwrap();
        worst = worst.max((sim - exact).abs()).max((formula - exact).abs());
        lines.push(format!("p({x:.3})={sim:.4}"));
    }
    outcome(worst < 1e-3, format!("{}; max error {worst:.2e} (< 1e-3)", lines.join(" ")))
}

fn dressed_state_conformance() -> Outcome {
    let mut worst: f64 = 0.0;
    for i in 0..100 {
        let omega_n = 0.1 + 49.9 * i as f64 / 99.0;
        for j in 0..100 {
            let delta = -50.0 + 100.0 * j as f64 / 99.0;
            let d = dressed_states(omega_n, delta).unwrap();
            let (values, vectors) = dressed_hamiltonian(omega_n, delta).eigh();
            for (analytic, energy) in [(d.plus, d.plus_energy), (d.minus, d.minus_energy)] {
                let k = (0..2)
                    .min_by(|&a, &b| (values[a] - energy).abs().total_cmp(&(values[b] - energy).abs()))
                    .unwrap();
                let v = &vectors[k];
                let overlap: C64 = v.iter().zip(&analytic).map(|(a, b)| a.conj() * b).sum();
                let phase = overlap / overlap.norm();
                let residual = v
                    .iter()
                    .zip(&analytic)
                    .map(|(a, b)| (b - a * phase).norm_sqr())
                    .sum::<f64>()
                    .sqrt();
                worst = worst.max(residual).max((values[k] - energy).abs());
            }
        }
    }
    outcome(worst < 1e-10, format!("max vector/energy residual {worst:.2e} on 100×100 grid (< 1e-10)"))
}

/// Gaussian effective drive with a linear sweep of δ through resonance.
fn random_smooth_schedule(rng: &mut ChaCha8Rng) -> PulseSchedule {
    let omega = mhz(rng.random_range(8.0..16.0));
    let duration = rng.random_range(2.0..4.0);
    let span = rng.random_range(6.0..12.0) * omega;
    let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
    let mut s = PulseSchedule::two_level(omega, 0.0, sign * span / duration, duration);
    s.omega1 = PulseShape::gaussian(2.0, duration / 2.0, duration * rng.random_range(0.3..0.45));
    s
}

fn adiabatic_transfer() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let model = ModelSpec::full_blockade(1.0);
    let (mut accepted, mut rejected) = (0, 0);
    let mut worst = f64::INFINITY;
    let mut max_ratio: f64 = 0.0;
    while accepted < 10 && rejected < 100 {
        let sched = random_smooth_schedule(&mut rng);
        let traj = evolve_from_ground(&model, &sched, &opts(5e-4, 1)).unwrap();
        let ratio = traj.adiabaticity.iter().cloned().fold(0.0, f64::max);
        if ratio > 0.05 {
            rejected += 1;
            continue;
        }
        accepted += 1;
        max_ratio = max_ratio.max(ratio);
        worst = worst.min(traj.final_population("R").unwrap());
    }
    outcome(
        accepted == 10 && worst >= 0.99,
        format!("{accepted} schedules (max ratio {max_ratio:.3}, {rejected} drawn above 0.05), min P_R {worst:.5} (≥ 0.99)"),
    )
}

fn collective_enhancement() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let sched = PulseSchedule {
            omega1: PulseShape::smoothed_square(mhz(2.3), 0.25, 0.467, 0.03),
            omega2: PulseShape::gaussian(mhz(10.7) * rng.random_range(3.0..10.0), 0.25, 0.188),
            delta1: mhz(-40.0),
            chirp: ChirpSpec {
                center_detuning: mhz(40.0 + rng.random_range(-1.0..1.0)),
                rate: rng.random_range(-6.0..6.0) * chirp_unit(),
                window: (0.0, 0.5),
            },
            duration: 0.5,
        };
        for n in 2..=5 {
            let full = ModelSpec::FullEnsemble {
                n_atoms: n,
                pair_shifts: Some(PairShifts::uniform(n, 1e4)),
            };
            let o = opts(1e-4, usize::MAX);
            let a = evolve_from_ground(&full, &sched, &o).unwrap().final_distribution;
            let b = evolve_from_ground(&ModelSpec::full_blockade(n as f64), &sched, &o)
                .unwrap()
                .final_distribution;
            for k in 0..=1 {
                worst = worst.max((a.p(k) - b.p(k)).abs());
            }
        }
    }
    outcome(worst < 1e-3, format!("max population difference {worst:.2e} over N = 2..5 × 10 schedules (< 1e-3)"))
}

fn random_distribution(rng: &mut ChaCha8Rng) -> ExcitationDistribution {
    let w: Vec<f64> = (0..4).map(|_| rng.random_range(0.0..1.0)).collect();
    let s: f64 = w.iter().sum();
    ExcitationDistribution::new(w.iter().map(|x| x / s).collect()).unwrap()
}

/// Click probabilities by enumerating every photon's fate: lost before
/// detection, or registered at detector A or B.
fn brute_force_hbt(d: &ExcitationDistribution, r: &RetrievalModel) -> (f64, f64, f64) {
    let eta = r.eta_retrieval * r.eta_detection;
    let fates = [1.0 - eta, eta * r.splitter_ratio, eta * (1.0 - r.splitter_ratio)];
    let (mut a, mut b, mut ab) = (0.0, 0.0, 0.0);
    for n in 0..=d.n_max() {
        for code in 0..3usize.pow(n as u32) {
            let (mut prob, mut hit_a, mut hit_b, mut c) = (d.p(n), false, false, code);
            for _ in 0..n {
                prob *= fates[c % 3];
                hit_a |= c % 3 == 1;
                hit_b |= c % 3 == 2;
                c /= 3;
            }
            if hit_a {
                a += prob;
            }
            if hit_b {
                b += prob;
            }
            if hit_a && hit_b {
                ab += prob;
            }
        }
    }
    (a, b, ab)
}

fn photon_statistics() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (mut compose, mut g2, mut hbt): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for _ in 0..1000 {
        let d = random_distribution(&mut rng);
        let (x, y) = (rng.random_range(0.0..=1.0), rng.random_range(0.0..=1.0));
        let twice = thin_distribution(&thin_distribution(&d, x), y);
        let once = thin_distribution(&d, x * y);
        for k in 0..=d.n_max() {
            compose = compose.max((twice.p(k) - once.p(k)).abs());
        }
        let eta = rng.random_range(0.01..=1.0);
        let (g, gt) = (g2_of_distribution(&d).unwrap(), g2_of_distribution(&thin_distribution(&d, eta)).unwrap());
        g2 = g2.max((g - gt).abs() / g.max(1e-300));
        let r = RetrievalModel {
            eta_retrieval: rng.random_range(0.0..=1.0),
            eta_detection: rng.random_range(0.0..=1.0),
            splitter_ratio: rng.random_range(0.0..=1.0),
        };
        let out = hbt_probabilities(&d, &r);
        let (a, b, ab) = brute_force_hbt(&d, &r);
        hbt = hbt.max((out.p_click_a - a).abs()).max((out.p_click_b - b).abs()).max((out.p_coincidence - ab).abs());
    }
    outcome(
        compose < 1e-14 && g2 < 1e-12 && hbt < 1e-14,
        format!("composition {compose:.1e}, g² invariance {g2:.1e} (< 1e-12), HBT vs enumeration {hbt:.1e} over 1000 cases"),
    )
}

fn fit_recovery() -> Outcome {
    let truth = [0.06, 0.02, 0.5, PI];
    let xs: Vec<f64> = (0..100).map(|k| 0.1 + 4.9 * k as f64 / 99.0).collect();
    let noise = Normal::new(0.0, 0.02).unwrap();
    let (mut converged, mut within, mut worst) = (0, 0, 0.0f64);
    for seed in 0..100 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let y = xs
            .iter()
            .map(|&x| FitModel::DampedRabi.evaluate(&truth, x) * (1.0 + noise.sample(&mut rng)))
            .collect();
        let fit = fit_damped_rabi_auto(&ScanCurve::new(xs.clone(), y, None).unwrap()).unwrap();
        let err = fit.params.iter().zip(truth).map(|(p, t)| ((p - t) / t).abs()).fold(0.0, f64::max);
        converged += usize::from(fit.converged);
        within += usize::from(err < 0.05);
        worst = worst.max(err);
    }
    outcome(
        converged == 100 && within == 100,
        format!("{converged}/100 converged, {within}/100 within 5%, worst relative error {worst:.3}"),
    )
}

fn monotone(values: &[f64], increasing: bool) -> bool {
    values.windows(2).all(|w| if increasing { w[1] >= w[0] } else { w[1] <= w[0] })
}

fn chirp_trends() -> Outcome {
    let cfg = ScenarioConfig::calibration();
    let results = run_area_scan(&cfg, &cfg.scans.area.chirp_rates_u, 0).unwrap();
    let summary = run_chirp_summary(&results).unwrap();
    let rows = &summary.rows;
    let col = |f: fn(&rydberg_arp::scenario::ChirpSummaryRow) -> f64| rows.iter().map(f).collect::<Vec<_>>();
    let (widths, values, positions) = (col(|r| r.width80_pi), col(|r| r.peak_value), col(|r| r.peak_position_pi));
    let first = &rows[0];
    let last = rows.last().unwrap();
    let ratio = last.width80_pi / first.width80_pi;
    let checks = [
        ("α=0 oscillates", first.chirp_rate_u == 0.0 && first.oscillating),
        ("6u plateau", last.chirp_rate_u == 6.0 && !last.oscillating),
        ("width80 ↑", monotone(&widths, true)),
        ("width ratio ≥ 2", ratio >= 2.0),
        ("peak value ↓", monotone(&values, false)),
        ("peak position ↑", monotone(&positions, true)),
    ];
    let failed: Vec<&str> = checks.iter().filter(|c| !c.1).map(|c| c.0).collect();
    let fmt = |v: &[f64], p: usize| v.iter().map(|x| format!("{x:.p$}")).collect::<Vec<_>>().join(" ");
    outcome(
        failed.is_empty(),
        format!(
            "width80 [{}] ratio {ratio:.2}; peak value [{}]; position [{}]; {}/{} fits flagged converged{}",
            fmt(&widths, 3),
            fmt(&values, 5),
            fmt(&positions, 3),
            rows.iter().filter(|r| r.fit_converged).count(),
            rows.len(),
            if failed.is_empty() { String::new() } else { format!("; failed: {}", failed.join(", ")) }
        ),
    )
}

fn peak_pair(cfg: &ScenarioConfig) -> (SweepResult, SweepResult) {
    let mut r = run_area_scan(cfg, &[4.0, -4.0], 0).unwrap();
    let minus = r.pop().unwrap();
    (r.pop().unwrap(), minus)
}

fn chirp_sign_asymmetry() -> Outcome {
    let cfg = ScenarioConfig::calibration();
    let (plus, minus) = peak_pair(&cfg);
    let (vp, vm) = (plus.metrics.unwrap().peak_value, minus.metrics.unwrap().peak_value);
    // light shifts off: the Γ_e = 0 control isolates the decay mechanism
    let control = cfg
        .apply_override("model.gamma_e_mhz", "0")
        .and_then(|c| c.apply_override("model.light_shifts", "false"))
        .unwrap();
    let (cp, cm) = peak_pair(&control);
    let agree = cp
        .click_sums()
        .iter()
        .zip(cm.click_sums())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let peak_gap = (cp.metrics.unwrap().peak_value - cm.metrics.unwrap().peak_value).abs();
    outcome(
        vp > vm && agree <= 1e-6 && peak_gap <= 1e-6,
        format!(
            "Γ_e>0: peak(+4u) {vp:.5} vs peak(−4u) {vm:.5} (raw {:.5} vs {:.5}); Γ_e=0: max curve gap {agree:.1e}, peak gap {peak_gap:.1e} (≤ 1e-6)",
            plus.max_click_sum(),
            minus.max_click_sum()
        ),
    )
}

fn detuning_robustness() -> Outcome {
    let scan = run_detuning_scan(&ScenarioConfig::calibration(), 0).unwrap();
    outcome(
        scan.width_ratio >= 1.5 && scan.slower_falloff_toward_smaller_abs_delta1,
        format!(
            "width80 ratio {:.3} (≥ 1.5); chirped σ toward larger |Δ₁| {:.2} MHz, toward smaller |Δ₁| {:.2} MHz",
            scan.width_ratio, scan.chirped_sigma_left_mhz, scan.chirped_sigma_right_mhz
        ),
    )
}

fn numerics_hygiene() -> Outcome {
    let (_, rabi_drift, rabi_steps) = rabi_error(5e-4);
    let cfg = ScenarioConfig::calibration().apply_override("physics.chirp_rate_u", "4").unwrap();
    let pure = ModelSpec::superatom(180.0, mhz(10.0), true).with_light_shifts(true);
    let t = evolve_from_ground(&pure, &cfg.schedule(), &opts(5e-4, 1)).unwrap();
    let unitary = (rabi_drift / rabi_steps as f64).max(t.max_norm_drift / t.steps as f64) * 1000.0;
    let model = cfg.model_spec();
    let rho = evolve_from_ground(&model, &cfg.schedule(), &opts(5e-4, 1)).unwrap();
    let min_eig = rho.min_eigenvalue.unwrap();
    let ratio = rabi_error(0.02).0 / rabi_error(0.01).0;
    outcome(
        unitary < 1e-9 && rho.max_norm_drift < 1e-7 && min_eig >= -1e-8 && (12.0..=20.0).contains(&ratio),
        format!(
            "unitary drift {unitary:.1e}/1000 steps; Lindblad trace drift {:.1e}, min eigenvalue {min_eig:.1e}; step-halving ratio {ratio:.2}",
            rho.max_norm_drift
        ),
    )
}

fn small(cfg: ScenarioConfig, overrides: &[(&str, &str)]) -> ScenarioConfig {
    overrides
        .iter()
        .fold(cfg, |c, (k, v)| c.apply_override(k, v).unwrap())
}

/// Every file body a scenario writes, for a given worker count.
fn bodies(cfg: &ScenarioConfig, rabi_cfg: &ScenarioConfig, workers: usize, dir: &Path) -> Vec<String> {
    let plot = |rs: &[SweepResult], stem: &str| -> Vec<String> {
        emit_plot_data(rs, dir, stem)
            .unwrap()
            .iter()
            .map(|p| std::fs::read_to_string(p).unwrap())
            .collect()
    };
    let mut out = Vec::new();
    let rabi = [run_rabi_scan(rabi_cfg, workers).unwrap()];
    out.push(sweep_csv(&rabi).unwrap());
    out.push(sweep_summary_json(&rabi, None).unwrap());
    out.extend(plot(&rabi, "rabi"));
    let area = run_area_scan(cfg, &cfg.scans.area.chirp_rates_u, workers).unwrap();
    out.push(sweep_csv(&area).unwrap());
    out.push(sweep_summary_json(&area, None).unwrap());
    out.extend(plot(&area, "area_scan"));
    let summary = run_chirp_summary(&area).unwrap();
    out.push(summary_csv(&summary).unwrap());
    out.push(to_json(&summary));
    let det = run_detuning_scan(cfg, workers).unwrap_or_else(|e| panic!("detuning scan: {e}"));
    let curves = [det.chirped.clone(), det.pi_pulse.clone()];
    out.push(sweep_csv(&curves).unwrap());
    out.push(detuning_summary_json(&det).unwrap());
    out.extend(plot(&curves, "detuning_scan"));
    let report = run_adiabaticity(cfg).unwrap();
    out.push(adiabaticity_csv(&report).unwrap());
    out.push(to_json(&report));
    out
}

fn determinism() -> Outcome {
    let cfg = small(
        ScenarioConfig::calibration(),
        &[
            ("trials", "6"),
            ("scans.rabi.durations_ns.points", "9"),
            ("scans.area.areas_pi.points", "9"),
            ("scans.area.chirp_rates_u", "[0, 3]"),
            ("scans.detuning.delta1_mhz.points", "9"),
        ],
    );
    let rabi_cfg = small(cfg.clone(), &[("physics.chirp_rate_u", "0")]);
    let tmp = tempfile::tempdir().unwrap();
    let one = bodies(&cfg, &rabi_cfg, 1, &tmp.path().join("one"));
    let eight = bodies(&cfg, &rabi_cfg, 8, &tmp.path().join("eight"));
    let again = bodies(&cfg, &rabi_cfg, 8, &tmp.path().join("again"));
    let differing = one.iter().zip(&eight).filter(|(a, b)| a != b).count();
    outcome(
        one.len() == eight.len() && differing == 0 && eight == again,
        format!("{} file bodies across 5 scenarios, {differing} differ between 1 and 8 workers", one.len()),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome, f64); 12] = [
        ("Rabi oracle", rabi_oracle, 1.0),
        ("Landau–Zener oracle", landau_zener, 5.0),
        ("dressed-state conformance", dressed_state_conformance, 1.0),
        ("adiabatic transfer", adiabatic_transfer, 10.0),
        ("collective-enhancement equivalence", collective_enhancement, 30.0),
        ("photon statistics", photon_statistics, f64::INFINITY),
        ("fit recovery", fit_recovery, 10.0),
        ("chirp trends", chirp_trends, 120.0),
        ("chirp-sign asymmetry", chirp_sign_asymmetry, f64::INFINITY),
        ("detuning robustness", detuning_robustness, 60.0),
        ("numerics hygiene", numerics_hygiene, f64::INFINITY),
        ("determinism", determinism, f64::INFINITY),
    ];
    let mut failures = 0;
    for (k, (name, run, budget)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = run();
        let secs = start.elapsed().as_secs_f64();
        let pass = o.pass && secs < *budget;
        let limit = if budget.is_finite() { format!(" (< {budget} s)") } else { String::new() };
        println!(
            "criterion {:>2} {:<36} {}  {}; {secs:.2} s{limit}",
            k + 1,
            name,
            if pass { "PASS" } else { "FAIL" },
            o.detail
        );
        failures += usize::from(!pass);
    }
    println!("acceptance: {} passed, {failures} failed", criteria.len() - failures);
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
