//! Nonlinear least-squares fits of scan curves and the peak / robustness
//! metrics derived from them.
//!
//! Two models are supported: the damped-Rabi area-scan model
//! `y = a e^{−b x²} [1 − e^{−c x²} cos(d x)]` and an asymmetric Gaussian with
//! separate widths on either side of its centre. Both are fitted by damped
//! Gauss–Newton with a step-halving line search.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sampled observable `y(x)` with optional per-point uncertainties.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanCurve {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub sigma: Option<Vec<f64>>,
}

impl ScanCurve {
    pub fn new(x: Vec<f64>, y: Vec<f64>, sigma: Option<Vec<f64>>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::invalid(format!("curve has {} x values and {} y values", x.len(), y.len())));
        }
        if x.is_empty() {
            return Err(Error::invalid("curve is empty"));
        }
        if x.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("curve x values must be strictly increasing"));
        }
        if y.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::invalid("curve y values must be finite and ≥ 0"));
        }
        if let Some(s) = &sigma {
            if s.len() != x.len() {
                return Err(Error::invalid("sigma length does not match the curve"));
            }
            if s.iter().any(|v| !(*v > 0.0)) {
                return Err(Error::invalid("sigma values must be > 0"));
            }
        }
        Ok(Self { x, y, sigma })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.x[0], self.x[self.x.len() - 1])
    }

    /// Piecewise-linear interpolant, clamped outside the domain.
    pub fn interpolate(&self, x: f64) -> f64 {
        let n = self.x.len();
        if x <= self.x[0] {
            return self.y[0];
        }
        if x >= self.x[n - 1] {
            return self.y[n - 1];
        }
        let k = self.x.partition_point(|&v| v <= x);
        let (x0, x1) = (self.x[k - 1], self.x[k]);
        let w = (x - x0) / (x1 - x0);
        self.y[k - 1] * (1.0 - w) + self.y[k] * w
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitModel {
    /// Parameters `[a, b, c, d]`.
    DampedRabi,
    /// Parameters `[h, x0, sigma_left, sigma_right]`.
    AsymmetricGaussian,
}

impl FitModel {
    pub fn param_names(&self) -> [&'static str; 4] {
        match self {
            FitModel::DampedRabi => ["a", "b", "c", "d"],
            FitModel::AsymmetricGaussian => ["h", "x0", "sigma_left", "sigma_right"],
        }
    }

    pub fn evaluate(&self, p: &[f64], x: f64) -> f64 {
        match self {
            FitModel::DampedRabi => {
                let x2 = x * x;
                p[0] * (-p[1] * x2).exp() * (1.0 - (-p[2] * x2).exp() * (p[3] * x).cos())
            }
            FitModel::AsymmetricGaussian => {
                let s = if x < p[1] { p[2] } else { p[3] };
                let u = (x - p[1]) / s;
                p[0] * (-0.5 * u * u).exp()
            }
        }
    }

    /// Value and parameter gradient at `x`.
    fn value_and_gradient(&self, p: &[f64], x: f64, grad: &mut [f64; 4]) -> f64 {
        match self {
            FitModel::DampedRabi => {
                let x2 = x * x;
                let e = (-p[1] * x2).exp();
                let f = (-p[2] * x2).exp();
                let (s, c) = (p[3] * x).sin_cos();
                let y = p[0] * e * (1.0 - f * c);
                grad[0] = e * (1.0 - f * c);
                grad[1] = -x2 * y;
                grad[2] = p[0] * e * x2 * f * c;
                grad[3] = p[0] * e * f * x * s;
                y
            }
            FitModel::AsymmetricGaussian => {
                let left = x < p[1];
                let s = if left { p[2] } else { p[3] };
                let dx = x - p[1];
                let g = (-0.5 * dx * dx / (s * s)).exp();
                let y = p[0] * g;
                grad[0] = g;
                grad[1] = y * dx / (s * s);
                let ds = y * dx * dx / (s * s * s);
                grad[2] = if left { ds } else { 0.0 };
                grad[3] = if left { 0.0 } else { ds };
                y
            }
        }
    }

    /// Smallest admissible value of each parameter.
    fn lower_bounds(&self) -> [f64; 4] {
        match self {
            FitModel::DampedRabi => [f64::NEG_INFINITY, 0.0, 0.0, f64::NEG_INFINITY],
            FitModel::AsymmetricGaussian => [f64::NEG_INFINITY, f64::NEG_INFINITY, 1e-12, 1e-12],
        }
    }

    fn project(&self, p: &mut [f64]) {
        for (v, lo) in p.iter_mut().zip(self.lower_bounds()) {
            if *v < lo {
                *v = lo;
            }
        }
    }
}

/// Outcome of a least-squares fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: FitModel,
    pub params: Vec<f64>,
    /// `‖(y − model)/σ‖₂` at the returned parameters.
    pub residual_norm: f64,
    /// Projected gradient fell below `1e−8 (1 + residual_norm)`.
    pub converged: bool,
    /// The data carry no signal (all-zero y); parameters are unidentifiable.
    pub degenerate: bool,
    pub iterations: usize,
    /// `s² (JᵀJ)⁻¹`, with `s² = RSS/(m − p)` when no σ is supplied.
    pub covariance: Option<Vec<Vec<f64>>>,
    /// Abscissa range of the fitted data.
    pub domain: (f64, f64),
}

impl FitResult {
    pub fn evaluate(&self, x: f64) -> f64 {
        self.model.evaluate(&self.params, x)
    }

    pub fn param(&self, name: &str) -> Option<f64> {
        let k = self.model.param_names().iter().position(|n| *n == name)?;
        Some(self.params[k])
    }
}

pub const MAX_ITERATIONS: usize = 500;
const GRADIENT_TOLERANCE: f64 = 1e-8;

struct Problem<'a> {
    model: FitModel,
    curve: &'a ScanCurve,
}

impl Problem<'_> {
    fn weight(&self, i: usize) -> f64 {
        self.curve.sigma.as_ref().map_or(1.0, |s| 1.0 / s[i])
    }

    fn cost(&self, p: &[f64]) -> f64 {
        (0..self.curve.len())
            .map(|i| {
                let r = (self.curve.y[i] - self.model.evaluate(p, self.curve.x[i])) * self.weight(i);
                r * r
            })
            .sum()
    }

    /// Weighted residuals and Jacobian of the model.
    fn linearize(&self, p: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
        let m = self.curve.len();
        let mut r = DVector::zeros(m);
        let mut j = DMatrix::zeros(m, 4);
        let mut g = [0.0; 4];
        for i in 0..m {
            let w = self.weight(i);
            let y = self.model.value_and_gradient(p, self.curve.x[i], &mut g);
            r[i] = (self.curve.y[i] - y) * w;
            for k in 0..4 {
                j[(i, k)] = g[k] * w;
            }
        }
        (r, j)
    }

    /// Gradient of ½‖r‖² with components pushing against an active bound removed.
    fn projected_gradient(&self, p: &[f64], grad: &DVector<f64>) -> f64 {
        let lo = self.model.lower_bounds();
        grad.iter()
            .enumerate()
            .map(|(k, &g)| if p[k] <= lo[k] && g > 0.0 { 0.0 } else { g })
            .map(|g| g * g)
            .sum::<f64>()
            .sqrt()
    }
}

/// Damped Gauss–Newton with step halving from `init`. Never raises the cost
/// between accepted iterations; reports non-convergence instead of failing.
pub fn fit(model: FitModel, curve: &ScanCurve, init: &[f64]) -> Result<FitResult> {
    if init.len() != 4 {
        return Err(Error::invalid(format!("{model:?} takes 4 parameters, got {}", init.len())));
    }
    if curve.len() < 8 {
        return Err(Error::invalid(format!("fits need at least 8 points, got {}", curve.len())));
    }
    let prob = Problem { model, curve };
    let mut p = init.to_vec();
    model.project(&mut p);
    let mut cost = prob.cost(&p);
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < MAX_ITERATIONS {
        let (r, j) = prob.linearize(&p);
        // descent direction of ½‖r‖² is +Jᵀr since r = y − f
        let grad = -(j.transpose() * &r);
        if prob.projected_gradient(&p, &grad) < GRADIENT_TOLERANCE * (1.0 + r.norm()) {
            converged = true;
            break;
        }
        iterations += 1;
        let jtj = j.transpose() * &j;
        let lo = model.lower_bounds();
        let active: Vec<bool> = (0..4).map(|k| p[k] <= lo[k] && grad[k] > 0.0).collect();
        let mut rhs = -&grad;
        let mut accepted = false;
        while lambda < 1e12 {
            let mut a = jtj.clone();
            for k in 0..4 {
                a[(k, k)] += lambda * jtj[(k, k)].max(1e-12);
            }
            // parameters pinned at a bound stay there for this step
            for k in (0..4).filter(|&k| active[k]) {
                a.row_mut(k).fill(0.0);
                a.column_mut(k).fill(0.0);
                a[(k, k)] = 1.0;
                rhs[k] = 0.0;
            }
            let Some(step) = a.cholesky().map(|c| c.solve(&rhs)) else {
                lambda *= 10.0;
                continue;
            };
            let mut t = 1.0;
            for _ in 0..30 {
                let mut trial: Vec<f64> = p.iter().zip(step.iter()).map(|(v, s)| v + t * s).collect();
                model.project(&mut trial);
                let c = prob.cost(&trial);
                if c < cost {
                    p = trial;
                    cost = c;
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            if accepted {
                lambda = if t == 1.0 { (lambda / 3.0).max(1e-15) } else { lambda * 2.0 };
                break;
            }
            lambda *= 10.0;
        }
        if !accepted {
            // no descent available at machine precision
            let (r, j) = prob.linearize(&p);
            let grad = -(j.transpose() * &r);
            converged = prob.projected_gradient(&p, &grad) < GRADIENT_TOLERANCE * (1.0 + r.norm());
            break;
        }
    }

    Ok(FitResult {
        model,
        covariance: covariance(&prob, &p, cost),
        residual_norm: cost.sqrt(),
        params: p,
        converged,
        degenerate: false,
        iterations,
        domain: curve.domain(),
    })
}

fn covariance(prob: &Problem, p: &[f64], cost: f64) -> Option<Vec<Vec<f64>>> {
    let (_, j) = prob.linearize(p);
    let inv = (j.transpose() * &j).try_inverse()?;
    let m = prob.curve.len();
    let scale = if prob.curve.sigma.is_some() || m <= 4 {
        1.0
    } else {
        cost / (m - 4) as f64
    };
    Some((0..4).map(|r| (0..4).map(|c| inv[(r, c)] * scale).collect()).collect())
}

fn degenerate_result(model: FitModel, curve: &ScanCurve, mut params: Vec<f64>) -> FitResult {
    params[0] = 0.0;
    FitResult {
        model,
        params,
        residual_norm: 0.0,
        converged: false,
        degenerate: true,
        iterations: 0,
        covariance: None,
        domain: curve.domain(),
    }
}

/// Fits the damped-Rabi model from `init = [a, b, c, d]`.
pub fn fit_damped_rabi(curve: &ScanCurve, init: &[f64]) -> Result<FitResult> {
    if curve.y.iter().all(|&v| v == 0.0) {
        return Ok(degenerate_result(FitModel::DampedRabi, curve, init.to_vec()));
    }
    let mut r = fit(FitModel::DampedRabi, curve, init)?;
    // the model is even in d
    r.params[3] = r.params[3].abs();
    Ok(r)
}

/// Data-driven start: `a = max y`, `d` from the strongest spectral line of
/// `y − ȳ`, `b` and `c` from regressions on the local maxima and minima.
pub fn initial_guess_damped_rabi(curve: &ScanCurve) -> [f64; 4] {
    let a = curve.y.iter().cloned().fold(0.0, f64::max);
    let d = dominant_angular_frequency(curve);
    let (extrema_max, extrema_min) = local_extrema(&curve.y);

    // envelope a e^{−b x²} through the local maxima
    let mut num = 0.0;
    let mut den = 0.0;
    for &k in &extrema_max {
        let (x, y) = (curve.x[k], curve.y[k]);
        if y > 0.0 && a > 0.0 && x != 0.0 {
            let x2 = x * x;
            num += x2 * (y / a).ln().min(0.0);
            den += x2 * x2;
        }
    }
    let b = if den > 0.0 { (-num / den).max(0.0) } else { 0.0 };

    // depth of the minima: y/(a e^{−b x²}) = 1 − e^{−c x²}
    let mut cs = Vec::new();
    for &k in &extrema_min {
        let x = curve.x[k];
        let env = a * (-b * x * x).exp();
        if x != 0.0 && env > 0.0 {
            let depth = (1.0 - curve.y[k] / env).clamp(1e-6, 1.0 - 1e-6);
            cs.push(-depth.ln() / (x * x));
        }
    }
    let c = if cs.is_empty() {
        0.1
    } else {
        cs.iter().sum::<f64>() / cs.len() as f64
    };
    [a, b, c, d]
}

/// Angular frequency of the largest peak of the direct (non-uniform) Fourier
/// transform of `y − ȳ`.
fn dominant_angular_frequency(curve: &ScanCurve) -> f64 {
    let (x0, x1) = curve.domain();
    let span = (x1 - x0).max(f64::MIN_POSITIVE);
    let mean = curve.y.iter().sum::<f64>() / curve.len() as f64;
    let dx_min = curve.x.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    let w_max = PI / dx_min;
    let w_min = PI / span;
    let n = 2000;
    let mut best = (w_min, -1.0);
    for k in 0..n {
        let w = w_min + (w_max - w_min) * k as f64 / (n - 1) as f64;
        let (mut re, mut im) = (0.0, 0.0);
        for (x, y) in curve.x.iter().zip(&curve.y) {
            let (s, c) = (w * x).sin_cos();
            re += (y - mean) * c;
            im += (y - mean) * s;
        }
        let power = re * re + im * im;
        if power > best.1 {
            best = (w, power);
        }
    }
    best.0
}

fn local_extrema(y: &[f64]) -> (Vec<usize>, Vec<usize>) {
    let mut maxima = Vec::new();
    let mut minima = Vec::new();
    for k in 1..y.len().saturating_sub(1) {
        if y[k] >= y[k - 1] && y[k] > y[k + 1] {
            maxima.push(k);
        } else if y[k] <= y[k - 1] && y[k] < y[k + 1] {
            minima.push(k);
        }
    }
    (maxima, minima)
}

/// Fits the damped-Rabi model from the data-driven start and a few
/// alternatives (scaled frequency, weaker or stronger damping), keeping the
/// lowest-residual converged result whose frequency the sampling resolves.
pub fn fit_damped_rabi_auto(curve: &ScanCurve) -> Result<FitResult> {
    let g = initial_guess_damped_rabi(curve);
    let nyquist = PI / curve.x.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    let mut starts = vec![g];
    for (fd, fc) in [(1.0, 0.25), (1.0, 4.0), (0.5, 1.0), (2.0, 1.0), (0.75, 1.0), (1.33, 1.0)] {
        starts.push([g[0], g[1], (g[2] * fc).max(1e-3), g[3] * fd]);
    }
    starts.push([g[0], 0.0, 0.1, PI]);
    let mut best: Option<FitResult> = None;
    for s in starts {
        let r = fit_damped_rabi(curve, &s)?;
        if r.degenerate {
            return Ok(r);
        }
        let resolved = r.params[3] <= nyquist;
        let better = match &best {
            None => true,
            Some(b) => {
                (resolved, r.converged, -r.residual_norm) > (b.params[3] <= nyquist, b.converged, -b.residual_norm)
            }
        };
        if better {
            best = Some(r);
        }
    }
    Ok(best.expect("at least one start"))
}

/// Fits `h exp(−(x−x₀)²/(2σ²))` with `σ = σ_L` left of `x₀` and `σ_R` right of it.
pub fn fit_asymmetric_gaussian(curve: &ScanCurve) -> Result<FitResult> {
    let init = initial_guess_asymmetric_gaussian(curve);
    if curve.y.iter().all(|&v| v == 0.0) {
        return Ok(degenerate_result(FitModel::AsymmetricGaussian, curve, init.to_vec()));
    }
    fit(FitModel::AsymmetricGaussian, curve, &init)
}

/// Peak height and position of the samples, widths from the half-maximum
/// crossings on each side.
pub fn initial_guess_asymmetric_gaussian(curve: &ScanCurve) -> [f64; 4] {
    let (k, h) = curve
        .y
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::MIN), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc });
    let x0 = curve.x[k];
    let fwhm_to_sigma = 1.0 / (2.0 * (2.0 * 2f64.ln()).sqrt());
    let (lo, hi) = curve.domain();
    let fallback = 0.25 * (hi - lo);
    let left = (0..k).rev().find(|&i| curve.y[i] < 0.5 * h).map(|i| x0 - curve.x[i]);
    let right = (k + 1..curve.len()).find(|&i| curve.y[i] < 0.5 * h).map(|i| curve.x[i] - x0);
    let sl = left.map_or(fallback, |w| 2.0 * w * fwhm_to_sigma).max(1e-9);
    let sr = right.map_or(fallback, |w| 2.0 * w * fwhm_to_sigma).max(1e-9);
    [h, x0, sl, sr]
}

/// Peak location, height and 80 % width of a curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakMetrics {
    pub peak_position: f64,
    pub peak_value: f64,
    /// Length of the contiguous interval around the peak where `y ≥ 0.8 · peak`.
    pub width80: f64,
    /// Interval bounds of `width80`.
    pub interval: (f64, f64),
    /// Global maximum sits on a domain edge.
    pub edge_peak: bool,
    /// The 80 % interval runs into a domain edge and is clamped there.
    pub plateau: bool,
    /// Some interior local minimum dips below `0.8 · peak`, i.e. the curve
    /// oscillates rather than saturating.
    pub secondary_minimum: bool,
}

pub const PEAK_GRID_POINTS: usize = 2000;
pub const WIDTH_LEVEL: f64 = 0.8;

/// Metrics of `f` on `[lo, hi]`: dense grid maximum refined by golden-section
/// search, and the 80 % interval with bisected edges.
pub fn peak_metrics_fn(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> Result<PeakMetrics> {
    if !(hi > lo) {
        return Err(Error::invalid(format!("peak search needs lo < hi, got [{lo}, {hi}]")));
    }
    let n = PEAK_GRID_POINTS;
    let xs: Vec<f64> = (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect();
    let ys: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
    let (kmax, _) = ys
        .iter()
        .enumerate()
        .fold((0, f64::MIN), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
    let a = xs[kmax.saturating_sub(1)];
    let b = xs[(kmax + 1).min(n - 1)];
    let (peak_position, peak_value) = golden_max(&f, a, b, ys[kmax], xs[kmax]);
    let edge_peak = kmax == 0 || kmax == n - 1;

    let level = WIDTH_LEVEL * peak_value;
    let above = |x: f64| f(x) >= level;
    let mut left = lo;
    let mut left_clamped = true;
    for k in (0..=kmax).rev() {
        if ys[k] < level {
            left = bisect(&above, xs[k], xs[(k + 1).min(kmax)].max(xs[k]));
            left_clamped = false;
            break;
        }
    }
    let mut right = hi;
    let mut right_clamped = true;
    for k in kmax..n {
        if ys[k] < level {
            right = bisect(&above, xs[k], xs[k - 1].min(xs[k]).max(xs[kmax]));
            right_clamped = false;
            break;
        }
    }
    let left = left.min(peak_position);
    let right = right.max(peak_position);
    let secondary_minimum = (1..n - 1).any(|k| ys[k] < level && ys[k] < ys[k - 1] && ys[k] <= ys[k + 1]);
    Ok(PeakMetrics {
        peak_position,
        peak_value,
        width80: right - left,
        interval: (left, right),
        edge_peak,
        plateau: (left_clamped && !edge_peak && kmax != 0) || right_clamped,
        secondary_minimum,
    })
}

/// Metrics of a fitted model over its data domain.
pub fn peak_metrics(fit: &FitResult) -> Result<PeakMetrics> {
    let (lo, hi) = fit.domain;
    peak_metrics_fn(|x| fit.evaluate(x), lo, hi)
}

/// Metrics of the piecewise-linear interpolant of the samples.
pub fn peak_metrics_curve(curve: &ScanCurve) -> Result<PeakMetrics> {
    let (lo, hi) = curve.domain();
    peak_metrics_fn(|x| curve.interpolate(x), lo, hi)
}

/// Golden-section maximisation on `[a, b]`; falls back to the grid point.
fn golden_max(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64, y_grid: f64, x_grid: f64) -> (f64, f64) {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..100 {
        if (b - a).abs() < 1e-13 * (1.0 + a.abs().max(b.abs())) {
            break;
        }
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    let y = f(x);
    if y >= y_grid {
        (x, y)
    } else {
        (x_grid, y_grid)
    }
}

/// Boundary between `outside` (predicate false) and `inside` (true).
fn bisect(pred: &impl Fn(f64) -> bool, mut outside: f64, mut inside: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (outside + inside);
        if mid == outside || mid == inside {
            break;
        }
        if pred(mid) {
            inside = mid;
        } else {
            outside = mid;
        }
    }
    0.5 * (outside + inside)
}

/// `width_a / width_b`.
pub fn robustness_ratio(width_a: f64, width_b: f64) -> Result<f64> {
    if width_b == 0.0 {
        return Err(Error::invalid("robustness ratio needs a non-zero reference width"));
    }
    Ok(width_a / width_b)
}

/// Transverse size `√((π/2)(1/w₁² + 1/w₂²)⁻¹)` of the region excited by two
/// Gaussian beams of waists `w1`, `w2`.
pub fn effective_excitation_size(w1: f64, w2: f64) -> Result<f64> {
    if !(w1 > 0.0 && w2 > 0.0) {
        return Err(Error::invalid("beam waists must be > 0"));
    }
    Ok((0.5 * PI / (1.0 / (w1 * w1) + 1.0 / (w2 * w2))).sqrt())
}
