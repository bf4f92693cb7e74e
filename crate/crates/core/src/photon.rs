//! Excitation-number statistics mapped through retrieval, detection and a
//! Hanbury-Brown-Twiss beamsplitter with two threshold detectors. Everything
//! is exact enumeration over at most three quanta.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Highest excitation number tracked.
pub const MAX_QUANTA: usize = 3;

const SUM_TOLERANCE: f64 = 1e-9;

/// Probabilities `p_n` for `n = 0..=n_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ExcitationDistribution {
    probs: Vec<f64>,
}

impl ExcitationDistribution {
    /// Validates non-negativity (to rounding) and unit sum, then renormalizes.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() || probs.len() > MAX_QUANTA + 1 {
            return Err(Error::invalid(format!(
                "distribution needs 1..={} entries, got {}",
                MAX_QUANTA + 1,
                probs.len()
            )));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < -SUM_TOLERANCE) {
            return Err(Error::invalid(format!("negative or non-finite probability in {probs:?}")));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::invalid(format!("probabilities sum to {sum}, not 1")));
        }
        Ok(Self::normalized(probs))
    }

    /// Clamps tiny negatives and rescales to unit sum without checking.
    pub(crate) fn normalized(mut probs: Vec<f64>) -> Self {
        probs.iter_mut().for_each(|p| *p = p.max(0.0));
        let sum: f64 = probs.iter().sum();
        if sum > 0.0 {
            probs.iter_mut().for_each(|p| *p /= sum);
        }
        Self { probs }
    }

    /// All mass on `n` quanta.
    pub fn fock(n: usize) -> Self {
        assert!(n <= MAX_QUANTA);
        let mut probs = vec![0.0; n + 1];
        probs[n] = 1.0;
        Self { probs }
    }

    /// Poisson distribution of the given mean truncated at [`MAX_QUANTA`] and renormalized.
    pub fn truncated_poisson(mean: f64) -> Self {
        let mut probs = Vec::with_capacity(MAX_QUANTA + 1);
        let mut term = 1.0;
        for n in 0..=MAX_QUANTA {
            if n > 0 {
                term *= mean / n as f64;
            }
            probs.push(term);
        }
        Self::normalized(probs)
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probs
    }

    pub fn p(&self, n: usize) -> f64 {
        self.probs.get(n).copied().unwrap_or(0.0)
    }

    pub fn n_max(&self) -> usize {
        self.probs.len() - 1
    }

    pub fn mean(&self) -> f64 {
        self.factorial_moment(1)
    }

    /// `Σ n(n−1)…(n−k+1) p_n`
    pub fn factorial_moment(&self, k: usize) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .map(|(n, p)| falling_factorial(n, k) * p)
            .sum()
    }

    /// Probability-weighted average of several distributions.
    pub fn mixture<'a>(items: impl IntoIterator<Item = &'a ExcitationDistribution>) -> Result<Self> {
        let mut acc = vec![0.0; MAX_QUANTA + 1];
        let mut count = 0usize;
        let mut len = 0usize;
        for d in items {
            for (a, p) in acc.iter_mut().zip(&d.probs) {
                *a += p;
            }
            len = len.max(d.probs.len());
            count += 1;
        }
        if count == 0 {
            return Err(Error::invalid("mixture of zero distributions"));
        }
        acc.truncate(len);
        acc.iter_mut().for_each(|a| *a /= count as f64);
        Ok(Self::normalized(acc))
    }
}

impl TryFrom<Vec<f64>> for ExcitationDistribution {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<ExcitationDistribution> for Vec<f64> {
    fn from(d: ExcitationDistribution) -> Self {
        d.probs
    }
}

fn falling_factorial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    ((n - k + 1)..=n).map(|x| x as f64).product()
}

fn binomial(n: usize, k: usize) -> f64 {
    falling_factorial(n, k) / falling_factorial(k, k)
}

/// Independent survival of each quantum with probability `eta`.
pub fn thin_distribution(d: &ExcitationDistribution, eta: f64) -> ExcitationDistribution {
    let n_max = d.n_max();
    let out = (0..=n_max)
        .map(|m| {
            (m..=n_max)
                .map(|n| d.p(n) * binomial(n, m) * eta.powi(m as i32) * (1.0 - eta).powi((n - m) as i32))
                .sum()
        })
        .collect();
    ExcitationDistribution::normalized(out)
}

/// Keeps a fraction `keep` of every multiply-excited component and moves the
/// rest to `n = 0`: multiple excitations that dephase before retrieval emit
/// nothing into the collected mode.
pub fn retain_multiples(d: &ExcitationDistribution, keep: f64) -> ExcitationDistribution {
    if keep == 1.0 {
        return d.clone();
    }
    let mut probs = d.probabilities().to_vec();
    let mut lost = 0.0;
    for p in probs.iter_mut().skip(2) {
        lost += (1.0 - keep) * *p;
        *p *= keep;
    }
    probs[0] += lost;
    ExcitationDistribution::normalized(probs)
}

/// `g² = Σ n(n−1) p_n / (Σ n p_n)²`
pub fn g2_of_distribution(d: &ExcitationDistribution) -> Result<f64> {
    let mean = d.mean();
    if mean <= 0.0 {
        return Err(Error::invalid("g² undefined for zero mean excitation number"));
    }
    Ok(d.factorial_moment(2) / (mean * mean))
}

/// Retrieval, detection and beamsplitter parameters, each in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetrievalModel {
    pub eta_retrieval: f64,
    pub eta_detection: f64,
    pub splitter_ratio: f64,
}

impl Default for RetrievalModel {
    fn default() -> Self {
        Self {
            eta_retrieval: 1.0,
            eta_detection: 1.0,
            splitter_ratio: 0.5,
        }
    }
}

impl RetrievalModel {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("eta_retrieval", self.eta_retrieval),
            ("eta_detection", self.eta_detection),
            ("splitter_ratio", self.splitter_ratio),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::invalid(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        Ok(())
    }

    pub fn total_efficiency(&self) -> f64 {
        self.eta_retrieval * self.eta_detection
    }
}

/// Threshold-detector statistics behind a beamsplitter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HbtOutcome {
    pub p_click_a: f64,
    pub p_click_b: f64,
    /// `p_click_a + p_click_b`, the summed detection probability.
    pub p_click_sum: f64,
    pub p_coincidence: f64,
    /// `p_coincidence / (p_click_a · p_click_b)`; `None` when either detector never clicks.
    pub g2_measured: Option<f64>,
}

pub fn hbt_probabilities(d: &ExcitationDistribution, r: &RetrievalModel) -> HbtOutcome {
    let retrieved = thin_distribution(d, r.eta_retrieval);
    let detected = thin_distribution(&retrieved, r.eta_detection);
    let t = r.splitter_ratio;
    // probability that all detected photons avoid a detector
    let mut none_a = 0.0;
    let mut none_b = 0.0;
    let mut p_coincidence = 0.0;
    for (n, p) in detected.probabilities().iter().enumerate() {
        let (miss_a, miss_b) = ((1.0 - t).powi(n as i32), t.powi(n as i32));
        none_a += p * miss_a;
        none_b += p * miss_b;
        // a single photon never fires both detectors
        if n >= 2 {
            p_coincidence += p * (1.0 - miss_a - miss_b);
        }
    }
    let p_click_a = (1.0 - none_a).max(0.0);
    let p_click_b = (1.0 - none_b).max(0.0);
    let p_coincidence = p_coincidence.max(0.0);
    let denom = p_click_a * p_click_b;
    HbtOutcome {
        p_click_a,
        p_click_b,
        p_click_sum: p_click_a + p_click_b,
        p_coincidence,
        g2_measured: (denom > 0.0).then(|| p_coincidence / denom),
    }
}
