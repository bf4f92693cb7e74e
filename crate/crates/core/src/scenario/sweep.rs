//! Parallel sweep engine and its result records.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fitting::{FitResult, PeakMetrics};

/// Code version written into every output.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub scenario: String,
    pub config_label: String,
    /// SHA-256 of the effective configuration.
    pub config_hash: String,
    pub seed: u64,
    pub version: String,
}

/// Observables at one sweep point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointRecord {
    pub x: f64,
    /// Summed detection probability of both HBT detectors.
    pub click_sum: f64,
    /// Standard error of `click_sum` over trials (antithetic pairs count once).
    pub click_sum_stderr: f64,
    pub coincidence: f64,
    pub g2_measured: Option<f64>,
    /// Trial-averaged excitation-number distribution before retrieval.
    pub distribution: Vec<f64>,
}

/// One curve of a scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub curve: String,
    pub axis_name: String,
    pub axis_unit: String,
    /// Fixed parameters that distinguish this curve, e.g. `chirp_rate_u`.
    pub parameters: BTreeMap<String, f64>,
    pub records: Vec<PointRecord>,
    pub fit: Option<FitResult>,
    pub metrics: Option<PeakMetrics>,
    /// Scenario-specific scalars derived from the fit.
    pub derived: BTreeMap<String, f64>,
    pub provenance: Provenance,
}

impl SweepResult {
    pub fn xs(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.x).collect()
    }

    pub fn click_sums(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.click_sum).collect()
    }

    /// Largest sampled click sum.
    pub fn max_click_sum(&self) -> f64 {
        self.records.iter().map(|r| r.click_sum).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// What a point function receives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointContext {
    pub index: usize,
    pub x: f64,
    /// Seed derived from the run seed and the point index.
    pub seed: u64,
}

/// SplitMix64 of `seed` and `index`.
pub fn point_seed(seed: u64, index: usize) -> u64 {
    let mut z = seed ^ (index as u64).wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Worker count for `requested` (0 = all available cores).
pub fn resolve_workers(requested: usize) -> usize {
    if requested > 0 {
        requested
    } else {
        std::thread::available_parallelism().map_or(1, |n| n.get())
    }
}

/// Evaluates `f` at every axis value on a pool of `workers` threads and
/// returns the records in axis order. The first failure (lowest index) is
/// returned with its index.
pub fn sweep_execute<F>(axis: &[f64], seed: u64, workers: usize, f: F) -> Result<Vec<PointRecord>>
where
    F: Fn(PointContext) -> Result<PointRecord> + Sync,
{
    if axis.is_empty() {
        return Err(Error::config("sweep", "sweep axis is empty"));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(resolve_workers(workers))
        .build()
        .map_err(|e| Error::invalid(format!("cannot start worker pool: {e}")))?;
    let results: Vec<Result<PointRecord>> = pool.install(|| {
        axis.par_iter()
            .enumerate()
            .map(|(index, &x)| {
                f(PointContext {
                    index,
                    x,
                    seed: point_seed(seed, index),
                })
                .map_err(|e| Error::SweepPoint {
                    index,
                    source: Box::new(e),
                })
            })
            .collect()
    });
    results.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(x: f64, seed: u64) -> PointRecord {
        PointRecord {
            x,
            click_sum: x * x + (seed % 1000) as f64 * 1e-6,
            click_sum_stderr: 0.0,
            coincidence: 0.0,
            g2_measured: None,
            distribution: vec![1.0],
        }
    }

    #[test]
    fn worker_count_does_not_change_output() {
        let axis: Vec<f64> = (0..37).map(|k| k as f64 * 0.1).collect();
        let one = sweep_execute(&axis, 7, 1, |c| Ok(record(c.x, c.seed))).unwrap();
        let eight = sweep_execute(&axis, 7, 8, |c| Ok(record(c.x, c.seed))).unwrap();
        assert_eq!(serde_json::to_string(&one).unwrap(), serde_json::to_string(&eight).unwrap());
        assert_eq!(one.len(), axis.len());
        assert!(one.iter().zip(&axis).all(|(r, x)| r.x == *x));
    }

    #[test]
    fn empty_axis_is_rejected() {
        assert!(matches!(
            sweep_execute(&[], 1, 1, |c| Ok(record(c.x, c.seed))),
            Err(Error::Config { .. })
        ));
    }

    #[test]
    fn first_failure_is_reported_with_its_index() {
        let axis: Vec<f64> = (0..20).map(f64::from).collect();
        let err = sweep_execute(&axis, 1, 4, |c| {
            if c.index >= 5 {
                Err(Error::invalid("boom"))
            } else {
                Ok(record(c.x, c.seed))
            }
        })
        .unwrap_err();
        assert!(matches!(err, Error::SweepPoint { index: 5, .. }), "{err}");
    }

    #[test]
    fn point_seeds_differ() {
        let seeds: std::collections::BTreeSet<u64> = (0..1000).map(|i| point_seed(3, i)).collect();
        assert_eq!(seeds.len(), 1000);
        assert_eq!(point_seed(3, 4), point_seed(3, 4));
    }
}
