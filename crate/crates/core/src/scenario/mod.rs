//! Configured experiment reproductions and the seeded sweep engine behind
//! them.
//!
//! A [`ScenarioConfig`] is loaded from JSON (MHz, ns, chirp units `u`), a
//! runner evaluates every sweep point in parallel, and the resulting
//! [`SweepResult`]s carry their fit, peak metrics and provenance. Output is
//! byte-identical for a given configuration and seed, whatever the number of
//! workers.

pub mod config;
pub mod output;
pub mod runs;
pub mod sweep;

pub use config::{BlockadeConfig, Range, ScenarioConfig};
pub use runs::{
    chirp_label, nominal_area, observe, run_adiabaticity, run_area_scan, run_chirp_summary, run_detuning_scan,
    run_rabi_scan, AdiabaticityReport, ChirpSummary, ChirpSummaryRow, DetuningScan,
};
pub use sweep::{point_seed, sweep_execute, PointContext, PointRecord, Provenance, SweepResult, VERSION};
