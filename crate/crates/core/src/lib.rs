//! Simulation of deterministic single-Rydberg-excitation creation in a
//! blockaded atomic ensemble by chirped two-photon adiabatic rapid passage.
//!
//! The crate is layered bottom-up:
//!
//! * [`quantum`]: bases, effective two-level reduction, dressed states and
//!   Hamiltonian builders for the superatom, three-level ladder and
//!   brute-force N-atom models.
//! * [`pulse`]: pulse envelopes, linear chirp, pulse area and adiabaticity.
//! * [`dynamics`]: RK4 Schrödinger / Lindblad integration and seeded
//!   Monte-Carlo ensembles.
//! * [`photon`]: retrieval, detection and HBT statistics.
//! * [`fitting`]: scan-curve fits and robustness metrics.
//! * [`scenario`]: configured scans, sweeps and their CSV/JSON outputs.
//!
//! Frequencies are angular (rad/µs) and times are µs throughout; see
//! [`units`] for conversions from MHz and ns.

pub mod dynamics;
pub mod error;
pub mod fitting;
pub mod linalg;
pub mod photon;
pub mod pulse;
pub mod quantum;
pub mod scenario;
pub mod units;

pub use error::{Error, NumericFailure, Result};
