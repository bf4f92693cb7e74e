//! Frequency and time conventions.
//!
//! Configuration values are ordinary frequencies in MHz and times in ns.
//! Everything inside the library is angular frequency in rad/µs and time in
//! µs, so a value of `2π × 1 MHz` is stored as `2π` rad/µs.

use std::f64::consts::PI;

/// MHz (ordinary frequency) to rad/µs.
#[inline]
pub fn mhz(value: f64) -> f64 {
    2.0 * PI * value
}

/// rad/µs back to MHz.
#[inline]
pub fn to_mhz(angular: f64) -> f64 {
    angular / (2.0 * PI)
}

/// MHz/µs chirp rate to rad/µs².
#[inline]
pub fn mhz_per_us(value: f64) -> f64 {
    mhz(value)
}

/// ns to µs.
#[inline]
pub fn ns(value: f64) -> f64 {
    value * 1e-3
}

/// µs to ns.
#[inline]
pub fn to_ns(us: f64) -> f64 {
    us * 1e3
}

/// Chirp-rate unit used for the area scans, 2π × 12 MHz/µs.
pub const CHIRP_UNIT_MHZ_PER_US: f64 = 12.0;

/// One chirp unit in rad/µs².
#[inline]
pub fn chirp_unit() -> f64 {
    mhz_per_us(CHIRP_UNIT_MHZ_PER_US)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn experiment_rabi_frequency_conversion() {
        assert!((mhz(2.3) - 14.451_326_206_513_047).abs() < 1e-12);
        assert_eq!(ns(500.0), 0.5);
        assert!((chirp_unit() - 75.398_223_686_155_04).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn mhz_round_trip(x in -1e4f64..1e4) {
            let back = to_mhz(mhz(x));
            prop_assert!((back - x).abs() <= 1e-12 * x.abs().max(1e-300));
        }

        #[test]
        fn ns_round_trip(x in 0.0f64..1e6) {
            prop_assert!((to_ns(ns(x)) - x).abs() <= 1e-12 * x.max(1.0));
        }
    }
}
