//! Physical constants and unit helpers.
//!
//! Every frequency inside the crate is an angular frequency in rad/s. Values
//! quoted as ordinary frequencies (Hz) cross the boundary through
//! [`hz`] and [`to_hz`].

use std::f64::consts::TAU;

/// Reduced Planck constant (J s), CODATA 2018 exact.
pub const HBAR: f64 = 1.054_571_817e-34;

/// Boltzmann constant (J/K), CODATA 2018 exact.
pub const K_B: f64 = 1.380_649e-23;

/// Converts an ordinary frequency in Hz to rad/s.
#[inline]
pub fn hz(f: f64) -> f64 {
    TAU * f
}

/// Converts an angular frequency in rad/s to Hz.
#[inline]
pub fn to_hz(omega: f64) -> f64 {
    omega / TAU
}

/// Power ratio in dB: `10 log10(x)`.
#[inline]
pub fn power_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Inverse of [`power_db`].
#[inline]
pub fn from_db(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}
