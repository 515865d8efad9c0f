//! Derivative-free search over pump photon numbers, phases and detunings.

pub mod nelder_mead;
mod pump;

pub use pump::*;

#[cfg(test)]
mod tests;
