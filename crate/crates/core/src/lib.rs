//! Coupled-mode simulation and calibration of multi-port electromechanical
//! microwave devices.
//!
//! A [`device::DeviceModel`] plus a [`effective::PumpConfiguration`] gives an
//! [`effective::EffectiveModel`], from which [`scattering`] computes port
//! scattering matrices. [`oracles`] holds closed-form results used to check
//! the engine, [`noise`] budgets added noise, [`timedomain`] integrates the
//! full time-dependent equations and [`optimize`] searches pump settings.

pub mod config;
pub mod device;
pub mod effective;
pub mod error;
pub mod noise;
pub mod optimize;
pub mod oracles;
pub mod presets;
pub mod scattering;
pub mod timedomain;
pub mod units;

pub use error::{Error, Result};
