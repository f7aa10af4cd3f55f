//! Simulation, calibration and control for an array of motor-flipped, dual-sided Peltier
//! elements used as a thermal display.
//!
//! The numeric core ([`thermal`], [`integrate`]) is generic over [`Scalar`] (`f32`/`f64`);
//! the aliases below fix it to `f64`, which is what the rest of the stack uses.

// NaN-rejecting range checks read most clearly as `!(lo <= x && x <= hi)`
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calibration;
pub mod controller;
pub mod device;
pub mod integrate;
pub mod layout;
pub mod pattern;
pub mod scalar;
pub mod thermal;

pub use scalar::Scalar;

pub type PeltierParams64 = thermal::PeltierParams<f64>;
pub type PeltierParams32 = thermal::PeltierParams<f32>;
pub type ThermalState64 = thermal::ThermalState<f64>;
pub type ThermalState32 = thermal::ThermalState<f32>;
pub type TimeSeries64 = thermal::TimeSeries<f64>;
pub type TimeSeries32 = thermal::TimeSeries<f32>;
pub type LifetimeResult64 = thermal::LifetimeResult<f64>;
