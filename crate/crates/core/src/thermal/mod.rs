//! Two-node lumped model of one dual-sided Peltier element.
//!
//! Each ceramic face is a single node. The element pumps heat from the cold face to the warm
//! face in proportion to its current, dissipates Joule heat split evenly between the faces and
//! leaks heat back through its internal conductance. Faces lose heat to the room and, when
//! touching skin, to the skin through the layer stack.

mod lifetime;
mod params;
mod series;

pub use lifetime::{
    lifetime, lifetime_with, run_constant_voltage, run_constant_voltage_until_settled, LifetimeDetector, LifetimeResult,
};
pub use params::PeltierParams;
pub use series::{DriveSchedule, Sample, TimeSeries};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::integrate::rk4_step;
use crate::scalar::{celsius_to_kelvin_offset, Scalar};

/// Warm-face temperature the element is driven towards, in degrees Celsius.
pub const TARGET_WARM_TEMP: f64 = 40.0;
/// The cold face must drop this far below ambient before a return crossing counts.
pub const DIP_EPSILON: f64 = 0.05;
/// Largest integration step accepted by [`step`].
pub const MAX_STEP: f64 = 0.1;
pub const MAX_DURATION: f64 = 3600.0;
/// Simulated temperatures outside this band are treated as a numerical blow-up.
pub const TEMP_GUARD: (f64, f64) = (-50.0, 150.0);
pub const MAX_VOLTAGE: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ThermalError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("invalid drive input: {0}")]
    InvalidDrive(String),
    #[error("invalid step size {0} s (must be in (0, 0.1])")]
    InvalidStep(f64),
    #[error("invalid simulation setup: {0}")]
    InvalidSetup(String),
    #[error("simulation blew up at t = {time} s (warm {warm} C, cold {cold} C)")]
    BlowUp { time: f64, warm: f64, cold: f64 },
}

/// One of the two ceramic faces. With a non-negative drive the roles are fixed per run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Face {
    Warm,
    Cold,
}

impl Face {
    pub fn other(self) -> Face {
        match self {
            Face::Warm => Face::Cold,
            Face::Cold => Face::Warm,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Face::Warm => "warm",
            Face::Cold => "cold",
        }
    }
}

impl std::str::FromStr for Face {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "warm" => Ok(Face::Warm),
            "cold" => Ok(Face::Cold),
            _ => Err(format!("unknown face `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermalState<T = f64> {
    pub time: T,
    pub temp_warm_side: T,
    pub temp_cold_side: T,
}

impl<T: Scalar> ThermalState<T> {
    /// Both faces at the given temperature, time zero.
    pub fn uniform(temp: T) -> Self {
        Self {
            time: T::zero(),
            temp_warm_side: temp,
            temp_cold_side: temp,
        }
    }

    pub fn face(&self, face: Face) -> T {
        match face {
            Face::Warm => self.temp_warm_side,
            Face::Cold => self.temp_cold_side,
        }
    }

    fn check_guard(&self) -> Result<(), ThermalError> {
        let (lo, hi) = (T::lit(TEMP_GUARD.0), T::lit(TEMP_GUARD.1));
        let ok = |v: T| v.is_finite() && v >= lo && v <= hi;
        if ok(self.temp_warm_side) && ok(self.temp_cold_side) {
            Ok(())
        } else {
            Err(ThermalError::BlowUp {
                time: self.time.to_f64_lossy(),
                warm: self.temp_warm_side.to_f64_lossy(),
                cold: self.temp_cold_side.to_f64_lossy(),
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveInput<T = f64> {
    pub voltage: T,
    /// Whether the element currently touches skin.
    pub contact: bool,
    /// Face that points at the skin.
    pub contact_side: Face,
}

impl<T: Scalar> DriveInput<T> {
    /// Constant voltage, no skin contact: the bench condition.
    pub fn bench(voltage: T) -> Self {
        Self {
            voltage,
            contact: false,
            contact_side: Face::Warm,
        }
    }

    pub fn validate(&self) -> Result<(), ThermalError> {
        if self.voltage >= T::zero() && self.voltage <= T::lit(MAX_VOLTAGE) {
            Ok(())
        } else {
            Err(ThermalError::InvalidDrive(format!(
                "voltage {} outside [0, {MAX_VOLTAGE}] V",
                self.voltage
            )))
        }
    }
}

/// Element current for the given face temperatures, amperes.
#[inline]
pub fn current<T: Scalar>(temp_warm: T, temp_cold: T, params: &PeltierParams<T>, voltage: T) -> T {
    (voltage - params.seebeck_alpha * (temp_warm - temp_cold)) / params.resistance
}

#[inline]
fn rates<T: Scalar>(temps: &[T; 2], params: &PeltierParams<T>, input: &DriveInput<T>) -> [T; 2] {
    let [tw, tc] = *temps;
    let kelvin = celsius_to_kelvin_offset::<T>();
    let i = current(tw, tc, params, input.voltage);
    let joule_half = T::lit(0.5) * i * i * params.resistance;
    let leak = params.internal_conductance * (tw - tc);
    let amb = params.ambient_temp;

    let mut warm = params.seebeck_alpha * i * (tw + kelvin) + joule_half - leak;
    let mut cold = -params.seebeck_alpha * i * (tc + kelvin) + joule_half + leak;
    if !params.warm_face_stack {
        warm -= params.ambient_conductance * (tw - amb);
    }
    cold -= params.ambient_conductance * (tc - amb);
    if input.contact {
        match input.contact_side {
            Face::Warm => warm -= params.skin_conductance * (tw - params.skin_temp),
            Face::Cold => cold -= params.skin_conductance * (tc - params.skin_temp),
        }
    }
    let c = params.heat_capacity_side;
    [warm / c, cold / c]
}

/// Temperature rates of change `(dT_warm/dt, dT_cold/dt)` in K/s.
pub fn derivatives<T: Scalar>(state: &ThermalState<T>, params: &PeltierParams<T>, input: &DriveInput<T>) -> (T, T) {
    let [w, c] = rates(&[state.temp_warm_side, state.temp_cold_side], params, input);
    (w, c)
}

/// Advances the state by `dt` seconds with one RK4 step.
pub fn step<T: Scalar>(
    state: &ThermalState<T>,
    params: &PeltierParams<T>,
    input: &DriveInput<T>,
    dt: T,
) -> Result<ThermalState<T>, ThermalError> {
    if !(dt > T::zero() && dt <= T::lit(MAX_STEP)) {
        return Err(ThermalError::InvalidStep(dt.to_f64_lossy()));
    }
    let next = advance(state, params, input, dt, state.time + dt);
    next.check_guard()?;
    Ok(next)
}

/// Unchecked step used inside validated loops; `time` is set explicitly so that long runs
/// keep exactly uniform sample times.
#[inline]
pub(crate) fn advance<T: Scalar>(
    state: &ThermalState<T>,
    params: &PeltierParams<T>,
    input: &DriveInput<T>,
    dt: T,
    time: T,
) -> ThermalState<T> {
    let [w, c] = rk4_step(&[state.temp_warm_side, state.temp_cold_side], dt, |y| {
        rates(y, params, input)
    });
    ThermalState {
        time,
        temp_warm_side: w,
        temp_cold_side: c,
    }
}

pub(crate) fn checked_advance<T: Scalar>(
    state: &ThermalState<T>,
    params: &PeltierParams<T>,
    input: &DriveInput<T>,
    dt: T,
    time: T,
) -> Result<ThermalState<T>, ThermalError> {
    let next = advance(state, params, input, dt, time);
    next.check_guard()?;
    Ok(next)
}

pub(crate) fn validate_run<T: Scalar>(duration: T, dt: T) -> Result<usize, ThermalError> {
    if !(dt > T::zero() && dt <= T::lit(MAX_STEP)) {
        return Err(ThermalError::InvalidStep(dt.to_f64_lossy()));
    }
    if !(duration >= T::zero() && duration <= T::lit(MAX_DURATION)) {
        return Err(ThermalError::InvalidSetup(format!(
            "duration {duration} s outside [0, {MAX_DURATION}]"
        )));
    }
    let steps = (duration / dt).to_f64_lossy();
    Ok((steps + 1e-6).floor() as usize)
}

/// Runs the element from ambient under a piecewise-constant drive schedule.
pub fn simulate<T: Scalar>(
    params: &PeltierParams<T>,
    drive: &DriveSchedule<T>,
    duration: T,
    dt: T,
) -> Result<TimeSeries<T>, ThermalError> {
    params.validate()?;
    let steps = validate_run(duration, dt)?;
    drive.check_alignment(dt)?;

    let mut samples = Vec::with_capacity(steps + 1);
    let mut state = ThermalState::uniform(params.ambient_temp);
    let mut cursor = drive.cursor();
    for k in 0..=steps {
        let t = T::from_usize(k).unwrap() * dt;
        let input = cursor.at(t, dt);
        samples.push(Sample {
            state,
            voltage: input.voltage,
            contact: input.contact,
        });
        if k < steps {
            let t_next = T::from_usize(k + 1).unwrap() * dt;
            state = checked_advance(&state, params, &input, dt, t_next)?;
        }
    }
    Ok(TimeSeries { dt, samples })
}
