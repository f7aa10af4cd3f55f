use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;
use crate::thermal::{DriveInput, ThermalError, ThermalState};

/// One recorded sample: node temperatures plus the drive applied from this instant on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample<T = f64> {
    pub state: ThermalState<T>,
    pub voltage: T,
    pub contact: bool,
}

/// Uniformly spaced samples of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries<T = f64> {
    pub dt: T,
    pub samples: Vec<Sample<T>>,
}

impl<T: Scalar> TimeSeries<T> {
    pub fn empty(dt: T) -> Self {
        Self {
            dt,
            samples: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn states(&self) -> impl Iterator<Item = &ThermalState<T>> {
        self.samples.iter().map(|s| &s.state)
    }

    /// Checks strictly increasing, uniformly spaced sample times (within 1e-9 s).
    pub fn check_uniform(&self) -> Result<(), ThermalError> {
        let tol = T::lit(1e-9);
        for (i, w) in self.samples.windows(2).enumerate() {
            let gap = w[1].state.time - w[0].state.time;
            if !(gap > T::zero()) || (gap - self.dt).abs() > tol {
                return Err(ThermalError::InvalidSetup(format!(
                    "sample {} is not spaced by dt = {}",
                    i + 1,
                    self.dt
                )));
            }
        }
        Ok(())
    }
}

/// Piecewise-constant drive: each segment holds from its start time until the next one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriveSchedule<T = f64> {
    segments: Vec<(T, DriveInput<T>)>,
}

impl<T: Scalar> DriveSchedule<T> {
    pub fn constant(input: DriveInput<T>) -> Self {
        Self {
            segments: vec![(T::zero(), input)],
        }
    }

    /// Segments must start at 0 and have strictly increasing start times.
    pub fn new(segments: Vec<(T, DriveInput<T>)>) -> Result<Self, ThermalError> {
        match segments.first() {
            Some((t0, _)) if *t0 == T::zero() => {}
            _ => return Err(ThermalError::InvalidSetup("drive schedule must start at t = 0".into())),
        }
        for w in segments.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(ThermalError::InvalidSetup(
                    "drive schedule breakpoints must be strictly increasing".into(),
                ));
            }
        }
        for (_, input) in &segments {
            input.validate()?;
        }
        Ok(Self { segments })
    }

    pub fn segments(&self) -> &[(T, DriveInput<T>)] {
        &self.segments
    }

    pub(crate) fn check_alignment(&self, dt: T) -> Result<(), ThermalError> {
        for (t, input) in &self.segments {
            input.validate()?;
            let k = (*t / dt).round();
            if (k * dt - *t).abs() > T::lit(1e-6) * dt {
                return Err(ThermalError::InvalidSetup(format!(
                    "breakpoint {t} s is not a multiple of dt = {dt} s"
                )));
            }
        }
        Ok(())
    }

    pub(crate) fn cursor(&self) -> ScheduleCursor<'_, T> {
        ScheduleCursor {
            segments: &self.segments,
            idx: 0,
        }
    }
}

pub(crate) struct ScheduleCursor<'a, T> {
    segments: &'a [(T, DriveInput<T>)],
    idx: usize,
}

impl<T: Scalar> ScheduleCursor<'_, T> {
    /// Input active at `t`; times must be queried in non-decreasing order.
    pub(crate) fn at(&mut self, t: T, dt: T) -> DriveInput<T> {
        let tol = T::lit(1e-6) * dt;
        while self.idx + 1 < self.segments.len() && self.segments[self.idx + 1].0 <= t + tol {
            self.idx += 1;
        }
        self.segments[self.idx].1
    }
}
