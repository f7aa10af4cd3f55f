use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;
use crate::thermal::{
    checked_advance, validate_run, DriveInput, PeltierParams, ThermalError, ThermalState, TimeSeries, DIP_EPSILON,
    TARGET_WARM_TEMP,
};

/// Dual-sided lifetime metrics of one run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LifetimeResult<T = f64> {
    /// Time at which the cold face climbs back above ambient after having dipped below it.
    pub lifetime: Option<T>,
    /// First time the warm face reaches the target temperature.
    pub time_to_target: Option<T>,
    pub max_warm_temp: T,
    pub target_reached_within_lifetime: bool,
}

/// Streaming crossing detector, fed one sample at a time.
#[derive(Debug, Clone)]
pub struct LifetimeDetector<T> {
    ambient: T,
    target: T,
    dipped: bool,
    prev: Option<(T, T, T)>,
    lifetime: Option<T>,
    time_to_target: Option<T>,
    max_warm: Option<T>,
}

fn crossing<T: Scalar>(t0: T, v0: T, t1: T, v1: T, level: T) -> T {
    if v1 == v0 {
        return t1;
    }
    t0 + (level - v0) / (v1 - v0) * (t1 - t0)
}

impl<T: Scalar> LifetimeDetector<T> {
    pub fn new(ambient: T, target: T) -> Self {
        Self {
            ambient,
            target,
            dipped: false,
            prev: None,
            lifetime: None,
            time_to_target: None,
            max_warm: None,
        }
    }

    /// Starts as if the cold face had already dipped, for runs resumed mid-cycle.
    pub fn assume_dipped(mut self) -> Self {
        self.dipped = true;
        self
    }

    pub fn push(&mut self, time: T, warm: T, cold: T) {
        self.max_warm = Some(match self.max_warm {
            Some(m) if m >= warm => m,
            _ => warm,
        });

        if self.time_to_target.is_none() && warm >= self.target {
            self.time_to_target = Some(match self.prev {
                Some((t0, w0, _)) => crossing(t0, w0, time, warm, self.target),
                None => time,
            });
        }

        if !self.dipped {
            if cold < self.ambient - T::lit(DIP_EPSILON) {
                self.dipped = true;
            }
        } else if self.lifetime.is_none() && cold > self.ambient {
            self.lifetime = Some(match self.prev {
                Some((t0, _, c0)) => crossing(t0, c0, time, cold, self.ambient),
                // only reachable through `assume_dipped`
                None => time,
            });
        }
        self.prev = Some((time, warm, cold));
    }

    pub fn push_state(&mut self, s: &ThermalState<T>) {
        self.push(s.time, s.temp_warm_side, s.temp_cold_side)
    }

    /// Both crossings found; later samples can only change `max_warm_temp`.
    pub fn settled(&self) -> bool {
        self.lifetime.is_some() && self.time_to_target.is_some()
    }

    pub fn finish(&self) -> LifetimeResult<T> {
        let target_reached_within_lifetime = match (self.time_to_target, self.lifetime) {
            (Some(t), Some(l)) => t <= l,
            (Some(_), None) => true,
            (None, _) => false,
        };
        LifetimeResult {
            lifetime: self.lifetime,
            time_to_target: self.time_to_target,
            max_warm_temp: self.max_warm.unwrap_or(self.ambient),
            target_reached_within_lifetime,
        }
    }
}

/// Lifetime metrics of a series using the parameters' ambient temperature and the 40 C target.
pub fn lifetime<T: Scalar>(series: &TimeSeries<T>, params: &PeltierParams<T>) -> LifetimeResult<T> {
    lifetime_with(series, params.ambient_temp, T::lit(TARGET_WARM_TEMP))
}

pub fn lifetime_with<T: Scalar>(series: &TimeSeries<T>, ambient: T, target: T) -> LifetimeResult<T> {
    let mut det = LifetimeDetector::new(ambient, target);
    for s in &series.samples {
        det.push_state(&s.state);
    }
    det.finish()
}

/// Constant-voltage bench run from ambient, evaluated without storing the series.
///
/// Produces exactly the result of `lifetime(simulate(..))` for a constant bench drive.
pub fn run_constant_voltage<T: Scalar>(
    params: &PeltierParams<T>,
    voltage: T,
    duration: T,
    dt: T,
) -> Result<LifetimeResult<T>, ThermalError> {
    bench_run(params, voltage, duration, dt, false)
}

/// Like [`run_constant_voltage`] but stops as soon as both crossings are known.
///
/// `lifetime` and `time_to_target` are identical to the full run; `max_warm_temp` only covers
/// the simulated prefix.
pub fn run_constant_voltage_until_settled<T: Scalar>(
    params: &PeltierParams<T>,
    voltage: T,
    duration: T,
    dt: T,
) -> Result<LifetimeResult<T>, ThermalError> {
    bench_run(params, voltage, duration, dt, true)
}

fn bench_run<T: Scalar>(
    params: &PeltierParams<T>,
    voltage: T,
    duration: T,
    dt: T,
    stop_when_settled: bool,
) -> Result<LifetimeResult<T>, ThermalError> {
    params.validate()?;
    let input = DriveInput::bench(voltage);
    input.validate()?;
    let steps = validate_run(duration, dt)?;
    let mut det = LifetimeDetector::new(params.ambient_temp, T::lit(TARGET_WARM_TEMP));
    let mut state = ThermalState::uniform(params.ambient_temp);
    det.push_state(&state);
    for k in 1..=steps {
        let t = T::from_usize(k).unwrap() * dt;
        state = checked_advance(&state, params, &input, dt, t)?;
        det.push_state(&state);
        if stop_when_settled && det.settled() {
            break;
        }
    }
    Ok(det.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::thermal::{simulate, DriveSchedule, Sample};

    fn series_from(points: &[(f64, f64, f64)]) -> TimeSeries<f64> {
        let dt = if points.len() > 1 {
            points[1].0 - points[0].0
        } else {
            0.1
        };
        TimeSeries {
            dt,
            samples: points
                .iter()
                .map(|&(t, w, c)| Sample {
                    state: ThermalState {
                        time: t,
                        temp_warm_side: w,
                        temp_cold_side: c,
                    },
                    voltage: 0.0,
                    contact: false,
                })
                .collect(),
        }
    }

    #[test]
    fn all_ambient_series_has_no_crossings() {
        let pts: Vec<_> = (0..100).map(|k| (k as f64 * 0.1, 25.0, 25.0)).collect();
        let r = lifetime(&series_from(&pts), &PeltierParams::initial_guess());
        assert_eq!(r.lifetime, None);
        assert_eq!(r.time_to_target, None);
        assert_eq!(r.max_warm_temp, 25.0);
        assert!(!r.target_reached_within_lifetime);
    }

    #[test]
    fn piecewise_linear_cold_trace_crosses_at_thirty_seconds() {
        // 25 -> 20 over [0, 10], 20 -> 30 over [10, 50]; crossing of 25 at t = 30
        let cold = |t: f64| {
            if t <= 10.0 {
                25.0 - 0.5 * t
            } else {
                20.0 + 0.25 * (t - 10.0)
            }
        };
        for dt in [1.0, 0.7, 0.3] {
            let n = (50.0 / dt) as usize;
            let pts: Vec<_> = (0..=n).map(|k| (k as f64 * dt, 30.0, cold(k as f64 * dt))).collect();
            let r = lifetime(&series_from(&pts), &PeltierParams::initial_guess());
            assert!((r.lifetime.unwrap() - 30.0).abs() < 1e-9, "dt {dt}: {:?}", r.lifetime);
        }
    }

    #[test]
    fn small_initial_wobble_does_not_count_as_dip() {
        let pts = [(0.0, 25.0, 25.0), (1.0, 25.0, 24.97), (2.0, 25.0, 25.2)];
        let r = lifetime(&series_from(&pts), &PeltierParams::initial_guess());
        assert_eq!(r.lifetime, None);
    }

    #[test]
    fn target_time_is_interpolated() {
        let pts = [(0.0, 25.0, 25.0), (10.0, 35.0, 20.0), (20.0, 45.0, 26.0)];
        let r = lifetime(&series_from(&pts), &PeltierParams::initial_guess());
        assert!((r.time_to_target.unwrap() - 15.0).abs() < 1e-12);
        assert!((r.lifetime.unwrap() - (10.0 + 50.0 / 6.0)).abs() < 1e-12);
        assert!(r.target_reached_within_lifetime);
        assert_eq!(r.max_warm_temp, 45.0);
    }

    #[test]
    fn target_after_lifetime_is_not_within_lifetime() {
        let pts = [
            (0.0, 25.0, 25.0),
            (10.0, 30.0, 20.0),
            (20.0, 35.0, 26.0),
            (30.0, 41.0, 27.0),
        ];
        let r = lifetime(&series_from(&pts), &PeltierParams::initial_guess());
        assert!(r.time_to_target.unwrap() > r.lifetime.unwrap());
        assert!(!r.target_reached_within_lifetime);
    }

    #[test]
    fn streaming_run_matches_simulate_then_lifetime() {
        let p = PeltierParams::<f64>::initial_guess();
        for v in [0.0, 1.5, 2.0, 3.0] {
            let ts = simulate(&p, &DriveSchedule::constant(DriveInput::bench(v)), 300.0, 0.05).unwrap();
            let a = lifetime(&ts, &p);
            let b = run_constant_voltage(&p, v, 300.0, 0.05).unwrap();
            assert_eq!(a, b);
            let c = run_constant_voltage_until_settled(&p, v, 300.0, 0.05).unwrap();
            assert_eq!((a.lifetime, a.time_to_target), (c.lifetime, c.time_to_target));
            assert_eq!(a.target_reached_within_lifetime, c.target_reached_within_lifetime);
        }
    }
}
