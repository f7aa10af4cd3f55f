use std::time::{Duration, Instant};

use thiserror::Error;

use crate::controller::{
    coordinate_array, Action, ArrayState, ControllerConfig, ControllerError, Sensation, SideTemps,
};
use crate::device::trace::{ActionRecord, TempRecord};
use crate::device::{DeviceBackend, DeviceError};
use crate::layout::{ElementId, ELEMENT_COUNT};
use crate::pattern::CompiledSchedule;

/// Time source for [`run`].
pub trait Clock {
    fn now(&self) -> f64;
    /// Blocks (or pretends to) until `t` seconds after the run started.
    fn wait_until(&mut self, t: f64);
}

/// Jumps straight to the requested time.
#[derive(Debug, Default, Clone)]
pub struct SimClock {
    now: f64,
}

impl Clock for SimClock {
    fn now(&self) -> f64 {
        self.now
    }
    fn wait_until(&mut self, t: f64) {
        self.now = self.now.max(t);
    }
}

/// Real time, measured from construction.
#[derive(Debug, Clone)]
pub struct WallClock {
    start: Instant,
}

impl WallClock {
    pub fn start() -> Self {
        Self { start: Instant::now() }
    }
}

impl Clock for WallClock {
    fn now(&self) -> f64 {
        self.start.elapsed().as_secs_f64()
    }
    fn wait_until(&mut self, t: f64) {
        let remaining = t - self.now();
        if remaining > 0.0 {
            std::thread::sleep(Duration::from_secs_f64(remaining));
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExecutionTrace {
    pub actions: Vec<ActionRecord>,
    /// One row per element per tick, read before that tick's commands.
    pub temps: Vec<TempRecord>,
    /// Commands the controller refused, e.g. for a faulted element.
    pub rejected: Vec<(f64, ElementId, ControllerError)>,
}

impl ExecutionTrace {
    pub fn is_empty(&self) -> bool {
        self.actions.is_empty() && self.temps.is_empty() && self.rejected.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RunError {
    #[error(transparent)]
    Device(#[from] DeviceError),
    #[error(transparent)]
    Controller(#[from] ControllerError),
}

/// A run that stopped early, with everything recorded up to that point.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{error}")]
pub struct RunFailure {
    pub error: RunError,
    pub trace: ExecutionTrace,
}

fn dispatch<B: DeviceBackend>(backend: &mut B, element: ElementId, action: &Action) -> Result<(), DeviceError> {
    match action {
        Action::SetVoltage(v) => backend.apply_voltage(element, *v).map(|_| ()),
        // the controller only asks for a flip towards the face that is not on the skin
        Action::StartFlip(_) => backend.start_flip(element),
        Action::Stop => backend.apply_voltage(element, 0.0).map(|_| ()),
    }
}

/// Plays a compiled schedule on a backend, one controller tick per `tick_period`.
///
/// Commands go out on the first tick at or after their scheduled time; several commands for
/// one element inside a single tick collapse to the newest. The controller assumes every
/// element starts parked at `config.park_orientation`. The run ends with `stop_all`.
pub fn run<B: DeviceBackend, C: Clock>(
    schedule: &CompiledSchedule,
    config: &ControllerConfig,
    backend: &mut B,
    clock: &mut C,
) -> Result<ExecutionTrace, RunFailure> {
    let mut trace = ExecutionTrace::default();
    if schedule.command_count() == 0 {
        return Ok(trace);
    }
    if let Err(e) = config.validate() {
        return Err(RunFailure { error: e.into(), trace });
    }
    let result = run_inner(schedule, config, backend, clock, &mut trace);
    let stopped = backend.stop_all();
    match result.and(stopped.map_err(RunError::from)) {
        Ok(()) => Ok(trace),
        Err(error) => Err(RunFailure { error, trace }),
    }
}

fn run_inner<B: DeviceBackend, C: Clock>(
    schedule: &CompiledSchedule,
    config: &ControllerConfig,
    backend: &mut B,
    clock: &mut C,
    trace: &mut ExecutionTrace,
) -> Result<(), RunError> {
    let tick = config.tick_period;
    let ticks = (schedule.duration / tick - 1e-9).ceil().max(0.0) as usize;
    let mut array = ArrayState::parked(config);
    let mut next = [0usize; ELEMENT_COUNT];

    for k in 0..=ticks {
        let t = k as f64 * tick;
        clock.wait_until(t);
        let mut readings = Vec::with_capacity(ELEMENT_COUNT);
        for e in ElementId::all() {
            readings.push(backend.read_temps(e)?);
        }

        let mut commands: Vec<Option<Sensation>> = vec![None; ELEMENT_COUNT];
        for (i, list) in schedule.commands.iter().enumerate() {
            while next[i] < list.len() && list[next[i]].time <= t + 1e-9 {
                commands[i] = Some(list[next[i]].sensation);
                next[i] += 1;
            }
        }

        let out = coordinate_array(&array, config, &commands, &readings, t)?;
        for (e, st) in out.state.elements.iter().enumerate() {
            let r: SideTemps = readings[e];
            trace.temps.push(TempRecord {
                t,
                element: st.element_id,
                warm: r.warm,
                cold: r.cold,
                skin_facing: st.skin_facing_temp(),
                voltage: st.drive_voltage,
                phase: st.phase,
            });
        }
        for err in out.errors {
            trace.rejected.push((t, err.element, err.error));
        }
        for (e, a) in out.actions {
            trace.actions.push(ActionRecord {
                t,
                element: e,
                action: a,
            });
            dispatch(backend, e, &a)?;
        }
        array = out.state;
        if k < ticks {
            backend.advance(tick)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::device::{SimulatedBackend, SimulatedConfig};
    use crate::pattern::{parse_pattern, schedule};
    use crate::thermal::{Face, PeltierParams};

    fn params() -> PeltierParams<f64> {
        serde_json::from_str(include_str!("../../data/calibrated_params.json")).unwrap()
    }

    fn sim() -> SimulatedBackend {
        SimulatedBackend::uniform(params(), SimulatedConfig::noiseless()).unwrap()
    }

    fn play(text: &str) -> ExecutionTrace {
        let c = ControllerConfig::default();
        let s = schedule(&parse_pattern(text).unwrap(), &c);
        run(&s, &c, &mut sim(), &mut SimClock::default()).unwrap()
    }

    fn flips(t: &ExecutionTrace) -> usize {
        t.actions
            .iter()
            .filter(|a| matches!(a.action, Action::StartFlip(_)))
            .count()
    }

    #[test]
    fn empty_script_gives_empty_trace() {
        assert!(play("").is_empty());
    }

    #[test]
    fn single_warm_command() {
        assert_eq!(flips(&play("duration 2s\nat 0s elem 0 warm")), 0);
        let t = play("duration 2s\nat 0s elem 0 cool\nat 1s elem 0 warm");
        assert_eq!(flips(&t), 2);
        let c = ControllerConfig {
            park_orientation: Face::Cold,
            ..Default::default()
        };
        let s = schedule(&parse_pattern("duration 2s\nat 0s elem 0 warm").unwrap(), &c);
        let mut b = SimulatedBackend::uniform(
            params(),
            SimulatedConfig {
                initial_orientation: Face::Cold,
                ..SimulatedConfig::noiseless()
            },
        )
        .unwrap();
        let t = run(&s, &c, &mut b, &mut SimClock::default()).unwrap();
        assert_eq!(flips(&t), 1);
        assert_eq!(b.orientation(ElementId::new(0).unwrap()), Face::Warm);
    }

    #[test]
    fn replay_is_deterministic() {
        let text = "duration 5s\nat 0s all warm\nat 1s row 0 cool\nat 1.3s col 2 neutral\nat 3s elem 7 cool";
        assert_eq!(play(text), play(text));
    }

    #[test]
    fn commands_never_precede_events() {
        let text = "duration 3s\nat 0.013s elem 1 cool\nat 1.27s elem 1 warm\nat 2.5s elem 1 neutral";
        let t = play(text);
        let flip_times: Vec<f64> = t
            .actions
            .iter()
            .filter(|a| matches!(a.action, Action::StartFlip(_)))
            .map(|a| a.t)
            .collect();
        assert_eq!(flip_times.len(), 2);
        assert!(flip_times[0] >= 0.013 && flip_times[0] < 0.013 + 0.05 + 1e-9);
        assert!(flip_times[1] >= 1.27 && flip_times[1] < 1.27 + 0.05 + 1e-9);
    }

    struct Failing {
        inner: SimulatedBackend,
        reads_left: usize,
    }

    impl DeviceBackend for Failing {
        fn apply_voltage(&mut self, e: ElementId, v: f64) -> Result<f64, DeviceError> {
            self.inner.apply_voltage(e, v)
        }
        fn start_flip(&mut self, e: ElementId) -> Result<(), DeviceError> {
            self.inner.start_flip(e)
        }
        fn read_temps(&mut self, e: ElementId) -> Result<SideTemps, DeviceError> {
            if self.reads_left == 0 {
                return Err(DeviceError::NoReply);
            }
            self.reads_left -= 1;
            self.inner.read_temps(e)
        }
        fn stop_all(&mut self) -> Result<(), DeviceError> {
            self.inner.stop_all()
        }
        fn advance(&mut self, dt: f64) -> Result<(), DeviceError> {
            self.inner.advance(dt)
        }
    }

    #[test]
    fn backend_failure_keeps_partial_trace() {
        let c = ControllerConfig::default();
        let s = schedule(&parse_pattern("duration 5s\nat 0s all warm").unwrap(), &c);
        let mut b = Failing {
            inner: sim(),
            reads_left: 8 * 10 + 3,
        };
        let f = run(&s, &c, &mut b, &mut SimClock::default()).unwrap_err();
        assert_eq!(f.error, RunError::Device(DeviceError::NoReply));
        assert_eq!(f.trace.temps.len(), 8 * 10);
        assert_eq!(
            b.inner.voltage(ElementId::new(0).unwrap()),
            0.0,
            "stopped after failure"
        );
    }

    #[test]
    fn wall_clock_waits() {
        let mut c = WallClock::start();
        c.wait_until(0.02);
        assert!(c.now() >= 0.02);
    }
}
