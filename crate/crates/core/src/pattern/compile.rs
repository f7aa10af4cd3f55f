use serde::{Deserialize, Serialize};

use crate::controller::{ControllerConfig, Phase, Sensation};
use crate::device::{SimulatedBackend, SimulatedConfig};
use crate::layout::{ElementId, ELEMENT_COUNT};
use crate::pattern::run::{run, SimClock};
use crate::pattern::PatternScript;
use crate::thermal::{Face, PeltierParams};

/// Slack for comparing event times against flip windows.
const TIME_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduledCommand {
    pub time: f64,
    pub sensation: Sensation,
    /// Index of the source event in the (time-sorted) script.
    pub event: usize,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Annotation {
    /// Another event on the same element at the same time, later in the file, wins.
    Superseded {
        element: ElementId,
        event: usize,
        line: usize,
        time: f64,
        by_line: usize,
    },
    /// The event lands while an earlier flip is still turning; it takes effect once that flip
    /// completes.
    Delayed {
        element: ElementId,
        event: usize,
        line: usize,
        time: f64,
        until: f64,
    },
    /// Closed-loop pre-simulation saw the element exhaust its cold side before the end.
    CoolBudgetExhausted { element: ElementId, time: f64 },
    /// The pre-simulation itself failed; the schedule is unchecked after `time`.
    SimulationFailed { time: f64, reason: String },
}

impl Annotation {
    /// Whether this annotation stands in for a command that was not issued.
    pub fn is_rejection(&self) -> bool {
        matches!(self, Annotation::Superseded { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompiledSchedule {
    pub duration: f64,
    pub rotation_latency: f64,
    /// One list per element, strictly increasing in time.
    pub commands: Vec<Vec<ScheduledCommand>>,
    pub annotations: Vec<Annotation>,
    /// Number of (event, element) pairs in the source script.
    pub targets: usize,
}

impl CompiledSchedule {
    pub fn is_feasible(&self) -> bool {
        self.annotations.is_empty()
    }

    pub fn command_count(&self) -> usize {
        self.commands.iter().map(Vec::len).sum()
    }

    pub fn rejection_count(&self) -> usize {
        self.annotations.iter().filter(|a| a.is_rejection()).count()
    }

    pub fn for_element(&self, e: ElementId) -> &[ScheduledCommand] {
        &self.commands[e.index()]
    }
}

/// Drops float noise from sums like 1.2 + 0.6 so reports read cleanly.
fn round_nanos(t: f64) -> f64 {
    (t * 1e9).round() / 1e9
}

fn target_face(s: Sensation, config: &ControllerConfig) -> Face {
    match s {
        Sensation::Warm => Face::Warm,
        Sensation::Cool => Face::Cold,
        Sensation::Neutral => config.park_orientation,
    }
}

/// Turns a script into per-element command lists with feasibility annotations only; no
/// pre-simulation.
pub fn schedule(script: &PatternScript, config: &ControllerConfig) -> CompiledSchedule {
    let mut per_element: Vec<Vec<(usize, &crate::pattern::Event)>> = vec![Vec::new(); ELEMENT_COUNT];
    let mut targets = 0;
    for (i, ev) in script.events.iter().enumerate() {
        for e in ev.selector.members() {
            per_element[e.index()].push((i, ev));
            targets += 1;
        }
    }

    let latency = config.rotation_latency;
    let mut commands = vec![Vec::new(); ELEMENT_COUNT];
    let mut annotations = Vec::new();
    for (idx, items) in per_element.iter().enumerate() {
        let element = ElementId::new(idx as u8).expect("index below element count");
        let mut face = config.park_orientation;
        let mut last_flip: Option<f64> = None;
        let mut k = 0;
        while k < items.len() {
            // events sharing a time: the one furthest down the file wins
            let mut j = k;
            while j + 1 < items.len() && items[j + 1].1.time == items[k].1.time {
                j += 1;
            }
            let winner = items[k..=j]
                .iter()
                .max_by_key(|(_, ev)| ev.line)
                .expect("non-empty group");
            for &(i, ev) in &items[k..=j] {
                if i != winner.0 {
                    annotations.push(Annotation::Superseded {
                        element,
                        event: i,
                        line: ev.line,
                        time: ev.time,
                        by_line: winner.1.line,
                    });
                }
            }
            let (i, ev) = *winner;
            let wanted = target_face(ev.sensation, config);
            if wanted != face {
                match last_flip {
                    Some(f) if ev.time < f + latency - TIME_EPS => annotations.push(Annotation::Delayed {
                        element,
                        event: i,
                        line: ev.line,
                        time: ev.time,
                        until: round_nanos(f + latency),
                    }),
                    _ => last_flip = Some(ev.time),
                }
                face = wanted;
            }
            commands[idx].push(ScheduledCommand {
                time: ev.time,
                sensation: ev.sensation,
                event: i,
                line: ev.line,
            });
            k = j + 1;
        }
    }
    CompiledSchedule {
        duration: script.duration,
        rotation_latency: latency,
        commands,
        annotations,
        targets,
    }
}

/// Plant used for the closed-loop check: noiseless and under the same bench conditions the
/// parameters were calibrated in, so the cold-side budget means the measured lifetime.
pub fn presimulation_backend(
    config: &ControllerConfig,
    params: &PeltierParams<f64>,
) -> Result<SimulatedBackend, crate::device::DeviceError> {
    SimulatedBackend::uniform(
        *params,
        SimulatedConfig {
            rotation_latency: config.rotation_latency,
            skin_contact: false,
            noise_sigma: 0.0,
            initial_orientation: config.park_orientation,
            ..SimulatedConfig::default()
        },
    )
}

/// Builds the schedule and replays it in closed loop against the thermal model to flag
/// elements that run out of cold-side budget. Never fails: problems become annotations.
pub fn compile(script: &PatternScript, config: &ControllerConfig, params: &PeltierParams<f64>) -> CompiledSchedule {
    let mut sched = schedule(script, config);
    if script.events.is_empty() {
        return sched;
    }
    let mut backend = match presimulation_backend(config, params) {
        Ok(b) => b,
        Err(e) => {
            sched.annotations.push(Annotation::SimulationFailed {
                time: 0.0,
                reason: e.to_string(),
            });
            return sched;
        }
    };
    let trace = match run(&sched, config, &mut backend, &mut SimClock::default()) {
        Ok(t) => t,
        Err(failure) => {
            sched.annotations.push(Annotation::SimulationFailed {
                time: failure.trace.temps.last().map_or(0.0, |r| r.t),
                reason: failure.error.to_string(),
            });
            failure.trace
        }
    };
    let mut flagged = [false; ELEMENT_COUNT];
    for r in &trace.temps {
        if r.phase == Phase::Exhausted && !flagged[r.element.index()] {
            flagged[r.element.index()] = true;
            sched.annotations.push(Annotation::CoolBudgetExhausted {
                element: r.element,
                time: r.t,
            });
        }
    }
    sched
}
