//! Per-element control: sensation commands become flips and drive voltages, the warm face is
//! held at the target by bang-bang regulation, and a skin-temperature cutoff latches a fault.
//!
//! The controller works on `f64` throughout; it talks to hardware, not to the integrator.

mod array;
mod budget;

pub use array::{coordinate_array, ArrayOutcome, ArrayState, ElementError};
pub use budget::{estimate_remaining_cool_budget, BUDGET_DT, BUDGET_HORIZON};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::layout::{ElementId, ELEMENT_COUNT};
use crate::thermal::{Face, DIP_EPSILON, MAX_VOLTAGE};

/// Both faces must be back within this distance of ambient before an exhausted element
/// counts as reconditioned.
pub const RECONDITION_TOLERANCE: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Sensation {
    Warm,
    Neutral,
    Cool,
}

impl Sensation {
    pub fn as_str(self) -> &'static str {
        match self {
            Sensation::Warm => "WARM",
            Sensation::Neutral => "NEUTRAL",
            Sensation::Cool => "COOL",
        }
    }
}

impl fmt::Display for Sensation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Sensation {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "WARM" => Ok(Sensation::Warm),
            "NEUTRAL" => Ok(Sensation::Neutral),
            "COOL" => Ok(Sensation::Cool),
            _ => Err(format!("unknown sensation '{s}' (expected WARM, NEUTRAL or COOL)")),
        }
    }
}

/// How thermistor readings map onto elements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum SensingMode {
    /// Every element has its own thermistor.
    #[default]
    PerElement,
    /// Consecutive groups of `group_size` elements share the thermistor of the group's
    /// lowest-numbered element.
    ///
    /// Followers are only protected by the cutoff while they are driven like their leader;
    /// a follower commanded differently can overheat without the controller seeing it.
    Grouped { group_size: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllerConfig {
    pub target_warm_temp: f64,
    pub hysteresis: f64,
    /// Duration of a 180 degree flip, seconds.
    pub rotation_latency: f64,
    pub safety_cutoff_temp: f64,
    pub drive_voltage_nominal: f64,
    pub ambient_temp: f64,
    pub tick_period: f64,
    /// Face turned towards the skin for NEUTRAL.
    pub park_orientation: Face,
    pub sensing: SensingMode,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            target_warm_temp: 40.0,
            hysteresis: 0.5,
            rotation_latency: 0.6,
            safety_cutoff_temp: 43.0,
            drive_voltage_nominal: 2.0,
            ambient_temp: 25.0,
            tick_period: 0.05,
            park_orientation: Face::Warm,
            sensing: SensingMode::PerElement,
        }
    }
}

impl ControllerConfig {
    pub fn validate(&self) -> Result<(), ControllerError> {
        let bad = |m: String| Err(ControllerError::InvalidConfig(m));
        let finite = [
            self.target_warm_temp,
            self.hysteresis,
            self.rotation_latency,
            self.safety_cutoff_temp,
            self.drive_voltage_nominal,
            self.ambient_temp,
            self.tick_period,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return bad("all values must be finite".into());
        }
        if !(self.safety_cutoff_temp > self.target_warm_temp && self.target_warm_temp > self.ambient_temp) {
            return bad(format!(
                "need safety_cutoff_temp > target_warm_temp > ambient_temp, got {} / {} / {}",
                self.safety_cutoff_temp, self.target_warm_temp, self.ambient_temp
            ));
        }
        if self.rotation_latency <= 0.0 {
            return bad(format!(
                "rotation_latency must be positive, got {}",
                self.rotation_latency
            ));
        }
        if self.tick_period <= 0.0 {
            return bad(format!("tick_period must be positive, got {}", self.tick_period));
        }
        if self.hysteresis < 0.0 {
            return bad(format!("hysteresis must be non-negative, got {}", self.hysteresis));
        }
        if !(0.0..=MAX_VOLTAGE).contains(&self.drive_voltage_nominal) {
            return bad(format!(
                "drive_voltage_nominal must be in [0, {MAX_VOLTAGE}], got {}",
                self.drive_voltage_nominal
            ));
        }
        if let SensingMode::Grouped { group_size } = self.sensing {
            if group_size == 0 || !ELEMENT_COUNT.is_multiple_of(group_size) {
                return bad(format!("group_size must divide {ELEMENT_COUNT}, got {group_size}"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ControllerError {
    #[error("element {element}: time went backwards from {last} s to {now} s")]
    TimeRegression { element: ElementId, last: f64, now: f64 },
    #[error("element {0} is in fault and rejects commands")]
    Faulted(ElementId),
    #[error("invalid controller config: {0}")]
    InvalidConfig(String),
    #[error("array needs exactly {ELEMENT_COUNT} entries, got {0}")]
    ArraySize(usize),
}

/// Temperatures of the two physical faces, named after their role under positive drive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SideTemps {
    pub warm: f64,
    pub cold: f64,
}

impl SideTemps {
    pub fn uniform(t: f64) -> Self {
        Self { warm: t, cold: t }
    }

    pub fn face(&self, face: Face) -> f64 {
        match face {
            Face::Warm => self.warm,
            Face::Cold => self.cold,
        }
    }

    fn is_finite(&self) -> bool {
        self.warm.is_finite() && self.cold.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Rotation {
    Idle,
    Rotating { start: f64, from: Face, to: Face },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    /// Energized, warm face not yet up to the regulation band.
    Conditioning,
    /// Idle, or conditioned and waiting for the requested face to reach the skin.
    Ready,
    /// Conditioned with the requested face on the skin.
    Delivering,
    /// The cold face has climbed back above ambient; stays until the element has rested.
    Exhausted,
    /// Latched by the safety cutoff; the element is off for good.
    Fault,
}

impl Phase {
    pub const ALL: [Phase; 5] = [
        Phase::Conditioning,
        Phase::Ready,
        Phase::Delivering,
        Phase::Exhausted,
        Phase::Fault,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Conditioning => "conditioning",
            Phase::Ready => "ready",
            Phase::Delivering => "delivering",
            Phase::Exhausted => "exhausted",
            Phase::Fault => "fault",
        }
    }
}

impl FromStr for Phase {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Phase::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| format!("unknown phase '{s}'"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "arg", rename_all = "snake_case")]
pub enum Action {
    SetVoltage(f64),
    StartFlip(Face),
    Stop,
}

impl Action {
    pub fn name(&self) -> &'static str {
        match self {
            Action::SetVoltage(_) => "set_voltage",
            Action::StartFlip(_) => "start_flip",
            Action::Stop => "stop",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElementState {
    pub element_id: ElementId,
    /// Physical face currently turned towards the skin.
    pub orientation: Face,
    pub rotation: Rotation,
    pub drive_voltage: f64,
    pub phase: Phase,
    pub side_temps: SideTemps,
    pub elapsed_since_condition: f64,
    pub requested: Sensation,
    pub pending: Option<Sensation>,
    pub last_update: Option<f64>,
    pub conditioned_since: Option<f64>,
    pub reached_target: bool,
    pub dipped: bool,
}

impl ElementState {
    /// Unpowered element at ambient, parked.
    pub fn parked(element_id: ElementId, config: &ControllerConfig) -> Self {
        Self {
            element_id,
            orientation: config.park_orientation,
            rotation: Rotation::Idle,
            drive_voltage: 0.0,
            phase: Phase::Ready,
            side_temps: SideTemps::uniform(config.ambient_temp),
            elapsed_since_condition: 0.0,
            requested: Sensation::Neutral,
            pending: None,
            last_update: None,
            conditioned_since: None,
            reached_target: false,
            dipped: false,
        }
    }

    pub fn is_rotating(&self) -> bool {
        matches!(self.rotation, Rotation::Rotating { .. })
    }

    /// Temperature presented to the skin; during a flip either face may be closest.
    pub fn skin_facing_temp(&self) -> f64 {
        match self.rotation {
            Rotation::Idle => self.side_temps.face(self.orientation),
            Rotation::Rotating { .. } => self.side_temps.warm.max(self.side_temps.cold),
        }
    }

    fn check_time(&self, now: f64) -> Result<(), ControllerError> {
        match self.last_update {
            Some(last) if now < last || now.is_nan() => Err(ControllerError::TimeRegression {
                element: self.element_id,
                last,
                now,
            }),
            _ => Ok(()),
        }
    }
}

fn face_for(sensation: Sensation, config: &ControllerConfig) -> Face {
    match sensation {
        Sensation::Warm => Face::Warm,
        Sensation::Cool => Face::Cold,
        Sensation::Neutral => config.park_orientation,
    }
}

fn set_voltage(s: &mut ElementState, v: f64, actions: &mut Vec<Action>) {
    if s.drive_voltage != v {
        s.drive_voltage = v;
        actions.push(Action::SetVoltage(v));
    }
}

fn apply_request(
    s: &mut ElementState,
    config: &ControllerConfig,
    sensation: Sensation,
    now: f64,
    actions: &mut Vec<Action>,
) {
    s.requested = sensation;
    let face = face_for(sensation, config);
    if face != s.orientation {
        // a turning element shows both faces to the skin; never start one with a face over the cutoff
        if s.side_temps.warm.max(s.side_temps.cold) > config.safety_cutoff_temp {
            actions.extend(enter_fault(s));
            return;
        }
        s.rotation = Rotation::Rotating {
            start: now,
            from: s.orientation,
            to: face,
        };
        actions.push(Action::StartFlip(face));
    }
    if sensation == Sensation::Neutral {
        set_voltage(s, 0.0, actions);
    }
}

/// Completes a flip whose latency has elapsed and hands over any queued request.
fn settle_rotation(s: &mut ElementState, config: &ControllerConfig, now: f64, actions: &mut Vec<Action>) {
    if let Rotation::Rotating { start, to, .. } = s.rotation {
        if now >= start + config.rotation_latency {
            s.orientation = to;
            s.rotation = Rotation::Idle;
            if let Some(next) = s.pending.take() {
                apply_request(s, config, next, now, actions);
            }
        }
    }
}

fn enter_fault(s: &mut ElementState) -> Vec<Action> {
    s.phase = Phase::Fault;
    s.drive_voltage = 0.0;
    s.pending = None;
    vec![Action::Stop]
}

fn update_phase(s: &mut ElementState, config: &ControllerConfig, now: f64) {
    let t = s.side_temps;
    let ambient = config.ambient_temp;
    let exhausted = s.phase == Phase::Exhausted;
    if s.requested == Sensation::Neutral {
        s.conditioned_since = None;
        s.elapsed_since_condition = 0.0;
        s.reached_target = false;
        s.dipped = false;
        let rested =
            (t.warm - ambient).abs() <= RECONDITION_TOLERANCE && (t.cold - ambient).abs() <= RECONDITION_TOLERANCE;
        s.phase = if exhausted && !rested {
            Phase::Exhausted
        } else {
            Phase::Ready
        };
        return;
    }
    let since = *s.conditioned_since.get_or_insert(now);
    s.elapsed_since_condition = now - since;
    if t.warm >= config.target_warm_temp - config.hysteresis {
        s.reached_target = true;
    }
    if t.cold < ambient - DIP_EPSILON {
        s.dipped = true;
    }
    s.phase = if exhausted || (s.dipped && t.cold > ambient) {
        Phase::Exhausted
    } else if !s.reached_target {
        Phase::Conditioning
    } else if s.is_rotating() {
        Phase::Ready
    } else {
        Phase::Delivering
    };
}

/// One control period: fold in the sensor reading, finish due flips, enforce the safety
/// cutoff and regulate the warm face.
pub fn tick(
    state: &ElementState,
    config: &ControllerConfig,
    sensor: SideTemps,
    now: f64,
) -> Result<(ElementState, Vec<Action>), ControllerError> {
    state.check_time(now)?;
    let mut s = state.clone();
    s.last_update = Some(now);
    s.side_temps = sensor;
    if s.phase == Phase::Fault {
        return Ok((s, Vec::new()));
    }

    let mut actions = Vec::new();
    settle_rotation(&mut s, config, now, &mut actions);
    // an unreadable sensor is treated like an over-temperature reading
    if !sensor.is_finite() || s.skin_facing_temp() > config.safety_cutoff_temp {
        let stop = enter_fault(&mut s);
        return Ok((s, stop));
    }

    if s.requested != Sensation::Neutral {
        let warm = sensor.warm;
        if warm >= config.target_warm_temp + config.hysteresis {
            set_voltage(&mut s, 0.0, &mut actions);
        } else if warm <= config.target_warm_temp - config.hysteresis {
            set_voltage(&mut s, config.drive_voltage_nominal, &mut actions);
        }
    }
    update_phase(&mut s, config, now);
    Ok((s, actions))
}

/// Requests a sensation. While a flip is under way the request is queued, replacing any
/// earlier queued one.
pub fn command_sensation(
    state: &ElementState,
    config: &ControllerConfig,
    sensation: Sensation,
    now: f64,
) -> Result<(ElementState, Vec<Action>), ControllerError> {
    if state.phase == Phase::Fault {
        return Err(ControllerError::Faulted(state.element_id));
    }
    state.check_time(now)?;
    let mut s = state.clone();
    s.last_update = Some(now);
    let mut actions = Vec::new();
    settle_rotation(&mut s, config, now, &mut actions);
    if s.is_rotating() {
        s.pending = Some(sensation);
    } else {
        apply_request(&mut s, config, sensation, now, &mut actions);
    }
    Ok((s, actions))
}
