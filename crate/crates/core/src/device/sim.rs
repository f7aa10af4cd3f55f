use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::controller::SideTemps;
use crate::device::{DeviceBackend, DeviceError};
use crate::layout::{ElementId, ELEMENT_COUNT};
use crate::thermal::{checked_advance, DriveInput, Face, PeltierParams, ThermalState, MAX_VOLTAGE};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulatedConfig {
    /// Integration step of the embedded plant, seconds.
    pub model_dt: f64,
    pub rotation_latency: f64,
    /// Whether the skin-facing face touches skin. Off by default, matching the bench runs.
    pub skin_contact: bool,
    /// Standard deviation of the Gaussian sensor noise, kelvin.
    pub noise_sigma: f64,
    pub seed: u64,
    /// Face turned towards the skin at start-up.
    pub initial_orientation: Face,
}

impl Default for SimulatedConfig {
    fn default() -> Self {
        Self {
            model_dt: 0.01,
            rotation_latency: 0.6,
            skin_contact: false,
            noise_sigma: 0.1,
            seed: 0,
            initial_orientation: Face::Warm,
        }
    }
}

impl SimulatedConfig {
    pub fn noiseless() -> Self {
        Self {
            noise_sigma: 0.0,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct SimElement {
    params: PeltierParams<f64>,
    state: ThermalState<f64>,
    voltage: f64,
    orientation: Face,
    /// Completion time and destination of a flip in progress.
    flip: Option<(f64, Face)>,
}

/// Eight elements, each an instance of the thermal model, advanced on a shared clock.
///
/// The clock counts whole integration steps; `advance` accumulates requested time and runs
/// every step that has fallen due, so sample times are always exact multiples of the step.
#[derive(Debug, Clone)]
pub struct SimulatedBackend {
    config: SimulatedConfig,
    elements: Vec<SimElement>,
    steps: u64,
    requested: f64,
    rng: ChaCha8Rng,
    noise: Option<Normal<f64>>,
}

impl SimulatedBackend {
    pub fn new(params: Vec<PeltierParams<f64>>, config: SimulatedConfig) -> Result<Self, DeviceError> {
        if params.len() != ELEMENT_COUNT {
            return Err(DeviceError::Config(format!(
                "need {ELEMENT_COUNT} parameter sets, got {}",
                params.len()
            )));
        }
        if !(config.model_dt > 0.0 && config.model_dt <= crate::thermal::MAX_STEP) {
            return Err(DeviceError::Config(format!(
                "model_dt {} outside (0, 0.1]",
                config.model_dt
            )));
        }
        if !(config.rotation_latency > 0.0 && config.rotation_latency.is_finite()) {
            return Err(DeviceError::Config("rotation_latency must be positive".into()));
        }
        let noise = match config.noise_sigma {
            0.0 => None,
            s if s > 0.0 && s.is_finite() => Some(Normal::new(0.0, s).expect("valid sigma")),
            s => return Err(DeviceError::Config(format!("noise_sigma must be >= 0, got {s}"))),
        };
        let mut elements = Vec::with_capacity(ELEMENT_COUNT);
        for p in params {
            p.validate()?;
            elements.push(SimElement {
                state: ThermalState::uniform(p.ambient_temp),
                params: p,
                voltage: 0.0,
                orientation: config.initial_orientation,
                flip: None,
            });
        }
        Ok(Self {
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            config,
            elements,
            steps: 0,
            requested: 0.0,
            noise,
        })
    }

    pub fn uniform(params: PeltierParams<f64>, config: SimulatedConfig) -> Result<Self, DeviceError> {
        Self::new(vec![params; ELEMENT_COUNT], config)
    }

    pub fn config(&self) -> &SimulatedConfig {
        &self.config
    }

    /// Simulated time of the latest integrated state.
    pub fn time(&self) -> f64 {
        self.steps as f64 * self.config.model_dt
    }

    pub fn true_state(&self, e: ElementId) -> ThermalState<f64> {
        self.elements[e.index()].state
    }

    pub fn orientation(&self, e: ElementId) -> Face {
        self.elements[e.index()].orientation
    }

    pub fn is_rotating(&self, e: ElementId) -> bool {
        self.elements[e.index()].flip.is_some()
    }

    pub fn voltage(&self, e: ElementId) -> f64 {
        self.elements[e.index()].voltage
    }

    /// Noise-free temperature of whatever faces the skin; during a flip the hotter face.
    pub fn skin_facing_temp(&self, e: ElementId) -> f64 {
        let el = &self.elements[e.index()];
        match el.flip {
            Some(_) => el.state.temp_warm_side.max(el.state.temp_cold_side),
            None => el.state.face(el.orientation),
        }
    }

    fn settle_flips(&mut self, now: f64) {
        let eps = 1e-9 * self.config.model_dt;
        for el in &mut self.elements {
            if let Some((end, to)) = el.flip {
                if now + eps >= end {
                    el.orientation = to;
                    el.flip = None;
                }
            }
        }
    }

    fn step_once(&mut self) -> Result<(), DeviceError> {
        let dt = self.config.model_dt;
        self.settle_flips(self.time());
        let t_next = (self.steps + 1) as f64 * dt;
        for el in &mut self.elements {
            let input = DriveInput {
                voltage: el.voltage,
                contact: self.config.skin_contact && el.flip.is_none(),
                contact_side: el.orientation,
            };
            el.state = checked_advance(&el.state, &el.params, &input, dt, t_next)?;
        }
        self.steps += 1;
        Ok(())
    }
}

impl DeviceBackend for SimulatedBackend {
    fn apply_voltage(&mut self, element: ElementId, volts: f64) -> Result<f64, DeviceError> {
        if volts.is_nan() {
            return Err(DeviceError::InvalidArgument("voltage is NaN".into()));
        }
        let v = volts.clamp(0.0, MAX_VOLTAGE);
        self.elements[element.index()].voltage = v;
        Ok(v)
    }

    fn start_flip(&mut self, element: ElementId) -> Result<(), DeviceError> {
        let now = self.time();
        self.settle_flips(now);
        let latency = self.config.rotation_latency;
        let el = &mut self.elements[element.index()];
        if el.flip.is_some() {
            return Err(DeviceError::Busy(element));
        }
        el.flip = Some((now + latency, el.orientation.other()));
        Ok(())
    }

    fn read_temps(&mut self, element: ElementId) -> Result<SideTemps, DeviceError> {
        let s = self.elements[element.index()].state;
        let mut t = SideTemps {
            warm: s.temp_warm_side,
            cold: s.temp_cold_side,
        };
        if let Some(n) = &self.noise {
            t.warm += n.sample(&mut self.rng);
            t.cold += n.sample(&mut self.rng);
        }
        Ok(t)
    }

    fn stop_all(&mut self) -> Result<(), DeviceError> {
        for el in &mut self.elements {
            el.voltage = 0.0;
        }
        Ok(())
    }

    fn advance(&mut self, dt: f64) -> Result<(), DeviceError> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(DeviceError::InvalidArgument(format!("advance by {dt} s")));
        }
        self.requested += dt;
        let due = (self.requested / self.config.model_dt + 1e-6).floor() as u64;
        while self.steps < due {
            self.step_once()?;
        }
        self.settle_flips(self.time());
        Ok(())
    }
}
