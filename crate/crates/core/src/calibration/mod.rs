//! Fitting element parameters to measured dual-sided lifetimes, and voltage sweeps.

pub mod nelder_mead;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::thermal::{run_constant_voltage, LifetimeResult, PeltierParams};
use nelder_mead::{minimize, NelderMeadOptions};

/// Run length used when evaluating the loss.
pub const LOSS_DURATION: f64 = 600.0;
/// Integration step used when evaluating the loss (coarser than the sweep for speed).
pub const LOSS_DT: f64 = 0.05;
pub const SWEEP_DURATION: f64 = 600.0;
pub const SWEEP_DT: f64 = 0.01;
/// Penalty added when the predicted "target reached within lifetime" flag disagrees.
pub const FLAG_PENALTY: f64 = 1.0;
/// Log-space standard deviation of the seeded multi-start perturbations.
pub const RESTART_SPREAD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CalibrationError {
    #[error("invalid observation {index}: {reason}")]
    InvalidObservation { index: usize, reason: String },
    #[error("no observations given")]
    NoObservations,
    #[error("invalid fit options: {0}")]
    InvalidOptions(String),
    #[error("invalid sweep range: {0}")]
    InvalidSweep(String),
    #[error(transparent)]
    Thermal(#[from] crate::thermal::ThermalError),
}

/// Mean dual-sided lifetime measured at one drive voltage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Observation {
    pub voltage: f64,
    pub lifetime_mean: f64,
    pub lifetime_sd: f64,
    /// Whether the warm face reached 40 C before the lifetime ended.
    pub target_reached: bool,
}

impl Observation {
    fn validate(&self, index: usize) -> Result<(), CalibrationError> {
        let bad = |reason: &str| CalibrationError::InvalidObservation {
            index,
            reason: reason.to_string(),
        };
        if !(self.voltage > 0.0 && self.voltage <= crate::thermal::MAX_VOLTAGE) {
            return Err(bad("voltage must be in (0, 5] V"));
        }
        if !(self.lifetime_mean > 0.0 && self.lifetime_mean.is_finite()) {
            return Err(bad("lifetime_mean must be > 0"));
        }
        if !(self.lifetime_sd >= 0.0) {
            return Err(bad("lifetime_sd must be >= 0"));
        }
        Ok(())
    }
}

/// The bench measurements: 20 mm elements, 25 C room, mean of three trials per voltage.
pub fn bench_dataset() -> Vec<Observation> {
    let obs = |voltage, lifetime_mean, lifetime_sd, target_reached| Observation {
        voltage,
        lifetime_mean,
        lifetime_sd,
        target_reached,
    };
    vec![
        obs(1.5, 259.2, 2.27, false),
        obs(2.0, 206.3, 3.21, true),
        obs(2.5, 163.4, 1.25, true),
        obs(3.0, 120.1, 3.30, true),
    ]
}

/// Parameters fitted to [`bench_dataset`], shipped with the crate.
pub fn calibrated_params() -> PeltierParams {
    serde_json::from_str(include_str!("../../data/calibrated_params.json")).expect("bundled parameters parse")
}

pub fn validate_observations(observations: &[Observation]) -> Result<(), CalibrationError> {
    if observations.is_empty() {
        return Err(CalibrationError::NoObservations);
    }
    observations.iter().enumerate().try_for_each(|(i, o)| o.validate(i))
}

/// Model prediction for one observation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub voltage: f64,
    pub observed_lifetime: f64,
    pub predicted_lifetime: Option<f64>,
    /// `(predicted - observed) / observed`; 1.0 when no lifetime is predicted.
    pub relative_error: f64,
    pub observed_target_reached: bool,
    pub predicted_target_reached: bool,
}

impl Prediction {
    fn loss_term(&self) -> f64 {
        let flag = if self.predicted_target_reached == self.observed_target_reached {
            0.0
        } else {
            FLAG_PENALTY
        };
        self.relative_error * self.relative_error + flag
    }
}

fn relative_error(predicted: Option<f64>, observed: f64) -> f64 {
    match predicted {
        Some(p) => (p - observed) / observed,
        None => 1.0,
    }
}

fn predict_one(params: &PeltierParams, obs: &Observation) -> Option<Prediction> {
    let r = crate::thermal::run_constant_voltage_until_settled(params, obs.voltage, LOSS_DURATION, LOSS_DT).ok()?;
    Some(Prediction {
        voltage: obs.voltage,
        observed_lifetime: obs.lifetime_mean,
        predicted_lifetime: r.lifetime,
        relative_error: relative_error(r.lifetime, obs.lifetime_mean),
        observed_target_reached: obs.target_reached,
        predicted_target_reached: r.target_reached_within_lifetime,
    })
}

/// Predictions at the loss resolution; `None` when a run blows up or the parameters are invalid.
pub fn predict(params: &PeltierParams, observations: &[Observation]) -> Option<Vec<Prediction>> {
    observations.iter().map(|o| predict_one(params, o)).collect()
}

/// Sum of squared relative lifetime errors plus flag-mismatch penalties.
///
/// Parameter vectors the model cannot run (invalid values, blow-up) score `+inf`.
pub fn loss(params: &PeltierParams, observations: &[Observation]) -> f64 {
    let mut total = 0.0;
    for o in observations {
        match predict_one(params, o) {
            Some(p) => total += p.loss_term(),
            None => return f64::INFINITY,
        }
    }
    total
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    /// Simplex iterations per start.
    pub max_iters: usize,
    /// Number of starts; the first is the unperturbed initial guess.
    pub restarts: usize,
    pub seed: u64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iters: 1500,
            restarts: 6,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub params: PeltierParams,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub predictions: Vec<Prediction>,
    /// Simplex iterations spent by the winning start.
    pub iterations: usize,
    pub total_iterations: usize,
    pub best_restart: usize,
    pub converged: bool,
}

/// Names of the fitted fields, in search-vector order.
pub const FITTED_FIELDS: [&str; 5] = [
    "seebeck_alpha",
    "resistance",
    "internal_conductance",
    "heat_capacity_side",
    "ambient_conductance",
];

fn to_log_vector(p: &PeltierParams) -> [f64; 5] {
    // seebeck_alpha may legitimately be 0; keep it searchable in log space
    [
        p.seebeck_alpha.max(1e-9).ln(),
        p.resistance.ln(),
        p.internal_conductance.ln(),
        p.heat_capacity_side.ln(),
        p.ambient_conductance.ln(),
    ]
}

fn from_log_vector(base: &PeltierParams, x: &[f64]) -> PeltierParams {
    PeltierParams {
        seebeck_alpha: x[0].exp(),
        resistance: x[1].exp(),
        internal_conductance: x[2].exp(),
        heat_capacity_side: x[3].exp(),
        ambient_conductance: x[4].exp(),
        ..*base
    }
}

struct StartOutcome {
    x: Vec<f64>,
    value: f64,
    iterations: usize,
    converged: bool,
}

fn run_start(x0: Vec<f64>, base: &PeltierParams, observations: &[Observation], max_iters: usize) -> StartOutcome {
    let objective = |x: &[f64]| loss(&from_log_vector(base, x), observations);
    let mut x = x0;
    let mut value = objective(&x);
    let mut budget = max_iters;
    let mut iterations = 0;
    let mut converged;
    // a collapsed simplex can stall on a ridge; restart it from the incumbent while that helps
    loop {
        let opts = NelderMeadOptions {
            max_iters: budget,
            ..NelderMeadOptions::default()
        };
        let r = minimize(objective, &x, &opts);
        iterations += r.iterations;
        budget -= r.iterations;
        converged = r.converged;
        let improved = r.value < value - 1e-12 * value.abs().max(1e-12);
        if r.value <= value {
            x = r.x;
            value = r.value;
        }
        if !r.converged || !improved || budget == 0 {
            break;
        }
    }
    StartOutcome {
        x,
        value,
        iterations,
        converged,
    }
}

/// Multi-start Nelder-Mead fit of the five bench-identifiable parameters in log space.
///
/// Skin coupling, temperatures and the stack switch are carried over from `initial`.
pub fn fit(
    observations: &[Observation],
    initial: &PeltierParams,
    options: &FitOptions,
) -> Result<FitReport, CalibrationError> {
    validate_observations(observations)?;
    initial.validate()?;
    if options.max_iters == 0 {
        return Err(CalibrationError::InvalidOptions("max_iters must be >= 1".into()));
    }
    if options.restarts == 0 {
        return Err(CalibrationError::InvalidOptions("restarts must be >= 1".into()));
    }

    let x0 = to_log_vector(initial);
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let normal = Normal::new(0.0, RESTART_SPREAD).expect("valid spread");
    let starts: Vec<Vec<f64>> = (0..options.restarts)
        .map(|k| {
            if k == 0 {
                x0.to_vec()
            } else {
                x0.iter().map(|&v| v + normal.sample(&mut rng)).collect()
            }
        })
        .collect();

    let outcomes: Vec<StartOutcome> = starts
        .into_par_iter()
        .map(|s| run_start(s, initial, observations, options.max_iters))
        .collect();

    // lowest loss wins, earliest start breaks ties
    let (best_restart, best) = outcomes
        .iter()
        .enumerate()
        .min_by(|(ia, a), (ib, b)| a.value.total_cmp(&b.value).then(ia.cmp(ib)))
        .expect("at least one start");

    // exp(ln(x)) does not always round-trip exactly; never hand back something worse than the
    // caller's own starting point
    let initial_loss = loss(initial, observations);
    let (params, final_loss) = if initial_loss <= best.value {
        (*initial, initial_loss)
    } else {
        (from_log_vector(initial, &best.x), best.value)
    };
    let predictions = predict(&params, observations).unwrap_or_default();
    Ok(FitReport {
        params,
        initial_loss,
        final_loss,
        predictions,
        iterations: best.iterations,
        total_iterations: outcomes.iter().map(|o| o.iterations).sum(),
        best_restart,
        converged: best.converged,
    })
}

/// One row of a voltage sweep; per-row failures are kept instead of aborting the sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub voltage: f64,
    pub result: Result<LifetimeResult, String>,
}

impl SweepRow {
    pub fn reaches_target(&self) -> bool {
        matches!(&self.result, Ok(r) if r.target_reached_within_lifetime)
    }
}

/// Voltages `v_min, v_min + step, ...` up to `v_max` inclusive.
pub fn sweep_voltages(v_min: f64, v_max: f64, step: f64) -> Result<Vec<f64>, CalibrationError> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(CalibrationError::InvalidSweep(format!("step {step} must be > 0")));
    }
    if !(v_min <= v_max) || !v_min.is_finite() || !v_max.is_finite() {
        return Err(CalibrationError::InvalidSweep(format!(
            "need v_min <= v_max, got {v_min} > {v_max}"
        )));
    }
    let n = ((v_max - v_min) / step + 1e-9).floor() as usize;
    Ok((0..=n)
        .map(|k| {
            let v = v_min + k as f64 * step;
            (v * 1e9).round() / 1e9
        })
        .collect())
}

/// One constant-voltage bench run per voltage at full resolution, ordered by voltage.
pub fn sweep(params: &PeltierParams, v_min: f64, v_max: f64, step: f64) -> Result<Vec<SweepRow>, CalibrationError> {
    let voltages = sweep_voltages(v_min, v_max, step)?;
    Ok(voltages
        .into_par_iter()
        .map(|voltage| SweepRow {
            voltage,
            result: run_constant_voltage(params, voltage, SWEEP_DURATION, SWEEP_DT).map_err(|e| e.to_string()),
        })
        .collect())
}

/// Lowest voltage whose run reaches the warm target before the cold face is spent.
pub fn select_optimal_voltage(rows: &[SweepRow]) -> Option<f64> {
    rows.iter()
        .filter(|r| r.reaches_target())
        .map(|r| r.voltage)
        .min_by(f64::total_cmp)
}
