use crate::controller::{ControllerConfig, ElementState};
use crate::thermal::{
    checked_advance, DriveInput, LifetimeDetector, PeltierParams, ThermalState, DIP_EPSILON, TARGET_WARM_TEMP,
};

/// Step used for the forward simulation.
pub const BUDGET_DT: f64 = 0.01;
/// Longest look-ahead; an element that never exhausts within it reports this value.
pub const BUDGET_HORIZON: f64 = 3600.0;

/// Seconds until the cold face would climb back above ambient if the current drive were held,
/// starting from the element's latest side temperatures.
///
/// The model's own ambient is used for the crossing so that a fresh element reproduces the
/// bench lifetime. A blow-up in the look-ahead ends the budget at that point.
pub fn estimate_remaining_cool_budget(
    state: &ElementState,
    _config: &ControllerConfig,
    params: &PeltierParams<f64>,
) -> f64 {
    let ambient = params.ambient_temp;
    let temps = state.side_temps;
    if temps.cold > ambient {
        return 0.0;
    }
    let mut det = LifetimeDetector::new(ambient, TARGET_WARM_TEMP);
    if state.dipped || temps.cold < ambient - DIP_EPSILON {
        det = det.assume_dipped();
    }
    let input = DriveInput::bench(state.drive_voltage);
    let mut s = ThermalState {
        time: 0.0,
        temp_warm_side: temps.warm,
        temp_cold_side: temps.cold,
    };
    det.push_state(&s);
    let steps = (BUDGET_HORIZON / BUDGET_DT).round() as usize;
    for k in 1..=steps {
        let t = k as f64 * BUDGET_DT;
        s = match checked_advance(&s, params, &input, BUDGET_DT, t) {
            Ok(next) => next,
            Err(_) => return s.time,
        };
        det.push_state(&s);
        if let Some(l) = det.finish().lifetime {
            return l;
        }
    }
    BUDGET_HORIZON
}
