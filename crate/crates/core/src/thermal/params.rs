use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;
use crate::thermal::ThermalError;

/// Physical constants of one element, its layer stack and its couplings to the room and skin.
///
/// Temperatures are in degrees Celsius, conductances in W/K, capacities in J/K.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PeltierParams<T = f64> {
    /// Seebeck coefficient, V/K.
    pub seebeck_alpha: T,
    /// Electrical resistance, ohms.
    pub resistance: T,
    /// Face-to-face conductance through the element.
    pub internal_conductance: T,
    /// Lumped heat capacity of each face (symmetric).
    pub heat_capacity_side: T,
    /// Conductance from an uncovered face to room air.
    pub ambient_conductance: T,
    /// Conductance from the skin-facing face through the aluminum/silicone stack into skin.
    pub skin_conductance: T,
    pub skin_temp: T,
    pub ambient_temp: T,
    /// The aluminum/silicone stack sits on the warm face and shields it from room air.
    /// When false both faces exchange heat with the room through `ambient_conductance`.
    #[serde(default = "stack_default")]
    pub warm_face_stack: bool,
}

fn stack_default() -> bool {
    true
}

impl<T: Scalar> PeltierParams<T> {
    /// Order-of-magnitude starting point for calibration. Not a measured parameter set.
    pub fn initial_guess() -> Self {
        Self {
            seebeck_alpha: T::lit(0.02),
            resistance: T::lit(4.0),
            internal_conductance: T::lit(0.15),
            heat_capacity_side: T::lit(8.0),
            ambient_conductance: T::lit(0.02),
            skin_conductance: T::lit(0.03),
            skin_temp: T::lit(33.0),
            ambient_temp: T::lit(25.0),
            warm_face_stack: true,
        }
    }

    pub fn validate(&self) -> Result<(), ThermalError> {
        let positive = [
            ("resistance", self.resistance),
            ("internal_conductance", self.internal_conductance),
            ("heat_capacity_side", self.heat_capacity_side),
            ("ambient_conductance", self.ambient_conductance),
            ("skin_conductance", self.skin_conductance),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > T::zero()) {
                return Err(ThermalError::InvalidParams(format!(
                    "{name} must be finite and > 0, got {v}"
                )));
            }
        }
        if !(self.seebeck_alpha.is_finite() && self.seebeck_alpha >= T::zero()) {
            return Err(ThermalError::InvalidParams(format!(
                "seebeck_alpha must be finite and >= 0, got {}",
                self.seebeck_alpha
            )));
        }
        for (name, v) in [("ambient_temp", self.ambient_temp), ("skin_temp", self.skin_temp)] {
            if !(v >= T::zero() && v <= T::lit(50.0)) {
                return Err(ThermalError::InvalidParams(format!(
                    "{name} must lie in [0, 50] C, got {v}"
                )));
            }
        }
        Ok(())
    }

    /// Converts to another scalar type.
    pub fn cast<U: Scalar>(&self) -> PeltierParams<U> {
        let c = |v: T| U::lit(v.to_f64_lossy());
        PeltierParams {
            seebeck_alpha: c(self.seebeck_alpha),
            resistance: c(self.resistance),
            internal_conductance: c(self.internal_conductance),
            heat_capacity_side: c(self.heat_capacity_side),
            ambient_conductance: c(self.ambient_conductance),
            skin_conductance: c(self.skin_conductance),
            skin_temp: c(self.skin_temp),
            ambient_temp: c(self.ambient_temp),
            warm_face_stack: self.warm_face_stack,
        }
    }
}

impl<T: Scalar> Default for PeltierParams<T> {
    fn default() -> Self {
        Self::initial_guess()
    }
}
