//! Hardware boundary: the serial frame protocol, a simulated array built from the thermal
//! model, and CSV persistence of traces.

pub mod frame;
mod sim;
pub mod trace;
mod wire;

pub use sim::{SimulatedBackend, SimulatedConfig};
pub use wire::{DeviceEmulator, FrameBackend, Link, StreamLink};

use thiserror::Error;

use crate::controller::SideTemps;
use crate::layout::ElementId;
use crate::thermal::ThermalError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DeviceError {
    #[error("backend configuration: {0}")]
    Config(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("element {0} is still rotating")]
    Busy(ElementId),
    #[error(transparent)]
    Thermal(#[from] ThermalError),
    #[error("i/o: {0}")]
    Io(String),
    #[error("protocol: {0}")]
    Protocol(String),
    #[error("device refused request for element {element} (code {code})")]
    Nak { element: u8, code: u8 },
    #[error("no reply from device")]
    NoReply,
}

impl From<std::io::Error> for DeviceError {
    fn from(e: std::io::Error) -> Self {
        DeviceError::Io(e.to_string())
    }
}

/// What the controller needs from an element array, simulated or real.
///
/// `read_temps` returns the two physical faces, side A (`warm`, heated under positive drive)
/// and side B (`cold`).
pub trait DeviceBackend {
    /// Sets the drive voltage, clamped to `[0, 5]` V; returns the value actually applied.
    fn apply_voltage(&mut self, element: ElementId, volts: f64) -> Result<f64, DeviceError>;
    /// Starts a 180 degree flip; the other face reaches the skin once it completes.
    fn start_flip(&mut self, element: ElementId) -> Result<(), DeviceError>;
    fn read_temps(&mut self, element: ElementId) -> Result<SideTemps, DeviceError>;
    /// Switches every element off. Sensors keep working.
    fn stop_all(&mut self) -> Result<(), DeviceError>;
    /// Lets `dt` seconds of device time pass. Real hardware runs on its own clock and may
    /// treat this as a no-op.
    fn advance(&mut self, dt: f64) -> Result<(), DeviceError>;
}

impl<B: DeviceBackend + ?Sized> DeviceBackend for &mut B {
    fn apply_voltage(&mut self, element: ElementId, volts: f64) -> Result<f64, DeviceError> {
        (**self).apply_voltage(element, volts)
    }
    fn start_flip(&mut self, element: ElementId) -> Result<(), DeviceError> {
        (**self).start_flip(element)
    }
    fn read_temps(&mut self, element: ElementId) -> Result<SideTemps, DeviceError> {
        (**self).read_temps(element)
    }
    fn stop_all(&mut self) -> Result<(), DeviceError> {
        (**self).stop_all()
    }
    fn advance(&mut self, dt: f64) -> Result<(), DeviceError> {
        (**self).advance(dt)
    }
}
