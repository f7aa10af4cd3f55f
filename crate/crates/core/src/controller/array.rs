use serde::{Deserialize, Serialize};

use crate::controller::{
    command_sensation, tick, Action, ControllerConfig, ControllerError, ElementState, Sensation, SensingMode, SideTemps,
};
use crate::layout::{ElementId, ELEMENT_COUNT};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrayState {
    pub elements: Vec<ElementState>,
}

impl ArrayState {
    pub fn parked(config: &ControllerConfig) -> Self {
        Self {
            elements: ElementId::all().map(|id| ElementState::parked(id, config)).collect(),
        }
    }

    pub fn element(&self, id: ElementId) -> &ElementState {
        &self.elements[id.index()]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ElementError {
    pub element: ElementId,
    pub error: ControllerError,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArrayOutcome {
    pub state: ArrayState,
    /// Actions in element order, each element's in the order they were produced.
    pub actions: Vec<(ElementId, Action)>,
    /// Elements whose update failed keep their previous state.
    pub errors: Vec<ElementError>,
}

/// Reading each element regulates on, after applying the sensing mode.
pub fn effective_readings(config: &ControllerConfig, readings: &[SideTemps]) -> Vec<SideTemps> {
    match config.sensing {
        SensingMode::PerElement => readings.to_vec(),
        SensingMode::Grouped { group_size } => (0..readings.len())
            .map(|i| readings[i / group_size * group_size])
            .collect(),
    }
}

/// Applies each element's new command (if any) and then one tick, independently per element.
pub fn coordinate_array(
    array: &ArrayState,
    config: &ControllerConfig,
    commands: &[Option<Sensation>],
    readings: &[SideTemps],
    now: f64,
) -> Result<ArrayOutcome, ControllerError> {
    for n in [array.elements.len(), commands.len(), readings.len()] {
        if n != ELEMENT_COUNT {
            return Err(ControllerError::ArraySize(n));
        }
    }
    let readings = effective_readings(config, readings);
    let mut out = ArrayOutcome {
        state: array.clone(),
        actions: Vec::new(),
        errors: Vec::new(),
    };
    for (i, element) in array.elements.iter().enumerate() {
        let id = element.element_id;
        let step = |e: &ElementState| -> Result<(ElementState, Vec<Action>), ControllerError> {
            let (e, mut acts) = match commands[i] {
                Some(c) => command_sensation(e, config, c, now)?,
                None => (e.clone(), Vec::new()),
            };
            let (e, more) = tick(&e, config, readings[i], now)?;
            if e.phase == crate::controller::Phase::Fault && !more.is_empty() {
                // a fault in this tick supersedes whatever the command asked for
                acts.clear();
            }
            acts.extend(more);
            Ok((e, acts))
        };
        match step(element) {
            Ok((e, acts)) => {
                out.actions.extend(acts.into_iter().map(|a| (id, a)));
                out.state.elements[i] = e;
            }
            Err(error) => out.errors.push(ElementError { element: id, error }),
        }
    }
    Ok(out)
}
