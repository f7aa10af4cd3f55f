//! Timeline patterns for the array: a small text language, compilation into per-element
//! command lists with feasibility annotations, and playback against a device backend.

mod compile;
mod parse;
mod run;

pub use compile::{compile, presimulation_backend, schedule, Annotation, CompiledSchedule, ScheduledCommand};
pub use parse::{
    format_seconds, parse_pattern, print_pattern, Event, ParseError, ParseErrorKind, PatternScript, Selector,
};
pub use run::{run, Clock, ExecutionTrace, RunError, RunFailure, SimClock, WallClock};
