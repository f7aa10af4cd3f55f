//! CSV persistence.
//!
//! Time series: `t_s,temp_warm_C,temp_cold_C,voltage_V,contact`, six decimals, contact as
//! 0/1. Action traces: `t_s,element,action,arg`. Array temperature logs:
//! `t_s,element,temp_warm_C,temp_cold_C,skin_facing_C,voltage_V,phase`.

use std::io::{Read, Write};

use thiserror::Error;

use crate::controller::{Action, Phase};
use crate::layout::ElementId;
use crate::thermal::{Face, Sample, ThermalState, TimeSeries};

pub const SERIES_HEADER: [&str; 5] = ["t_s", "temp_warm_C", "temp_cold_C", "voltage_V", "contact"];
pub const ACTION_HEADER: [&str; 4] = ["t_s", "element", "action", "arg"];
pub const TEMP_HEADER: [&str; 7] = [
    "t_s",
    "element",
    "temp_warm_C",
    "temp_cold_C",
    "skin_facing_C",
    "voltage_V",
    "phase",
];

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("row {row}: {reason}")]
    Row { row: u64, reason: String },
    #[error("bad header: expected {expected}, found {found}")]
    Header { expected: String, found: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActionRecord {
    pub t: f64,
    pub element: ElementId,
    pub action: Action,
}

/// One element's readings and controller status at one tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TempRecord {
    pub t: f64,
    pub element: ElementId,
    pub warm: f64,
    pub cold: f64,
    pub skin_facing: f64,
    pub voltage: f64,
    pub phase: Phase,
}

fn f6(v: f64) -> String {
    format!("{v:.6}")
}

fn writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w)
}

fn reader<R: Read>(r: R, expected: &[&str]) -> Result<csv::Reader<R>, TraceError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
    let found: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    if found != expected {
        return Err(TraceError::Header {
            expected: expected.join(","),
            found: found.join(","),
        });
    }
    Ok(rdr)
}

fn row_err(rec: &csv::StringRecord, reason: impl Into<String>) -> TraceError {
    TraceError::Row {
        row: rec.position().map_or(0, |p| p.line()),
        reason: reason.into(),
    }
}

fn field<'a>(rec: &'a csv::StringRecord, i: usize, name: &str) -> Result<&'a str, TraceError> {
    rec.get(i).ok_or_else(|| row_err(rec, format!("missing column {name}")))
}

fn number(rec: &csv::StringRecord, i: usize, name: &str) -> Result<f64, TraceError> {
    let s = field(rec, i, name)?;
    s.trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| row_err(rec, format!("{name}: '{s}' is not a finite number")))
}

pub fn write_series<W: Write>(w: W, series: &TimeSeries<f64>) -> Result<(), TraceError> {
    let mut wr = writer(w);
    wr.write_record(SERIES_HEADER)?;
    for s in &series.samples {
        wr.write_record([
            f6(s.state.time),
            f6(s.state.temp_warm_side),
            f6(s.state.temp_cold_side),
            f6(s.voltage),
            (s.contact as u8).to_string(),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

/// Reads a series back. The step is taken from the first two rows (0 for shorter series).
pub fn read_series<R: Read>(r: R) -> Result<TimeSeries<f64>, TraceError> {
    let mut rdr = reader(r, &SERIES_HEADER)?;
    let mut samples = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        if rec.len() != SERIES_HEADER.len() {
            return Err(row_err(&rec, format!("expected 5 columns, got {}", rec.len())));
        }
        let contact = match field(&rec, 4, "contact")?.trim() {
            "0" => false,
            "1" => true,
            other => return Err(row_err(&rec, format!("contact: '{other}' is not 0 or 1"))),
        };
        samples.push(Sample {
            state: ThermalState {
                time: number(&rec, 0, "t_s")?,
                temp_warm_side: number(&rec, 1, "temp_warm_C")?,
                temp_cold_side: number(&rec, 2, "temp_cold_C")?,
            },
            voltage: number(&rec, 3, "voltage_V")?,
            contact,
        });
    }
    let dt = match samples.as_slice() {
        [a, b, ..] => b.state.time - a.state.time,
        _ => 0.0,
    };
    Ok(TimeSeries { dt, samples })
}

fn action_arg(a: &Action) -> String {
    match a {
        Action::SetVoltage(v) => f6(*v),
        Action::StartFlip(face) => face.as_str().to_owned(),
        Action::Stop => String::new(),
    }
}

pub fn write_actions<W: Write>(w: W, records: &[ActionRecord]) -> Result<(), TraceError> {
    let mut wr = writer(w);
    wr.write_record(ACTION_HEADER)?;
    for r in records {
        wr.write_record([
            f6(r.t),
            r.element.to_string(),
            r.action.name().to_owned(),
            action_arg(&r.action),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_actions<R: Read>(r: R) -> Result<Vec<ActionRecord>, TraceError> {
    let mut rdr = reader(r, &ACTION_HEADER)?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        if rec.len() != ACTION_HEADER.len() {
            return Err(row_err(&rec, format!("expected 4 columns, got {}", rec.len())));
        }
        let t = number(&rec, 0, "t_s")?;
        let element = element(&rec, 1)?;
        let arg = field(&rec, 3, "arg")?;
        let action = match field(&rec, 2, "action")? {
            "set_voltage" => Action::SetVoltage(number(&rec, 3, "arg")?),
            "start_flip" => Action::StartFlip(arg.parse::<Face>().map_err(|e| row_err(&rec, e))?),
            "stop" if arg.is_empty() => Action::Stop,
            other => return Err(row_err(&rec, format!("unknown action '{other}' with arg '{arg}'"))),
        };
        out.push(ActionRecord { t, element, action });
    }
    Ok(out)
}

fn element(rec: &csv::StringRecord, i: usize) -> Result<ElementId, TraceError> {
    field(rec, i, "element")?
        .trim()
        .parse::<u8>()
        .ok()
        .and_then(ElementId::new)
        .ok_or_else(|| row_err(rec, "element must be 0..7"))
}

pub fn write_temps<W: Write>(w: W, records: &[TempRecord]) -> Result<(), TraceError> {
    let mut wr = writer(w);
    wr.write_record(TEMP_HEADER)?;
    for r in records {
        wr.write_record([
            f6(r.t),
            r.element.to_string(),
            f6(r.warm),
            f6(r.cold),
            f6(r.skin_facing),
            f6(r.voltage),
            r.phase.as_str().to_owned(),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_temps<R: Read>(r: R) -> Result<Vec<TempRecord>, TraceError> {
    let mut rdr = reader(r, &TEMP_HEADER)?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        if rec.len() != TEMP_HEADER.len() {
            return Err(row_err(&rec, format!("expected 7 columns, got {}", rec.len())));
        }
        out.push(TempRecord {
            t: number(&rec, 0, "t_s")?,
            element: element(&rec, 1)?,
            warm: number(&rec, 2, "temp_warm_C")?,
            cold: number(&rec, 3, "temp_cold_C")?,
            skin_facing: number(&rec, 4, "skin_facing_C")?,
            voltage: number(&rec, 5, "voltage_V")?,
            phase: field(&rec, 6, "phase")?.parse().map_err(|e: String| row_err(&rec, e))?,
        });
    }
    Ok(out)
}
