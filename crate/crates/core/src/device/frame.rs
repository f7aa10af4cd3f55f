//! Serial frame protocol.
//!
//! ```text
//! A5 | version | command | element | len | payload[len] | crc16 (big-endian)
//! ```
//!
//! The CRC is CRC-16/CCITT-FALSE over every byte before it. Payload integers are
//! little-endian: voltages as `u16` millivolts, temperatures as `i16` centi-degrees.

use std::fmt;

use thiserror::Error;

use crate::controller::SideTemps;
use crate::thermal::MAX_VOLTAGE;

pub const SYNC: u8 = 0xA5;
pub const VERSION: u8 = 1;
pub const BROADCAST: u8 = 0xFF;
pub const MAX_PAYLOAD: usize = 16;
pub const HEADER_LEN: usize = 5;
pub const CRC_LEN: usize = 2;

/// CRC-16/CCITT-FALSE: poly 0x1021, init 0xFFFF, no reflection, no final xor.
pub fn crc16_ccitt_false(bytes: &[u8]) -> u16 {
    let mut crc: u16 = 0xFFFF;
    for &b in bytes {
        crc ^= (b as u16) << 8;
        for _ in 0..8 {
            crc = if crc & 0x8000 != 0 {
                (crc << 1) ^ 0x1021
            } else {
                crc << 1
            };
        }
    }
    crc
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Command {
    SetVoltage = 0x01,
    StartFlip = 0x02,
    ReadTemps = 0x03,
    StopAll = 0x04,
    TempsReply = 0x81,
    Ack = 0x82,
    Nak = 0x83,
}

impl Command {
    pub const ALL: [Command; 7] = [
        Command::SetVoltage,
        Command::StartFlip,
        Command::ReadTemps,
        Command::StopAll,
        Command::TempsReply,
        Command::Ack,
        Command::Nak,
    ];

    pub fn from_byte(b: u8) -> Option<Command> {
        Command::ALL.into_iter().find(|c| *c as u8 == b)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub command: Command,
    pub element: u8,
    pub payload: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FrameError {
    #[error("payload of {0} bytes exceeds the {MAX_PAYLOAD}-byte limit")]
    PayloadTooLong(usize),
    #[error("{command:?} expects a {expected}-byte payload, got {actual}")]
    PayloadSize {
        command: Command,
        expected: usize,
        actual: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecodeError {
    /// Not an error in the data: the frame is not complete yet.
    #[error("need {needed} more byte(s)")]
    Incomplete { needed: usize },
    #[error("crc mismatch: frame carries {actual:#06x}, computed {expected:#06x}")]
    Crc { expected: u16, actual: u16 },
    #[error("unknown command byte {0:#04x}")]
    UnknownCommand(u8),
    #[error("unsupported protocol version {0}")]
    Version(u8),
    #[error("declared payload length {0} exceeds {MAX_PAYLOAD}")]
    Length(u8),
    #[error("{0} byte(s) before the next sync byte were skipped")]
    Garbage(usize),
}

impl DecodeError {
    pub fn is_incomplete(&self) -> bool {
        matches!(self, DecodeError::Incomplete { .. })
    }
}

pub fn encode_frame(command: Command, element: u8, payload: &[u8]) -> Result<Vec<u8>, FrameError> {
    if payload.len() > MAX_PAYLOAD {
        return Err(FrameError::PayloadTooLong(payload.len()));
    }
    let mut out = Vec::with_capacity(HEADER_LEN + payload.len() + CRC_LEN);
    out.extend_from_slice(&[SYNC, VERSION, command as u8, element, payload.len() as u8]);
    out.extend_from_slice(payload);
    let crc = crc16_ccitt_false(&out);
    out.extend_from_slice(&crc.to_be_bytes());
    Ok(out)
}

impl Frame {
    pub fn new(command: Command, element: u8, payload: Vec<u8>) -> Result<Self, FrameError> {
        if payload.len() > MAX_PAYLOAD {
            return Err(FrameError::PayloadTooLong(payload.len()));
        }
        Ok(Self {
            command,
            element,
            payload,
        })
    }

    pub fn encode(&self) -> Vec<u8> {
        encode_frame(self.command, self.element, &self.payload).expect("length checked on construction")
    }

    pub fn encoded_len(&self) -> usize {
        HEADER_LEN + self.payload.len() + CRC_LEN
    }
}

/// Decodes the first frame in `bytes`, returning it with the number of bytes consumed.
///
/// Leading bytes before the sync byte are reported as [`DecodeError::Garbage`] so the caller
/// can drop them; a frame cut short yields [`DecodeError::Incomplete`].
pub fn decode_frame(bytes: &[u8]) -> Result<(Frame, usize), DecodeError> {
    match bytes.iter().position(|&b| b == SYNC) {
        None if bytes.is_empty() => {
            return Err(DecodeError::Incomplete {
                needed: HEADER_LEN + CRC_LEN,
            })
        }
        None => return Err(DecodeError::Garbage(bytes.len())),
        Some(0) => {}
        Some(k) => return Err(DecodeError::Garbage(k)),
    }
    if bytes.len() < HEADER_LEN {
        return Err(DecodeError::Incomplete {
            needed: HEADER_LEN + CRC_LEN - bytes.len(),
        });
    }
    if bytes[1] != VERSION {
        return Err(DecodeError::Version(bytes[1]));
    }
    let len = bytes[4];
    if len as usize > MAX_PAYLOAD {
        return Err(DecodeError::Length(len));
    }
    let total = HEADER_LEN + len as usize + CRC_LEN;
    if bytes.len() < total {
        return Err(DecodeError::Incomplete {
            needed: total - bytes.len(),
        });
    }
    let body = &bytes[..total - CRC_LEN];
    let expected = crc16_ccitt_false(body);
    let actual = u16::from_be_bytes([bytes[total - 2], bytes[total - 1]]);
    if expected != actual {
        return Err(DecodeError::Crc { expected, actual });
    }
    let command = Command::from_byte(bytes[2]).ok_or(DecodeError::UnknownCommand(bytes[2]))?;
    Ok((
        Frame {
            command,
            element: bytes[3],
            payload: body[HEADER_LEN..].to_vec(),
        },
        total,
    ))
}

/// Incremental decoder for a byte stream.
///
/// After a corrupt or unknown frame it drops the offending sync byte (or the whole frame when
/// its CRC was valid) and resynchronizes on the next 0xA5.
#[derive(Debug, Default, Clone)]
pub struct FrameDecoder {
    buf: Vec<u8>,
}

impl FrameDecoder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, bytes: &[u8]) {
        self.buf.extend_from_slice(bytes);
    }

    pub fn buffered(&self) -> usize {
        self.buf.len()
    }

    /// Next frame or error, or `None` when more bytes are needed.
    pub fn next_frame(&mut self) -> Option<Result<Frame, DecodeError>> {
        loop {
            match decode_frame(&self.buf) {
                Ok((frame, used)) => {
                    self.buf.drain(..used);
                    return Some(Ok(frame));
                }
                Err(DecodeError::Incomplete { .. }) => return None,
                Err(DecodeError::Garbage(k)) => {
                    // garbage is silently skipped; it only matters to the one-shot decoder
                    self.buf.drain(..k);
                }
                Err(e @ DecodeError::UnknownCommand(_)) => {
                    let len = HEADER_LEN + self.buf[4] as usize + CRC_LEN;
                    self.buf.drain(..len);
                    return Some(Err(e));
                }
                Err(e) => {
                    self.buf.drain(..1);
                    return Some(Err(e));
                }
            }
        }
    }

    /// Drains everything still buffered at end of stream. A truncated candidate frame is
    /// abandoned byte by byte, so a real frame hidden behind a bogus header is still found.
    pub fn finish(&mut self) -> Vec<Result<Frame, DecodeError>> {
        let mut out = Vec::new();
        while !self.buf.is_empty() {
            match self.next_frame() {
                Some(r) => out.push(r),
                None if self.buf.is_empty() => break,
                None => {
                    let needed = match decode_frame(&self.buf) {
                        Err(DecodeError::Incomplete { needed }) => needed,
                        _ => 0,
                    };
                    self.buf.drain(..1);
                    out.push(Err(DecodeError::Incomplete { needed }));
                }
            }
        }
        out
    }
}

impl Iterator for FrameDecoder {
    type Item = Result<Frame, DecodeError>;
    fn next(&mut self) -> Option<Self::Item> {
        self.next_frame()
    }
}

/// Typed view of a frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Message {
    SetVoltage { element: u8, millivolts: u16 },
    StartFlip { element: u8 },
    ReadTemps { element: u8 },
    StopAll,
    TempsReply { element: u8, centi_a: i16, centi_b: i16 },
    Ack { element: u8 },
    Nak { element: u8, code: u8 },
}

pub fn volts_to_millivolts(v: f64) -> u16 {
    (v.clamp(0.0, MAX_VOLTAGE) * 1000.0).round() as u16
}

pub fn celsius_to_centi(t: f64) -> i16 {
    (t * 100.0).round().clamp(i16::MIN as f64, i16::MAX as f64) as i16
}

impl Message {
    pub fn temps_reply(element: u8, temps: SideTemps) -> Self {
        Message::TempsReply {
            element,
            centi_a: celsius_to_centi(temps.warm),
            centi_b: celsius_to_centi(temps.cold),
        }
    }

    pub fn to_frame(self) -> Frame {
        let (command, element, payload) = match self {
            Message::SetVoltage { element, millivolts } => {
                (Command::SetVoltage, element, millivolts.to_le_bytes().to_vec())
            }
            Message::StartFlip { element } => (Command::StartFlip, element, vec![]),
            Message::ReadTemps { element } => (Command::ReadTemps, element, vec![]),
            Message::StopAll => (Command::StopAll, BROADCAST, vec![]),
            Message::TempsReply {
                element,
                centi_a,
                centi_b,
            } => {
                let mut p = centi_a.to_le_bytes().to_vec();
                p.extend_from_slice(&centi_b.to_le_bytes());
                (Command::TempsReply, element, p)
            }
            Message::Ack { element } => (Command::Ack, element, vec![]),
            Message::Nak { element, code } => (Command::Nak, element, vec![code]),
        };
        Frame {
            command,
            element,
            payload,
        }
    }

    pub fn from_frame(f: &Frame) -> Result<Self, FrameError> {
        let want = |n: usize| {
            if f.payload.len() == n {
                Ok(())
            } else {
                Err(FrameError::PayloadSize {
                    command: f.command,
                    expected: n,
                    actual: f.payload.len(),
                })
            }
        };
        let p = &f.payload;
        let element = f.element;
        Ok(match f.command {
            Command::SetVoltage => {
                want(2)?;
                Message::SetVoltage {
                    element,
                    millivolts: u16::from_le_bytes([p[0], p[1]]),
                }
            }
            Command::StartFlip => {
                want(0)?;
                Message::StartFlip { element }
            }
            Command::ReadTemps => {
                want(0)?;
                Message::ReadTemps { element }
            }
            Command::StopAll => {
                want(0)?;
                Message::StopAll
            }
            Command::TempsReply => {
                want(4)?;
                Message::TempsReply {
                    element,
                    centi_a: i16::from_le_bytes([p[0], p[1]]),
                    centi_b: i16::from_le_bytes([p[2], p[3]]),
                }
            }
            Command::Ack => {
                want(0)?;
                Message::Ack { element }
            }
            Command::Nak => {
                want(1)?;
                Message::Nak { element, code: p[0] }
            }
        })
    }
}

impl fmt::Display for Frame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, b) in self.encode().iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{b:02X}")?;
        }
        Ok(())
    }
}
