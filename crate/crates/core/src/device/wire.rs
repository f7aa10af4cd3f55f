use std::collections::VecDeque;
use std::io::{Read, Write};

use crate::controller::SideTemps;
use crate::device::frame::{volts_to_millivolts, Command, Frame, FrameDecoder, Message, BROADCAST};
use crate::device::{DeviceBackend, DeviceError, SimulatedBackend};
use crate::layout::ElementId;

/// NAK codes sent by the emulator.
pub mod nak {
    pub const BAD_ELEMENT: u8 = 1;
    pub const BUSY: u8 = 2;
    pub const BAD_PAYLOAD: u8 = 3;
    pub const UNEXPECTED: u8 = 4;
    pub const FAILED: u8 = 5;
}

/// Byte transport underneath [`FrameBackend`].
pub trait Link {
    fn send(&mut self, bytes: &[u8]) -> Result<(), DeviceError>;
    /// Reads whatever is available; `Ok(0)` means nothing more is coming for now.
    fn recv(&mut self, buf: &mut [u8]) -> Result<usize, DeviceError>;
    /// Device time passing between requests.
    fn idle(&mut self, _dt: f64) -> Result<(), DeviceError> {
        Ok(())
    }
}

/// Any byte stream, e.g. an opened serial device.
pub struct StreamLink<S> {
    stream: S,
}

impl<S: Read + Write> StreamLink<S> {
    pub fn new(stream: S) -> Self {
        Self { stream }
    }

    pub fn into_inner(self) -> S {
        self.stream
    }
}

impl<S: Read + Write> Link for StreamLink<S> {
    fn send(&mut self, bytes: &[u8]) -> Result<(), DeviceError> {
        self.stream.write_all(bytes)?;
        self.stream.flush()?;
        Ok(())
    }

    fn recv(&mut self, buf: &mut [u8]) -> Result<usize, DeviceError> {
        Ok(self.stream.read(buf)?)
    }
}

/// Drives an array over the frame protocol, one request and one reply at a time.
pub struct FrameBackend<L> {
    link: L,
    decoder: FrameDecoder,
    /// Corrupt or unknown frames skipped while waiting for replies.
    pub dropped_frames: usize,
}

impl<L: Link> FrameBackend<L> {
    pub fn new(link: L) -> Self {
        Self {
            link,
            decoder: FrameDecoder::new(),
            dropped_frames: 0,
        }
    }

    pub fn link(&self) -> &L {
        &self.link
    }

    pub fn link_mut(&mut self) -> &mut L {
        &mut self.link
    }

    fn request(&mut self, msg: Message) -> Result<Message, DeviceError> {
        self.link.send(&msg.to_frame().encode())?;
        let mut buf = [0u8; 64];
        loop {
            while let Some(r) = self.decoder.next_frame() {
                match r {
                    Ok(f) => return Message::from_frame(&f).map_err(|e| DeviceError::Protocol(e.to_string())),
                    Err(_) => self.dropped_frames += 1,
                }
            }
            let n = self.link.recv(&mut buf)?;
            if n == 0 {
                return Err(DeviceError::NoReply);
            }
            self.decoder.push(&buf[..n]);
        }
    }

    fn expect_ack(&mut self, msg: Message, element: u8) -> Result<(), DeviceError> {
        match self.request(msg)? {
            Message::Ack { element: e } if e == element => Ok(()),
            Message::Nak { element, code } => Err(DeviceError::Nak { element, code }),
            other => Err(DeviceError::Protocol(format!("expected ACK, got {other:?}"))),
        }
    }
}

impl<L: Link> DeviceBackend for FrameBackend<L> {
    fn apply_voltage(&mut self, element: ElementId, volts: f64) -> Result<f64, DeviceError> {
        if volts.is_nan() {
            return Err(DeviceError::InvalidArgument("voltage is NaN".into()));
        }
        let millivolts = volts_to_millivolts(volts);
        self.expect_ack(
            Message::SetVoltage {
                element: element.get(),
                millivolts,
            },
            element.get(),
        )?;
        Ok(millivolts as f64 / 1000.0)
    }

    fn start_flip(&mut self, element: ElementId) -> Result<(), DeviceError> {
        self.expect_ack(Message::StartFlip { element: element.get() }, element.get())
    }

    fn read_temps(&mut self, element: ElementId) -> Result<SideTemps, DeviceError> {
        match self.request(Message::ReadTemps { element: element.get() })? {
            Message::TempsReply {
                element: e,
                centi_a,
                centi_b,
            } if e == element.get() => Ok(SideTemps {
                warm: centi_a as f64 / 100.0,
                cold: centi_b as f64 / 100.0,
            }),
            Message::Nak { element, code } => Err(DeviceError::Nak { element, code }),
            other => Err(DeviceError::Protocol(format!("expected TEMPS_REPLY, got {other:?}"))),
        }
    }

    fn stop_all(&mut self) -> Result<(), DeviceError> {
        self.expect_ack(Message::StopAll, BROADCAST)
    }

    fn advance(&mut self, dt: f64) -> Result<(), DeviceError> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(DeviceError::InvalidArgument(format!("advance by {dt} s")));
        }
        self.link.idle(dt)
    }
}

/// Device side of the protocol around a simulated array, usable as an in-memory [`Link`].
pub struct DeviceEmulator {
    backend: SimulatedBackend,
    decoder: FrameDecoder,
    outbox: VecDeque<u8>,
}

impl DeviceEmulator {
    pub fn new(backend: SimulatedBackend) -> Self {
        Self {
            backend,
            decoder: FrameDecoder::new(),
            outbox: VecDeque::new(),
        }
    }

    pub fn backend(&self) -> &SimulatedBackend {
        &self.backend
    }

    /// Queues raw bytes ahead of the next reply, e.g. line noise.
    pub fn inject(&mut self, bytes: &[u8]) {
        self.outbox.extend(bytes);
    }

    /// Reply to one request frame. Requests that cannot be honoured get a NAK.
    pub fn handle(&mut self, frame: &Frame) -> Frame {
        let element = frame.element;
        let nak = |code| Message::Nak { element, code }.to_frame();
        let msg = match Message::from_frame(frame) {
            Ok(m) => m,
            Err(_) => return nak(nak::BAD_PAYLOAD),
        };
        if msg == Message::StopAll {
            return match self.backend.stop_all() {
                Ok(()) => Message::Ack { element: BROADCAST }.to_frame(),
                Err(_) => nak(nak::FAILED),
            };
        }
        let Some(id) = ElementId::new(element) else {
            return nak(nak::BAD_ELEMENT);
        };
        let ack = Message::Ack { element }.to_frame();
        match msg {
            Message::SetVoltage { millivolts, .. } => {
                match self.backend.apply_voltage(id, millivolts as f64 / 1000.0) {
                    Ok(_) => ack,
                    Err(_) => nak(nak::FAILED),
                }
            }
            Message::StartFlip { .. } => match self.backend.start_flip(id) {
                Ok(()) => ack,
                Err(DeviceError::Busy(_)) => nak(nak::BUSY),
                Err(_) => nak(nak::FAILED),
            },
            Message::ReadTemps { .. } => match self.backend.read_temps(id) {
                Ok(t) => Message::temps_reply(element, t).to_frame(),
                Err(_) => nak(nak::FAILED),
            },
            _ => nak(nak::UNEXPECTED),
        }
    }
}

impl Link for DeviceEmulator {
    fn send(&mut self, bytes: &[u8]) -> Result<(), DeviceError> {
        self.decoder.push(bytes);
        while let Some(r) = self.decoder.next_frame() {
            // corrupt requests are dropped silently, as a real device would
            if let Ok(f) = r {
                if matches!(f.command, Command::TempsReply | Command::Ack | Command::Nak) {
                    continue;
                }
                let reply = self.handle(&f);
                self.outbox.extend(reply.encode());
            }
        }
        Ok(())
    }

    fn recv(&mut self, buf: &mut [u8]) -> Result<usize, DeviceError> {
        let n = buf.len().min(self.outbox.len());
        for (slot, b) in buf.iter_mut().zip(self.outbox.drain(..n)) {
            *slot = b;
        }
        Ok(n)
    }

    fn idle(&mut self, dt: f64) -> Result<(), DeviceError> {
        self.backend.advance(dt)
    }
}
