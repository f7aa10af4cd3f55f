use crc::{Crc, CRC_16_IBM_3740};
use peltier_core::device::frame::{
    crc16_ccitt_false, decode_frame, encode_frame, Command, DecodeError, Frame, FrameDecoder, Message, CRC_LEN,
    HEADER_LEN, MAX_PAYLOAD, SYNC,
};
use proptest::prelude::*;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

const REFERENCE: Crc<u16> = Crc::<u16>::new(&CRC_16_IBM_3740);
const MAX_FRAME: usize = HEADER_LEN + MAX_PAYLOAD + CRC_LEN;

fn payloads() -> Vec<Vec<u8>> {
    vec![
        vec![],
        vec![0x00],
        vec![SYNC],
        vec![0xD0, 0x07],
        vec![0x10, 0x0F, 0xC4, 0x09],
        (0..MAX_PAYLOAD as u8).collect(),
        vec![SYNC; MAX_PAYLOAD],
    ]
}

#[test]
fn every_command_and_element_round_trips() {
    for command in Command::ALL {
        for element in 0..=u8::MAX {
            for payload in payloads() {
                let bytes = encode_frame(command, element, &payload).unwrap();
                assert_eq!(bytes.len(), HEADER_LEN + payload.len() + CRC_LEN);
                let (frame, used) = decode_frame(&bytes).unwrap();
                assert_eq!(used, bytes.len());
                assert_eq!(
                    frame,
                    Frame {
                        command,
                        element,
                        payload: payload.clone()
                    }
                );
                assert_eq!(frame.encode(), bytes);
            }
        }
    }
}

fn command() -> impl Strategy<Value = Command> {
    prop::sample::select(Command::ALL.to_vec())
}

fn frame() -> impl Strategy<Value = Frame> {
    (
        command(),
        any::<u8>(),
        prop::collection::vec(any::<u8>(), 0..=MAX_PAYLOAD),
    )
        .prop_map(|(command, element, payload)| Frame {
            command,
            element,
            payload,
        })
}

fn message() -> impl Strategy<Value = Message> {
    prop_oneof![
        (any::<u8>(), any::<u16>()).prop_map(|(element, millivolts)| Message::SetVoltage { element, millivolts }),
        any::<u8>().prop_map(|element| Message::StartFlip { element }),
        any::<u8>().prop_map(|element| Message::ReadTemps { element }),
        Just(Message::StopAll),
        (any::<u8>(), any::<i16>(), any::<i16>()).prop_map(|(element, centi_a, centi_b)| Message::TempsReply {
            element,
            centi_a,
            centi_b
        }),
        any::<u8>().prop_map(|element| Message::Ack { element }),
        (any::<u8>(), any::<u8>()).prop_map(|(element, code)| Message::Nak { element, code }),
    ]
}

proptest! {
    #[test]
    fn decode_inverts_encode(f in frame()) {
        let bytes = f.encode();
        prop_assert_eq!(decode_frame(&bytes).unwrap(), (f.clone(), bytes.len()));
    }

    #[test]
    fn typed_messages_round_trip(m in message()) {
        let bytes = m.to_frame().encode();
        let (f, _) = decode_frame(&bytes).unwrap();
        prop_assert_eq!(Message::from_frame(&f).unwrap(), m);
    }

    #[test]
    fn crc_agrees_with_reference(bytes in prop::collection::vec(any::<u8>(), 0..512)) {
        prop_assert_eq!(crc16_ccitt_false(&bytes), REFERENCE.checksum(&bytes));
    }

    #[test]
    fn frame_trailer_is_the_reference_crc(f in frame()) {
        let bytes = f.encode();
        let (body, trailer) = bytes.split_at(bytes.len() - CRC_LEN);
        prop_assert_eq!(u16::from_be_bytes([trailer[0], trailer[1]]), REFERENCE.checksum(body));
    }

    #[test]
    fn any_single_bit_flip_is_caught(f in frame(), bit in any::<prop::sample::Index>()) {
        let mut bytes = f.encode();
        let i = bit.index(bytes.len() * 8);
        bytes[i / 8] ^= 1 << (i % 8);
        prop_assert!(decode_frame(&bytes).map(|(g, _)| g) != Ok(f));
    }

    #[test]
    fn frames_buried_in_garbage_are_all_recovered(
        parts in prop::collection::vec((prop::collection::vec(any::<u8>(), 0..40), frame()), 1..12),
        tail in prop::collection::vec(any::<u8>(), 0..40),
        chunk in 1usize..64,
    ) {
        let mut stream = Vec::new();
        for (garbage, f) in &parts {
            stream.extend_from_slice(garbage);
            stream.extend_from_slice(&f.encode());
        }
        stream.extend_from_slice(&tail);

        let mut dec = FrameDecoder::new();
        let mut got = Vec::new();
        for piece in stream.chunks(chunk) {
            dec.push(piece);
            got.extend(dec.by_ref().filter_map(Result::ok));
        }
        got.extend(dec.finish().into_iter().filter_map(Result::ok));

        // garbage may by chance contain extra valid frames; the embedded ones must all appear in order
        let mut it = got.iter();
        for (_, f) in &parts {
            prop_assert!(it.any(|g| g == f), "lost {:?}", f);
        }
    }
}

#[test]
fn published_check_values() {
    assert_eq!(crc16_ccitt_false(b"123456789"), 0x29B1);
    assert_eq!(crc16_ccitt_false(b""), 0xFFFF);
    for v in [&b"123456789"[..], b"", b"A", &[0u8; 32], &[0xFF; 7], b"peltier"] {
        assert_eq!(crc16_ccitt_false(v), REFERENCE.checksum(v), "{v:?}");
    }
}

#[test]
fn ten_million_random_bytes_do_not_break_the_decoder() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5EED);
    let mut dec = FrameDecoder::new();
    let mut buf = vec![0u8; 8192];
    let (mut fed, mut frames, mut errors) = (0usize, 0usize, 0usize);
    while fed < 10_000_000 {
        let n = rng.random_range(1..=buf.len()).min(10_000_000 - fed);
        rng.fill_bytes(&mut buf[..n]);
        // one-shot decoding of arbitrary slices must be total as well
        let _ = decode_frame(&buf[..n.min(64)]);
        dec.push(&buf[..n]);
        for r in dec.by_ref() {
            match r {
                Ok(_) => frames += 1,
                Err(e) => {
                    assert!(!e.is_incomplete());
                    errors += 1;
                }
            }
        }
        assert!(dec.buffered() < MAX_FRAME, "decoder hoarding {} bytes", dec.buffered());
        fed += n;
    }
    for r in dec.finish() {
        if r.is_ok() {
            frames += 1;
        }
    }
    assert_eq!(dec.buffered(), 0);
    assert!(errors > 1000, "random data should produce rejected candidates");
    // a random 7+ byte run passes sync, version, length and CRC checks very rarely
    assert!(frames < 100, "{frames} frames decoded from noise");
}

#[test]
fn truncated_frames_ask_for_the_rest() {
    let bytes = encode_frame(Command::TempsReply, 2, &[1, 2, 3, 4]).unwrap();
    for cut in 0..bytes.len() {
        match decode_frame(&bytes[..cut]) {
            Err(DecodeError::Incomplete { needed }) => assert!(needed > 0),
            other => panic!("cut at {cut}: {other:?}"),
        }
    }
}
