//! Randomized wire and persistence round trips.

use std::io::{Read, Write};

use fairsign_core::protocol::binding::VerdictCounts;
use fairsign_core::protocol::wire::{decode_session, encode_session, split_frame};
use fairsign_core::protocol::{
    decode_message, encode_message, init_session, BindingClaim, CheaterFlag, Deadline, Party,
    Verdict, WireMessage,
};
use fairsign_core::quantum::{Basis, QubitDescriptor};
use fairsign_core::rng::stream_rng;
use proptest::prelude::*;
use rand::Rng;

fn party<R: Rng>(rng: &mut R) -> Party {
    if rng.random() {
        Party::Alice
    } else {
        Party::Bob
    }
}

fn descriptors<R: Rng>(rng: &mut R, n: usize) -> Vec<QubitDescriptor> {
    (0..n)
        .map(|_| QubitDescriptor::from_bits(rng.random_range(0..2), rng.random_range(0..2)))
        .collect()
}

fn deadline<R: Rng>(rng: &mut R) -> Deadline {
    Deadline {
        max_rounds: if rng.random() {
            Some(rng.random_range(0..u32::MAX))
        } else {
            None
        },
        round_timeout_ms: rng.random(),
    }
}

fn random_message<R: Rng>(rng: &mut R) -> WireMessage {
    let session_id: u64 = rng.random();
    let n = rng.random_range(0..70usize);
    match rng.random_range(0..6) {
        0 => WireMessage::InitRequest {
            session_id,
            party: party(rng),
            n: rng.random(),
            contract: (0..rng.random_range(0..40)).map(|_| rng.random()).collect(),
        },
        1 => WireMessage::InitGrant {
            session_id,
            party: party(rng),
            qubits: descriptors(rng, n),
            cross_bits: descriptors(rng, n),
            deadline: deadline(rng),
        },
        2 => WireMessage::OutcomeReport {
            session_id,
            party: party(rng),
            m: rng.random(),
            bit: rng.random_range(0..2),
        },
        3 => WireMessage::BindRequest {
            session_id,
            party: party(rng),
        },
        4 => WireMessage::BindClaim {
            session_id,
            claim: BindingClaim {
                party: party(rng),
                bases: (0..n)
                    .map(|_| Basis::from_bit(rng.random_range(0..2)))
                    .collect(),
                outcomes: (0..n).map(|_| rng.random_range(0..2)).collect(),
            },
        },
        _ => WireMessage::VerdictNotice {
            session_id,
            verdict: Verdict {
                contract_valid: rng.random(),
                cheater_flag: CheaterFlag::from_code(rng.random_range(0..4)).unwrap(),
                alpha_used: rng.random_range(0.5..1.0),
                counts: VerdictCounts {
                    accept_correct_a: rng.random(),
                    reject_correct_a: rng.random(),
                    accept_correct_b: rng.random(),
                    reject_correct_b: rng.random(),
                },
            },
        },
    }
}

#[test]
fn ten_thousand_messages_round_trip() {
    let mut rng = stream_rng(2024, 0);
    for _ in 0..10_000 {
        let msg = random_message(&mut rng);
        let bytes = encode_message(&msg);
        assert_eq!(decode_message(&bytes).unwrap(), msg);
        let (frame, rest) = split_frame(&bytes).unwrap();
        assert_eq!(frame.len() + 4, bytes.len());
        assert!(rest.is_empty());
    }
}

#[test]
fn ten_thousand_sessions_round_trip() {
    let mut rng = stream_rng(2024, 1);
    for _ in 0..10_000 {
        let n = rng.random_range(1..120);
        let mut s = init_session(n, &mut rng).unwrap();
        s.deadline = deadline(&mut rng);
        let bytes = encode_session(&s);
        assert_eq!(decode_session(&bytes).unwrap(), s);
    }
}

#[test]
fn persisted_session_survives_a_file() {
    let s = init_session(37, &mut stream_rng(5, 5)).unwrap();
    let mut f = tempfile::NamedTempFile::new().unwrap();
    f.write_all(&encode_session(&s)).unwrap();
    let mut bytes = Vec::new();
    std::fs::File::open(f.path())
        .unwrap()
        .read_to_end(&mut bytes)
        .unwrap();
    assert_eq!(decode_session(&bytes).unwrap(), s);
}

proptest! {
    #[test]
    fn truncation_never_decodes(seed in any::<u64>(), cut in 0usize..64) {
        let msg = random_message(&mut stream_rng(seed, 0));
        let bytes = encode_message(&msg);
        let cut = cut.min(bytes.len() - 1);
        prop_assert!(decode_message(&bytes[..cut]).is_err());
    }

    #[test]
    fn arbitrary_bytes_never_panic(bytes in proptest::collection::vec(any::<u8>(), 0..256)) {
        if let Ok(msg) = decode_message(&bytes) {
            prop_assert_eq!(encode_message(&msg), bytes);
        }
    }
}
