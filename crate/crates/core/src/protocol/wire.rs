//! Length-prefixed binary framing.
//!
//! A frame is a 4-byte big-endian payload length followed by the payload.
//! Every payload starts with a one-byte type tag and the 8-byte session id;
//! integers are big-endian, bit vectors are a `u32` count followed by the
//! bits packed 8 per byte, most significant bit first, and `f64` travels as
//! its IEEE-754 bit pattern. Decoding is strict: unknown tags, invalid enum
//! codes, non-zero padding bits and trailing bytes are all rejected.

use std::io::{Read, Write};

use thiserror::Error;

use super::binding::{BindingClaim, CheaterFlag, Verdict, VerdictCounts};
use super::session::{Deadline, SessionRecord};
use super::Party;
use crate::quantum::{Basis, QubitDescriptor};

/// Largest accepted payload, 16 MiB.
pub const MAX_FRAME: usize = 16 * 1024 * 1024;

const TAG_INIT_REQUEST: u8 = 0x01;
const TAG_INIT_GRANT: u8 = 0x02;
const TAG_OUTCOME_REPORT: u8 = 0x03;
const TAG_BIND_REQUEST: u8 = 0x04;
const TAG_BIND_CLAIM: u8 = 0x05;
const TAG_VERDICT_NOTICE: u8 = 0x06;
const TAG_SESSION_RECORD: u8 = 0x10;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DecodeError {
    #[error("truncated frame: need {needed} bytes, have {available}")]
    Truncated { needed: usize, available: usize },
    #[error("oversize frame: declared {0} bytes, limit {MAX_FRAME}")]
    Oversize(usize),
    #[error("malformed payload: {0}")]
    Malformed(String),
}

fn malformed(msg: impl Into<String>) -> DecodeError {
    DecodeError::Malformed(msg.into())
}

#[derive(Debug, Clone, PartialEq)]
pub enum WireMessage {
    /// A client asks to open a session (`session_id = 0`) or join one.
    InitRequest {
        session_id: u64,
        party: Party,
        n: u32,
        contract: Vec<u8>,
    },
    /// Trent's reply: the client's qubits and the opponent's descriptors.
    InitGrant {
        session_id: u64,
        party: Party,
        qubits: Vec<QubitDescriptor>,
        cross_bits: Vec<QubitDescriptor>,
        deadline: Deadline,
    },
    OutcomeReport {
        session_id: u64,
        party: Party,
        m: u32,
        bit: u8,
    },
    BindRequest {
        session_id: u64,
        party: Party,
    },
    BindClaim {
        session_id: u64,
        claim: BindingClaim,
    },
    VerdictNotice {
        session_id: u64,
        verdict: Verdict,
    },
}

impl WireMessage {
    pub fn session_id(&self) -> u64 {
        match self {
            WireMessage::InitRequest { session_id, .. }
            | WireMessage::InitGrant { session_id, .. }
            | WireMessage::OutcomeReport { session_id, .. }
            | WireMessage::BindRequest { session_id, .. }
            | WireMessage::BindClaim { session_id, .. }
            | WireMessage::VerdictNotice { session_id, .. } => *session_id,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            WireMessage::InitRequest { .. } => "InitRequest",
            WireMessage::InitGrant { .. } => "InitGrant",
            WireMessage::OutcomeReport { .. } => "OutcomeReport",
            WireMessage::BindRequest { .. } => "BindRequest",
            WireMessage::BindClaim { .. } => "BindClaim",
            WireMessage::VerdictNotice { .. } => "VerdictNotice",
        }
    }
}

#[derive(Default)]
struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_be_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_be_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.u64(v.to_bits());
    }
    fn bytes(&mut self, b: &[u8]) {
        self.u32(b.len() as u32);
        self.0.extend_from_slice(b);
    }
    /// Packed bits without a count.
    fn packed(&mut self, bits: impl Iterator<Item = u8>) {
        let mut cur = 0u8;
        let mut used = 0;
        for b in bits {
            cur |= (b & 1) << (7 - used);
            used += 1;
            if used == 8 {
                self.0.push(cur);
                cur = 0;
                used = 0;
            }
        }
        if used > 0 {
            self.0.push(cur);
        }
    }
    fn bits(&mut self, bits: &[u8]) {
        self.u32(bits.len() as u32);
        self.packed(bits.iter().copied());
    }
    fn descriptors(&mut self, ds: &[QubitDescriptor]) {
        self.u32(ds.len() as u32);
        self.packed(ds.iter().map(|d| d.basis_bit()));
        self.packed(ds.iter().map(|d| d.state_bit));
    }
    fn deadline(&mut self, d: &Deadline) {
        self.u32(d.max_rounds.unwrap_or(u32::MAX));
        self.u32(d.round_timeout_ms);
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, k: usize) -> Result<&'a [u8], DecodeError> {
        if self.buf.len() - self.pos < k {
            return Err(malformed(format!(
                "field needs {k} bytes at offset {}, payload has {}",
                self.pos,
                self.buf.len()
            )));
        }
        let s = &self.buf[self.pos..self.pos + k];
        self.pos += k;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8, DecodeError> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32, DecodeError> {
        Ok(u32::from_be_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }
    fn u64(&mut self) -> Result<u64, DecodeError> {
        Ok(u64::from_be_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }
    fn f64(&mut self) -> Result<f64, DecodeError> {
        Ok(f64::from_bits(self.u64()?))
    }
    fn bool(&mut self) -> Result<bool, DecodeError> {
        match self.u8()? {
            0 => Ok(false),
            1 => Ok(true),
            v => Err(malformed(format!("invalid boolean {v}"))),
        }
    }
    fn party(&mut self) -> Result<Party, DecodeError> {
        let c = self.u8()?;
        Party::from_code(c).ok_or_else(|| malformed(format!("invalid party code {c}")))
    }
    fn bytes(&mut self) -> Result<Vec<u8>, DecodeError> {
        let k = self.u32()? as usize;
        Ok(self.take(k)?.to_vec())
    }
    fn count(&mut self) -> Result<usize, DecodeError> {
        let k = self.u32()? as usize;
        // Each element needs at least one bit; reject counts the payload cannot hold.
        if k > 8 * (self.buf.len() - self.pos) {
            return Err(malformed(format!("count {k} exceeds remaining payload")));
        }
        Ok(k)
    }
    fn packed(&mut self, k: usize) -> Result<Vec<u8>, DecodeError> {
        let raw = self.take(k.div_ceil(8))?;
        let bits: Vec<u8> = (0..k).map(|i| (raw[i / 8] >> (7 - i % 8)) & 1).collect();
        if !k.is_multiple_of(8) && raw[k / 8] & (0xffu8 >> (k % 8)) != 0 {
            return Err(malformed("non-zero padding bits"));
        }
        Ok(bits)
    }
    fn bits(&mut self) -> Result<Vec<u8>, DecodeError> {
        let k = self.count()?;
        self.packed(k)
    }
    fn descriptors(&mut self) -> Result<Vec<QubitDescriptor>, DecodeError> {
        let k = self.count()?;
        let bases = self.packed(k)?;
        let states = self.packed(k)?;
        Ok(bases
            .into_iter()
            .zip(states)
            .map(|(b, s)| QubitDescriptor::from_bits(b, s))
            .collect())
    }
    fn deadline(&mut self) -> Result<Deadline, DecodeError> {
        let r = self.u32()?;
        Ok(Deadline {
            max_rounds: (r != u32::MAX).then_some(r),
            round_timeout_ms: self.u32()?,
        })
    }
    fn finish(&self) -> Result<(), DecodeError> {
        if self.pos != self.buf.len() {
            return Err(malformed(format!(
                "{} trailing bytes",
                self.buf.len() - self.pos
            )));
        }
        Ok(())
    }
}

fn write_payload(msg: &WireMessage) -> Vec<u8> {
    let mut w = Writer::default();
    match msg {
        WireMessage::InitRequest {
            session_id,
            party,
            n,
            contract,
        } => {
            w.u8(TAG_INIT_REQUEST);
            w.u64(*session_id);
            w.u8(party.code());
            w.u32(*n);
            w.bytes(contract);
        }
        WireMessage::InitGrant {
            session_id,
            party,
            qubits,
            cross_bits,
            deadline,
        } => {
            w.u8(TAG_INIT_GRANT);
            w.u64(*session_id);
            w.u8(party.code());
            w.descriptors(qubits);
            w.descriptors(cross_bits);
            w.deadline(deadline);
        }
        WireMessage::OutcomeReport {
            session_id,
            party,
            m,
            bit,
        } => {
            w.u8(TAG_OUTCOME_REPORT);
            w.u64(*session_id);
            w.u8(party.code());
            w.u32(*m);
            w.u8(*bit);
        }
        WireMessage::BindRequest { session_id, party } => {
            w.u8(TAG_BIND_REQUEST);
            w.u64(*session_id);
            w.u8(party.code());
        }
        WireMessage::BindClaim { session_id, claim } => {
            w.u8(TAG_BIND_CLAIM);
            w.u64(*session_id);
            w.u8(claim.party.code());
            w.bits(&claim.bases.iter().map(|b| b.bit()).collect::<Vec<_>>());
            w.bits(&claim.outcomes);
        }
        WireMessage::VerdictNotice {
            session_id,
            verdict,
        } => {
            w.u8(TAG_VERDICT_NOTICE);
            w.u64(*session_id);
            w.u8(verdict.contract_valid as u8);
            w.u8(verdict.cheater_flag.code());
            w.f64(verdict.alpha_used);
            let c = &verdict.counts;
            for v in [
                c.accept_correct_a,
                c.reject_correct_a,
                c.accept_correct_b,
                c.reject_correct_b,
            ] {
                w.u32(v);
            }
        }
    }
    w.0
}

fn read_payload(payload: &[u8]) -> Result<WireMessage, DecodeError> {
    let mut r = Reader {
        buf: payload,
        pos: 0,
    };
    let tag = r.u8()?;
    let session_id = r.u64()?;
    let msg = match tag {
        TAG_INIT_REQUEST => WireMessage::InitRequest {
            session_id,
            party: r.party()?,
            n: r.u32()?,
            contract: r.bytes()?,
        },
        TAG_INIT_GRANT => WireMessage::InitGrant {
            session_id,
            party: r.party()?,
            qubits: r.descriptors()?,
            cross_bits: r.descriptors()?,
            deadline: r.deadline()?,
        },
        TAG_OUTCOME_REPORT => {
            let party = r.party()?;
            let m = r.u32()?;
            let bit = r.u8()?;
            if bit > 1 {
                return Err(malformed(format!("outcome bit {bit}")));
            }
            WireMessage::OutcomeReport {
                session_id,
                party,
                m,
                bit,
            }
        }
        TAG_BIND_REQUEST => WireMessage::BindRequest {
            session_id,
            party: r.party()?,
        },
        TAG_BIND_CLAIM => {
            let party = r.party()?;
            let bases: Vec<Basis> = r.bits()?.into_iter().map(Basis::from_bit).collect();
            let outcomes = r.bits()?;
            if bases.len() != outcomes.len() {
                return Err(malformed("claim bases and outcomes differ in length"));
            }
            WireMessage::BindClaim {
                session_id,
                claim: BindingClaim {
                    party,
                    bases,
                    outcomes,
                },
            }
        }
        TAG_VERDICT_NOTICE => {
            let contract_valid = r.bool()?;
            let code = r.u8()?;
            let cheater_flag = CheaterFlag::from_code(code)
                .ok_or_else(|| malformed(format!("invalid cheater flag {code}")))?;
            let alpha_used = r.f64()?;
            let counts = VerdictCounts {
                accept_correct_a: r.u32()?,
                reject_correct_a: r.u32()?,
                accept_correct_b: r.u32()?,
                reject_correct_b: r.u32()?,
            };
            WireMessage::VerdictNotice {
                session_id,
                verdict: Verdict {
                    contract_valid,
                    cheater_flag,
                    alpha_used,
                    counts,
                },
            }
        }
        t => return Err(malformed(format!("unknown message tag {t:#04x}"))),
    };
    r.finish()?;
    Ok(msg)
}

fn frame(payload: Vec<u8>) -> Vec<u8> {
    let mut out = Vec::with_capacity(payload.len() + 4);
    out.extend_from_slice(&(payload.len() as u32).to_be_bytes());
    out.extend(payload);
    out
}

/// Splits one complete frame off `bytes`, returning the payload and the rest.
pub fn split_frame(bytes: &[u8]) -> Result<(&[u8], &[u8]), DecodeError> {
    if bytes.len() < 4 {
        return Err(DecodeError::Truncated {
            needed: 4,
            available: bytes.len(),
        });
    }
    let len = u32::from_be_bytes(bytes[..4].try_into().expect("4 bytes")) as usize;
    if len > MAX_FRAME {
        return Err(DecodeError::Oversize(len));
    }
    if bytes.len() - 4 < len {
        return Err(DecodeError::Truncated {
            needed: len + 4,
            available: bytes.len(),
        });
    }
    Ok((&bytes[4..4 + len], &bytes[4 + len..]))
}

fn decode_exact<T>(
    bytes: &[u8],
    read: impl FnOnce(&[u8]) -> Result<T, DecodeError>,
) -> Result<T, DecodeError> {
    let (payload, rest) = split_frame(bytes)?;
    if !rest.is_empty() {
        return Err(malformed(format!("{} bytes after frame", rest.len())));
    }
    read(payload)
}

pub fn encode_message(msg: &WireMessage) -> Vec<u8> {
    frame(write_payload(msg))
}

/// Decodes exactly one frame.
pub fn decode_message(bytes: &[u8]) -> Result<WireMessage, DecodeError> {
    decode_exact(bytes, read_payload)
}

pub fn encode_session(s: &SessionRecord) -> Vec<u8> {
    let mut w = Writer::default();
    w.u8(TAG_SESSION_RECORD);
    w.u64(s.session_id);
    w.u32(s.n as u32);
    w.descriptors(&s.alice_qubits);
    w.descriptors(&s.bob_qubits);
    w.descriptors(&s.alice_cross_bits);
    w.descriptors(&s.bob_cross_bits);
    w.deadline(&s.deadline);
    frame(w.0)
}

pub fn decode_session(bytes: &[u8]) -> Result<SessionRecord, DecodeError> {
    decode_exact(bytes, |payload| {
        let mut r = Reader {
            buf: payload,
            pos: 0,
        };
        let tag = r.u8()?;
        if tag != TAG_SESSION_RECORD {
            return Err(malformed(format!(
                "expected session record tag, got {tag:#04x}"
            )));
        }
        let s = SessionRecord {
            session_id: r.u64()?,
            n: r.u32()? as usize,
            alice_qubits: r.descriptors()?,
            bob_qubits: r.descriptors()?,
            alice_cross_bits: r.descriptors()?,
            bob_cross_bits: r.descriptors()?,
            deadline: r.deadline()?,
        };
        r.finish()?;
        s.validate().map_err(|e| malformed(e.to_string()))?;
        Ok(s)
    })
}

/// Writes one frame.
pub fn write_frame<W: Write>(w: &mut W, msg: &WireMessage) -> std::io::Result<()> {
    w.write_all(&encode_message(msg))?;
    w.flush()
}

/// Errors from reading a frame off a byte stream.
#[derive(Debug, Error)]
pub enum FrameReadError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Decode(#[from] DecodeError),
}

/// Reads one frame, rejecting oversize lengths before allocating.
pub fn read_frame<R: Read>(r: &mut R) -> Result<WireMessage, FrameReadError> {
    let mut len = [0u8; 4];
    r.read_exact(&mut len)?;
    let n = u32::from_be_bytes(len) as usize;
    if n > MAX_FRAME {
        return Err(DecodeError::Oversize(n).into());
    }
    let mut payload = vec![0u8; n];
    r.read_exact(&mut payload)?;
    Ok(read_payload(&payload)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::session::init_session;
    use crate::rng::stream_rng;

    #[test]
    fn outcome_report_round_trip() {
        let m = WireMessage::OutcomeReport {
            session_id: 7,
            party: Party::Alice,
            m: 1,
            bit: 0,
        };
        assert_eq!(decode_message(&encode_message(&m)).unwrap(), m);
    }

    #[test]
    fn decode_error_kinds() {
        assert!(matches!(
            decode_message(&[]),
            Err(DecodeError::Truncated { .. })
        ));
        let big = (1u32 << 30).to_be_bytes();
        assert_eq!(decode_message(&big), Err(DecodeError::Oversize(1 << 30)));
        assert!(matches!(
            decode_message(&[0, 0, 0, 9, 0x01]),
            Err(DecodeError::Truncated { .. })
        ));
        let mut bad = encode_message(&WireMessage::BindRequest {
            session_id: 1,
            party: Party::Bob,
        });
        bad[4] = 0x7f;
        assert!(matches!(
            decode_message(&bad),
            Err(DecodeError::Malformed(_))
        ));
        let mut trailing = encode_message(&WireMessage::BindRequest {
            session_id: 1,
            party: Party::Bob,
        });
        trailing.push(0);
        assert!(matches!(
            decode_message(&trailing),
            Err(DecodeError::Malformed(_))
        ));
    }

    #[test]
    fn bits_are_msb_first() {
        let claim = BindingClaim::uniform(Party::Bob, Basis::Accept, vec![1, 0, 1]);
        let bytes = encode_message(&WireMessage::BindClaim {
            session_id: 0,
            claim,
        });
        // tag, id, party, count(3) + 0b1110_0000 bases, count(3) + 0b1010_0000 outcomes
        assert_eq!(
            &bytes[4 + 10..],
            &[0, 0, 0, 3, 0b1110_0000, 0, 0, 0, 3, 0b1010_0000]
        );
    }

    #[test]
    fn padding_bits_must_be_zero() {
        let claim = BindingClaim::uniform(Party::Bob, Basis::Accept, vec![1, 0, 1]);
        let mut bytes = encode_message(&WireMessage::BindClaim {
            session_id: 0,
            claim,
        });
        let last = bytes.len() - 1;
        bytes[last] |= 1;
        assert!(matches!(
            decode_message(&bytes),
            Err(DecodeError::Malformed(_))
        ));
    }

    #[test]
    fn session_round_trip() {
        let mut s = init_session(37, &mut stream_rng(30, 0)).unwrap();
        s.deadline.max_rounds = Some(12);
        assert_eq!(decode_session(&encode_session(&s)).unwrap(), s);
        let mut broken = s.clone();
        broken.alice_cross_bits[0].state_bit ^= 1;
        assert!(decode_session(&encode_session(&broken)).is_err());
    }

    #[test]
    fn stream_framing() {
        let msgs = [
            WireMessage::BindRequest {
                session_id: 3,
                party: Party::Alice,
            },
            WireMessage::OutcomeReport {
                session_id: 3,
                party: Party::Bob,
                m: 9,
                bit: 1,
            },
        ];
        let mut buf = Vec::new();
        for m in &msgs {
            write_frame(&mut buf, m).unwrap();
        }
        let mut cur = std::io::Cursor::new(buf);
        for m in &msgs {
            assert_eq!(&read_frame(&mut cur).unwrap(), m);
        }
        assert!(matches!(read_frame(&mut cur), Err(FrameReadError::Io(_))));
    }
}
