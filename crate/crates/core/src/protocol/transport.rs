//! Message transports and the per-client Exchange loop that runs over them.

use std::io::ErrorKind;
use std::net::TcpStream;
use std::sync::mpsc::{channel, Receiver, RecvTimeoutError, Sender};
use std::time::Duration;

use rand::Rng;
use thiserror::Error;

use super::client::{
    AbortReason, Check, ClientMachine, ExchangeTranscript, RoundEntry, RoundPolicy,
};
use super::session::Deadline;
use super::wire::{
    decode_message, encode_message, read_frame, write_frame, DecodeError, FrameReadError,
    WireMessage,
};
use super::{Party, ProtocolError};
use crate::quantum::NoiseModel;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransportError {
    #[error("timed out waiting for a message")]
    Timeout,
    #[error("connection closed by peer")]
    Closed,
    #[error("i/o error: {0}")]
    Io(String),
    #[error(transparent)]
    Decode(#[from] DecodeError),
}

pub trait Transport {
    fn send(&mut self, msg: &WireMessage) -> Result<(), TransportError>;
    /// Blocks for at most `timeout` (forever when `None`).
    fn recv(&mut self, timeout: Option<Duration>) -> Result<WireMessage, TransportError>;
}

/// In-process channel carrying encoded frames, so the codec is exercised.
#[derive(Debug)]
pub struct MemoryTransport {
    tx: Sender<Vec<u8>>,
    rx: Receiver<Vec<u8>>,
}

impl MemoryTransport {
    pub fn pair() -> (MemoryTransport, MemoryTransport) {
        let (tx_a, rx_b) = channel();
        let (tx_b, rx_a) = channel();
        (
            MemoryTransport { tx: tx_a, rx: rx_a },
            MemoryTransport { tx: tx_b, rx: rx_b },
        )
    }
}

impl Transport for MemoryTransport {
    fn send(&mut self, msg: &WireMessage) -> Result<(), TransportError> {
        self.tx
            .send(encode_message(msg))
            .map_err(|_| TransportError::Closed)
    }

    fn recv(&mut self, timeout: Option<Duration>) -> Result<WireMessage, TransportError> {
        let bytes = match timeout {
            Some(t) => self.rx.recv_timeout(t).map_err(|e| match e {
                RecvTimeoutError::Timeout => TransportError::Timeout,
                RecvTimeoutError::Disconnected => TransportError::Closed,
            })?,
            None => self.rx.recv().map_err(|_| TransportError::Closed)?,
        };
        Ok(decode_message(&bytes)?)
    }
}

/// Framed messages over a TCP stream.
#[derive(Debug)]
pub struct StreamTransport {
    stream: TcpStream,
}

impl StreamTransport {
    pub fn new(stream: TcpStream) -> StreamTransport {
        StreamTransport { stream }
    }

    pub fn into_inner(self) -> TcpStream {
        self.stream
    }
}

fn io_error(e: std::io::Error) -> TransportError {
    match e.kind() {
        ErrorKind::WouldBlock | ErrorKind::TimedOut => TransportError::Timeout,
        ErrorKind::UnexpectedEof | ErrorKind::ConnectionReset | ErrorKind::BrokenPipe => {
            TransportError::Closed
        }
        _ => TransportError::Io(e.to_string()),
    }
}

impl Transport for StreamTransport {
    fn send(&mut self, msg: &WireMessage) -> Result<(), TransportError> {
        write_frame(&mut self.stream, msg).map_err(io_error)
    }

    fn recv(&mut self, timeout: Option<Duration>) -> Result<WireMessage, TransportError> {
        self.stream
            .set_read_timeout(timeout.map(|t| t.max(Duration::from_millis(1))))
            .map_err(io_error)?;
        read_frame(&mut self.stream).map_err(|e| match e {
            FrameReadError::Io(e) => io_error(e),
            FrameReadError::Decode(d) => TransportError::Decode(d),
        })
    }
}

/// One client's side of the Exchange phase over a transport. Alice sends
/// first in each round; Bob answers. Returns this client's view of the
/// transcript. Out-of-order or foreign reports are protocol errors.
pub fn run_client_exchange<T: Transport, R: Rng + ?Sized>(
    machine: &mut ClientMachine,
    transport: &mut T,
    policy: &dyn RoundPolicy,
    noise: &NoiseModel,
    deadline: &Deadline,
    rng: &mut R,
) -> Result<ExchangeTranscript, ProtocolError> {
    let me = machine.party;
    let other = me.other();
    let n = machine.n();
    let budget = deadline.max_rounds.map_or(n, |r| (r as usize).min(n));
    let timeout = Some(Duration::from_millis(deadline.round_timeout_ms as u64));
    let mut t = ExchangeTranscript::completed();
    for round in 1..=n {
        if round > budget {
            t.stop(round, AbortReason::Timeout, me);
            return Ok(t);
        }
        let order = if me == Party::Alice {
            [true, false]
        } else {
            [false, true]
        };
        for sending in order {
            if sending {
                let Some((m, bit)) = machine.next_report(policy, noise, rng)? else {
                    t.stop(round, AbortReason::Timeout, other);
                    return Ok(t);
                };
                let msg = WireMessage::OutcomeReport {
                    session_id: machine.session_id,
                    party: me,
                    m: m as u32,
                    bit,
                };
                if transport.send(&msg).is_err() {
                    t.stop(round, AbortReason::TransportFailure, me);
                    return Ok(t);
                }
                t.rounds.push(RoundEntry {
                    party: me,
                    index: m,
                    bit,
                });
            } else {
                let (m, bit) = match transport.recv(timeout) {
                    Ok(WireMessage::OutcomeReport {
                        session_id,
                        party,
                        m,
                        bit,
                    }) if session_id == machine.session_id && party == other => (m as usize, bit),
                    Ok(msg) => {
                        return Err(ProtocolError::UnexpectedMessage(format!(
                            "{} for session {} during exchange",
                            msg.kind(),
                            msg.session_id()
                        )))
                    }
                    Err(TransportError::Timeout) => {
                        t.stop(round, AbortReason::Timeout, me);
                        return Ok(t);
                    }
                    Err(_) => {
                        t.stop(round, AbortReason::TransportFailure, me);
                        return Ok(t);
                    }
                };
                let check = machine.receive(m, bit)?;
                t.rounds.push(RoundEntry {
                    party: other,
                    index: m,
                    bit,
                });
                if check == Check::Abort {
                    t.stop(round, AbortReason::MismatchDetected, me);
                    return Ok(t);
                }
            }
        }
    }
    Ok(t)
}
