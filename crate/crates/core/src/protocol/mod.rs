//! Trent and client state machines for the three protocol phases.
//!
//! * Initialization: Trent prepares `N` qubits per client and hands each
//!   client the classical descriptors of the other's qubits
//!   ([`session`]).
//! * Exchange: clients alternately report measurement outcomes, Alice first,
//!   and check the opponent's reports against their cross bits
//!   ([`client`]).
//! * Binding: on abort, each client presents per-qubit basis claims and
//!   outcomes; Trent draws alpha and decides ([`binding`]).
//!
//! Messages travel as length-prefixed frames ([`wire`]) over an in-memory
//! channel or a byte stream ([`transport`]); [`server`] is a socket Trent.

pub mod binding;
pub mod client;
pub mod server;
pub mod session;
pub mod transport;
pub mod wire;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use binding::{
    binding_verdict, sample_alpha, session_alpha, BindingClaim, CheaterFlag, Verdict,
};
pub use client::{
    run_exchange, AbortReason, ClientMachine, ExchangeTranscript, Intent, QubitRegister,
    RoundAction, RoundEntry, RoundPolicy,
};
pub use session::{init_session, Deadline, SessionRecord, Trent};
pub use transport::{MemoryTransport, StreamTransport, Transport, TransportError};
pub use wire::{decode_message, encode_message, DecodeError, WireMessage};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Party {
    Alice,
    Bob,
}

impl Party {
    pub fn other(self) -> Party {
        match self {
            Party::Alice => Party::Bob,
            Party::Bob => Party::Alice,
        }
    }

    pub fn code(self) -> u8 {
        match self {
            Party::Alice => 0,
            Party::Bob => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Party> {
        match code {
            0 => Some(Party::Alice),
            1 => Some(Party::Bob),
            _ => None,
        }
    }
}

impl std::fmt::Display for Party {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Party::Alice => "alice",
            Party::Bob => "bob",
        })
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProtocolError {
    #[error("a session needs at least one qubit per client")]
    EmptySession,
    #[error("{what} has length {got}, expected {expected}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("alpha {0} outside (1/2, 1)")]
    AlphaOutOfRange(f64),
    #[error("tolerance {0} outside [0, 1)")]
    ToleranceOutOfRange(f64),
    #[error("qubit {0} was already measured")]
    AlreadyMeasured(usize),
    #[error("qubit index {0} out of range")]
    NoSuchQubit(usize),
    #[error("out-of-order report: expected round {expected}, got {got}")]
    OutOfOrder { expected: usize, got: usize },
    #[error("unexpected message: {0}")]
    UnexpectedMessage(String),
    #[error("unknown session {0}")]
    UnknownSession(u64),
    #[error(transparent)]
    Transport(#[from] TransportError),
}
