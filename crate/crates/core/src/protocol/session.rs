//! Initialization phase: Trent's preparation ledger.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Party, ProtocolError};
use crate::quantum::{prepare_sequence, QubitDescriptor};

/// The deadline `t0`: a round budget for in-memory runs and a per-round
/// wall-clock limit for socket transports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Deadline {
    /// Rounds after which the exchange times out; `None` means `N`.
    pub max_rounds: Option<u32>,
    pub round_timeout_ms: u32,
}

impl Default for Deadline {
    fn default() -> Self {
        Deadline {
            max_rounds: None,
            round_timeout_ms: 2000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub session_id: u64,
    pub n: usize,
    pub alice_qubits: Vec<QubitDescriptor>,
    pub bob_qubits: Vec<QubitDescriptor>,
    /// Copy of `bob_qubits`, handed to Alice.
    pub alice_cross_bits: Vec<QubitDescriptor>,
    /// Copy of `alice_qubits`, handed to Bob.
    pub bob_cross_bits: Vec<QubitDescriptor>,
    pub deadline: Deadline,
}

impl SessionRecord {
    pub fn qubits(&self, party: Party) -> &[QubitDescriptor] {
        match party {
            Party::Alice => &self.alice_qubits,
            Party::Bob => &self.bob_qubits,
        }
    }

    pub fn cross_bits(&self, party: Party) -> &[QubitDescriptor] {
        match party {
            Party::Alice => &self.alice_cross_bits,
            Party::Bob => &self.bob_cross_bits,
        }
    }

    /// Checks lengths and the cross-copy invariant.
    pub fn validate(&self) -> Result<(), ProtocolError> {
        if self.n == 0 {
            return Err(ProtocolError::EmptySession);
        }
        for (what, v) in [
            ("alice_qubits", &self.alice_qubits),
            ("bob_qubits", &self.bob_qubits),
            ("alice_cross_bits", &self.alice_cross_bits),
            ("bob_cross_bits", &self.bob_cross_bits),
        ] {
            if v.len() != self.n {
                return Err(ProtocolError::LengthMismatch {
                    what,
                    expected: self.n,
                    got: v.len(),
                });
            }
        }
        if self.alice_cross_bits != self.bob_qubits || self.bob_cross_bits != self.alice_qubits {
            return Err(ProtocolError::UnexpectedMessage(
                "cross bits differ from the opposite client's qubits".into(),
            ));
        }
        Ok(())
    }

    /// The same session with the clients' roles exchanged.
    pub fn swapped(&self) -> SessionRecord {
        SessionRecord {
            session_id: self.session_id,
            n: self.n,
            alice_qubits: self.bob_qubits.clone(),
            bob_qubits: self.alice_qubits.clone(),
            alice_cross_bits: self.bob_cross_bits.clone(),
            bob_cross_bits: self.alice_cross_bits.clone(),
            deadline: self.deadline,
        }
    }

    pub fn round_budget(&self) -> usize {
        self.deadline
            .max_rounds
            .map_or(self.n, |r| (r as usize).min(self.n))
    }
}

fn build(
    session_id: u64,
    n: usize,
    rng: &mut (impl Rng + ?Sized),
) -> Result<SessionRecord, ProtocolError> {
    let alice = prepare_sequence(n, rng).map_err(|_| ProtocolError::EmptySession)?;
    let bob = prepare_sequence(n, rng).map_err(|_| ProtocolError::EmptySession)?;
    Ok(SessionRecord {
        session_id,
        n,
        alice_cross_bits: bob.clone(),
        bob_cross_bits: alice.clone(),
        alice_qubits: alice,
        bob_qubits: bob,
        deadline: Deadline::default(),
    })
}

/// One-off session with an identifier drawn from `rng`.
pub fn init_session<R: Rng + ?Sized>(
    n: usize,
    rng: &mut R,
) -> Result<SessionRecord, ProtocolError> {
    if n == 0 {
        return Err(ProtocolError::EmptySession);
    }
    let id = rng.random::<u64>();
    build(id, n, rng)
}

/// Trent's identifier allocator; identifiers are unique per instance.
#[derive(Debug, Default)]
pub struct Trent {
    next_id: u64,
}

impl Trent {
    pub fn new() -> Trent {
        Trent::default()
    }

    pub fn init_session<R: Rng + ?Sized>(
        &mut self,
        n: usize,
        rng: &mut R,
    ) -> Result<SessionRecord, ProtocolError> {
        if n == 0 {
            return Err(ProtocolError::EmptySession);
        }
        self.next_id += 1;
        build(self.next_id, n, rng)
    }
}
