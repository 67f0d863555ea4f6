//! Exchange phase: client state machines and the alternating round loop.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::binding::BindingClaim;
use super::session::SessionRecord;
use super::{Party, ProtocolError};
use crate::quantum::{measure, Basis, NoiseModel, Observable, QubitDescriptor};

/// What a client does with its qubit in a given round.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RoundAction {
    Measure(Observable),
    /// Report a uniformly random bit and leave the qubit unmeasured.
    Guess,
    /// Stop sending reports.
    Halt,
}

/// Per-round behaviour of a client during the Exchange phase.
pub trait RoundPolicy {
    /// Action for 1-based round `round`.
    fn action(&self, round: usize) -> RoundAction;
}

/// Always measure the Accept observable.
#[derive(Debug, Clone, Copy, Default)]
pub struct Honest;

impl RoundPolicy for Honest {
    fn action(&self, _round: usize) -> RoundAction {
        RoundAction::Measure(Observable::Accept)
    }
}

/// What a client wants after the exchange stops.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Intent {
    Bind,
    Refuse,
}

impl Intent {
    /// Basis measured and claimed for the remaining qubits.
    pub fn basis(self) -> Basis {
        match self {
            Intent::Bind => Basis::Accept,
            Intent::Refuse => Basis::Reject,
        }
    }
}

/// A client's physical qubits. The preparation is hidden; only measurement
/// reveals anything, and each qubit can be measured once.
#[derive(Debug, Clone)]
pub struct QubitRegister {
    states: Vec<QubitDescriptor>,
    outcomes: Vec<Option<(Observable, u8)>>,
}

impl QubitRegister {
    pub fn new(states: Vec<QubitDescriptor>) -> QubitRegister {
        let outcomes = vec![None; states.len()];
        QubitRegister { states, outcomes }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn measure<R: Rng + ?Sized>(
        &mut self,
        index: usize,
        obs: Observable,
        noise: &NoiseModel,
        rng: &mut R,
    ) -> Result<u8, ProtocolError> {
        let state = *self
            .states
            .get(index)
            .ok_or(ProtocolError::NoSuchQubit(index))?;
        if self.outcomes[index].is_some() {
            return Err(ProtocolError::AlreadyMeasured(index));
        }
        let bit = measure(state, obs, noise, rng);
        self.outcomes[index] = Some((obs, bit));
        Ok(bit)
    }

    pub fn outcome(&self, index: usize) -> Option<(Observable, u8)> {
        self.outcomes.get(index).copied().flatten()
    }

    pub fn measured_count(&self) -> usize {
        self.outcomes.iter().filter(|o| o.is_some()).count()
    }
}

/// Result of checking one incoming report.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Check {
    Continue,
    Abort,
}

/// One client's view of the session during Exchange.
#[derive(Debug, Clone)]
pub struct ClientMachine {
    pub party: Party,
    pub session_id: u64,
    pub register: QubitRegister,
    cross: Vec<QubitDescriptor>,
    tolerance: f64,
    sent: usize,
    received: usize,
    mismatches: usize,
}

impl ClientMachine {
    pub fn new(session: &SessionRecord, party: Party, tolerance: f64) -> ClientMachine {
        ClientMachine::from_grant(
            session.session_id,
            party,
            session.qubits(party).to_vec(),
            session.cross_bits(party).to_vec(),
            tolerance,
        )
    }

    pub fn from_grant(
        session_id: u64,
        party: Party,
        qubits: Vec<QubitDescriptor>,
        cross: Vec<QubitDescriptor>,
        tolerance: f64,
    ) -> ClientMachine {
        ClientMachine {
            party,
            session_id,
            register: QubitRegister::new(qubits),
            cross,
            tolerance,
            sent: 0,
            received: 0,
            mismatches: 0,
        }
    }

    pub fn n(&self) -> usize {
        self.register.len()
    }

    pub fn reports_sent(&self) -> usize {
        self.sent
    }

    pub fn reports_received(&self) -> usize {
        self.received
    }

    pub fn mismatches(&self) -> usize {
        self.mismatches
    }

    /// Produces the next report, or `None` if the policy halts or every
    /// qubit has been reported.
    pub fn next_report<R: Rng + ?Sized>(
        &mut self,
        policy: &dyn RoundPolicy,
        noise: &NoiseModel,
        rng: &mut R,
    ) -> Result<Option<(usize, u8)>, ProtocolError> {
        let round = self.sent + 1;
        if round > self.n() {
            return Ok(None);
        }
        let bit = match policy.action(round) {
            RoundAction::Halt => return Ok(None),
            RoundAction::Guess => rng.random_range(0..2u8),
            RoundAction::Measure(obs) => self.register.measure(round - 1, obs, noise, rng)?,
        };
        self.sent = round;
        Ok(Some((round, bit)))
    }

    /// Checks the opponent's report for `round` against the cross bits.
    /// Only Accept-basis qubits are checkable; the exchange aborts once the
    /// mismatch count exceeds `floor(eta * round)`.
    pub fn receive(&mut self, round: usize, bit: u8) -> Result<Check, ProtocolError> {
        if round != self.received + 1 || round > self.cross.len() {
            return Err(ProtocolError::OutOfOrder {
                expected: self.received + 1,
                got: round,
            });
        }
        self.received = round;
        let d = self.cross[round - 1];
        if d.basis == Basis::Accept && bit & 1 != d.state_bit {
            self.mismatches += 1;
        }
        let budget = (self.tolerance * round as f64 + 1e-9).floor() as usize;
        Ok(if self.mismatches > budget {
            Check::Abort
        } else {
            Check::Continue
        })
    }

    /// Measures every unmeasured qubit in the basis matching `intent`.
    pub fn complete<R: Rng + ?Sized>(&mut self, intent: Intent, noise: &NoiseModel, rng: &mut R) {
        let obs = Observable::for_basis(intent.basis());
        for i in 0..self.n() {
            if self.register.outcome(i).is_none() {
                self.register
                    .measure(i, obs, noise, rng)
                    .expect("unmeasured qubit in range");
            }
        }
    }

    /// Claims every qubit in the intent's basis with the measured outcomes;
    /// qubits never measured are reported as 0.
    pub fn claim(&self, intent: Intent) -> BindingClaim {
        let n = self.n();
        BindingClaim {
            party: self.party,
            bases: vec![intent.basis(); n],
            outcomes: (0..n)
                .map(|i| self.register.outcome(i).map_or(0, |(_, b)| b))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AbortReason {
    None,
    MismatchDetected,
    Timeout,
    TransportFailure,
}

impl AbortReason {
    pub fn name(self) -> &'static str {
        match self {
            AbortReason::None => "none",
            AbortReason::MismatchDetected => "mismatch_detected",
            AbortReason::Timeout => "timeout",
            AbortReason::TransportFailure => "transport_failure",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundEntry {
    pub party: Party,
    pub index: usize,
    pub bit: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExchangeTranscript {
    pub rounds: Vec<RoundEntry>,
    /// Round in which the exchange stopped early.
    pub abort_step: Option<usize>,
    pub abort_reason: AbortReason,
    /// The party that noticed the problem.
    pub aborted_by: Option<Party>,
}

impl ExchangeTranscript {
    pub fn completed() -> Self {
        ExchangeTranscript {
            rounds: Vec::new(),
            abort_step: None,
            abort_reason: AbortReason::None,
            aborted_by: None,
        }
    }

    pub fn stop(&mut self, round: usize, reason: AbortReason, by: Party) {
        self.abort_step = Some(round);
        self.abort_reason = reason;
        self.aborted_by = Some(by);
    }

    pub fn is_aborted(&self) -> bool {
        self.abort_step.is_some()
    }

    /// Alternation starting with Alice and per-party index monotonicity.
    pub fn is_well_formed(&self) -> bool {
        self.rounds.iter().enumerate().all(|(i, r)| {
            let party = if i % 2 == 0 { Party::Alice } else { Party::Bob };
            r.party == party && r.index == i / 2 + 1
        })
    }
}

/// Runs the Exchange phase in process, Alice first. Both machines advance in
/// a fixed order so the run is deterministic given `rng`.
pub fn run_exchange<R: Rng + ?Sized>(
    session: &SessionRecord,
    alice: &mut ClientMachine,
    bob: &mut ClientMachine,
    policy_a: &dyn RoundPolicy,
    policy_b: &dyn RoundPolicy,
    noise: &NoiseModel,
    rng: &mut R,
) -> Result<ExchangeTranscript, ProtocolError> {
    let mut t = ExchangeTranscript::completed();
    let budget = session.round_budget();
    for round in 1..=session.n {
        if round > budget {
            t.stop(round, AbortReason::Timeout, Party::Bob);
            return Ok(t);
        }
        if !half_round(&mut t, round, alice, bob, policy_a, noise, rng)?
            || !half_round(&mut t, round, bob, alice, policy_b, noise, rng)?
        {
            return Ok(t);
        }
    }
    Ok(t)
}

/// One report from `sender` checked by `receiver`; false once aborted.
fn half_round<R: Rng + ?Sized>(
    t: &mut ExchangeTranscript,
    round: usize,
    sender: &mut ClientMachine,
    receiver: &mut ClientMachine,
    policy: &dyn RoundPolicy,
    noise: &NoiseModel,
    rng: &mut R,
) -> Result<bool, ProtocolError> {
    let Some((index, bit)) = sender.next_report(policy, noise, rng)? else {
        t.stop(round, AbortReason::Timeout, receiver.party);
        return Ok(false);
    };
    t.rounds.push(RoundEntry {
        party: sender.party,
        index,
        bit,
    });
    if receiver.receive(index, bit)? == Check::Abort {
        t.stop(round, AbortReason::MismatchDetected, receiver.party);
        return Ok(false);
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::session::init_session;
    use crate::rng::stream_rng;

    struct Always(RoundAction);
    impl RoundPolicy for Always {
        fn action(&self, _round: usize) -> RoundAction {
            self.0
        }
    }

    fn pair(s: &SessionRecord, eta: f64) -> (ClientMachine, ClientMachine) {
        (
            ClientMachine::new(s, Party::Alice, eta),
            ClientMachine::new(s, Party::Bob, eta),
        )
    }

    #[test]
    fn honest_pair_completes() {
        let mut rng = stream_rng(10, 0);
        for _ in 0..200 {
            let s = init_session(30, &mut rng).unwrap();
            let (mut a, mut b) = pair(&s, 0.0);
            let t = run_exchange(
                &s,
                &mut a,
                &mut b,
                &Honest,
                &Honest,
                &NoiseModel::ideal(),
                &mut rng,
            )
            .unwrap();
            assert_eq!(t.abort_step, None);
            assert_eq!(t.rounds.len(), 60);
            assert!(t.is_well_formed());
        }
    }

    #[test]
    fn reject_measurer_is_caught_geometrically() {
        let mut rng = stream_rng(11, 0);
        let trials = 20_000;
        let mut within9 = 0;
        let mut at1 = 0;
        for _ in 0..trials {
            let s = init_session(40, &mut rng).unwrap();
            let (mut a, mut b) = pair(&s, 0.0);
            let rej = Always(RoundAction::Measure(Observable::Reject));
            let t = run_exchange(
                &s,
                &mut a,
                &mut b,
                &Honest,
                &rej,
                &NoiseModel::ideal(),
                &mut rng,
            )
            .unwrap();
            assert!(t.is_well_formed());
            if let Some(step) = t.abort_step {
                assert_eq!(t.abort_reason, AbortReason::MismatchDetected);
                assert_eq!(t.aborted_by, Some(Party::Alice));
                within9 += (step <= 9) as usize;
                at1 += (step == 1) as usize;
            }
        }
        let f9 = within9 as f64 / trials as f64;
        let f1 = at1 as f64 / trials as f64;
        assert!((f9 - (1.0 - 0.75f64.powi(9))).abs() < 0.01, "{f9}");
        assert!((f1 - 0.25).abs() < 0.01, "{f1}");
    }

    #[test]
    fn halting_peer_times_out_at_next_round() {
        struct HaltAfter(usize);
        impl RoundPolicy for HaltAfter {
            fn action(&self, round: usize) -> RoundAction {
                if round > self.0 {
                    RoundAction::Halt
                } else {
                    RoundAction::Measure(Observable::Accept)
                }
            }
        }
        let s = init_session(10, &mut stream_rng(12, 0)).unwrap();
        let (mut a, mut b) = pair(&s, 0.0);
        let t = run_exchange(
            &s,
            &mut a,
            &mut b,
            &Honest,
            &HaltAfter(3),
            &NoiseModel::ideal(),
            &mut stream_rng(1, 1),
        )
        .unwrap();
        assert_eq!(t.abort_step, Some(4));
        assert_eq!(t.abort_reason, AbortReason::Timeout);
        assert_eq!(t.rounds.len(), 7);
        assert_eq!(a.register.measured_count(), 4);
        assert!(t.is_well_formed());
    }

    #[test]
    fn round_budget_is_a_timeout() {
        let mut s = init_session(10, &mut stream_rng(13, 0)).unwrap();
        s.deadline.max_rounds = Some(6);
        let (mut a, mut b) = pair(&s, 0.0);
        let t = run_exchange(
            &s,
            &mut a,
            &mut b,
            &Honest,
            &Honest,
            &NoiseModel::ideal(),
            &mut stream_rng(1, 1),
        )
        .unwrap();
        assert_eq!(t.abort_step, Some(7));
        assert_eq!(t.abort_reason, AbortReason::Timeout);
    }

    #[test]
    fn out_of_order_and_double_measurement_rejected() {
        let s = init_session(4, &mut stream_rng(14, 0)).unwrap();
        let (mut a, _) = pair(&s, 0.0);
        assert_eq!(
            a.receive(2, 0),
            Err(ProtocolError::OutOfOrder {
                expected: 1,
                got: 2
            })
        );
        let mut rng = stream_rng(1, 0);
        a.register
            .measure(0, Observable::Accept, &NoiseModel::ideal(), &mut rng)
            .unwrap();
        assert_eq!(
            a.register
                .measure(0, Observable::Reject, &NoiseModel::ideal(), &mut rng),
            Err(ProtocolError::AlreadyMeasured(0))
        );
    }

    #[test]
    fn tolerance_budget_grows_with_rounds() {
        let s = init_session(40, &mut stream_rng(15, 0)).unwrap();
        let mut a = ClientMachine::new(&s, Party::Alice, 0.1);
        // Feed wrong answers on every checkable qubit and watch the budget.
        let mut aborted_at = None;
        for (i, d) in s.alice_cross_bits.iter().enumerate() {
            let bit = if d.basis == Basis::Accept {
                d.state_bit ^ 1
            } else {
                0
            };
            if a.receive(i + 1, bit).unwrap() == Check::Abort {
                aborted_at = Some(i + 1);
                break;
            }
        }
        let first_checkable = s
            .alice_cross_bits
            .iter()
            .position(|d| d.basis == Basis::Accept)
            .unwrap()
            + 1;
        // floor(0.1 m) = 0 below m = 10, so the first checkable qubit aborts there.
        if first_checkable < 10 {
            assert_eq!(aborted_at, Some(first_checkable));
        }
    }
}
