//! Binding phase: Trent's verdict from the two clients' claims.
//!
//! Only qubits whose claimed basis equals the preparation basis can be
//! checked against Trent's record. For each party Trent counts, per basis,
//! the checkable claims and how many of them carry the prepared `C_s`.
//!
//! * Accept test: at least `ceil(alpha N_A)` correct Accept results.
//! * Reject test: fewer than `(1 - alpha) N_R` Reject-basis qubits without a
//!   correct Reject result, i.e. at most `T` of them.
//!
//! A test is only attempted when the party claims that basis somewhere.
//! A party is flagged as lying when, in some claimed basis, its wrong
//! checkable results exceed both the noise budget `ceil(eta K)` and what the
//! corresponding alpha test tolerates anyway.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::session::SessionRecord;
use super::{Party, ProtocolError};
use crate::analysis::threshold::{allowed_wrong, required_accept, snapped_ceil};
use crate::analysis::AlphaDistribution;
use crate::quantum::{Basis, QubitDescriptor};
use crate::rng::stream_rng;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BindingClaim {
    pub party: Party,
    pub bases: Vec<Basis>,
    pub outcomes: Vec<u8>,
}

impl BindingClaim {
    pub fn uniform(party: Party, basis: Basis, outcomes: Vec<u8>) -> BindingClaim {
        BindingClaim {
            party,
            bases: vec![basis; outcomes.len()],
            outcomes,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheaterFlag {
    None,
    Alice,
    Bob,
    Both,
}

impl CheaterFlag {
    pub fn code(self) -> u8 {
        match self {
            CheaterFlag::None => 0,
            CheaterFlag::Alice => 1,
            CheaterFlag::Bob => 2,
            CheaterFlag::Both => 3,
        }
    }

    pub fn from_code(c: u8) -> Option<CheaterFlag> {
        Some(match c {
            0 => CheaterFlag::None,
            1 => CheaterFlag::Alice,
            2 => CheaterFlag::Bob,
            3 => CheaterFlag::Both,
            _ => return None,
        })
    }
}

/// Per-party correct-result counts reported with a verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerdictCounts {
    pub accept_correct_a: u32,
    pub reject_correct_a: u32,
    pub accept_correct_b: u32,
    pub reject_correct_b: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub contract_valid: bool,
    pub cheater_flag: CheaterFlag,
    pub alpha_used: f64,
    pub counts: VerdictCounts,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
struct Tally {
    n_accept: usize,
    n_reject: usize,
    claims_accept: bool,
    claims_reject: bool,
    accept_checked: usize,
    accept_correct: usize,
    reject_checked: usize,
    reject_correct: usize,
}

fn tally(prepared: &[QubitDescriptor], claim: &BindingClaim) -> Tally {
    let mut t = Tally::default();
    for ((d, &basis), &bit) in prepared.iter().zip(&claim.bases).zip(&claim.outcomes) {
        match d.basis {
            Basis::Accept => t.n_accept += 1,
            Basis::Reject => t.n_reject += 1,
        }
        match basis {
            Basis::Accept => t.claims_accept = true,
            Basis::Reject => t.claims_reject = true,
        }
        if basis != d.basis {
            continue;
        }
        let ok = (bit & 1) == d.state_bit;
        match basis {
            Basis::Accept => {
                t.accept_checked += 1;
                t.accept_correct += ok as usize;
            }
            Basis::Reject => {
                t.reject_checked += 1;
                t.reject_correct += ok as usize;
            }
        }
    }
    t
}

impl Tally {
    fn accepts(&self, alpha: f64) -> bool {
        self.claims_accept && self.accept_correct >= required_accept(alpha, self.n_accept)
    }

    fn rejects(&self, alpha: f64) -> bool {
        self.claims_reject
            && self.n_reject - self.reject_correct <= allowed_wrong(alpha, self.n_reject)
    }

    fn lying(&self, alpha: f64, eta: f64) -> bool {
        let noise = |k: usize| snapped_ceil(eta * k as f64).max(0) as usize;
        let acc_wrong = self.accept_checked - self.accept_correct;
        let rej_wrong = self.reject_checked - self.reject_correct;
        let acc_room = self.n_accept - required_accept(alpha, self.n_accept).min(self.n_accept);
        let rej_room = allowed_wrong(alpha, self.n_reject);
        acc_wrong > noise(self.accept_checked).max(acc_room)
            || rej_wrong > noise(self.reject_checked).max(rej_room)
    }
}

fn check_claim(claim: &BindingClaim, n: usize, party: Party) -> Result<(), ProtocolError> {
    if claim.party != party {
        return Err(ProtocolError::UnexpectedMessage(format!(
            "claim from {} presented as {party}",
            claim.party
        )));
    }
    for (what, len) in [
        ("claim bases", claim.bases.len()),
        ("claim outcomes", claim.outcomes.len()),
    ] {
        if len != n {
            return Err(ProtocolError::LengthMismatch {
                what,
                expected: n,
                got: len,
            });
        }
    }
    Ok(())
}

pub fn binding_verdict(
    session: &SessionRecord,
    claim_a: &BindingClaim,
    claim_b: &BindingClaim,
    alpha: f64,
    eta: f64,
) -> Result<Verdict, ProtocolError> {
    if !(alpha > 0.5 && alpha < 1.0) {
        return Err(ProtocolError::AlphaOutOfRange(alpha));
    }
    if !(0.0..1.0).contains(&eta) {
        return Err(ProtocolError::ToleranceOutOfRange(eta));
    }
    check_claim(claim_a, session.n, Party::Alice)?;
    check_claim(claim_b, session.n, Party::Bob)?;
    let a = tally(&session.alice_qubits, claim_a);
    let b = tally(&session.bob_qubits, claim_b);
    let (lie_a, lie_b) = (a.lying(alpha, eta), b.lying(alpha, eta));
    let (cheater_flag, contract_valid) = match (lie_a, lie_b) {
        (true, true) => (CheaterFlag::Both, false),
        (true, false) => (CheaterFlag::Alice, b.accepts(alpha)),
        (false, true) => (CheaterFlag::Bob, a.accepts(alpha)),
        (false, false) => (
            CheaterFlag::None,
            (a.accepts(alpha) && !b.rejects(alpha)) || (b.accepts(alpha) && !a.rejects(alpha)),
        ),
    };
    Ok(Verdict {
        contract_valid,
        cheater_flag,
        alpha_used: alpha,
        counts: VerdictCounts {
            accept_correct_a: a.accept_correct as u32,
            reject_correct_a: a.reject_correct as u32,
            accept_correct_b: b.accept_correct as u32,
            reject_correct_b: b.reject_correct as u32,
        },
    })
}

/// Trent's draw of the acceptance ratio.
pub fn sample_alpha<R: Rng + ?Sized>(dist: &AlphaDistribution, rng: &mut R) -> f64 {
    dist.sample(rng)
}

/// Trent's alpha for a stored session: drawn from stream `session_id + 1`
/// of `seed`, so an offline Binding reproduces the online one.
pub fn session_alpha(dist: &AlphaDistribution, seed: u64, session_id: u64) -> f64 {
    sample_alpha(dist, &mut stream_rng(seed, session_id.wrapping_add(1)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::session::init_session;
    use crate::rng::stream_rng;

    /// Claims `basis` everywhere with ideal outcomes of that measurement:
    /// `C_s` on matching qubits, `fill` elsewhere.
    fn ideal(party: Party, qubits: &[QubitDescriptor], basis: Basis, fill: u8) -> BindingClaim {
        let outcomes = qubits
            .iter()
            .map(|d| if d.basis == basis { d.state_bit } else { fill })
            .collect();
        BindingClaim::uniform(party, basis, outcomes)
    }

    #[test]
    fn all_accept_is_valid() {
        let mut rng = stream_rng(20, 0);
        for n in [1, 2, 5, 40] {
            let s = init_session(n, &mut rng).unwrap();
            for alpha in [0.51, 0.75, 0.99] {
                let a = ideal(Party::Alice, &s.alice_qubits, Basis::Accept, 0);
                let b = ideal(Party::Bob, &s.bob_qubits, Basis::Accept, 1);
                let v = binding_verdict(&s, &a, &b, alpha, 0.0).unwrap();
                assert!(v.contract_valid);
                assert_eq!(v.cheater_flag, CheaterFlag::None);
            }
        }
    }

    #[test]
    fn all_reject_is_invalid() {
        let s = init_session(30, &mut stream_rng(21, 0)).unwrap();
        let a = ideal(Party::Alice, &s.alice_qubits, Basis::Reject, 0);
        let b = ideal(Party::Bob, &s.bob_qubits, Basis::Reject, 0);
        let v = binding_verdict(&s, &a, &b, 0.9, 0.0).unwrap();
        assert!(!v.contract_valid);
        assert_eq!(v.cheater_flag, CheaterFlag::None);
    }

    #[test]
    fn bind_against_clean_refusal_is_invalid() {
        let s = init_session(30, &mut stream_rng(22, 0)).unwrap();
        let a = ideal(Party::Alice, &s.alice_qubits, Basis::Accept, 1);
        let b = ideal(Party::Bob, &s.bob_qubits, Basis::Reject, 0);
        let v = binding_verdict(&s, &a, &b, 0.9, 0.0).unwrap();
        assert!(!v.contract_valid);
        let n_r = s
            .bob_qubits
            .iter()
            .filter(|d| d.basis == Basis::Reject)
            .count();
        assert_eq!(v.counts.reject_correct_b as usize, n_r);
    }

    #[test]
    fn fabricated_results_are_flagged() {
        let s = init_session(40, &mut stream_rng(23, 0)).unwrap();
        let honest = ideal(Party::Alice, &s.alice_qubits, Basis::Accept, 0);
        // Bob claims Accept with every checkable bit inverted.
        let liar = BindingClaim::uniform(
            Party::Bob,
            Basis::Accept,
            s.bob_qubits.iter().map(|d| d.state_bit ^ 1).collect(),
        );
        let v = binding_verdict(&s, &honest, &liar, 0.9, 0.05).unwrap();
        assert_eq!(v.cheater_flag, CheaterFlag::Bob);
        assert!(v.contract_valid);
        let liar_a = BindingClaim::uniform(
            Party::Alice,
            Basis::Accept,
            s.alice_qubits.iter().map(|d| d.state_bit ^ 1).collect(),
        );
        let v = binding_verdict(&s, &liar_a, &liar, 0.9, 0.05).unwrap();
        assert_eq!(v.cheater_flag, CheaterFlag::Both);
        assert!(!v.contract_valid);
    }

    #[test]
    fn role_swap_preserves_validity() {
        let mut rng = stream_rng(24, 0);
        for _ in 0..300 {
            let n = rng.random_range(1..30);
            let s = init_session(n, &mut rng).unwrap();
            let mk = |party, rng: &mut crate::rng::StreamRng| BindingClaim {
                party,
                bases: (0..n)
                    .map(|_| Basis::from_bit(rng.random_range(0..2)))
                    .collect(),
                outcomes: (0..n).map(|_| rng.random_range(0..2)).collect(),
            };
            let a = mk(Party::Alice, &mut rng);
            let b = mk(Party::Bob, &mut rng);
            let alpha = rng.random_range(0.55..0.99);
            let v = binding_verdict(&s, &a, &b, alpha, 0.1).unwrap();
            let sw = s.swapped();
            let a2 = BindingClaim {
                party: Party::Alice,
                ..b.clone()
            };
            let b2 = BindingClaim {
                party: Party::Bob,
                ..a.clone()
            };
            let w = binding_verdict(&sw, &a2, &b2, alpha, 0.1).unwrap();
            assert_eq!(v.contract_valid, w.contract_valid);
            assert_eq!(v.counts.accept_correct_a, w.counts.accept_correct_b);
            assert_eq!(v.counts.reject_correct_b, w.counts.reject_correct_a);
            let flip = match v.cheater_flag {
                CheaterFlag::Alice => CheaterFlag::Bob,
                CheaterFlag::Bob => CheaterFlag::Alice,
                f => f,
            };
            assert_eq!(flip, w.cheater_flag);
        }
    }

    #[test]
    fn input_validation() {
        let s = init_session(3, &mut stream_rng(25, 0)).unwrap();
        let a = ideal(Party::Alice, &s.alice_qubits, Basis::Accept, 0);
        let b = ideal(Party::Bob, &s.bob_qubits, Basis::Accept, 0);
        assert_eq!(
            binding_verdict(&s, &a, &b, 0.5, 0.0),
            Err(ProtocolError::AlphaOutOfRange(0.5))
        );
        assert!(binding_verdict(&s, &a, &b, 1.0, 0.0).is_err());
        let short = BindingClaim::uniform(Party::Bob, Basis::Accept, vec![0; 2]);
        assert!(matches!(
            binding_verdict(&s, &a, &short, 0.9, 0.0),
            Err(ProtocolError::LengthMismatch { .. })
        ));
        assert!(binding_verdict(&s, &b, &a, 0.9, 0.0).is_err());
    }

    #[test]
    fn alpha_samples_stay_in_support() {
        let d = AlphaDistribution::default();
        let mut rng = stream_rng(26, 0);
        assert!((0..1000)
            .map(|_| sample_alpha(&d, &mut rng))
            .all(|a| (0.9..=0.99).contains(&a)));
    }
}
