//! Fixed round-set client strategies.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{invalid, SimulationError};
use crate::protocol::{Intent, RoundAction, RoundPolicy};
use crate::quantum::Observable;

/// What a client measures during Exchange.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StrategyKind {
    /// Accept observable every round.
    Honest,
    /// Reject observable every round.
    AlwaysReject,
    /// Reject observable in the listed 1-based rounds, Accept otherwise.
    MixedReject { rounds: BTreeSet<usize> },
    /// Rotated observable in the listed rounds (every round when `None`),
    /// Accept otherwise.
    Rotated {
        theta: f64,
        phi: f64,
        rounds: Option<BTreeSet<usize>>,
    },
    /// Uniformly random reports, qubits left unmeasured.
    Guesser,
}

impl StrategyKind {
    /// Whether round `round` deviates from honest measurement.
    pub fn cheats_in(&self, round: usize) -> bool {
        match self {
            StrategyKind::Honest => false,
            StrategyKind::AlwaysReject | StrategyKind::Guesser => true,
            StrategyKind::MixedReject { rounds } => rounds.contains(&round),
            StrategyKind::Rotated { rounds, .. } => {
                rounds.as_ref().is_none_or(|r| r.contains(&round))
            }
        }
    }

    /// Accept-equivalent frequency of a cheating round: the per-round
    /// detection hazard on uniformly prepared qubits is `(1 - q_a) / 4`.
    pub fn accept_equivalence(&self) -> f64 {
        match self {
            StrategyKind::Honest => 1.0,
            StrategyKind::AlwaysReject
            | StrategyKind::MixedReject { .. }
            | StrategyKind::Guesser => 0.0,
            StrategyKind::Rotated { theta, .. } => theta.cos(),
        }
    }

    fn action(&self, round: usize) -> RoundAction {
        if !self.cheats_in(round) {
            return RoundAction::Measure(Observable::Accept);
        }
        match *self {
            StrategyKind::Honest => RoundAction::Measure(Observable::Accept),
            StrategyKind::AlwaysReject | StrategyKind::MixedReject { .. } => {
                RoundAction::Measure(Observable::Reject)
            }
            StrategyKind::Rotated { theta, phi, .. } => {
                RoundAction::Measure(Observable::Rotated { theta, phi })
            }
            StrategyKind::Guesser => RoundAction::Guess,
        }
    }
}

/// A client's Exchange behaviour plus what it wants once the exchange stops.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Strategy {
    pub kind: StrategyKind,
    pub intent: Intent,
    /// Stop reporting after this many rounds.
    #[serde(default)]
    pub halt_after: Option<usize>,
}

impl Strategy {
    pub fn new(kind: StrategyKind, intent: Intent) -> Strategy {
        Strategy {
            kind,
            intent,
            halt_after: None,
        }
    }

    pub fn honest(intent: Intent) -> Strategy {
        Strategy::new(StrategyKind::Honest, intent)
    }

    pub fn halting_after(mut self, rounds: usize) -> Strategy {
        self.halt_after = Some(rounds);
        self
    }

    /// Checks round sets against `1..=n` and the rotation angles.
    pub fn validate(&self, n: usize) -> Result<(), SimulationError> {
        let check_rounds =
            |rounds: &BTreeSet<usize>| match rounds.iter().find(|&&r| r == 0 || r > n) {
                Some(r) => Err(SimulationError::InvalidStrategy(format!(
                    "round {r} outside 1..={n}"
                ))),
                None => Ok(()),
            };
        match &self.kind {
            StrategyKind::MixedReject { rounds } => check_rounds(rounds)?,
            StrategyKind::Rotated { theta, phi, rounds } => {
                Observable::rotated(*theta, *phi)
                    .map_err(|e| SimulationError::InvalidStrategy(e.to_string()))?;
                if let Some(r) = rounds {
                    check_rounds(r)?;
                }
            }
            _ => {}
        }
        if let Some(h) = self.halt_after {
            if h > n {
                return Err(invalid("halt_after", format!("{h} exceeds N = {n}")));
            }
        }
        Ok(())
    }
}

impl RoundPolicy for Strategy {
    fn action(&self, round: usize) -> RoundAction {
        match self.halt_after {
            Some(h) if round > h => RoundAction::Halt,
            _ => self.kind.action(round),
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let list =
            |r: &BTreeSet<usize>| r.iter().map(usize::to_string).collect::<Vec<_>>().join(",");
        match self {
            StrategyKind::Honest => write!(f, "honest"),
            StrategyKind::AlwaysReject => write!(f, "always-reject"),
            StrategyKind::MixedReject { rounds } => write!(f, "mixed-reject:{}", list(rounds)),
            StrategyKind::Rotated {
                theta,
                phi,
                rounds: None,
            } => write!(f, "rotated:{theta},{phi}"),
            StrategyKind::Rotated {
                theta,
                phi,
                rounds: Some(r),
            } => {
                write!(f, "rotated:{theta},{phi}:{}", list(r))
            }
            StrategyKind::Guesser => write!(f, "guesser"),
        }
    }
}

/// Parses `honest`, `always-reject`, `mixed-reject:1,3,5`,
/// `rotated:THETA,PHI[:ROUNDS]` or `guesser`.
impl FromStr for StrategyKind {
    type Err = SimulationError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = |why: String| SimulationError::InvalidStrategy(format!("{s:?}: {why}"));
        let parse_rounds = |list: &str| -> Result<BTreeSet<usize>, SimulationError> {
            list.split(',')
                .map(str::trim)
                .filter(|t| !t.is_empty())
                .map(|t| {
                    t.parse::<usize>()
                        .map_err(|e| bad(format!("round {t:?}: {e}")))
                })
                .collect()
        };
        let (name, rest) = s.split_once(':').unwrap_or((s, ""));
        match name.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "honest" => Ok(StrategyKind::Honest),
            "always-reject" | "reject" => Ok(StrategyKind::AlwaysReject),
            "guesser" | "guess" => Ok(StrategyKind::Guesser),
            "mixed-reject" | "mixed" => Ok(StrategyKind::MixedReject {
                rounds: parse_rounds(rest)?,
            }),
            "rotated" => {
                let (angles, rounds) = match rest.split_once(':') {
                    Some((a, r)) => (a, Some(parse_rounds(r)?)),
                    None => (rest, None),
                };
                let (theta, phi) = angles
                    .split_once(',')
                    .ok_or_else(|| bad("expected THETA,PHI".into()))?;
                let num = |t: &str| {
                    t.trim()
                        .parse::<f64>()
                        .map_err(|e| bad(format!("angle {t:?}: {e}")))
                };
                Ok(StrategyKind::Rotated {
                    theta: num(theta)?,
                    phi: num(phi)?,
                    rounds,
                })
            }
            other => Err(bad(format!("unknown strategy {other:?}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn honest_is_empty_mixed_reject() {
        let honest = Strategy::honest(Intent::Bind);
        let mixed = Strategy::new(
            StrategyKind::MixedReject {
                rounds: BTreeSet::new(),
            },
            Intent::Bind,
        );
        for r in 1..=20 {
            assert_eq!(honest.action(r), mixed.action(r));
        }
    }

    #[test]
    fn actions_follow_round_sets() {
        let s = Strategy::new("mixed-reject:2,4".parse().unwrap(), Intent::Refuse).halting_after(4);
        assert_eq!(s.action(1), RoundAction::Measure(Observable::Accept));
        assert_eq!(s.action(2), RoundAction::Measure(Observable::Reject));
        assert_eq!(s.action(4), RoundAction::Measure(Observable::Reject));
        assert_eq!(s.action(5), RoundAction::Halt);
        let g = Strategy::new(StrategyKind::Guesser, Intent::Bind);
        assert_eq!(g.action(3), RoundAction::Guess);
        let r = Strategy::new("rotated:1.0,0.5:3".parse().unwrap(), Intent::Bind);
        assert_eq!(r.action(1), RoundAction::Measure(Observable::Accept));
        assert_eq!(
            r.action(3),
            RoundAction::Measure(Observable::Rotated {
                theta: 1.0,
                phi: 0.5
            })
        );
    }

    #[test]
    fn validation_rejects_bad_rounds_and_angles() {
        let s = Strategy::new("mixed-reject:0,2".parse().unwrap(), Intent::Bind);
        assert!(s.validate(5).is_err());
        let s = Strategy::new("mixed-reject:6".parse().unwrap(), Intent::Bind);
        assert!(s.validate(5).is_err());
        assert!(s.validate(6).is_ok());
        let s = Strategy::new("rotated:4.0,0".parse().unwrap(), Intent::Bind);
        assert!(s.validate(5).is_err());
        assert!(Strategy::honest(Intent::Bind)
            .halting_after(6)
            .validate(5)
            .is_err());
        assert!("teleport".parse::<StrategyKind>().is_err());
        assert!("mixed-reject:1,x".parse::<StrategyKind>().is_err());
    }

    #[test]
    fn display_round_trips() {
        for s in [
            "honest",
            "always-reject",
            "guesser",
            "mixed-reject:1,3",
            "rotated:0.5,1",
            "rotated:0.5,1:2,7",
        ] {
            let k: StrategyKind = s.parse().unwrap();
            assert_eq!(k.to_string().parse::<StrategyKind>().unwrap(), k);
        }
    }
}
