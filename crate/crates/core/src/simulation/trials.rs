//! Batched protocol runs with count-only aggregation.

use std::fmt::Write as _;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::stats::Estimate;
use super::strategy::Strategy;
use super::{invalid, SimulationError};
use crate::analysis::AlphaDistribution;
use crate::protocol::{
    binding_verdict, init_session, run_exchange, sample_alpha, AbortReason, CheaterFlag,
    ClientMachine, Intent, ProtocolError, SessionRecord,
};
use crate::quantum::NoiseModel;
use crate::rng::stream_rng;

/// Everything that determines a batch of trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSpec {
    pub n: usize,
    pub alice: Strategy,
    pub bob: Strategy,
    /// Flip probability and mismatch tolerance `eta`.
    pub noise: NoiseModel,
    pub alpha_dist: AlphaDistribution,
    pub trials: u64,
    pub seed: u64,
}

impl TrialSpec {
    pub fn validate(&self) -> Result<(), SimulationError> {
        if self.trials == 0 {
            return Err(invalid("trials", "need at least one trial"));
        }
        if self.n == 0 {
            return Err(ProtocolError::EmptySession.into());
        }
        self.alice.validate(self.n)?;
        self.bob.validate(self.n)?;
        self.alpha_dist.validate()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Serial,
    #[default]
    Parallel,
}

/// Aggregated counts with 95% Clopper-Pearson estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub spec: TrialSpec,
    pub trials: u64,
    pub aborted: u64,
    pub aborts_mismatch: u64,
    pub aborts_timeout: u64,
    /// `abort_histogram[r]` counts trials that stopped in round `r`;
    /// index 0 is unused.
    pub abort_histogram: Vec<u64>,
    /// Contract valid under the declared intents.
    pub p_valid: Estimate,
    /// Contract valid when Alice binds and Bob refuses after the exchange.
    pub p_bind_a: Estimate,
    /// Contract valid when Bob binds and Alice refuses after the exchange.
    pub p_bind_b: Estimate,
    /// Cheater flags raised under the declared intents.
    pub flagged_alice: u64,
    pub flagged_bob: u64,
    pub flagged_both: u64,
}

impl TrialReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// `metric,value` rows followed by `round,aborts` histogram rows.
    pub fn to_csv(&self, header: &[String]) -> String {
        let mut out = String::new();
        for h in header {
            let _ = writeln!(out, "# {h}");
        }
        out.push_str("metric,value\n");
        let mut row = |k: &str, v: String| {
            let _ = writeln!(out, "{k},{v}");
        };
        row("trials", self.trials.to_string());
        row("aborted", self.aborted.to_string());
        row("aborts_mismatch_detected", self.aborts_mismatch.to_string());
        row("aborts_timeout", self.aborts_timeout.to_string());
        for (name, e) in [
            ("p_valid", &self.p_valid),
            ("p_bind_a", &self.p_bind_a),
            ("p_bind_b", &self.p_bind_b),
        ] {
            row(name, format!("{:.10}", e.p));
            row(&format!("{name}_ci_lo"), format!("{:.10}", e.ci_lo));
            row(&format!("{name}_ci_hi"), format!("{:.10}", e.ci_hi));
            row(
                &format!("{name}_half_width"),
                format!("{:.10}", e.half_width),
            );
        }
        row("flagged_alice", self.flagged_alice.to_string());
        row("flagged_bob", self.flagged_bob.to_string());
        row("flagged_both", self.flagged_both.to_string());
        out.push_str("round,aborts\n");
        for (r, c) in self.abort_histogram.iter().enumerate().skip(1) {
            if *c > 0 {
                let _ = writeln!(out, "{r},{c}");
            }
        }
        out
    }
}

#[derive(Debug, Clone, Default)]
struct Counts {
    aborted: u64,
    mismatch: u64,
    timeout: u64,
    histogram: Vec<u64>,
    valid: u64,
    bind_a: u64,
    bind_b: u64,
    flags: [u64; 3],
}

impl Counts {
    fn empty(n: usize) -> Counts {
        Counts {
            histogram: vec![0; n + 1],
            ..Counts::default()
        }
    }

    fn merge(mut self, other: Counts) -> Counts {
        self.aborted += other.aborted;
        self.mismatch += other.mismatch;
        self.timeout += other.timeout;
        for (a, b) in self.histogram.iter_mut().zip(&other.histogram) {
            *a += b;
        }
        self.valid += other.valid;
        self.bind_a += other.bind_a;
        self.bind_b += other.bind_b;
        for i in 0..3 {
            self.flags[i] += other.flags[i];
        }
        self
    }
}

/// Outcome of one trial under the declared intents.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct TrialOutcome {
    pub abort_step: Option<usize>,
    pub abort_reason: AbortReason,
    pub contract_valid: bool,
    pub cheater_flag: CheaterFlag,
    /// Valid with Alice binding and Bob refusing, then the reverse.
    pub bind: Option<(bool, bool)>,
}

/// Runs trial `index`: session, exchange, completion, one alpha draw and
/// Binding. With `forks`, the post-exchange state is also completed under
/// the two opposed intent pairs, sharing the same alpha.
pub(crate) fn run_one(
    spec: &TrialSpec,
    index: u64,
    forks: bool,
) -> Result<TrialOutcome, ProtocolError> {
    let mut rng = stream_rng(spec.seed, index);
    let session = init_session(spec.n, &mut rng)?;
    let eta = spec.noise.tolerance;
    let mut alice = ClientMachine::new(&session, crate::protocol::Party::Alice, eta);
    let mut bob = ClientMachine::new(&session, crate::protocol::Party::Bob, eta);
    let transcript = run_exchange(
        &session,
        &mut alice,
        &mut bob,
        &spec.alice,
        &spec.bob,
        &spec.noise,
        &mut rng,
    )?;
    let alpha = sample_alpha(&spec.alpha_dist, &mut rng);
    let fork_seed: u64 = rng.random();

    let finish = |ia: Intent, ib: Intent, stream: u64| {
        let mut rng = stream_rng(fork_seed, stream);
        let (mut a, mut b) = (alice.clone(), bob.clone());
        a.complete(ia, &spec.noise, &mut rng);
        b.complete(ib, &spec.noise, &mut rng);
        verdict(&session, &a, &b, ia, ib, alpha, eta)
    };
    let declared = finish(spec.alice.intent, spec.bob.intent, 0)?;
    let bind = if forks {
        let a = finish(Intent::Bind, Intent::Refuse, 1)?.contract_valid;
        let b = finish(Intent::Refuse, Intent::Bind, 2)?.contract_valid;
        Some((a, b))
    } else {
        None
    };
    Ok(TrialOutcome {
        abort_step: transcript.abort_step,
        abort_reason: transcript.abort_reason,
        contract_valid: declared.contract_valid,
        cheater_flag: declared.cheater_flag,
        bind,
    })
}

fn verdict(
    session: &SessionRecord,
    a: &ClientMachine,
    b: &ClientMachine,
    ia: Intent,
    ib: Intent,
    alpha: f64,
    eta: f64,
) -> Result<crate::protocol::Verdict, ProtocolError> {
    binding_verdict(session, &a.claim(ia), &b.claim(ib), alpha, eta)
}

fn tally(n: usize, o: TrialOutcome) -> Counts {
    let mut c = Counts::empty(n);
    if let Some(step) = o.abort_step {
        c.aborted = 1;
        c.histogram[step] = 1;
        match o.abort_reason {
            AbortReason::MismatchDetected => c.mismatch = 1,
            AbortReason::Timeout => c.timeout = 1,
            _ => {}
        }
    }
    c.valid = o.contract_valid as u64;
    if let Some((a, b)) = o.bind {
        c.bind_a = a as u64;
        c.bind_b = b as u64;
    }
    match o.cheater_flag {
        CheaterFlag::None => {}
        CheaterFlag::Alice => c.flags[0] = 1,
        CheaterFlag::Bob => c.flags[1] = 1,
        CheaterFlag::Both => c.flags[2] = 1,
    }
    c
}

fn aggregate(spec: &TrialSpec, exec: Execution, forks: bool) -> Result<Counts, SimulationError> {
    let n = spec.n;
    let one = |i: u64| run_one(spec, i, forks).map(|o| tally(n, o));
    let counts = match exec {
        Execution::Serial => (0..spec.trials).try_fold(Counts::empty(n), |acc, i| {
            Ok::<_, ProtocolError>(acc.merge(one(i)?))
        })?,
        Execution::Parallel => (0..spec.trials)
            .into_par_iter()
            .map(one)
            .try_reduce(|| Counts::empty(n), |a, b| Ok(a.merge(b)))?,
    };
    Ok(counts)
}

/// Runs `spec.trials` independent sessions. Trial `i` draws only from
/// `stream_rng(seed, i)`, so the report does not depend on `exec`.
pub fn run_trials(spec: &TrialSpec, exec: Execution) -> Result<TrialReport, SimulationError> {
    spec.validate()?;
    let c = aggregate(spec, exec, true)?;
    let t = spec.trials;
    Ok(TrialReport {
        spec: spec.clone(),
        trials: t,
        aborted: c.aborted,
        aborts_mismatch: c.mismatch,
        aborts_timeout: c.timeout,
        abort_histogram: c.histogram,
        p_valid: Estimate::new(c.valid, t),
        p_bind_a: Estimate::new(c.bind_a, t),
        p_bind_b: Estimate::new(c.bind_b, t),
        flagged_alice: c.flags[0],
        flagged_bob: c.flags[1],
        flagged_both: c.flags[2],
    })
}

/// Valid-verdict and abort counts only, skipping the intent forks.
pub(crate) fn count_valid(spec: &TrialSpec) -> Result<(u64, Vec<u64>), SimulationError> {
    spec.validate()?;
    let c = aggregate(spec, Execution::Parallel, false)?;
    Ok((c.valid, c.histogram))
}
