//! Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
//! criterion fails. Criterion 2 is the extended (large N) check.

use std::path::Path;
use std::process::{Command, Output};
use std::time::{Duration, Instant};

use fairsign_core::analysis::oracle::{run_oracle_suite, ORACLE_ALPHAS};
use fairsign_core::analysis::{
    chebyshev_risk_check, expected_prob_cheat, AlphaDistribution, SplitModel, ThresholdRule,
};
use fairsign_core::protocol::binding::VerdictCounts;
use fairsign_core::protocol::client::Honest;
use fairsign_core::protocol::wire::{decode_session, encode_session};
use fairsign_core::protocol::{
    binding_verdict, decode_message, encode_message, init_session, run_exchange, session_alpha,
    BindingClaim, CheaterFlag, ClientMachine, Deadline, Intent, Party, SessionRecord, Verdict,
    WireMessage,
};
use fairsign_core::quantum::{Basis, NoiseModel, QubitDescriptor};
use fairsign_core::rng::{stream_rng, StreamRng};
use fairsign_core::simulation::{Strategy, StrategyKind};
use rand::Rng;
use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_fairsign");

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

fn fairsign(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn run_ok(args: &[&str]) -> Result<(), String> {
    let o = fairsign(args);
    if o.status.success() {
        Ok(())
    } else {
        Err(format!(
            "fairsign {} exited {:?}: {}",
            args.join(" "),
            o.status.code(),
            String::from_utf8_lossy(&o.stderr).trim()
        ))
    }
}

fn read_json(path: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(path).expect("output exists")).expect("valid json")
}

fn analyze(dir: &Path, extra: &[&str]) -> Result<(usize, f64, Value), String> {
    let out = dir.to_str().unwrap();
    let mut args = vec!["analyze", "--out", out];
    args.extend_from_slice(extra);
    run_ok(&args)?;
    let s = read_json(&dir.join("summary.json"));
    Ok((
        s["m_star"].as_u64().unwrap() as usize,
        s["sup"].as_f64().unwrap(),
        s,
    ))
}

fn criterion_1(tmp: &Path) -> Result<Outcome, String> {
    let start = Instant::now();
    let (m, v, _) = analyze(
        &tmp.join("c1"),
        &[
            "--n",
            "600",
            "--split",
            "binomial",
            "--alpha-lo",
            "0.9",
            "--alpha-hi",
            "0.99",
        ],
    )?;
    let t = start.elapsed();
    let ok = m.abs_diff(92) <= 5 && (v - 0.0811).abs() <= 0.005 && t < Duration::from_secs(300);
    Ok(outcome(
        ok,
        format!(
            "m*={m} (92 +/- 5), sup={v:.5} (0.0811 +/- 0.005), {:.2}s",
            t.as_secs_f64()
        ),
    ))
}

fn criterion_2(tmp: &Path) -> Result<Outcome, String> {
    let start = Instant::now();
    let (m, v, _) = analyze(&tmp.join("c2"), &["--n", "8000", "--split", "fixed-equal"])?;
    let t = start.elapsed();
    let ok = m.abs_diff(1455) <= 15 && (v - 0.0247).abs() <= 0.005 && t < Duration::from_secs(3600);
    Ok(outcome(
        ok,
        format!(
            "extended: m*={m} (1455 +/- 15), sup={v:.5} (0.0247 +/- 0.005), {:.2}s",
            t.as_secs_f64()
        ),
    ))
}

fn criterion_3(tmp: &Path) -> Result<Outcome, String> {
    let start = Instant::now();
    let dir = tmp.join("c3");
    run_ok(&[
        "scaling",
        "--split",
        "fixed-equal",
        "--ns",
        "100,200,400,800,1600",
        "--format",
        "json",
        "--out",
        dir.to_str().unwrap(),
    ])?;
    let t = start.elapsed();
    let s = read_json(&dir.join("scaling.json"));
    let slope = s["fit"]["slope"].as_f64().unwrap();
    let ok = (-0.6..=-0.4).contains(&slope) && t < Duration::from_secs(600);
    Ok(outcome(
        ok,
        format!("slope={slope:.4} in [-0.6, -0.4], {:.2}s", t.as_secs_f64()),
    ))
}

fn criterion_4(tmp: &Path) -> Result<Outcome, String> {
    let dir = tmp.join("c4");
    run_ok(&[
        "detect",
        "--strategy",
        "always-reject",
        "--rounds",
        "12",
        "--trials",
        "100000",
        "--seed",
        "1",
        "--format",
        "json",
        "--out",
        dir.to_str().unwrap(),
    ])?;
    let doc = read_json(&dir.join("detection.json"));
    let points = doc["curve"]["points"].as_array().unwrap();
    let mut inside = 0;
    let mut worst = String::new();
    for p in points {
        let e = &p["estimate"];
        let (lo, hi) = (e["ci_lo"].as_f64().unwrap(), e["ci_hi"].as_f64().unwrap());
        let dm = p["delta_m"].as_u64().unwrap() as i32;
        let exact = 1.0 - 0.75f64.powi(dm);
        if lo <= exact && exact <= hi {
            inside += 1;
        } else {
            worst = format!(", dm={dm} exact {exact:.5} outside [{lo:.5}, {hi:.5}]");
        }
    }
    let first = &points[0]["estimate"];
    let ok = points.len() == 12 && inside == 12;
    Ok(outcome(
        ok,
        format!(
            "{inside}/12 points inside their 95% CI at 1e5 trials; dm=1 empirical {:.5} in [{:.5}, {:.5}]{worst}",
            first["p"].as_f64().unwrap(),
            first["ci_lo"].as_f64().unwrap(),
            first["ci_hi"].as_f64().unwrap()
        ),
    ))
}

fn criterion_5() -> Result<Outcome, String> {
    let alphas: Vec<f64> = ORACLE_ALPHAS
        .iter()
        .map(|&(p, q)| p as f64 / q as f64)
        .collect();
    let r = run_oracle_suite(12, ThresholdRule::Strict, 1e-12);
    let ok = r.passed() && r.max_n == 12 && alphas == vec![0.55, 0.7, 0.9];
    Ok(outcome(
        ok,
        format!(
            "{} cases, N<=12, alpha in {alphas:?}, max relative error {:.2e} (tol 1e-12)",
            r.cases, r.max_rel_err
        ),
    ))
}

fn honest_exhaustive() -> (usize, usize) {
    let seq = |code: usize, n: usize| -> Vec<QubitDescriptor> {
        (0..n)
            .map(|i| {
                let d = (code >> (2 * i)) & 3;
                QubitDescriptor::from_bits((d >> 1) as u8, (d & 1) as u8)
            })
            .collect()
    };
    let (mut sessions, mut valid) = (0, 0);
    for n in 1..=4usize {
        let total = 1usize << (2 * n);
        for ca in 0..total {
            for cb in 0..total {
                let (a, b) = (seq(ca, n), seq(cb, n));
                let s = SessionRecord {
                    session_id: 1,
                    n,
                    alice_cross_bits: b.clone(),
                    bob_cross_bits: a.clone(),
                    alice_qubits: a,
                    bob_qubits: b,
                    deadline: Deadline::default(),
                };
                let mut rng = stream_rng(ca as u64, cb as u64);
                let mut ma = ClientMachine::new(&s, Party::Alice, 0.0);
                let mut mb = ClientMachine::new(&s, Party::Bob, 0.0);
                let t = run_exchange(
                    &s,
                    &mut ma,
                    &mut mb,
                    &Honest,
                    &Honest,
                    &NoiseModel::ideal(),
                    &mut rng,
                )
                .unwrap();
                let all = [0.55, 0.7, 0.9, 0.99].iter().all(|&alpha| {
                    let v = binding_verdict(
                        &s,
                        &ma.claim(Intent::Bind),
                        &mb.claim(Intent::Bind),
                        alpha,
                        0.0,
                    )
                    .unwrap();
                    v.contract_valid && v.cheater_flag == CheaterFlag::None
                });
                sessions += 1;
                valid += (all && !t.is_aborted()) as usize;
            }
        }
    }
    (sessions, valid)
}

fn role_swap_holds(sessions: usize) -> bool {
    let mut rng = stream_rng(606, 0);
    let kinds = [
        "honest",
        "always-reject",
        "guesser",
        "mixed-reject:1,2",
        "rotated:1.1,0.4",
    ];
    let noise = NoiseModel::new(0.02, 0.1).unwrap();
    for _ in 0..sessions {
        let n = rng.random_range(2..40);
        let s = init_session(n, &mut rng).unwrap();
        let pick = |rng: &mut StreamRng| {
            let kind: StrategyKind = kinds[rng.random_range(0..kinds.len())].parse().unwrap();
            Strategy::new(
                kind,
                if rng.random() {
                    Intent::Bind
                } else {
                    Intent::Refuse
                },
            )
        };
        let (pa, pb) = (pick(&mut rng), pick(&mut rng));
        let mut a = ClientMachine::new(&s, Party::Alice, noise.tolerance);
        let mut b = ClientMachine::new(&s, Party::Bob, noise.tolerance);
        run_exchange(&s, &mut a, &mut b, &pa, &pb, &noise, &mut rng).unwrap();
        a.complete(pa.intent, &noise, &mut rng);
        b.complete(pb.intent, &noise, &mut rng);
        let (ca, cb) = (a.claim(pa.intent), b.claim(pb.intent));
        let alpha = rng.random_range(0.55..0.99);
        let v = binding_verdict(&s, &ca, &cb, alpha, noise.tolerance).unwrap();
        let w = binding_verdict(
            &s.swapped(),
            &BindingClaim {
                party: Party::Alice,
                ..cb
            },
            &BindingClaim {
                party: Party::Bob,
                ..ca
            },
            alpha,
            noise.tolerance,
        )
        .unwrap();
        let flip = match v.cheater_flag {
            CheaterFlag::Alice => CheaterFlag::Bob,
            CheaterFlag::Bob => CheaterFlag::Alice,
            f => f,
        };
        if v.contract_valid != w.contract_valid
            || flip != w.cheater_flag
            || v.counts.accept_correct_a != w.counts.accept_correct_b
            || v.counts.reject_correct_a != w.counts.reject_correct_b
        {
            return false;
        }
    }
    true
}

fn criterion_6(tmp: &Path) -> Result<Outcome, String> {
    let mut parts = Vec::new();
    let mut ok = true;
    for n in ["2", "20", "200"] {
        let dir = tmp.join(format!("c6_{n}"));
        run_ok(&[
            "simulate",
            "--n",
            n,
            "--trials",
            "10000",
            "--seed",
            "6",
            "--noise",
            "0",
            "--format",
            "json",
            "--out",
            dir.to_str().unwrap(),
        ])?;
        let r = &read_json(&dir.join("report.json"))["report"];
        let valid = r["p_valid"]["successes"].as_u64().unwrap();
        let aborted = r["aborted"].as_u64().unwrap();
        ok &= valid == 10_000 && aborted == 0;
        parts.push(format!("N={n}: {valid}/10000 valid"));
    }
    let (sessions, valid) = honest_exhaustive();
    ok &= sessions == valid;
    parts.push(format!(
        "exhaustive N<=4: {valid}/{sessions} sessions valid"
    ));
    let swap = role_swap_holds(5000);
    ok &= swap;
    parts.push(format!(
        "role swap on 5000 random sessions: {}",
        if swap { "holds" } else { "violated" }
    ));
    Ok(outcome(ok, parts.join("; ")))
}

fn criterion_7() -> Result<Outcome, String> {
    let dist = AlphaDistribution::uniform(0.9, 0.99).map_err(|e| e.to_string())?;
    let p = expected_prob_cheat(92, 600, &dist, SplitModel::Binomial, 1e-5)
        .map_err(|e| e.to_string())?;
    let delta = p.cbrt();
    let r = chebyshev_risk_check(600, 92, delta, &dist, SplitModel::Binomial, 1e-5)
        .map_err(|e| e.to_string())?;
    Ok(outcome(
        r.passes(),
        format!(
            "N=600 m=92: delta^3={p:.5}, Prob[Y < delta + delta^3] = {:.6} >= 1 - delta = {:.6}",
            r.probability,
            1.0 - delta
        ),
    ))
}

fn criterion_8(tmp: &Path) -> Result<Outcome, String> {
    let dir = tmp.join("c8");
    let o = fairsign(&[
        "verify",
        "--grid-trials",
        "100000",
        "--seed",
        "8",
        "--out",
        dir.to_str().unwrap(),
    ]);
    let doc = read_json(&dir.join("verify.json"));
    let g = &doc["grid"];
    let frac = g["pass_fraction"].as_f64().unwrap();
    let ok = frac >= 0.95 && g["trials_per_cell"].as_u64() == Some(100_000);
    Ok(outcome(
        ok,
        format!(
            "{}/{} cells within 4 sigma ({:.1}%) at 1e5 trials per cell; verify exit {:?}",
            g["passed"],
            g["cells"],
            100.0 * frac,
            o.status.code()
        ),
    ))
}

fn random_message(rng: &mut StreamRng) -> WireMessage {
    let session_id: u64 = rng.random();
    let n = rng.random_range(0..80usize);
    let party = if rng.random() {
        Party::Alice
    } else {
        Party::Bob
    };
    let descriptors = |rng: &mut StreamRng| -> Vec<QubitDescriptor> {
        (0..n)
            .map(|_| QubitDescriptor::from_bits(rng.random_range(0..2), rng.random_range(0..2)))
            .collect()
    };
    match rng.random_range(0..6) {
        0 => WireMessage::InitRequest {
            session_id,
            party,
            n: rng.random(),
            contract: (0..rng.random_range(0..64)).map(|_| rng.random()).collect(),
        },
        1 => WireMessage::InitGrant {
            session_id,
            party,
            qubits: descriptors(rng),
            cross_bits: descriptors(rng),
            deadline: Deadline {
                max_rounds: if rng.random() {
                    Some(rng.random_range(0..u32::MAX))
                } else {
                    None
                },
                round_timeout_ms: rng.random(),
            },
        },
        2 => WireMessage::OutcomeReport {
            session_id,
            party,
            m: rng.random(),
            bit: rng.random_range(0..2),
        },
        3 => WireMessage::BindRequest { session_id, party },
        4 => WireMessage::BindClaim {
            session_id,
            claim: BindingClaim {
                party,
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

fn criterion_9(tmp: &Path) -> Result<Outcome, String> {
    let mut rng = stream_rng(909, 0);
    let messages = (0..10_000)
        .filter(|_| {
            let m = random_message(&mut rng);
            decode_message(&encode_message(&m)).as_ref() == Ok(&m)
        })
        .count();
    let sessions = (0..10_000)
        .filter(|_| {
            let n = rng.random_range(1..150);
            let s = init_session(n, &mut rng).unwrap();
            decode_session(&encode_session(&s)).as_ref() == Ok(&s)
        })
        .count();

    let profiles: [(&str, &str, &str, &str, &str); 4] = [
        ("24", "11", "honest", "honest", "refuse"),
        ("40", "12", "honest", "always-reject", "refuse"),
        ("60", "13", "guesser", "mixed-reject:5,9", "bind"),
        ("33", "14", "rotated:0.8,1.0", "honest", "refuse"),
    ];
    let mut identical = 0;
    for (i, (n, seed, alice, bob, bob_intent)) in profiles.iter().enumerate() {
        let dir = tmp.join(format!("c9_{i}"));
        let d = dir.to_str().unwrap();
        run_ok(&[
            "prepare",
            "--n",
            n,
            "--seed",
            seed,
            "--alice",
            alice,
            "--bob",
            bob,
            "--bob-intent",
            bob_intent,
            "--noise",
            "0.01",
            "--eta",
            "0.05",
            "--out",
            d,
        ])?;
        let vdir = dir.join("verdict");
        run_ok(&[
            "bind",
            "--seed",
            seed,
            "--eta",
            "0.05",
            "--session",
            dir.join("session.bin").to_str().unwrap(),
            "--claim-a",
            dir.join("claim_alice.bin").to_str().unwrap(),
            "--claim-b",
            dir.join("claim_bob.bin").to_str().unwrap(),
            "--out",
            vdir.to_str().unwrap(),
        ])?;
        let record = decode_session(&std::fs::read(dir.join("session.bin")).unwrap()).unwrap();
        let claim = |f: &str| match decode_message(&std::fs::read(dir.join(f)).unwrap()).unwrap() {
            WireMessage::BindClaim { claim, .. } => claim,
            other => panic!("unexpected {other:?}"),
        };
        let alpha = session_alpha(
            &AlphaDistribution::default(),
            seed.parse().unwrap(),
            record.session_id,
        );
        let verdict = binding_verdict(
            &record,
            &claim("claim_alice.bin"),
            &claim("claim_bob.bin"),
            alpha,
            0.05,
        )
        .unwrap();
        let local = encode_message(&WireMessage::VerdictNotice {
            session_id: record.session_id,
            verdict,
        });
        identical += (std::fs::read(vdir.join("verdict.bin")).unwrap() == local) as usize;
    }
    let ok = messages == 10_000 && sessions == 10_000 && identical == profiles.len();
    Ok(outcome(
        ok,
        format!(
            "{messages}/10000 messages and {sessions}/10000 sessions round-trip; {identical}/{} fresh-process verdicts byte-identical",
            profiles.len()
        ),
    ))
}

type Check<'a> = (
    u32,
    &'static str,
    Box<dyn Fn() -> Result<Outcome, String> + 'a>,
);

fn main() {
    let tmp = tempfile::tempdir().expect("temp dir");
    let t = tmp.path();
    let criteria: Vec<Check> = vec![
        (1, "N=600 binomial supremum", Box::new(|| criterion_1(t))),
        (
            2,
            "N=8000 fixed-split supremum",
            Box::new(|| criterion_2(t)),
        ),
        (3, "scaling slope", Box::new(|| criterion_3(t))),
        (4, "detection law", Box::new(|| criterion_4(t))),
        (5, "oracle equivalence", Box::new(criterion_5)),
        (6, "protocol invariants", Box::new(|| criterion_6(t))),
        (7, "Chebyshev bound", Box::new(criterion_7)),
        (
            8,
            "MC/analysis cross-validation",
            Box::new(|| criterion_8(t)),
        ),
        (
            9,
            "wire and persistence round trips",
            Box::new(|| criterion_9(t)),
        ),
    ];
    let mut failed = 0;
    for (k, name, check) in &criteria {
        let o = check().unwrap_or_else(|e| outcome(false, e));
        failed += (!o.passed) as usize;
        println!(
            "criterion {k} ({name}): {}: {}",
            if o.passed { "PASS" } else { "FAIL" },
            o.detail
        );
    }
    println!(
        "acceptance: {}/{} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
