//! Subcommand implementations.

use std::io::Write as _;
use std::path::Path;
use std::time::{Duration, Instant};

use fairsign_core::analysis::export::{curve_csv, curve_json, quadrature_settings};
use fairsign_core::analysis::oracle::run_oracle_suite;
use fairsign_core::analysis::{
    chebyshev_risk_check, scaling_fit, sup_expected_cheat, AnalysisError, ThresholdRule,
};
use fairsign_core::protocol::server::{ServerConfig, TrentServer};
use fairsign_core::protocol::wire::{decode_session, encode_session};
use fairsign_core::protocol::{
    binding_verdict, decode_message, encode_message, init_session, run_exchange, session_alpha,
    BindingClaim, ClientMachine, Deadline, Party, WireMessage,
};
use fairsign_core::rng::stream_rng;
use fairsign_core::simulation::{
    default_grid, estimate_detection_curve, run_trials, validate_against_analysis, Execution,
    SimulationError, StrategyKind, TrialSpec,
};
use serde_json::json;

use crate::config::{ExperimentConfig, Format};
use crate::error::CliError;
use crate::output::{csv_header, document, read, write};

fn analysis_err(e: AnalysisError) -> CliError {
    match e {
        AnalysisError::QuadratureNotConverged { .. } => CliError::Verification(e.to_string()),
        _ => CliError::Validation(e.to_string()),
    }
}

fn simulation_err(e: SimulationError) -> CliError {
    match e {
        SimulationError::Analysis(a) => analysis_err(a),
        other => CliError::Validation(other.to_string()),
    }
}

fn wall(start: Instant, timing: bool) -> serde_json::Value {
    if timing {
        json!({ "wall_time_s": start.elapsed().as_secs_f64() })
    } else {
        json!({})
    }
}

fn merge(mut a: serde_json::Value, b: serde_json::Value) -> serde_json::Value {
    if let (Some(a), serde_json::Value::Object(b)) = (a.as_object_mut(), b) {
        a.extend(b);
    }
    a
}

pub fn analyze(cfg: &ExperimentConfig, timing: bool) -> Result<(), CliError> {
    let start = Instant::now();
    let curve =
        sup_expected_cheat(cfg.n, &cfg.alpha, cfg.split, cfg.quad_tol).map_err(analysis_err)?;
    let (m_star, sup) = curve.sup();
    let risk = if sup > 0.0 {
        let r = chebyshev_risk_check(
            cfg.n,
            m_star,
            sup.cbrt(),
            &cfg.alpha,
            cfg.split,
            cfg.quad_tol,
        )
        .map_err(analysis_err)?;
        json!(r)
    } else {
        serde_json::Value::Null
    };
    let curve_path = match cfg.format {
        Format::Csv => write(
            &cfg.out,
            "curve.csv",
            curve_csv(&curve, &csv_header("analyze", cfg)),
        )?,
        Format::Json => write(
            &cfg.out,
            "curve.json",
            document("analyze", cfg, curve_json(&curve, true)),
        )?,
    };
    let body = merge(
        json!({
            "n": cfg.n,
            "split": cfg.split,
            "alpha_distribution": cfg.alpha,
            "quadrature": quadrature_settings(cfg.quad_tol),
            "m_star": m_star,
            "sup": sup,
            "chebyshev": risk,
        }),
        wall(start, timing),
    );
    let summary = write(&cfg.out, "summary.json", document("analyze", cfg, body))?;
    println!(
        "N={} split={} m*={} sup={:.7}",
        cfg.n,
        cfg.split.name(),
        m_star,
        sup
    );
    println!("wrote {} and {}", curve_path.display(), summary.display());
    Ok(())
}

pub fn simulate(cfg: &ExperimentConfig, timing: bool) -> Result<(), CliError> {
    let start = Instant::now();
    let spec = TrialSpec {
        n: cfg.n,
        alice: cfg.alice.resolve("alice", cfg.n)?,
        bob: cfg.bob.resolve("bob", cfg.n)?,
        noise: cfg.noise_model()?,
        alpha_dist: cfg.alpha.clone(),
        trials: cfg.trials,
        seed: cfg.seed,
    };
    let report = run_trials(&spec, Execution::Parallel).map_err(simulation_err)?;
    let path = match cfg.format {
        Format::Csv => write(
            &cfg.out,
            "report.csv",
            report.to_csv(&csv_header("simulate", cfg)),
        )?,
        Format::Json => write(
            &cfg.out,
            "report.json",
            document(
                "simulate",
                cfg,
                merge(json!({ "report": report }), wall(start, timing)),
            ),
        )?,
    };
    for (name, e) in [
        ("P_valid", &report.p_valid),
        ("P_bind^A", &report.p_bind_a),
        ("P_bind^B", &report.p_bind_b),
    ] {
        println!("{name} = {:.6} [{:.6}, {:.6}]", e.p, e.ci_lo, e.ci_hi);
    }
    println!(
        "trials={} aborted={} (mismatch {}, timeout {})",
        report.trials, report.aborted, report.aborts_mismatch, report.aborts_timeout
    );
    println!("wrote {}", path.display());
    Ok(())
}

pub fn detect(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let kind: StrategyKind = cfg
        .detection
        .strategy
        .parse()
        .map_err(|e| CliError::field("detection.strategy", e))?;
    let curve = estimate_detection_curve(&kind, cfg.detection.rounds, cfg.trials, cfg.seed)
        .map_err(simulation_err)?;
    let path = match cfg.format {
        Format::Csv => write(
            &cfg.out,
            "detection.csv",
            curve.to_csv(&csv_header("detect", cfg)),
        )?,
        Format::Json => write(
            &cfg.out,
            "detection.json",
            document("detect", cfg, json!({ "curve": curve })),
        )?,
    };
    for p in &curve.points {
        println!(
            "dm={:>3} empirical={:.5} exact={:.5} ci=[{:.5}, {:.5}]{}",
            p.delta_m,
            p.estimate.p,
            p.exact,
            p.estimate.ci_lo,
            p.estimate.ci_hi,
            if p.within_ci() { "" } else { "  outside" }
        );
    }
    println!("wrote {}", path.display());
    Ok(())
}

/// `N:value` pairs separated by commas.
fn parse_points(s: &str) -> Result<Vec<(usize, f64)>, CliError> {
    s.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| {
            let (n, v) = t
                .split_once(':')
                .ok_or_else(|| CliError::field("points", format!("expected N:value, got {t:?}")))?;
            let n = n
                .trim()
                .parse()
                .map_err(|e| CliError::field("points", format!("{n:?}: {e}")))?;
            let v = v
                .trim()
                .parse()
                .map_err(|e| CliError::field("points", format!("{v:?}: {e}")))?;
            Ok((n, v))
        })
        .collect()
}

pub fn scaling(cfg: &ExperimentConfig, points: Option<&str>, timing: bool) -> Result<(), CliError> {
    let start = Instant::now();
    let mut rows = Vec::new();
    let pts = match points {
        Some(p) => parse_points(p)?,
        None => {
            let ns = &cfg.scaling.ns;
            // Structural problems are reported before any curve is computed.
            let mut sorted = ns.clone();
            sorted.sort_unstable();
            if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
                return Err(analysis_err(AnalysisError::DuplicateN(w[0])));
            }
            if ns.len() < 3 {
                return Err(analysis_err(AnalysisError::TooFewPoints(ns.len())));
            }
            for &n in ns {
                cfg.split
                    .check(n)
                    .map_err(|e| CliError::field("scaling.ns", e))?;
            }
            let mut pts = Vec::new();
            for &n in ns {
                let c = sup_expected_cheat(n, &cfg.alpha, cfg.split, cfg.quad_tol)
                    .map_err(analysis_err)?;
                println!("N={n} m*={} sup={:.7}", c.sup_m, c.sup_value);
                rows.push((n, Some(c.sup_m), c.sup_value));
                pts.push((n, c.sup_value));
            }
            pts
        }
    };
    if rows.is_empty() {
        rows = pts.iter().map(|&(n, v)| (n, None, v)).collect();
    }
    let fit = scaling_fit(&pts).map_err(analysis_err)?;
    let mut header = csv_header("scaling", cfg);
    header.push(format!(
        "fit: slope={} intercept={} prefactor={} residual_norm={}",
        fit.slope, fit.intercept, fit.prefactor, fit.residual_norm
    ));
    let path = match cfg.format {
        Format::Csv => {
            let mut out = String::new();
            for h in &header {
                out.push_str(&format!("# {h}\n"));
            }
            out.push_str("n,m_star,sup,log_n,log_sup\n");
            for (n, m, v) in &rows {
                let m = m.map_or(String::new(), |m| m.to_string());
                out.push_str(&format!("{n},{m},{v},{},{}\n", (*n as f64).ln(), v.ln()));
            }
            write(&cfg.out, "scaling.csv", out)?
        }
        Format::Json => write(
            &cfg.out,
            "scaling.json",
            document(
                "scaling",
                cfg,
                merge(
                    json!({
                        "points": rows.iter().map(|(n, m, v)| json!({"n": n, "m_star": m, "sup": v})).collect::<Vec<_>>(),
                        "fit": fit,
                    }),
                    wall(start, timing),
                ),
            ),
        )?,
    };
    println!("slope={:.4} prefactor={:.4}", fit.slope, fit.prefactor);
    println!("wrote {}", path.display());
    Ok(())
}

pub fn verify(cfg: &ExperimentConfig, perturb: bool, timing: bool) -> Result<(), CliError> {
    let start = Instant::now();
    let rule = if perturb {
        ThresholdRule::PerturbedForTesting
    } else {
        ThresholdRule::Strict
    };
    let v = &cfg.verify;
    let oracle = run_oracle_suite(v.oracle_max_n, rule, v.oracle_tol);
    println!(
        "oracle: {} cases up to N={}, max relative error {:.3e}, {} failures",
        oracle.cases,
        oracle.max_n,
        oracle.max_rel_err,
        oracle.failures.len()
    );
    let table = validate_against_analysis(&default_grid(), v.grid_trials, cfg.seed)
        .map_err(simulation_err)?;
    for r in &table.rows {
        println!(
            "cell N={:>3} m={:>3} alpha={:<4} empirical={:.5} analytic={:.5} z={:+.3} {}",
            r.cell.n,
            r.cell.m,
            r.cell.alpha,
            r.empirical,
            r.analytic,
            r.z,
            if r.passed { "pass" } else { "FAIL" }
        );
    }
    let grid_ok = table.pass_fraction() >= v.min_pass_fraction;
    println!(
        "grid: {}/{} cells within 4 sigma ({:.1}%)",
        table.passed_cells(),
        table.rows.len(),
        100.0 * table.pass_fraction()
    );
    let passed = oracle.passed() && grid_ok;
    write(
        &cfg.out,
        "verify.csv",
        table.to_csv(&csv_header("verify", cfg)),
    )?;
    let body = merge(
        json!({
            "threshold_rule": format!("{rule:?}"),
            "oracle": oracle,
            "grid": {
                "cells": table.rows.len(),
                "passed": table.passed_cells(),
                "pass_fraction": table.pass_fraction(),
                "min_pass_fraction": v.min_pass_fraction,
                "trials_per_cell": table.trials_per_cell,
            },
            "passed": passed,
        }),
        wall(start, timing),
    );
    let path = write(&cfg.out, "verify.json", document("verify", cfg, body))?;
    println!("wrote {}", path.display());
    if passed {
        println!("verify: PASS");
        Ok(())
    } else {
        Err(CliError::Verification(format!(
            "oracle {}, grid {}",
            if oracle.passed() { "passed" } else { "failed" },
            if grid_ok { "passed" } else { "failed" }
        )))
    }
}

pub fn serve(
    cfg: &ExperimentConfig,
    addr: &str,
    max_connections: Option<usize>,
) -> Result<(), CliError> {
    let server = TrentServer::bind(
        addr,
        ServerConfig {
            seed: cfg.seed,
            alpha_dist: cfg.alpha.clone(),
            eta: cfg.eta,
            deadline: Deadline::default(),
            bind_wait: Duration::from_secs(30),
        },
    )?;
    println!("listening on {}", server.local_addr()?);
    std::io::stdout().flush()?;
    server.serve(max_connections)?;
    Ok(())
}

/// Plays one session in process and persists it with both parties' claims.
pub fn prepare(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let alice = cfg.alice.resolve("alice", cfg.n)?;
    let bob = cfg.bob.resolve("bob", cfg.n)?;
    let noise = cfg.noise_model()?;
    let session =
        init_session(cfg.n, &mut stream_rng(cfg.seed, 0)).map_err(|e| CliError::field("n", e))?;
    let mut rng = stream_rng(cfg.seed, u64::MAX);
    let mut a = ClientMachine::new(&session, Party::Alice, noise.tolerance);
    let mut b = ClientMachine::new(&session, Party::Bob, noise.tolerance);
    let t = run_exchange(&session, &mut a, &mut b, &alice, &bob, &noise, &mut rng)
        .map_err(|e| CliError::Validation(e.to_string()))?;
    a.complete(alice.intent, &noise, &mut rng);
    b.complete(bob.intent, &noise, &mut rng);
    let id = session.session_id;
    let claim = |m: &ClientMachine, intent| WireMessage::BindClaim {
        session_id: id,
        claim: m.claim(intent),
    };
    let sp = write(&cfg.out, "session.bin", encode_session(&session))?;
    let ca = write(
        &cfg.out,
        "claim_alice.bin",
        encode_message(&claim(&a, alice.intent)),
    )?;
    let cb = write(
        &cfg.out,
        "claim_bob.bin",
        encode_message(&claim(&b, bob.intent)),
    )?;
    write(
        &cfg.out,
        "prepare.json",
        document(
            "prepare",
            cfg,
            json!({
                "session_id": id,
                "abort_step": t.abort_step,
                "abort_reason": t.abort_reason,
                "rounds": t.rounds.len(),
            }),
        ),
    )?;
    println!(
        "session {id}: abort_step={:?} reason={}",
        t.abort_step,
        t.abort_reason.name()
    );
    println!("wrote {}, {}, {}", sp.display(), ca.display(), cb.display());
    Ok(())
}

fn read_claim(path: &Path, party: Party, session_id: u64) -> Result<BindingClaim, CliError> {
    let bytes = read(path)?;
    match decode_message(&bytes)
        .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?
    {
        WireMessage::BindClaim {
            session_id: sid,
            claim,
        } if sid == session_id && claim.party == party => Ok(claim),
        WireMessage::BindClaim {
            session_id: sid,
            claim,
        } => Err(CliError::Validation(format!(
            "{}: claim by {} for session {sid}, expected {party} for session {session_id}",
            path.display(),
            claim.party
        ))),
        other => Err(CliError::Validation(format!(
            "{}: expected a bind claim, found {}",
            path.display(),
            other.kind()
        ))),
    }
}

/// Offline Binding from persisted files. Alpha is Trent's draw for the
/// session under the configured seed and distribution.
pub fn bind(
    cfg: &ExperimentConfig,
    session: &Path,
    claim_a: &Path,
    claim_b: &Path,
) -> Result<(), CliError> {
    let bytes = read(session)?;
    let record = decode_session(&bytes)
        .map_err(|e| CliError::Validation(format!("{}: {e}", session.display())))?;
    let a = read_claim(claim_a, Party::Alice, record.session_id)?;
    let b = read_claim(claim_b, Party::Bob, record.session_id)?;
    let alpha = session_alpha(&cfg.alpha, cfg.seed, record.session_id);
    let verdict = binding_verdict(&record, &a, &b, alpha, cfg.eta)
        .map_err(|e| CliError::Validation(e.to_string()))?;
    let notice = WireMessage::VerdictNotice {
        session_id: record.session_id,
        verdict,
    };
    let vp = write(&cfg.out, "verdict.bin", encode_message(&notice))?;
    write(
        &cfg.out,
        "verdict.json",
        document(
            "bind",
            cfg,
            json!({ "session_id": record.session_id, "verdict": verdict }),
        ),
    )?;
    println!(
        "session {}: contract_valid={} cheater={:?} alpha={}",
        record.session_id, verdict.contract_valid, verdict.cheater_flag, verdict.alpha_used
    );
    println!("wrote {}", vp.display());
    Ok(())
}
