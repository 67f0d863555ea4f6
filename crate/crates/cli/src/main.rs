//! `fairsign`: reproducible experiments for quantum contract signing.
//!
//! Exit codes: 0 success, 1 invalid configuration or input, 2 verification
//! failure, 3 I/O error.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fairsign_core::protocol::Intent;

use config::{ExperimentConfig, Overrides};
use error::CliError;

#[derive(Parser)]
#[command(
    name = "fairsign",
    version,
    about = "Quantum contract signing: exact fairness curves, Monte Carlo runs and a socket Trent"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Default)]
struct Common {
    /// TOML configuration file; command-line flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Qubits per client.
    #[arg(long)]
    n: Option<usize>,
    /// Basis split model: binomial | fixed-equal.
    #[arg(long)]
    split: Option<String>,
    /// Lower end of a uniform alpha distribution.
    #[arg(long)]
    alpha_lo: Option<f64>,
    /// Upper end of a uniform alpha distribution.
    #[arg(long)]
    alpha_hi: Option<f64>,
    /// Fixed alpha.
    #[arg(long)]
    alpha_point: Option<f64>,
    /// Quadrature tolerance of the alpha average.
    #[arg(long)]
    quad_tol: Option<f64>,
    /// Outcome flip probability.
    #[arg(long)]
    noise: Option<f64>,
    /// Mismatch tolerance of honest clients.
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// csv | json.
    #[arg(long)]
    format: Option<String>,
    /// Record wall time in JSON outputs (makes them run-dependent).
    #[arg(long)]
    timing: bool,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            n: self.n,
            split: self.split.clone(),
            alpha_lo: self.alpha_lo,
            alpha_hi: self.alpha_hi,
            alpha_point: self.alpha_point,
            quad_tol: self.quad_tol,
            noise: self.noise,
            eta: self.eta,
            trials: self.trials,
            seed: self.seed,
            out: self.out.clone(),
            format: self.format.clone(),
        }
    }
}

#[derive(Args, Debug, Clone, Default)]
struct StrategyArgs {
    /// Alice's strategy, e.g. honest, always-reject, mixed-reject:1,3, rotated:0.4,0, guesser.
    #[arg(long)]
    alice: Option<String>,
    #[arg(long)]
    bob: Option<String>,
    /// bind | refuse.
    #[arg(long, value_parser = parse_intent)]
    alice_intent: Option<Intent>,
    #[arg(long, value_parser = parse_intent)]
    bob_intent: Option<Intent>,
    /// Stop Alice's reports after this many rounds.
    #[arg(long)]
    alice_halt: Option<usize>,
    #[arg(long)]
    bob_halt: Option<usize>,
}

fn parse_intent(s: &str) -> Result<Intent, String> {
    match s.to_ascii_lowercase().as_str() {
        "bind" => Ok(Intent::Bind),
        "refuse" => Ok(Intent::Refuse),
        other => Err(format!("unknown intent '{other}' (bind | refuse)")),
    }
}

impl StrategyArgs {
    fn apply(&self, cfg: &mut ExperimentConfig) {
        if let Some(k) = &self.alice {
            cfg.alice.kind = k.clone();
        }
        if let Some(k) = &self.bob {
            cfg.bob.kind = k.clone();
        }
        if let Some(i) = self.alice_intent {
            cfg.alice.intent = i;
        }
        if let Some(i) = self.bob_intent {
            cfg.bob.intent = i;
        }
        if self.alice_halt.is_some() {
            cfg.alice.halt_after = self.alice_halt;
        }
        if self.bob_halt.is_some() {
            cfg.bob.halt_after = self.bob_halt;
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Expected probability to cheat over m, its supremum and the risk bound.
    Analyze {
        #[command(flatten)]
        common: Common,
    },
    /// Monte Carlo protocol runs for a strategy profile.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        strategies: StrategyArgs,
    },
    /// Empirical detection probability against the exact law.
    Detect {
        #[command(flatten)]
        common: Common,
        /// Bob's cheating strategy.
        #[arg(long)]
        strategy: Option<String>,
        /// Session length.
        #[arg(long)]
        rounds: Option<usize>,
    },
    /// Supremum over several N and the log-log slope.
    Scaling {
        #[command(flatten)]
        common: Common,
        /// Comma-separated N values.
        #[arg(long, value_delimiter = ',')]
        ns: Option<Vec<usize>>,
        /// Fit these `N:value` points instead of computing curves.
        #[arg(long)]
        points: Option<String>,
    },
    /// Exact-rational oracle suite and Monte Carlo cross-validation.
    Verify {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        grid_trials: Option<u64>,
        #[arg(long)]
        oracle_max_n: Option<usize>,
        #[arg(long, hide = true)]
        perturb_threshold: bool,
    },
    /// Run Trent on a TCP socket.
    Serve {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "127.0.0.1:0")]
        addr: String,
        /// Exit after serving this many connections.
        #[arg(long)]
        max_connections: Option<usize>,
    },
    /// Play one session in process and persist it with both claims.
    Prepare {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        strategies: StrategyArgs,
    },
    /// Binding from a persisted session and claim files.
    Bind {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        session: PathBuf,
        #[arg(long)]
        claim_a: PathBuf,
        #[arg(long)]
        claim_b: PathBuf,
    },
    /// Print a configuration file with every default.
    Template,
}

fn load(
    common: &Common,
    tweak: impl FnOnce(&mut ExperimentConfig),
) -> Result<ExperimentConfig, CliError> {
    let mut cfg = ExperimentConfig::load(common.config.as_deref(), &common.overrides())?;
    tweak(&mut cfg);
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Analyze { common } => commands::analyze(&load(&common, |_| {})?, common.timing),
        Command::Simulate { common, strategies } => {
            commands::simulate(&load(&common, |c| strategies.apply(c))?, common.timing)
        }
        Command::Detect {
            common,
            strategy,
            rounds,
        } => commands::detect(&load(&common, |c| {
            if let Some(s) = strategy {
                c.detection.strategy = s;
            }
            if let Some(r) = rounds {
                c.detection.rounds = r;
            }
        })?),
        Command::Scaling { common, ns, points } => {
            let cfg = load(&common, |c| {
                if let Some(ns) = ns {
                    c.scaling.ns = ns;
                }
            })?;
            commands::scaling(&cfg, points.as_deref(), common.timing)
        }
        Command::Verify {
            common,
            grid_trials,
            oracle_max_n,
            perturb_threshold,
        } => {
            let cfg = load(&common, |c| {
                if let Some(t) = grid_trials {
                    c.verify.grid_trials = t;
                }
                if let Some(n) = oracle_max_n {
                    c.verify.oracle_max_n = n;
                }
            })?;
            commands::verify(&cfg, perturb_threshold, common.timing)
        }
        Command::Serve {
            common,
            addr,
            max_connections,
        } => commands::serve(&load(&common, |_| {})?, &addr, max_connections),
        Command::Prepare { common, strategies } => {
            commands::prepare(&load(&common, |c| strategies.apply(c))?)
        }
        Command::Bind {
            common,
            session,
            claim_a,
            claim_b,
        } => commands::bind(&load(&common, |_| {})?, &session, &claim_a, &claim_b),
        Command::Template => {
            print!("{}", ExperimentConfig::template());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("fairsign: {}: {e}", e.kind());
            e.exit_code()
        }
    }
}
