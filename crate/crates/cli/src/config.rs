//! Experiment configuration: defaults, TOML file, command-line overrides.

use std::path::{Path, PathBuf};

use fairsign_core::analysis::{AlphaDistribution, SplitModel};
use fairsign_core::protocol::Intent;
use fairsign_core::quantum::NoiseModel;
use fairsign_core::simulation::{Strategy, StrategyKind};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StrategyConfig {
    /// `honest`, `always-reject`, `mixed-reject:1,3`, `rotated:THETA,PHI[:ROUNDS]`, `guesser`.
    pub kind: String,
    pub intent: Intent,
    pub halt_after: Option<usize>,
}

impl Default for StrategyConfig {
    fn default() -> Self {
        StrategyConfig {
            kind: "honest".into(),
            intent: Intent::Bind,
            halt_after: None,
        }
    }
}

impl StrategyConfig {
    pub fn resolve(&self, field: &str, n: usize) -> Result<Strategy, CliError> {
        let kind: StrategyKind = self.kind.parse().map_err(|e| CliError::field(field, e))?;
        let s = Strategy {
            kind,
            intent: self.intent,
            halt_after: self.halt_after,
        };
        s.validate(n).map_err(|e| CliError::field(field, e))?;
        Ok(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScalingConfig {
    pub ns: Vec<usize>,
}

impl Default for ScalingConfig {
    fn default() -> Self {
        ScalingConfig {
            ns: vec![100, 200, 400, 800, 1600],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectionConfig {
    pub strategy: String,
    pub rounds: usize,
}

impl Default for DetectionConfig {
    fn default() -> Self {
        DetectionConfig {
            strategy: "always-reject".into(),
            rounds: 12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    pub oracle_max_n: usize,
    pub oracle_tol: f64,
    pub grid_trials: u64,
    /// Minimum fraction of grid cells that must pass.
    pub min_pass_fraction: f64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            oracle_max_n: 12,
            oracle_tol: 1e-12,
            grid_trials: 100_000,
            min_pass_fraction: 0.95,
        }
    }
}

/// Every knob of every command. Output files embed this structure, minus
/// the output directory, so identical configs give identical bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub n: usize,
    pub split: SplitModel,
    pub alpha: AlphaDistribution,
    pub quad_tol: f64,
    /// Outcome flip probability `e`.
    pub noise: f64,
    /// Mismatch tolerance `eta`.
    pub eta: f64,
    pub trials: u64,
    pub seed: u64,
    #[serde(skip_serializing)]
    pub out: PathBuf,
    pub format: Format,
    pub alice: StrategyConfig,
    pub bob: StrategyConfig,
    pub scaling: ScalingConfig,
    pub detection: DetectionConfig,
    pub verify: VerifyConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            n: 600,
            split: SplitModel::Binomial,
            alpha: AlphaDistribution::default(),
            quad_tol: 1e-5,
            noise: 0.0,
            eta: 0.0,
            trials: 10_000,
            seed: 1,
            out: PathBuf::from("out"),
            format: Format::Csv,
            alice: StrategyConfig::default(),
            bob: StrategyConfig::default(),
            scaling: ScalingConfig::default(),
            detection: DetectionConfig::default(),
            verify: VerifyConfig::default(),
        }
    }
}

/// Command-line values; `None` keeps the file or default value.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub n: Option<usize>,
    pub split: Option<String>,
    pub alpha_lo: Option<f64>,
    pub alpha_hi: Option<f64>,
    pub alpha_point: Option<f64>,
    pub quad_tol: Option<f64>,
    pub noise: Option<f64>,
    pub eta: Option<f64>,
    pub trials: Option<u64>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub format: Option<String>,
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<ExperimentConfig, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        toml::from_str(&text)
            .map_err(|e| CliError::Validation(format!("config {}: {e}", path.display())))
    }

    /// Defaults, then the file, then the command line.
    pub fn load(file: Option<&Path>, cli: &Overrides) -> Result<ExperimentConfig, CliError> {
        let mut c = match file {
            Some(p) => ExperimentConfig::from_file(p)?,
            None => ExperimentConfig::default(),
        };
        c.apply(cli)?;
        Ok(c)
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<(), CliError> {
        macro_rules! set {
            ($($f:ident),*) => { $(if let Some(v) = o.$f.clone() { self.$f = v; })* };
        }
        set!(n, quad_tol, noise, eta, trials, seed, out);
        if let Some(s) = &o.split {
            self.split = s.parse().map_err(|e: String| CliError::field("split", e))?;
        }
        if let Some(f) = &o.format {
            self.format = match f.to_ascii_lowercase().as_str() {
                "csv" => Format::Csv,
                "json" => Format::Json,
                other => {
                    return Err(CliError::field(
                        "format",
                        format!("unknown format '{other}' (csv | json)"),
                    ))
                }
            };
        }
        match (o.alpha_point, o.alpha_lo, o.alpha_hi) {
            (Some(_), Some(_), _) | (Some(_), _, Some(_)) => {
                return Err(CliError::field(
                    "alpha",
                    "--alpha-point excludes --alpha-lo/--alpha-hi",
                ));
            }
            (Some(a), None, None) => {
                self.alpha =
                    AlphaDistribution::point(a).map_err(|e| CliError::field("alpha", e))?;
            }
            (None, lo, hi) if lo.is_some() || hi.is_some() => {
                let (cur_lo, cur_hi) = match self.alpha {
                    AlphaDistribution::Uniform { lo, hi } => (lo, hi),
                    _ => match AlphaDistribution::default() {
                        AlphaDistribution::Uniform { lo, hi } => (lo, hi),
                        _ => unreachable!("default is uniform"),
                    },
                };
                self.alpha = AlphaDistribution::uniform(lo.unwrap_or(cur_lo), hi.unwrap_or(cur_hi))
                    .map_err(|e| CliError::field("alpha", e))?;
            }
            _ => {}
        }
        Ok(())
    }

    /// Checks every field; the error names the offending one.
    pub fn validate(&self) -> Result<(), CliError> {
        if self.n == 0 {
            return Err(CliError::field("n", "must be at least 1"));
        }
        self.split
            .check(self.n)
            .map_err(|e| CliError::field("split", e))?;
        self.alpha
            .validate()
            .map_err(|e| CliError::field("alpha", e))?;
        if !(self.quad_tol > 0.0 && self.quad_tol < 1.0) {
            return Err(CliError::field(
                "quad_tol",
                format!("{} outside (0, 1)", self.quad_tol),
            ));
        }
        if !(0.0..=0.5).contains(&self.noise) {
            return Err(CliError::field(
                "noise",
                format!("{} outside [0, 0.5]", self.noise),
            ));
        }
        if !(0.0..1.0).contains(&self.eta) {
            return Err(CliError::field(
                "eta",
                format!("{} outside [0, 1)", self.eta),
            ));
        }
        if self.trials == 0 {
            return Err(CliError::field("trials", "must be at least 1"));
        }
        self.alice.resolve("alice", self.n)?;
        self.bob.resolve("bob", self.n)?;
        let detect: StrategyKind = self
            .detection
            .strategy
            .parse()
            .map_err(|e| CliError::field("detection.strategy", e))?;
        if self.detection.rounds == 0 {
            return Err(CliError::field("detection.rounds", "must be at least 1"));
        }
        Strategy::new(detect, Intent::Bind)
            .validate(self.detection.rounds)
            .map_err(|e| CliError::field("detection.strategy", e))?;
        if !(2..=16).contains(&self.verify.oracle_max_n) {
            return Err(CliError::field("verify.oracle_max_n", "must lie in 2..=16"));
        }
        if !(self.verify.oracle_tol > 0.0) {
            return Err(CliError::field("verify.oracle_tol", "must be positive"));
        }
        if self.verify.grid_trials == 0 {
            return Err(CliError::field("verify.grid_trials", "must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.verify.min_pass_fraction) {
            return Err(CliError::field(
                "verify.min_pass_fraction",
                "must lie in [0, 1]",
            ));
        }
        Ok(())
    }

    pub fn noise_model(&self) -> Result<NoiseModel, CliError> {
        NoiseModel::new(self.noise, self.eta).map_err(|e| CliError::field("noise", e))
    }

    /// Single-line JSON used in file headers and documents.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }

    /// A TOML file with every default.
    pub fn template() -> String {
        toml::to_string_pretty(&ExperimentConfig::default()).expect("config serializes")
    }
}
