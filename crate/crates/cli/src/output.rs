//! Output files. Every artifact carries the version, the command and the
//! resolved configuration.

use std::fs;
use std::path::{Path, PathBuf};

use fairsign_core::VERSION;
use serde_json::{json, Map, Value};

use crate::config::ExperimentConfig;
use crate::error::CliError;

/// `# `-prefixed CSV header lines.
pub fn csv_header(command: &str, cfg: &ExperimentConfig) -> Vec<String> {
    vec![
        format!("fairsign {VERSION}"),
        format!("command: {command}"),
        format!("config: {}", cfg.to_json()),
    ]
}

/// A JSON document with `version`, `command` and `config` next to `body`'s keys.
pub fn document(command: &str, cfg: &ExperimentConfig, body: Value) -> String {
    let mut doc = Map::new();
    doc.insert("version".into(), json!(VERSION));
    doc.insert("command".into(), json!(command));
    doc.insert("config".into(), cfg.to_json());
    if let Value::Object(fields) = body {
        doc.extend(fields);
    }
    let mut s = serde_json::to_string_pretty(&Value::Object(doc)).expect("document serializes");
    s.push('\n');
    s
}

pub fn write(dir: &Path, name: &str, bytes: impl AsRef<[u8]>) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    let path = dir.join(name);
    fs::write(&path, bytes).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    Ok(path)
}

pub fn read(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}
