//! Scenario files: TOML documents deserialized straight into
//! [`SimConfig`]. Unknown keys are rejected at every level.

use std::fs;
use std::path::{Path, PathBuf};

use meshmac::sim::SimConfig;

use crate::error::CliError;

pub fn parse(text: &str) -> Result<SimConfig, CliError> {
    let cfg: SimConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
    cfg.validate().map_err(|e| CliError::Config(e.to_string()))?;
    Ok(cfg)
}

pub fn load(path: &Path) -> Result<SimConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    parse(&text).map_err(|e| match e {
        CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Scenario files under `path`: the file itself, or every `*.toml` in a
/// directory, sorted by name.
pub fn collect(path: &Path) -> Result<Vec<PathBuf>, CliError> {
    let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", path.display()));
    if !path.is_dir() {
        return Ok(vec![path.to_path_buf()]);
    }
    let mut files: Vec<PathBuf> = fs::read_dir(path)
        .map_err(io)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .collect();
    files.sort();
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
seed = 1
horizon = 1000
[[nodes]]
id = 0
mac = "02:00:00:00:00:01"
"#;

    #[test]
    fn minimal_scenario_parses_with_defaults() {
        let cfg = parse(MINIMAL).unwrap();
        assert_eq!(cfg.medium.bitrate, 1_000_000);
        assert_eq!(cfg.access.threshold, 10);
        assert!(cfg.trace_tx_line);
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = format!("{MINIMAL}colour = \"red\"\n");
        assert!(matches!(parse(&text), Err(CliError::Config(_))));
        let nested = MINIMAL.replace("horizon = 1000", "horizon = 1000\n[medium]\nspeed = 3");
        assert!(matches!(parse(&nested), Err(CliError::Config(_))));
    }

    #[test]
    fn invalid_config_is_config_error() {
        let text = MINIMAL.replace("horizon = 1000", "horizon = 0");
        assert!(matches!(parse(&text), Err(CliError::Config(_))));
    }
}
