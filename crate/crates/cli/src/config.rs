//! Flat `key = value` config files turned into command-line flags.
//!
//! Keys are flag names (`top_k` and `top-k` are the same key). Values are
//! inserted right after the subcommand, and keys the user also passed on the
//! command line are skipped, so flags always win. Keys that the chosen
//! subcommand does not accept are ignored, letting one file serve a whole
//! pipeline.

use std::collections::HashSet;
use std::path::Path;

use clap::{ArgAction, Command};

use crate::error::CliError;

const GLOBAL_WITH_VALUE: [&str; 3] = ["--config", "--seed", "--out"];

/// Index of the subcommand token in `argv`, skipping global options.
pub fn subcommand_index(argv: &[String]) -> Option<usize> {
    let mut i = 1;
    while i < argv.len() {
        let t = argv[i].as_str();
        if GLOBAL_WITH_VALUE.contains(&t) {
            i += 2;
        } else if t.starts_with('-') {
            i += 1;
        } else {
            return Some(i);
        }
    }
    None
}

/// The `--config` value, if any, found anywhere in `argv`.
pub fn config_path(argv: &[String]) -> Option<String> {
    let mut it = argv.iter();
    while let Some(t) = it.next() {
        if t == "--config" {
            return it.next().cloned();
        }
        if let Some(v) = t.strip_prefix("--config=") {
            return Some(v.to_string());
        }
    }
    None
}

fn scalar(key: &str, v: &toml::Value) -> Result<String, CliError> {
    match v {
        toml::Value::String(s) => Ok(s.clone()),
        toml::Value::Integer(i) => Ok(i.to_string()),
        toml::Value::Float(f) => Ok(f.to_string()),
        toml::Value::Boolean(b) => Ok(b.to_string()),
        other => Err(CliError::Usage(format!("config key {key:?} must be a scalar or a list of scalars, got {other}"))),
    }
}

/// Flags for `sub` derived from the config file at `path`.
pub fn config_args(path: &Path, sub: &Command, user_flags: &HashSet<String>) -> Result<Vec<String>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    let table: toml::Table =
        text.parse().map_err(|e| CliError::Usage(format!("config {} is not valid: {e}", path.display())))?;
    let mut out = Vec::new();
    for (raw_key, value) in &table {
        let key = raw_key.replace('_', "-");
        if key == "config" || user_flags.contains(&key) {
            continue;
        }
        let Some(arg) = sub.get_arguments().find(|a| a.get_long() == Some(key.as_str())) else {
            log::debug!("config key {raw_key:?} not used by {}", sub.get_name());
            continue;
        };
        let flag = format!("--{key}");
        let values: Vec<&toml::Value> = match value {
            toml::Value::Array(items) => items.iter().collect(),
            v => vec![v],
        };
        for v in values {
            if matches!(arg.get_action(), ArgAction::SetTrue) {
                match v {
                    toml::Value::Boolean(true) => out.push(flag.clone()),
                    toml::Value::Boolean(false) => {}
                    _ => return Err(CliError::Usage(format!("config key {raw_key:?} must be true or false"))),
                }
            } else {
                out.push(flag.clone());
                out.push(scalar(raw_key, v)?);
            }
        }
    }
    Ok(out)
}

/// Long flag names the user typed after the subcommand.
pub fn user_flags(args: &[String]) -> HashSet<String> {
    args.iter().filter_map(|t| t.strip_prefix("--")).map(|t| t.split('=').next().unwrap_or(t).to_string()).collect()
}

/// `argv` with config-derived flags spliced in after the subcommand.
pub fn merge(argv: Vec<String>, root: &Command) -> Result<Vec<String>, CliError> {
    let (Some(path), Some(idx)) = (config_path(&argv), subcommand_index(&argv)) else {
        return Ok(argv);
    };
    let Some(sub) = root.find_subcommand(&argv[idx]) else {
        return Ok(argv);
    };
    let flags = user_flags(&argv[1..]);
    let extra = config_args(Path::new(&path), sub, &flags)?;
    let mut merged = argv[..=idx].to_vec();
    merged.extend(extra);
    merged.extend_from_slice(&argv[idx + 1..]);
    Ok(merged)
}
