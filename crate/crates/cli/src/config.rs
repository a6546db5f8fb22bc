//! Flags backed by an optional TOML file: explicit flags win, then file
//! values, then flag defaults.

use std::fs;
use std::path::Path;

use anyhow::Result;
use clap::parser::ValueSource;
use clap::{ArgMatches, Command};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::args::Configurable;
use crate::UsageError;

pub fn resolve<A>(args: A, command: &Command, matches: &ArgMatches) -> Result<A>
where
    A: Configurable + Serialize + DeserializeOwned,
{
    let Some(path) = args.config_path().cloned() else {
        return Ok(args);
    };
    let text = fs::read_to_string(&path).map_err(|e| UsageError(format!("cannot read config {}: {e}", path.display())))?;
    let mut table: toml::Table = text
        .parse()
        .map_err(|e| UsageError(format!("{} is not valid TOML: {e}", path.display())))?;

    let known: Vec<String> = command
        .get_arguments()
        .map(|a| a.get_id().as_str().to_string())
        .filter(|id| id != "config")
        .collect();
    if let Some(bad) = table.keys().find(|k| !known.contains(k)) {
        return Err(UsageError(format!("{}: unknown key `{bad}`", path.display())).into());
    }

    let flags = toml::Table::try_from(&args)?;
    for (key, value) in flags {
        let explicit = matches!(matches.value_source(&key), Some(ValueSource::CommandLine | ValueSource::EnvVariable));
        if explicit || !table.contains_key(&key) {
            table.insert(key, value);
        }
    }
    let mut merged: A = toml::Value::Table(table)
        .try_into()
        .map_err(|e| UsageError(format!("{}: {e}", path.display())))?;
    merged.set_config_path(Some(path));
    Ok(merged)
}

/// Write the fully resolved flags so the run can be replayed with `--config`.
pub fn write_resolved<A: Serialize>(args: &A, path: &Path) -> Result<()> {
    fs::write(path, toml::to_string(args)?)?;
    Ok(())
}
