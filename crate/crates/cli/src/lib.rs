//! Command-line front end for the `neurotext` models.

/// `println!` that ignores a closed stdout.
macro_rules! say {
    ($($arg:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout().lock(), $($arg)*);
    }};
}

pub mod args;
mod commands;
mod config;
mod data;
mod runs;

use std::fmt;
use std::path::Path;

use anyhow::Result;
use clap::{ArgMatches, CommandFactory, FromArgMatches};

pub use args::{Cli, Command, ModelKind};
pub use runs::{CHECKPOINT_FILE, CONFIG_FILE, LOG_FILE, SRC_VOCAB_FILE, TGT_VOCAB_FILE, VOCAB_FILE};

/// A problem with how the program was invoked (exit code 2).
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn require_file(path: &Path, what: &str) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(UsageError(format!("{what} {} does not exist", path.display())).into())
    }
}

/// 2 for usage and configuration errors, 1 for everything else.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    let usage = err.chain().any(|c| {
        c.is::<UsageError>() || matches!(c.downcast_ref::<neurotext::Error>(), Some(neurotext::Error::Config(_)))
    });
    if usage {
        2
    } else {
        1
    }
}

pub fn run(matches: &ArgMatches) -> Result<()> {
    let cli = Cli::from_arg_matches(matches)?;
    let root = Cli::command();
    let (name, sub) = matches.subcommand().expect("subcommand is required");
    let spec = root.find_subcommand(name).expect("known subcommand");
    match cli.command {
        Command::Train(a) => commands::train::run(config::resolve(a, spec, sub)?),
        Command::Eval(a) => commands::eval::run(config::resolve(a, spec, sub)?),
        Command::Generate(a) => commands::generate::run(config::resolve(a, spec, sub)?),
        Command::Translate(a) => commands::translate::run(config::resolve(a, spec, sub)?),
        Command::Inspect(a) => commands::inspect::run(config::resolve(a, spec, sub)?),
        Command::Gradcheck(a) => commands::gradcheck::run(config::resolve(a, spec, sub)?),
        Command::Synth(a) => commands::synth::run(config::resolve(a, spec, sub)?),
    }
}
