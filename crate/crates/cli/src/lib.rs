//! Command-line front end for `shockfit`.
//!
//! [`run`] takes the full argv and returns the process exit code:
//! 0 on success, 1 when a verification or comparison fails (or the
//! computation itself errors), 2 on usage, config or I/O errors.

pub mod args;
pub mod commands;
pub mod config;
pub mod table;

use std::fmt;
use std::io::Write;

use clap::Parser;

use args::Cli;

/// Bad flags, config files or output paths.
#[derive(Debug, Clone, PartialEq)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

/// Result of one subcommand before anything is written.
#[derive(Debug, Clone)]
pub struct Outcome {
    /// File contents (or stdout when no `--out` is given). May be empty.
    pub body: String,
    pub summary: String,
    pub pass: bool,
}

#[derive(Debug)]
pub enum Failure {
    Usage(UsageError),
    Compute(shockfit::Error),
}

impl From<UsageError> for Failure {
    fn from(e: UsageError) -> Self {
        Failure::Usage(e)
    }
}

impl From<shockfit::Error> for Failure {
    fn from(e: shockfit::Error) -> Self {
        match e {
            shockfit::Error::InvalidProfile(m) | shockfit::Error::Config(m) => Failure::Usage(UsageError(m)),
            other => Failure::Compute(other),
        }
    }
}

/// Parses argv (config file spliced in) without running anything.
pub fn parse_args(argv: Vec<String>) -> Result<Cli, clap::Error> {
    match config::expand(argv.clone()) {
        Ok(expanded) => Cli::try_parse_from(expanded),
        Err(e) => Err(clap::Error::raw(clap::error::ErrorKind::Io, format!("{e}\n"))),
    }
}

/// Runs a parsed command and returns its outcome without writing it.
pub fn execute(cli: &Cli) -> Result<Outcome, Failure> {
    commands::dispatch(&cli.command)
}

pub fn run<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    let argv: Vec<String> = argv.into_iter().map(Into::into).collect();
    let cli = match parse_args(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let outcome = match execute(&cli) {
        Ok(o) => o,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e}");
            return 2;
        }
        Err(Failure::Compute(e)) => {
            eprintln!("failed: {e}");
            return 1;
        }
    };
    let out = cli.command.common().out.as_ref();
    match out {
        Some(path) => {
            if let Err(e) = std::fs::write(path, &outcome.body) {
                eprintln!("error: cannot write {}: {e}", path.display());
                return 2;
            }
            println!("{}", outcome.summary);
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            if outcome.body.is_empty() {
                let _ = writeln!(stdout, "{}", outcome.summary);
            } else {
                let _ = stdout.write_all(outcome.body.as_bytes());
                eprintln!("{}", outcome.summary);
            }
        }
    }
    if outcome.pass {
        0
    } else {
        1
    }
}
