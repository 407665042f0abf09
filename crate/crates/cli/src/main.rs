//! Command-line front end: build states, evaluate measures, run searches.
//!
//! Exit codes: 0 success, 1 numerical failure (diagnostic JSON on stdout),
//! 2 usage error.

mod args;
mod commands;

use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;

use args::Cli;
use quantumness::Error;

/// A failed command: exit code and message.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
    /// Printed to stdout before exiting.
    pub diagnostic: Option<String>,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Failure { code: 2, message: message.into(), diagnostic: None }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let message = e.to_string();
        match e {
            Error::NoConvergence { iterations, residual } => {
                let diagnostic = serde_json::json!({ "error": message, "iterations": iterations, "residual": residual });
                Failure { code: 1, message, diagnostic: Some(diagnostic.to_string()) }
            }
            Error::NonFinite(_) | Error::Truncation(_) => {
                let diagnostic = serde_json::json!({ "error": message });
                Failure { code: 1, message, diagnostic: Some(diagnostic.to_string()) }
            }
            _ => Failure { code: 2, message, diagnostic: None },
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::usage(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be positive");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let start = Instant::now();
    match commands::run(&cli, start) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            if let Some(d) = f.diagnostic {
                println!("{d}");
            }
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
