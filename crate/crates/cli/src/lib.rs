//! The `jetode` experiment runner.
//!
//! Every command writes its result tables, optional SVG charts and a
//! `manifest.json` into its output directory. Exit codes: 0 success, 1 a
//! failed check or runtime error, 2 a usage error.

// `!(x <= bound)` is used deliberately so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod args;
pub mod commands;
pub mod manifest;
pub mod stats;
pub mod svg;
pub mod table;

use std::fmt;
use std::path::PathBuf;

pub use args::{Cli, Command};
pub use commands::{execute, Report};

/// Marks an error as caused by invalid user input (exit code 2).
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl fmt::Display) -> anyhow::Error {
    anyhow::Error::new(UsageError(msg.to_string()))
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Output directory of a command: `--outdir` or `results/<command>`.
pub fn outdir(cmd: &Command) -> PathBuf {
    cmd.common()
        .outdir
        .clone()
        .unwrap_or_else(|| PathBuf::from("results").join(cmd.name()))
}

/// Runs a parsed command, reporting to stdout/stderr; returns the exit code.
pub fn run(cmd: Command) -> i32 {
    match execute(&cmd) {
        Ok(report) => {
            for line in &report.summary {
                println!("{line}");
            }
            println!("wrote {}", report.dir.display());
            match &report.failure {
                None => EXIT_OK,
                Some(msg) => {
                    eprintln!("check failed: {msg}");
                    EXIT_CHECK
                }
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            if is_usage(&e) {
                EXIT_USAGE
            } else {
                EXIT_CHECK
            }
        }
    }
}

fn is_usage(e: &anyhow::Error) -> bool {
    e.chain().any(|c| {
        c.downcast_ref::<UsageError>().is_some()
            || matches!(
                c.downcast_ref::<jetode_core::Error>(),
                Some(jetode_core::Error::Invalid(_))
            )
    })
}
