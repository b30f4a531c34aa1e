// Copyright 2026 The hilbert-mfg Authors
// SPDX-License-Identifier: Apache-2.0

//! `hmfg` command-line driver.
//!
//! Exit codes: 0 success, 1 invalid input (model, config or run directory),
//! 2 numerical failure, 64 usage error.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::ffi::OsString;
use std::fmt;
use std::path::Path;

use clap::Parser;
use hilbert_mfg::MfgError;

pub mod args;
pub mod commands;
pub mod config;
pub mod output;
pub mod plot;
pub mod report;

pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;
pub const EXIT_USAGE: i32 = 64;

#[derive(Debug)]
pub enum Failure {
    Validation(String),
    Numerical(String),
    Usage(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Validation(_) => EXIT_VALIDATION,
            Failure::Numerical(_) => EXIT_NUMERICAL,
            Failure::Usage(_) => EXIT_USAGE,
        }
    }

    pub(crate) fn io(path: &Path, e: std::io::Error) -> Self {
        Failure::Validation(format!("{}: {e}", path.display()))
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Validation(m) | Failure::Numerical(m) | Failure::Usage(m) => f.write_str(m),
        }
    }
}

impl From<MfgError> for Failure {
    fn from(e: MfgError) -> Self {
        match e {
            MfgError::DetDiffViolated(_) => Failure::Numerical(format!("det-diff requirement violated: {e}")),
            e if e.is_numerical() => Failure::Numerical(e.to_string()),
            e => Failure::Validation(e.to_string()),
        }
    }
}

/// Parses `argv` (program name first), runs the command and returns the exit
/// code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match args::Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { 0 };
        }
    };
    match commands::dispatch(&cli) {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("error: {f}");
            f.exit_code()
        }
    }
}
