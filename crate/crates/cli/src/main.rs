//! `annsel` command-line driver.
//!
//! Each command prints one JSON document on standard output; warnings and
//! errors go to standard error. Exit status: 0 success, 2 usage or
//! validation error, 3 I/O error, 4 numerical failure.

mod args;
mod commands;
mod error;
mod manifest;

use std::io::Write;
use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = match &cli.command {
        Command::GenData(a) => commands::gen_data(a),
        Command::Train(a) => commands::train_cmd(a),
        Command::Sweep(a) => commands::sweep_cmd(a),
        Command::Predict(a) => commands::predict_cmd(a),
        Command::Compare(a) => commands::compare_cmd(a),
    };
    match result {
        Ok(doc) => {
            let text = serde_json::to_string_pretty(&doc).expect("output serialises");
            // A closed pipe downstream is not a failure of the command.
            let _ = writeln!(std::io::stdout(), "{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
