use std::fmt;
use std::process::ExitCode;

use clap::Parser;
use coexist_core::Error;

mod args;
mod commands;
mod output;

use args::{Cli, Command};

/// Bad input from the command line; exits with the usage code.
#[derive(Debug)]
pub struct Usage(pub String);

impl fmt::Display for Usage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

const EXIT_USAGE: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<Usage>() {
            return EXIT_USAGE;
        }
        if let Some(e) = cause.downcast_ref::<Error>() {
            return match e {
                Error::Config(_) | Error::InvalidArgument(_) | Error::Encode(_) | Error::Decode { .. } => EXIT_USAGE,
                _ => EXIT_RUNTIME,
            };
        }
        if cause.is::<csv::Error>() {
            return EXIT_USAGE;
        }
    }
    EXIT_RUNTIME
}

fn dispatch(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Coverage { common, cdf } => commands::coverage(&common, cdf.as_deref()),
        Command::Edprob {
            common,
            threshold,
            trials,
            rssi,
        } => commands::edprob(&common, threshold, trials, &rssi),
        Command::Select {
            common,
            scan,
            running_on,
            channels,
        } => commands::select(&common, &scan, running_on, &channels),
        Command::Adapt {
            common,
            scan,
            channel,
            tech,
        } => commands::adapt(&common, &scan, channel, tech),
        Command::Beacon { action } => commands::beacon(&action),
        Command::Simulate {
            common,
            runs,
            compare_adaptive,
            trace,
        } => commands::simulate(&common, runs, compare_adaptive, trace.as_deref()),
        Command::Sweep {
            common,
            param,
            values,
            runs,
        } => commands::sweep(&common, &param, &values, runs),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
