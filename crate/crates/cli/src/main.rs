mod args;
mod commands;
mod output;

use std::ffi::OsString;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use args::{Cli, Command};
use commands::Failure;

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;

fn main() -> ExitCode {
    run(std::env::args_os())
}

fn run(argv: impl IntoIterator<Item = OsString>) -> ExitCode {
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp
                | ErrorKind::DisplayVersion
                | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => ExitCode::SUCCESS,
                _ => ExitCode::from(EXIT_USAGE),
            };
        }
    };

    let threads = match &cli.command {
        Command::Pca(a) => a.threads.threads,
        Command::Value(a) => a.threads.threads,
        Command::Exact(a) => a.threads.threads,
        Command::Baseline(a) => a.threads.threads,
        Command::Select(a) => a.threads.threads,
        Command::Correlate(_) | Command::GenBenchmark(_) => None,
    };
    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
    {
        Ok(pool) => pool,
        Err(e) => {
            eprintln!("error: cannot start worker threads: {e}");
            return ExitCode::from(EXIT_DATA);
        }
    };

    let outcome = pool.install(|| match &cli.command {
        Command::Pca(a) => commands::pca(a),
        Command::Value(a) => commands::value(a),
        Command::Exact(a) => commands::exact(a),
        Command::Baseline(a) => commands::baseline(a),
        Command::Select(a) => commands::select(a),
        Command::Correlate(a) => commands::correlate(a),
        Command::GenBenchmark(a) => commands::gen_benchmark(a),
    });
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_DATA)
        }
    }
}
