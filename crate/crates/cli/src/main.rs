mod args;
mod commands;
mod error;
mod manifest;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command, FileConfig};
use error::Result;

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        2 => log::LevelFilter::Debug,
        _ => log::LevelFilter::Trace,
    };
    // no timestamps: logs of identical runs are identical
    env_logger::Builder::new()
        .filter_level(level)
        .parse_env("RIDGECAST_LOG")
        .format_timestamp(None)
        .target(env_logger::Target::Stderr)
        .init();
}

#[cfg(feature = "parallel")]
fn init_threads(threads: Option<usize>) -> Result<()> {
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| error::CliError::Config(format!("cannot start {n} worker threads: {e}")))?;
        log::info!("using {n} worker threads");
    }
    Ok(())
}

#[cfg(not(feature = "parallel"))]
fn init_threads(threads: Option<usize>) -> Result<()> {
    if threads.is_some_and(|n| n != 1) {
        log::warn!("built without the parallel feature; --threads is ignored");
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let (command, threads) = match &cli.config {
        Some(path) => {
            let file = FileConfig::load(path)?;
            let threads = cli.threads.or(file.threads);
            (args::merge(cli.command, file), threads)
        }
        None => (cli.command, cli.threads),
    };
    init_threads(threads)?;
    log::info!("running {}", command.name());
    match command {
        Command::Simulate(a) => commands::simulate::run(a),
        Command::Screen(a) => commands::regress::screen(a),
        Command::Fit(a) => commands::regress::fit(a),
        Command::Nowcast(a) => commands::nowcast::run(a),
        Command::Verify(a) => commands::verify::run(a),
        Command::SynthPanel(a) => commands::synth::run(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging(cli.verbose);
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
