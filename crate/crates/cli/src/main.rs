use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use lmafield::io::{parse_config, run, Command};

#[derive(Parser)]
#[command(name = "lmafield", version, about = "Spatial GLMMs with GRF and LMA field priors")]
struct Cli {
    /// More log output; repeat for debug messages.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Fit the model and write samples, summary, report and predictions.
    Fit(Args),
    /// K-fold cross-validation score.
    Cv(Args),
    /// Draw fields from the prior.
    Simulate(Args),
}

#[derive(clap::Args)]
struct Args {
    #[arg(long)]
    config: PathBuf,
    /// Overrides `[run] output`.
    #[arg(long)]
    output: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let (command, args) = match cli.command {
        Cmd::Fit(a) => (Command::Fit, a),
        Cmd::Cv(a) => (Command::Cv, a),
        Cmd::Simulate(a) => (Command::Simulate, a),
    };
    let result = parse_config(&args.config, command).and_then(|mut cfg| {
        if let Some(o) = args.output {
            cfg.output = o;
        }
        run(&cfg)
    });
    match result {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 2 } else { 1 })
        }
    }
}
