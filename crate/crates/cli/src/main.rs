//! `dfrelay`: relay selection and outage experiments from the command line.
//!
//! Exit codes: 0 on success, 2 for usage or configuration errors, 3 when an
//! instance has no feasible relay subset.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dfrelay_core::montecarlo::Mode;
use dfrelay_core::scenario::NumberingScheme;

use crate::config::Overrides;

#[derive(Parser)]
#[command(name = "dfrelay", version, about = "Relay selection and time allocation for decode-and-forward networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Optimal relay subset and time allocation for one instance.
    Optimize {
        #[arg(long)]
        instance: PathBuf,
        /// Write the report to PREFIX.json instead of stdout.
        #[arg(long, value_name = "PREFIX")]
        out: Option<String>,
        /// List every subset (pools of at most 12 relays).
        #[arg(long)]
        verbose: bool,
    },
    /// Outage-rate sweep over SNR for each configured topology.
    Simulate {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        #[arg(long, value_parser = parse_scheme)]
        scheme: Option<NumberingScheme>,
    },
    /// Outage-rate sweep under every numbering scheme.
    Numbering {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Operation counts of the recursive search for a pool of N relays.
    Complexity { n: usize },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, value_name = "PREFIX")]
    out: Option<String>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    parallel: usize,
}

impl RunArgs {
    fn overrides(&self, mode: Option<ModeArg>, scheme: Option<NumberingScheme>) -> Overrides {
        Overrides {
            out: self.out.clone(),
            trials: self.trials,
            epsilon: self.epsilon,
            seed: self.seed,
            mode: mode.map(Mode::from),
            scheme,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Optimized,
    #[value(name = "equal_time")]
    EqualTime,
    Both,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Optimized => Mode::Optimized,
            ModeArg::EqualTime => Mode::EqualTime,
            ModeArg::Both => Mode::Both,
        }
    }
}

fn parse_scheme(s: &str) -> Result<NumberingScheme, String> {
    NumberingScheme::from_name(s).map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Optimize { instance, out, verbose } => commands::optimize(&instance, out.as_deref(), verbose),
        Command::Simulate { run, mode, scheme } => {
            commands::simulate(&run.config, &run.overrides(mode, scheme), run.parallel)
        }
        Command::Numbering { run } => commands::numbering(&run.config, &run.overrides(None, None), run.parallel),
        Command::Complexity { n } => commands::complexity(n),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
