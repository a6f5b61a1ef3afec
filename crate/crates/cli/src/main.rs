use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mimo_lab_cli::{cmd_calibrate, cmd_equalize, cmd_simulate, cmd_verify, output_dir, Outcome, Scenario, EXIT_USAGE};

#[derive(Parser, Debug)]
#[command(name = "mimolab", version, about = "Dual-polarization IQ channel simulator and MIMO equalizer harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct ScenarioArgs {
    /// Scenario JSON file
    #[arg(long)]
    scenario: PathBuf,
    /// Output directory (overrides output.dir)
    #[arg(long)]
    out: Option<PathBuf>,
    /// RNG seed (overrides the scenario's seed)
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate the channel and write the input, every probe and metadata
    Simulate(ScenarioArgs),
    /// Simulate, train the configured equalizer class and write taps and a report
    Equalize(ScenarioArgs),
    /// Estimate skews and polarization from a taps file
    Calibrate {
        #[command(flatten)]
        args: ScenarioArgs,
        /// Taps CSV written by `equalize` for the same scenario
        #[arg(long)]
        taps: PathBuf,
    },
    /// Run an invariant suite: algebra, convergence, calibration, widely_linear
    Verify {
        #[arg(long)]
        suite: String,
    },
}

fn load(args: &ScenarioArgs) -> anyhow::Result<(Scenario, PathBuf)> {
    let scenario = Scenario::load(&args.scenario)?.resolve(args.seed)?;
    let out = output_dir(&scenario, args.out.as_deref())?;
    Ok((scenario, out))
}

fn run(cli: Cli) -> anyhow::Result<Outcome> {
    match cli.command {
        Command::Simulate(args) => {
            let (s, out) = load(&args)?;
            cmd_simulate(&s, &out)
        }
        Command::Equalize(args) => {
            let (s, out) = load(&args)?;
            cmd_equalize(&s, &out)
        }
        Command::Calibrate { args, taps } => {
            let (s, out) = load(&args)?;
            cmd_calibrate(&s, &taps, &out)
        }
        Command::Verify { suite } => cmd_verify(&suite),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE as u8 } else { 0 });
        }
    };
    match run(cli) {
        Ok(outcome) => {
            for line in &outcome.lines {
                println!("{line}");
            }
            ExitCode::from(outcome.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_USAGE as u8)
        }
    }
}
