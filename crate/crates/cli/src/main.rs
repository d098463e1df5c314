mod args;
mod fixture;
mod pipeline;
mod study;

use std::path::PathBuf;
use std::process::ExitCode;

use biascorr::{Error, ErrorKind};
use clap::Parser;

use args::{Cli, Command};
use study::StudyRun;

/// 2 for configuration errors, 3 for data errors, 4 for numeric failures.
fn exit_code(err: &anyhow::Error) -> u8 {
    err.chain()
        .find_map(|e| e.downcast_ref::<Error>())
        .map(|e| match e.kind() {
            ErrorKind::Config => 2,
            ErrorKind::Data => 3,
            ErrorKind::Numeric => 4,
        })
        .unwrap_or(1)
}

fn require_seed(seed: Option<u64>, command: &str) -> Result<u64, Error> {
    seed.ok_or_else(|| Error::Config(format!("{command} is stochastic and needs --seed")))
}

fn no_config(cli: &Cli, command: &str) -> Result<(), Error> {
    match &cli.config {
        Some(_) => Err(Error::Config(format!("--config applies to simulate, mtl and ate, not {command}"))),
        None => Ok(()),
    }
}

fn plain_out(cli: &Cli) -> PathBuf {
    cli.out.clone().unwrap_or_else(|| PathBuf::from("."))
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    let ctx = |seed| StudyRun { config: cli.config.as_deref(), out: cli.out.as_deref(), jobs: cli.jobs, seed, quiet: cli.quiet };
    match &cli.command {
        Command::Train(cmd) => {
            no_config(cli, "train")?;
            pipeline::train(cmd, require_seed(cli.seed, "train")?, &plain_out(cli), cli.quiet)
        }
        Command::Evaluate(cmd) => {
            no_config(cli, "evaluate")?;
            pipeline::evaluate(cmd, &plain_out(cli), cli.quiet)
        }
        Command::Mnist(cmd) => {
            no_config(cli, "mnist")?;
            pipeline::mnist(cmd, require_seed(cli.seed, "mnist")?, &plain_out(cli), cli.quiet)
        }
        Command::MnistFixture(cmd) => {
            no_config(cli, "mnist-fixture")?;
            fixture::write(&plain_out(cli), cmd.count, require_seed(cli.seed, "mnist-fixture")?, cli.quiet)
        }
        Command::Simulate(cmd) => study::simulate(&cmd.study, &cmd.study_args, &ctx(require_seed(cli.seed, "simulate")?)),
        Command::Mtl(args) => study::mtl(args, &ctx(require_seed(cli.seed, "mtl")?)),
        Command::Ate(cmd) => study::ate(&cmd.study_args, cmd.exact_oracle, &ctx(require_seed(cli.seed, "ate")?)),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
