use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use xgroup_cli::commands::{
    cmd_gen_data, cmd_rare, cmd_run, cmd_sigma_scan, cmd_verify, load_config, MatrixFormat, Overrides,
};
use xgroup_cli::CliResult;

#[derive(Parser)]
#[command(name = "xgroup", version, about = "Learn across-groups similarities from few oracle queries")]
struct Cli {
    /// JSON experiment config; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(flatten)]
    overrides: Overrides,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train and evaluate both learners over the delta grid.
    Run,
    /// Run the property suites and print a pass/fail table.
    Verify,
    /// Estimate the probability of drawing a rare element in each group.
    Rare,
    /// Distribution of cross similarities over freshly built instances.
    SigmaScan {
        #[arg(long, default_value_t = 1000)]
        draws: usize,
    },
    /// Write the group matrices a run would train on.
    GenData {
        #[arg(long, value_enum, default_value = "csv")]
        format: MatrixFormat,
    },
}

fn dispatch(cli: &Cli) -> CliResult<()> {
    let cfg = load_config(cli.config.as_deref(), &cli.overrides)?;
    match &cli.command {
        Command::Run => cmd_run(&cfg).map(drop),
        Command::Verify => cmd_verify(&cfg).map(drop),
        Command::Rare => cmd_rare(&cfg).map(drop),
        Command::SigmaScan { draws } => cmd_sigma_scan(&cfg, *draws).map(drop),
        Command::GenData { format } => cmd_gen_data(&cfg, *format).map(drop),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
