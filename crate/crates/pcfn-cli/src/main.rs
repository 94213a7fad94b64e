//! Operator entry point: reproducible commands over the point-cloud flow
//! network. Exit codes: 0 ok, 2 config error, 3 data error, 4 numerical
//! failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use pcfn_cli::commands;
use pcfn_cli::config::CommonArgs;

#[derive(Parser)]
#[command(
    name = "pcfn",
    version,
    about = "Point-cloud flow network: generate data, train, predict, audit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate an oracle-solved dataset with manifest and splits.
    GenData {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Train a model over a dataset directory.
    Train {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Predict fields for a coordinates CSV using a checkpoint.
    Predict {
        /// Input sample CSV (x,y header is enough).
        input: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Pointwise error report of predictions against a sample's fields.
    Eval {
        /// Input sample CSV with target fields.
        input: PathBuf,
        /// Also rasterize per-field error maps as PNG.
        #[arg(long)]
        plot: bool,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Conservation and gradient residual audit of a checkpoint.
    Residuals {
        /// Input sample CSV.
        input: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Critical-point extraction for a sample.
    Critical {
        /// Input sample CSV.
        input: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Grid search over global-feature and batch sizes.
    GridSearch {
        #[command(flatten)]
        common: CommonArgs,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::GenData { common } => commands::cmd_gen_data(common),
        Command::Train { common } => commands::cmd_train(common),
        Command::Predict { input, common } => commands::cmd_predict(common, input),
        Command::Eval {
            input,
            plot,
            common,
        } => commands::cmd_eval(common, input, *plot),
        Command::Residuals { input, common } => commands::cmd_residuals(common, input),
        Command::Critical { input, common } => commands::cmd_critical(common, input),
        Command::GridSearch { common } => commands::cmd_grid_search(common),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.one_line());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
