//! Command-line front end: dataset generation, training, translation,
//! evaluation and plotting.

pub mod checkpoint;
mod commands;
pub mod config;
pub mod plot;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

pub use commands::{
    eval, eval_with, gen_data, load_model, plot as plot_files, train, translate, TrainOverrides,
};

use crate::error::Result;
use crate::eval::Direction;

#[derive(Parser, Debug)]
#[command(
    name = "sig2sig",
    version,
    about = "Unpaired 1D signal translation with a CycleGAN"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Synthesize a paired train/test dataset.
    GenData {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train the CycleGAN; writes model.ckpt and losses.csv.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long = "lambda", allow_negative_numbers = true)]
        lambda_cycle: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        beta1: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        lr: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        /// Suppress per-epoch progress on stderr.
        #[arg(long)]
        quiet: bool,
    },
    /// Translate every signal of a .sig file.
    Translate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        direction: Direction,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score held-out pairs in both directions.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        report: PathBuf,
    },
    /// Plot one or two .sig files as an SVG grid.
    Plot {
        #[arg(long, num_args = 1..=2, required = true)]
        signals: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        spectrum: bool,
    },
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::GenData { config, out, seed } => {
            println!("{}", gen_data(config.as_deref(), &out, seed)?);
        }
        Command::Train {
            data,
            out,
            config,
            epochs,
            lambda_cycle,
            beta1,
            lr,
            seed,
            quiet,
        } => {
            let overrides = TrainOverrides {
                epochs,
                lambda_cycle,
                beta1,
                lr,
                seed,
            };
            let logs = train(&data, &out, config.as_deref(), &overrides, |l| {
                if !quiet {
                    eprintln!(
                        "epoch {:>3}  adv_g {:.4}  adv_f {:.4}  d_x {:.4}  d_y {:.4}  cycle {:.4}  {:.2}s",
                        l.epoch,
                        l.adv_g,
                        l.adv_f,
                        l.d_x,
                        l.d_y,
                        l.cycle(),
                        l.seconds
                    );
                }
            })?;
            let seconds: f64 = logs.iter().map(|l| l.seconds).sum();
            println!(
                "trained {} epochs in {seconds:.1}s; wrote {}",
                logs.len(),
                out.display()
            );
        }
        Command::Translate {
            checkpoint,
            input,
            direction,
            out,
        } => {
            let n = translate(&checkpoint, &input, direction, &out)?;
            println!("translated {n} signals ({direction}) to {}", out.display());
        }
        Command::Eval {
            checkpoint,
            data,
            report,
        } => {
            for r in eval(&checkpoint, &data, &report)? {
                let m = r.mean();
                println!(
                    "{}: mean r_time {:.4}  mae_time {:.4}  r_freq {:.4}  mae_freq {:.4}",
                    r.direction, m.r_time, m.mae_time, m.r_freq, m.mae_freq
                );
            }
        }
        Command::Plot {
            signals,
            out,
            spectrum,
        } => {
            let paths: Vec<&Path> = signals.iter().map(PathBuf::as_path).collect();
            plot_files(&paths, &out, spectrum)?;
            println!("wrote {}", out.display());
        }
    }
    Ok(())
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
