//! Batch front-end: loads a scene file, runs assignment / matching /
//! target construction / diagnostics, and writes machine-readable reports.
//! Exit codes: 0 success, 1 validation error, 2 I/O error.

mod commands;
mod config;
mod error;
mod proposals;
mod scene;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::Ctx;
use config::RunConfig;
use error::{io_context, CliError, CliResult};

#[derive(Parser)]
#[command(
    name = "codetr",
    about = "Label assignment, one-to-one matching, collaborative target construction, and training diagnostics over scene files",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Run configuration (JSON). Defaults cover everything.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Scene file (JSON).
    #[arg(long, global = true)]
    input: Option<PathBuf>,

    /// Output directory, created if missing.
    #[arg(long, global = true)]
    output: Option<PathBuf>,

    /// Seed for synthetic-proposal generation only.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Worker threads; 0 picks the runtime default.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Run every configured one-to-many head, report positives and counts.
    Assign,
    /// Hungarian-match query predictions against ground truth.
    Match,
    /// Emit query-group layouts, positive-query seeds, and target bundles.
    Targets,
    /// Compute discriminability curves and optional matching instability.
    Diagnose {
        /// Per-epoch matchings file for the instability series.
        #[arg(long)]
        matchings: Option<PathBuf>,
    },
}

fn run(cli: &Cli) -> CliResult<()> {
    let config = RunConfig::load(cli.config.as_deref())?;
    let input = cli
        .input
        .as_deref()
        .ok_or_else(|| CliError::Validation("--input <path> is required".into()))?;
    let out_dir = cli
        .output
        .as_deref()
        .ok_or_else(|| CliError::Validation("--output <dir> is required".into()))?;
    std::fs::create_dir_all(out_dir).map_err(|e| io_context("creating", out_dir, e))?;

    let scene = scene::load_scene(input)?;
    log::info!("loaded {} images from {}", scene.images.len(), input.display());

    let ctx = Ctx { config: &config, scene: &scene, out_dir, seed: cli.seed };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build()
        .map_err(|e| CliError::Validation(format!("thread pool: {e}")))?;
    pool.install(|| match &cli.command {
        Command::Assign => commands::assign::run(&ctx),
        Command::Match => commands::match_cmd::run(&ctx),
        Command::Targets => commands::targets::run(&ctx),
        Command::Diagnose { matchings } => commands::diagnose::run(&ctx, matchings.as_deref()),
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("CODETR_LOG", "error")).init();

    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };

    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
