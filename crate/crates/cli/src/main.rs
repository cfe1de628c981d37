use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use shockdefault::fixtures;
use shockdefault_cli::config::{Backend, Config, Format, Overrides, SEED_ENV};
use shockdefault_cli::{pipeline, report, CliError};

#[derive(Parser)]
#[command(name = "shockdefault", version, about = "Default-time construction, pricing and risk-premium runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct RunArgs {
    /// TOML experiment configuration.
    config: PathBuf,
    /// RNG seed (overrides the config and the environment).
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    backend: Option<BackendArg>,
    /// Monte Carlo paths.
    #[arg(long)]
    paths: Option<usize>,
    /// Output directory; without it the report goes to stdout.
    #[arg(long)]
    out: Option<String>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum BackendArg {
    Exact,
    Mc,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline and emit tables and checks.
    Run(RunArgs),
    /// Run the identity checks only.
    Check(RunArgs),
    /// List the bundled fixtures.
    ListFixtures,
}

fn execute(args: &RunArgs, identities_only: bool) -> Result<bool, CliError> {
    let ov = Overrides {
        seed: args.seed,
        backend: args.backend.map(|b| match b {
            BackendArg::Exact => Backend::Exact,
            BackendArg::Mc => Backend::Mc,
        }),
        paths: args.paths,
        out: args.out.clone(),
        format: args.format,
    };
    let env_seed = std::env::var(SEED_ENV).ok();
    let cfg = Config::load(&args.config)?.resolve(&ov, env_seed.as_deref())?;
    let rep = pipeline::run(&cfg, identities_only)?;
    let dir = cfg.output.dir.as_deref().map(Path::new);
    if let Some(text) = report::emit(&rep, cfg.output.format, dir)? {
        std::io::stdout().write_all(text.as_bytes())?;
    } else {
        eprintln!("wrote {:?} report to {}", cfg.output.format, dir.expect("dir").display());
    }
    Ok(rep.all_pass())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(a) => execute(a, false),
        Command::Check(a) => execute(a, true),
        Command::ListFixtures => {
            for name in fixtures::NAMES {
                println!("{:<26} {}", name, fixtures::describe(name).unwrap_or(""));
            }
            Ok(true)
        }
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("{}", e);
            ExitCode::from(e.exit_code())
        }
    }
}
