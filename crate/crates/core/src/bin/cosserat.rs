use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use cosserat::commands::{run, Command, RunConfig};
use cosserat::Error;

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Sub {
    BuildBoundary,
    InsertDipole,
    Energy,
    Minimize,
    Analyze,
    Export,
}

/// Dipole constructions, degree analysis and restricted minimization for Cosserat fields.
#[derive(Parser, Debug)]
#[command(name = "cosserat", version)]
struct Cli {
    #[arg(value_enum)]
    command: Sub,
    /// JSON config; missing sections take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, env = "COSSERAT_THREADS")]
    threads: Option<usize>,
    #[arg(long)]
    verbose: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let command = match cli.command {
        Sub::BuildBoundary => Command::BuildBoundary,
        Sub::InsertDipole => Command::InsertDipole,
        Sub::Energy => Command::Energy,
        Sub::Minimize => Command::Minimize,
        Sub::Analyze => Command::Analyze,
        Sub::Export => Command::Export,
    };
    if let Some(k) = cli.threads {
        // only fails if a pool already exists
        let _ = rayon::ThreadPoolBuilder::new().num_threads(k).build_global();
    }
    let result = cli.config.as_deref().map_or_else(|| Ok(RunConfig::default()), RunConfig::load).and_then(|cfg| run(command, &cfg, &cli.out));
    match result {
        Ok(path) => {
            if cli.verbose {
                eprintln!("wrote {}", path.display());
            }
            println!("{}", path.display());
            ExitCode::SUCCESS
        }
        Err(e) => report(&e),
    }
}

fn report(e: &Error) -> ExitCode {
    let obj = serde_json::json!({ "kind": e.kind(), "message": e.to_string() });
    eprintln!("{obj}");
    ExitCode::from(if e.is_input_error() { 2 } else { 1 })
}
