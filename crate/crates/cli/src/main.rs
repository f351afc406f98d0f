use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use lipdiff::{emit_profiles, load_scenario, run, CliError, ReportEnvelope};
use lipdiff_core::func::CATALOG;

#[derive(Parser)]
#[command(name = "lipdiff", version, about = "Derived sets, Lipschitz profiles and converse inverse function theorem certificates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file and print its JSON report.
    Run {
        scenario: PathBuf,
        /// Write the report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Directory for CSV profiles.
        #[arg(long)]
        profiles: Option<PathBuf>,
    },
    /// List built-in maps.
    Catalog,
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("LIPDIFF_THREADS") else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().ok().filter(|n| *n > 0).ok_or_else(|| CliError::Validation {
        field: "LIPDIFF_THREADS".into(),
        message: format!("expected a positive integer, found `{raw}`"),
    })?;
    // fails only if a pool already exists, which cannot happen this early
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn run_command(scenario: PathBuf, out: Option<PathBuf>, profiles: Option<PathBuf>) -> Result<u8, CliError> {
    configure_threads()?;
    let start = Instant::now();
    let loaded = load_scenario(&scenario)?;
    let outcome = run(&loaded)?;
    let elapsed = start.elapsed().as_millis() as u64;
    let json = ReportEnvelope::new(&loaded.scenario, &outcome, elapsed).to_json()?;
    match out {
        Some(path) => {
            std::fs::write(&path, json).map_err(|e| CliError::Io { path: path.display().to_string(), source: e })?
        }
        None => print!("{json}"),
    }
    if let Some(dir) = profiles {
        emit_profiles(&loaded.scenario.name, &outcome.report, &dir)?;
    }
    Ok(outcome.verdict.exit_code())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Catalog => {
            for (name, description) in CATALOG {
                println!("{name:<14} {description}");
            }
            ExitCode::SUCCESS
        }
        Command::Run { scenario, out, profiles } => match run_command(scenario, out, profiles) {
            Ok(code) => ExitCode::from(code),
            Err(e) => {
                let obj = serde_json::json!({ "error": e.to_object() });
                println!("{}", serde_json::to_string_pretty(&obj).expect("plain JSON"));
                eprintln!("lipdiff: {e}");
                ExitCode::from(1)
            }
        },
    }
}
