use aoisched_cli::config::{parse_spec, resolve, ConfigError, Method};
use aoisched_cli::output::write_outputs;
use aoisched_cli::runner::execute;
use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "aoisched",
    about = "Update-schedule experiments for wirelessly powered short-packet clusters",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every sweep point and method of an experiment spec.
    Run {
        /// TOML experiment spec; an empty file runs the stock scenario.
        spec: PathBuf,
        /// Overrides both the device-generator seed and the simulation seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output base path; `.csv` / `.json` are appended.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Comma-separated method overrides (convex, algorithm1,
        /// exhaustive, ibl, simulate).
        #[arg(long, value_delimiter = ',')]
        methods: Option<Vec<String>>,
        /// Recompute every row's error/SNR columns from its policy
        /// columns and fail rows that disagree.
        #[arg(long)]
        audit: bool,
    },
}

fn run_command(
    spec_path: &PathBuf,
    seed: Option<u64>,
    out: Option<PathBuf>,
    methods: Option<Vec<String>>,
    audit: bool,
) -> Result<usize, ConfigError> {
    let mut spec = parse_spec(spec_path)?;
    if let Some(names) = methods {
        let parsed: Result<Vec<Method>, ConfigError> =
            names.iter().map(|s| Method::parse(s.trim())).collect();
        let parsed = parsed?;
        if parsed.is_empty() {
            return Err(ConfigError::Invalid("--methods must name at least one method".into()));
        }
        spec.methods = Some(parsed);
    }
    if let Some(path) = out {
        spec.output.path = path;
    }
    let plan = resolve(&spec, seed)?;
    eprintln!(
        "{}: {} point(s) x {} method(s), {} device(s)",
        plan.scenario,
        plan.sweep_values.len(),
        plan.methods.len(),
        plan.seeds.len()
    );
    let outcome = execute(&plan, audit);
    let paths = write_outputs(&plan.out_base, plan.format, &outcome.rows)?;
    for p in &paths {
        eprintln!("wrote {}", p.display());
    }
    eprintln!("{} row(s), {} failure(s)", outcome.rows.len(), outcome.failures);
    Ok(outcome.failures)
}

fn main() -> ExitCode {
    if let Ok(threads) = std::env::var("AOI_SCHED_THREADS") {
        match threads.parse::<usize>() {
            Ok(n) if n >= 1 => {
                // Ignore a failure: the pool can only be set once.
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => {
                eprintln!("AOI_SCHED_THREADS must be a positive integer, got {threads:?}");
                return ExitCode::from(1);
            }
        }
    }
    let cli = Cli::parse();
    match cli.command {
        Command::Run { spec, seed, out, methods, audit } => {
            match run_command(&spec, seed, out, methods, audit) {
                Ok(0) => ExitCode::SUCCESS,
                Ok(_) => ExitCode::from(2),
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(1)
                }
            }
        }
    }
}
