use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tailproc_cli::{run, validate_config, ExperimentConfig, Stage};

#[derive(Parser)]
#[command(name = "tailproc", version, about = "Simulate and certify tail processes of regularly varying time series")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the time change formula, the Pareto radius and dissipativity.
    Certify(RunArgs),
    /// Build the moving-shift and tilted representations and cross-check them.
    Construct(RunArgs),
    /// Simulate paths from a truncated particle system.
    Simulate(RunArgs),
    /// Simulate, then estimate maximal and extremal indices.
    Indices(RunArgs),
    /// Simulate, then recover the empirical tail process.
    Estimate(RunArgs),
    /// Run the stages listed in the configuration (all by default).
    RunAll(RunArgs),
    /// Check a configuration file and list every problem in it.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Override the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the configured output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    workers: Option<usize>,
    /// Print the report to stdout.
    #[arg(long)]
    json: bool,
}

const EXIT_FAILED: u8 = 1;
const EXIT_ERROR: u8 = 2;

fn load(path: &PathBuf) -> Result<ExperimentConfig, ExitCode> {
    let raw = std::fs::read_to_string(path).map_err(|e| {
        eprintln!("error: cannot read {}: {e}", path.display());
        ExitCode::from(EXIT_ERROR)
    })?;
    validate_config(&raw).map_err(|errors| {
        for e in &errors {
            eprintln!("{}: {e}", path.display());
        }
        ExitCode::from(EXIT_ERROR)
    })
}

fn execute(args: RunArgs, stages: Option<&[Stage]>) -> ExitCode {
    let mut config = match load(&args.config) {
        Ok(c) => c,
        Err(code) => return code,
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(out) = args.out {
        config.output_dir = out;
    }
    if let Some(n) = args.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot start {n} workers: {e}");
            return ExitCode::from(EXIT_ERROR);
        }
    }
    let stages = stages.map_or_else(|| config.stages.clone(), <[Stage]>::to_vec);
    let output = match run(&config, &stages) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_ERROR);
        }
    };
    match output.write(&config.output_dir) {
        Ok(files) => {
            for f in files {
                eprintln!("wrote {}", f.display());
            }
        }
        Err(e) => {
            eprintln!("error: writing to {}: {e}", config.output_dir.display());
            return ExitCode::from(EXIT_ERROR);
        }
    }
    let report = &output.report;
    if args.json {
        print!("{}", report.to_json());
    }
    for c in &report.checks {
        eprintln!("{:<5} {}/{}: {}", if c.pass { "pass" } else { "FAIL" }, c.stage.name(), c.name, c.detail);
    }
    if report.pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_FAILED)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Certify(a) => execute(a, Some(&[Stage::Certify])),
        Command::Construct(a) => execute(a, Some(&[Stage::Construct])),
        Command::Simulate(a) => execute(a, Some(&[Stage::Simulate])),
        Command::Indices(a) => execute(a, Some(&[Stage::Indices])),
        Command::Estimate(a) => execute(a, Some(&[Stage::Estimate])),
        Command::RunAll(a) => execute(a, None),
        Command::Validate { config } => match load(&config) {
            Ok(_) => {
                println!("{}: ok", config.display());
                ExitCode::SUCCESS
            }
            Err(code) => code,
        },
    }
}
