use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use transmute_lab::config::ExperimentConfig;
use transmute_lab::experiments::{self, RunOptions};
use transmute_lab::report::Report;
use transmute_lab::suite;

#[derive(Parser)]
#[command(name = "transmute-lab", version, about = "Numerical verification lab for -Δ_g + V")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment config and write its reports.
    Run {
        config: PathBuf,
        /// Also write SVG plots next to the CSV files.
        #[arg(long)]
        plots: bool,
        /// Worker threads for independent cases.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Output directory; overrides the config's `output`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Parse and validate a config without running numerics.
    Validate { config: PathBuf },
    /// Run the full acceptance battery.
    Suite {
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Write every experiment's reports under this directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

const EXIT_FAIL: u8 = 1;
const EXIT_CONFIG: u8 = 2;

fn with_pool<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> T {
    match rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build() {
        Ok(pool) => pool.install(f),
        Err(_) => f(),
    }
}

fn load(path: &Path) -> Result<ExperimentConfig, ExitCode> {
    let cfg = ExperimentConfig::from_path(path).map_err(|e| {
        eprintln!("config error: {e}");
        ExitCode::from(EXIT_CONFIG)
    })?;
    experiments::validate(&cfg).map_err(|e| {
        eprintln!("config error: {e}");
        ExitCode::from(EXIT_CONFIG)
    })?;
    Ok(cfg)
}

fn print_gates(report: &Report) {
    for g in &report.gates {
        println!("{} {}", if g.passed { "pass" } else { "FAIL" }, g.describe());
    }
}

fn run(config: &Path, plots: bool, jobs: usize, out: Option<PathBuf>) -> ExitCode {
    let cfg = match load(config) {
        Ok(c) => c,
        Err(code) => return code,
    };
    let report = with_pool(jobs, || experiments::run(&cfg, RunOptions { parallel: jobs > 1 }));
    let dir = out.or_else(|| cfg.output.clone()).unwrap_or_else(|| PathBuf::from("out"));
    match report.write(&dir) {
        Ok(files) => files.iter().for_each(|f| println!("wrote {}", f.display())),
        Err(e) => {
            eprintln!("cannot write reports to {}: {e}", dir.display());
            return ExitCode::from(EXIT_FAIL);
        }
    }
    if plots {
        for p in &report.plots {
            match p.render(&dir.join("plots")) {
                Ok(path) => println!("wrote {}", path.display()),
                Err(e) => eprintln!("plot {} skipped: {e}", p.name),
            }
        }
    }
    for n in &report.notes {
        println!("note: {n}");
    }
    print_gates(&report);
    if report.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_FAIL)
    }
}

fn main() -> ExitCode {
    transmute_lab::fix_parallelism();
    match Cli::parse().command {
        Command::Run { config, plots, jobs, out } => run(&config, plots, jobs, out),
        Command::Validate { config } => match load(&config) {
            Ok(cfg) => {
                println!("{}: {} cases, valid", cfg.experiment.as_str(), cfg.cases.len());
                ExitCode::SUCCESS
            }
            Err(code) => code,
        },
        Command::Suite { jobs, out } => {
            let result = with_pool(jobs, || suite::run_suite(RunOptions { parallel: jobs > 1 }, |m| eprintln!("{m}")));
            let report = match result {
                Ok(r) => r,
                Err(e) => {
                    eprintln!("config error: {e}");
                    return ExitCode::from(EXIT_CONFIG);
                }
            };
            if let Some(dir) = out {
                if let Err(e) = report.write(&dir) {
                    eprintln!("cannot write reports to {}: {e}", dir.display());
                }
            }
            report.lines().iter().for_each(|l| println!("{l}"));
            if report.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_FAIL)
            }
        }
    }
}
