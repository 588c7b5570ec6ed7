use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use elevform_core::analysis::rigidity_report;
use elevform_core::config::{echo_scenario, load_scenario};
use elevform_core::output::{emit_csv, emit_plot_data, emit_summary};
use elevform_core::scenario::Scenario;
use elevform_core::sim::{self, total_disturbance_target, SimState};
use elevform_core::{par, Execution, SimError};

#[derive(Parser)]
#[command(
    name = "elevform",
    version,
    about = "Elevation-angle formation control simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario and write trajectory, plot data and a summary.
    Run {
        scenario: PathBuf,
        #[arg(short, long, default_value = "out")]
        output: PathBuf,
    },
    /// Report the rigidity of the desired formation.
    CheckRigidity { scenario: PathBuf },
    /// Run every scenario matching a glob, one output subdirectory each.
    Sweep {
        pattern: String,
        #[arg(short, long, default_value = "out")]
        output: PathBuf,
        /// Run scenarios one after another.
        #[arg(long)]
        sequential: bool,
    },
    /// Print the normalized scenario.
    Echo { scenario: PathBuf },
}

/// Failure class, mapped to the process exit status.
#[derive(Debug)]
enum Failure {
    /// Parse, validation, rigidity or I/O problems.
    Input(String),
    /// Geometry breakdown during the run.
    Runtime(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Input(_) => 1,
            Failure::Runtime(_) => 2,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Input(m) | Failure::Runtime(m) => m,
        }
    }
}

fn load(path: &Path) -> Result<Scenario, Failure> {
    load_scenario(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn sim_failure(e: SimError) -> Failure {
    match e {
        SimError::RigidityCheckFailed { .. } => Failure::Input(e.to_string()),
        _ => Failure::Runtime(e.to_string()),
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure::Input(format!("{}: {e}", path.display()))
}

fn run_one(scenario: &Scenario, dir: &Path, exec: Execution) -> Result<String, Failure> {
    sim::check_rigidity(scenario).map_err(sim_failure)?;
    let (states, last) = sim::integrate(scenario).map_err(sim_failure)?;
    let log = sim::log_from_states(scenario, states, exec).map_err(sim_failure)?;
    fs::create_dir_all(dir).map_err(|e| io_failure(dir, e))?;
    let csv = dir.join("trajectory.csv");
    emit_csv(&log, &csv).map_err(|e| io_failure(&csv, e))?;
    emit_plot_data(&log, dir).map_err(|e| io_failure(dir, e))?;
    let rigidity = rigidity_report(scenario).map_err(|f| Failure::Runtime(f.to_string()))?;
    let summary = emit_summary(&log, &scenario.name, &rigidity, &estimates(scenario, &last));
    let path = dir.join("summary.txt");
    fs::write(&path, &summary).map_err(|e| io_failure(&path, e))?;
    Ok(summary)
}

fn estimates(
    scenario: &Scenario,
    state: &SimState,
) -> Vec<(usize, elevform_core::Vec3, elevform_core::Vec3)> {
    scenario
        .graph
        .followers()
        .map(|i| {
            (
                i,
                state.estimate_global(scenario, i),
                total_disturbance_target(scenario, i),
            )
        })
        .collect()
}

fn check_rigidity(path: &Path) -> Result<String, Failure> {
    let scenario = load(path)?;
    let report = rigidity_report(&scenario).map_err(|f| Failure::Runtime(f.to_string()))?;
    let r = &report.rank;
    let mut out = String::new();
    let _ = writeln!(out, "scenario: {}", scenario.name);
    let _ = writeln!(out, "desired shape: {:?}", report.shape_source);
    let _ = writeln!(out, "rank: {} / {}", r.rank, r.required);
    let sv: Vec<String> = r
        .singular_values
        .iter()
        .map(|s| format!("{s:.6e}"))
        .collect();
    let _ = writeln!(out, "singular values: {}", sv.join(" "));
    match &report.constants {
        Some(c) => {
            let _ = writeln!(out, "lambda+: {:.6e}", c.lambda_plus);
        }
        None => {
            let _ = writeln!(out, "lambda+: none");
        }
    }
    let _ = writeln!(
        out,
        "verdict: {}",
        if r.rigid { "rigid" } else { "not rigid" }
    );
    if r.rigid {
        Ok(out)
    } else {
        Err(Failure::Input(out))
    }
}

fn sweep(pattern: &str, output: &Path, exec: Execution) -> Result<String, Failure> {
    let paths: Vec<PathBuf> = glob::glob(pattern)
        .map_err(|e| Failure::Input(format!("bad pattern {pattern}: {e}")))?
        .filter_map(Result::ok)
        .collect();
    if paths.is_empty() {
        return Err(Failure::Input(format!("no scenario matches {pattern}")));
    }
    // Runs are spread across threads, so each keeps its own analysis sequential.
    let results = par::map(exec, &paths, |path| {
        let stem = path.file_stem().unwrap_or_default();
        load(path).and_then(|s| run_one(&s, &output.join(stem), Execution::Sequential))
    });
    let mut out = String::new();
    let mut worst: Option<Failure> = None;
    for (path, result) in paths.iter().zip(results) {
        match result {
            Ok(_) => {
                let _ = writeln!(out, "ok    {}", path.display());
            }
            Err(f) => {
                let _ = writeln!(out, "FAIL  {}: {}", path.display(), f.message());
                if worst.as_ref().is_none_or(|w| f.code() > w.code()) {
                    worst = Some(f);
                }
            }
        }
    }
    match worst {
        None => Ok(out),
        Some(Failure::Input(_)) => Err(Failure::Input(out)),
        Some(Failure::Runtime(_)) => Err(Failure::Runtime(out)),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { scenario, output } => {
            load(&scenario).and_then(|s| run_one(&s, &output, Execution::default()))
        }
        Command::CheckRigidity { scenario } => check_rigidity(&scenario),
        Command::Sweep {
            pattern,
            output,
            sequential,
        } => {
            let exec = if sequential {
                Execution::Sequential
            } else {
                Execution::default()
            };
            sweep(&pattern, &output, exec)
        }
        Command::Echo { scenario } => load(&scenario).map(|s| echo_scenario(&s)),
    };
    match result {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("{}", f.message().trim_end());
            ExitCode::from(f.code())
        }
    }
}
