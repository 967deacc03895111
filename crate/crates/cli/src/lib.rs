//! The `coopgame` command line.
//!
//! ```text
//! coopgame gains    --scenario FILE
//! coopgame simulate --scenario FILE --out DIR
//! coopgame sweep    --scenario FILE --out DIR [--param NAME] [--values 0.2,0.5,0.9]
//! coopgame serve    [--port 8400] [--scenarios DIR]
//! ```
//!
//! Exit codes: 0 success, 1 usage, 2 validation, 3 solver failure, 4 I/O.

pub mod error;
pub mod output;
pub mod report;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use coopgame_core::scenario::{load_scenario, ScenarioDocument};
use coopgame_core::simulation::{cost_report, run_with_solution, sweep, SweepParam};
use coopgame_core::ControllerRegistry;
use coopgame_live::{ServerConfig, DEFAULT_PORT};

pub use error::{CliError, ExitKind};

#[derive(Debug, Parser)]
#[command(name = "coopgame", version, about = "Cooperative, Nash and LQR controllers for human-robot interaction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print gains, shared reference, equivalent impedance, residuals and eigenvalues.
    Gains {
        #[arg(long)]
        scenario: PathBuf,
    },
    /// Run one closed loop and write trajectory.csv and costs.csv.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one simulation per value and write a trajectory per run plus summary.csv.
    Sweep {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// alpha, q_rr_scale or r_r; defaults to the scenario file's sweep block.
        #[arg(long)]
        param: Option<String>,
        /// Comma-separated values; defaults to the matching sweep block.
        #[arg(long)]
        values: Option<String>,
    },
    /// Serve live sessions over WebSocket.
    Serve {
        #[arg(long, default_value_t = DEFAULT_PORT)]
        port: u16,
        /// Directory of scenario files offered to clients.
        #[arg(long, default_value = "scenarios")]
        scenarios: PathBuf,
    },
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { ExitKind::Usage as i32 } else { 0 };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { err.write_all(text.as_bytes()) } else { out.write_all(text.as_bytes()) };
            return code;
        }
    };
    match dispatch(cli.command, out, err) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.code()
        }
    }
}

fn dispatch(command: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    let registry = ControllerRegistry::builtin();
    match command {
        Command::Gains { scenario } => gains(&scenario, &registry, out),
        Command::Simulate { scenario, out: dir } => simulate(&scenario, &dir, &registry, out),
        Command::Sweep { scenario, out: dir, param, values } => {
            run_sweep(&scenario, &dir, param.as_deref(), values.as_deref(), &registry, out, err)
        }
        Command::Serve { port, scenarios } => serve(port, scenarios, registry, out),
    }
}

fn load(path: &Path) -> Result<ScenarioDocument, CliError> {
    Ok(load_scenario(path)?)
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn gains(path: &Path, registry: &ControllerRegistry, out: &mut dyn Write) -> Result<(), CliError> {
    let doc = load(path)?;
    let (ss, solution) = doc.scenario.synthesize(registry)?;
    let controller = registry.get(&doc.scenario.controller)?;
    let text = report::gains_report(&doc.scenario, &ss, &solution, controller.as_ref())?;
    out.write_all(text.as_bytes()).map_err(|e| CliError::new(ExitKind::Io, e.to_string()))
}

fn simulate(path: &Path, dir: &Path, registry: &ControllerRegistry, out: &mut dyn Write) -> Result<(), CliError> {
    let doc = load(path)?;
    let s = &doc.scenario;
    let (ss, solution) = s.synthesize(registry)?;
    let traj = run_with_solution(s, ss, solution, None)?;
    let costs = cost_report(&traj, s, s.effective_window())?;
    ensure_dir(dir)?;
    write_file(&dir.join("trajectory.csv"), &output::trajectory_csv(&traj))?;
    write_file(&dir.join("costs.csv"), &output::costs_csv(&costs))?;
    let _ = writeln!(out, "wrote {} samples to {}", traj.len(), dir.display());
    Ok(())
}

fn parse_values(text: &str) -> Result<Vec<f64>, CliError> {
    let values: Vec<f64> = text
        .split(',')
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .map(|v| v.parse::<f64>().map_err(|_| CliError::usage(format!("--values: `{v}` is not a number"))))
        .collect::<Result<_, _>>()?;
    if values.is_empty() {
        return Err(CliError::usage("--values needs at least one value"));
    }
    Ok(values)
}

fn sweep_plan(doc: &ScenarioDocument, param: Option<&str>, values: Option<&str>) -> Result<(SweepParam, Vec<f64>), CliError> {
    let param = match param {
        Some(p) => p.parse::<SweepParam>().map_err(CliError::usage)?,
        None => match doc.sweeps.as_slice() {
            [only] => only.param,
            [] => return Err(CliError::usage("no --param given and the scenario has no sweep block")),
            _ => return Err(CliError::usage("the scenario has several sweep blocks; pick one with --param")),
        },
    };
    let values = match values {
        Some(v) => parse_values(v)?,
        None => doc
            .sweeps
            .iter()
            .find(|b| b.param == param)
            .map(|b| b.values.clone())
            .ok_or_else(|| CliError::usage(format!("no --values given and the scenario has no `{param}` sweep block")))?,
    };
    Ok((param, values))
}

fn run_sweep(
    path: &Path,
    dir: &Path,
    param: Option<&str>,
    values: Option<&str>,
    registry: &ControllerRegistry,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<(), CliError> {
    // usage problems in the flags are reported before touching the file
    if let Some(v) = values {
        parse_values(v)?;
    }
    let doc = load(path)?;
    let (param, values) = sweep_plan(&doc, param, values)?;
    let entries = sweep(&doc.scenario, param, &values, registry)?;
    ensure_dir(dir)?;
    let mut first_failure = None;
    for (i, e) in entries.iter().enumerate() {
        match &e.outcome {
            Ok(run) => write_file(&dir.join(output::sweep_file(i)), &output::trajectory_csv(&run.trajectory))?,
            Err(failure) => {
                let _ = writeln!(err, "{param} = {}: {failure}", e.value);
                first_failure.get_or_insert_with(|| CliError::from(failure.clone()));
            }
        }
    }
    write_file(&dir.join("summary.csv"), &output::summary_csv(&entries, doc.scenario.plant.dof()))?;
    let _ = writeln!(out, "wrote {} runs to {}", entries.len(), dir.display());
    match first_failure {
        Some(e) => Err(CliError::new(e.kind, format!("{} of {} runs failed", entries.iter().filter(|e| e.outcome.is_err()).count(), entries.len()))),
        None => Ok(()),
    }
}

fn serve(port: u16, scenarios: PathBuf, registry: ControllerRegistry, out: &mut dyn Write) -> Result<(), CliError> {
    let _ = tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()))
        .try_init();
    let mut config = ServerConfig::new(scenarios);
    config.registry = registry;
    let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::new(ExitKind::Io, e.to_string()))?;
    runtime.block_on(async {
        let addr = std::net::SocketAddr::from(([0, 0, 0, 0], port));
        let listener = tokio::net::TcpListener::bind(addr).await.map_err(|e| CliError::new(ExitKind::Io, format!("bind {addr}: {e}")))?;
        let _ = writeln!(out, "listening on {addr}");
        let _ = out.flush();
        coopgame_live::serve(listener, config).await.map_err(|e| CliError::new(ExitKind::Io, e.to_string()))
    })
}
