//! Batch front end: analyses and CSV/SVG/JSON artifacts for one design.
//!
//! Exit codes: 0 ok, 2 usage, 3 kinematic, 4 IO. Failures print one JSON
//! line `{"error": <reason>, "message": ...}` on stderr.

mod commands;
mod config;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    /// Jacobians, conditioning and singularities of one posture.
    Analyze,
    /// Cartesian cross-section raster, areas and volumes.
    Workspace,
    /// Joint-space and per-mode parallel/serial singularity rasters.
    SingularityMap,
    /// Condition-number field and isoconditioning contours.
    Isocond,
    /// Workspace-volume design search under a length budget.
    Optimize,
    /// Working-mode change plan between two points.
    Plan,
}

#[derive(Debug, Parser)]
#[command(name = "fivebar-hybrid", version, about = "Five-bar hybrid manipulator analysis")]
struct Cli {
    /// Command to run (may instead be given as `command = ...` in the config file).
    #[arg(value_enum)]
    command: Option<Command>,
    /// `key = value` file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Link lengths `L0,L1,L2`.
    #[arg(long, allow_hyphen_values = true)]
    design: Option<String>,
    /// `umin,umax,vmin,vmax,N`, or `N` for a grid fitted to the design.
    #[arg(long, allow_hyphen_values = true)]
    grid: Option<String>,
    /// Cells per side of the `[-pi, pi]²` joint-space grid.
    #[arg(long)]
    joint_grid: Option<String>,
    /// Working mode such as `+-+`; for `plan`, `start,goal`.
    #[arg(long, allow_hyphen_values = true)]
    mode: Option<String>,
    /// Condition-number levels, e.g. `1,1.5,2`.
    #[arg(long)]
    levels: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<String>,
    /// Actuated angles `theta1,theta2,theta3` in radians.
    #[arg(long, allow_hyphen_values = true)]
    theta: Option<String>,
    /// Assembly mode `+` or `-`.
    #[arg(long, allow_hyphen_values = true)]
    assembly: Option<String>,
    /// World point `x,y,z` (with `--mode`) for `analyze`.
    #[arg(long, allow_hyphen_values = true)]
    point: Option<String>,
    /// Total length `L0 + 2 L1 + 2 L2`.
    #[arg(long)]
    budget: Option<String>,
    /// `l0min,l0max,l0steps,l1splits`.
    #[arg(long)]
    search: Option<String>,
    /// Monte-Carlo samples.
    #[arg(long)]
    samples: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    start: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    goal: Option<String>,
}

impl Cli {
    fn flag_values(&self) -> BTreeMap<String, String> {
        let pairs = [
            ("design", &self.design),
            ("grid", &self.grid),
            ("joint-grid", &self.joint_grid),
            ("mode", &self.mode),
            ("levels", &self.levels),
            ("seed", &self.seed),
            ("out", &self.out),
            ("theta", &self.theta),
            ("assembly", &self.assembly),
            ("point", &self.point),
            ("budget", &self.budget),
            ("search", &self.search),
            ("samples", &self.samples),
            ("start", &self.start),
            ("goal", &self.goal),
        ];
        pairs
            .into_iter()
            .filter_map(|(k, v)| v.clone().map(|v| (k.to_owned(), v)))
            .collect()
    }
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Kinematic(fivebar_hybrid::Error),
    Io(String),
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Kinematic(_) => 3,
            CliError::Io(_) => 4,
        }
    }

    fn reason(&self) -> &str {
        match self {
            CliError::Usage(_) => "Usage",
            CliError::Kinematic(e) => e.reason(),
            CliError::Io(_) => "Io",
        }
    }

    fn message(&self) -> String {
        match self {
            CliError::Usage(m) | CliError::Io(m) => m.clone(),
            CliError::Kinematic(e) => e.to_string(),
        }
    }
}

impl From<fivebar_hybrid::Error> for CliError {
    fn from(e: fivebar_hybrid::Error) -> Self {
        if e.is_input_error() {
            CliError::Usage(e.to_string())
        } else {
            CliError::Kinematic(e)
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let file = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            config::parse_config(&text)?
        }
        None => BTreeMap::new(),
    };
    let command = match (cli.command, file.get("command")) {
        (Some(c), _) => c,
        (None, Some(name)) => Command::from_str(name, true)
            .map_err(|_| CliError::usage(format!("config: unknown command {name:?}")))?,
        (None, None) => return Err(CliError::usage("no command given")),
    };
    let settings = config::Settings::new(file, cli.flag_values());
    commands::dispatch(command, &settings)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let line = serde_json::json!({"error": e.reason(), "message": e.message()});
            eprintln!("{line}");
            ExitCode::from(e.exit_code())
        }
    }
}
