//! Command-line front end: `run` and `verify`.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use thiserror::Error;

use crate::diagnostics::{
    detect_acceleration, write_level_tracks, write_speeds, write_summary, write_ybar, Acceleration,
    FrontDiagnostics, LevelTracker, SnapshotDiagnostics,
};
use crate::grid::{compute_rho, write_snapshot, DensityField, Grid};
use crate::model::{InitialProfile, ModelError, RunConfig};
use crate::solver::{run, RunObserver, SolverError, StepReport};
use crate::verify::{run_suite, Suite};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;
pub const EXIT_VERIFY: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("verification failed: {0}")]
    Verify(String),
    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Solver(_) => EXIT_SOLVER,
            CliError::Verify(_) => EXIT_VERIFY,
            CliError::Io { .. } => EXIT_IO,
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        CliError::Config(e.to_string())
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Parser)]
#[command(name = "phenofront", version, about = "Phenotype-structured front simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a simulation and write snapshots, step reports and diagnostics.
    Run(RunArgs),
    /// Run a randomized property suite.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Preset name (`fig1`, `fig2`), a TOML config file, or a manifest from a previous run.
    pub source: String,
    /// Output directory.
    #[arg(long, short)]
    pub out: PathBuf,
    /// Worker threads for intra-step parallelism.
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// positivity, maximum-principle, monotonicity, mass, root or refinement.
    pub suite: Suite,
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
}

fn parse_list(s: &str) -> Result<Vec<f64>, String> {
    if s.trim().is_empty() {
        return Ok(Vec::new());
    }
    s.split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|e| format!("`{v}`: {e}")))
        .collect()
}

fn parse_window(s: &str) -> Result<(f64, f64), String> {
    match parse_list(s)?.as_slice() {
        [a, b] => Ok((*a, *b)),
        _ => Err(format!("expected `t0,t1`, got `{s}`")),
    }
}

fn parse_guard(s: &str) -> Result<Option<f64>, String> {
    if s == "off" {
        Ok(None)
    } else {
        s.parse::<f64>().map(Some).map_err(|e| e.to_string())
    }
}

fn parse_profile(s: &str) -> Result<InitialProfile, String> {
    match s {
        "unit" => Ok(InitialProfile::Unit),
        "wkb" => Ok(InitialProfile::Wkb),
        _ => Err(format!("expected `unit` or `wkb`, got `{s}`")),
    }
}

/// One flag per [`RunConfig`] field.
#[derive(Debug, Default, Args)]
pub struct Overrides {
    #[arg(long)]
    pub t_max: Option<f64>,
    #[arg(long)]
    pub x_max: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub dx: Option<f64>,
    #[arg(long)]
    pub dy: Option<f64>,
    #[arg(long)]
    pub y_max: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub rho_max: Option<f64>,
    #[arg(long)]
    pub ic_center: Option<f64>,
    /// `unit` (e^{-x²}) or `wkb` (e^{-x²/ε}).
    #[arg(long, value_parser = parse_profile)]
    pub ic_profile: Option<InitialProfile>,
    /// Comma-separated output times.
    #[arg(long, value_parser = parse_list)]
    pub output_times: Option<::std::vec::Vec<f64>>,
    /// Comma-separated density levels to track.
    #[arg(long, value_parser = parse_list)]
    pub levels: Option<::std::vec::Vec<f64>>,
    #[arg(long)]
    pub picard_tol: Option<f64>,
    #[arg(long)]
    pub max_picard_iterations: Option<usize>,
    #[arg(long)]
    pub linear_tol: Option<f64>,
    #[arg(long)]
    pub max_linear_iterations: Option<usize>,
    #[arg(long)]
    pub root_tol: Option<f64>,
    #[arg(long)]
    pub max_root_iterations: Option<usize>,
    #[arg(long)]
    pub density_floor: Option<f64>,
    /// Density guard on the last 5% of x-cells, or `off`.
    #[arg(long, value_parser = parse_guard)]
    pub boundary_guard: Option<::std::option::Option<f64>>,
    #[arg(long)]
    pub support_threshold: Option<f64>,
    /// `t0,t1`
    #[arg(long, value_parser = parse_window)]
    pub speed_window: Option<(f64, f64)>,
    /// `t0,t1`
    #[arg(long, value_parser = parse_window)]
    pub early_window: Option<(f64, f64)>,
    /// `t0,t1`
    #[arg(long, value_parser = parse_window)]
    pub late_window: Option<(f64, f64)>,
    #[arg(long)]
    pub acceleration_margin: Option<f64>,
}

impl Overrides {
    pub fn apply(&self, c: &mut RunConfig) {
        macro_rules! set {
            ($src:expr => $dst:expr) => {
                if let Some(v) = $src.clone() {
                    $dst = v;
                }
            };
        }
        set!(self.t_max => c.t_max);
        set!(self.x_max => c.x_max);
        set!(self.dt => c.dt);
        set!(self.dx => c.dx);
        set!(self.dy => c.dy);
        set!(self.y_max => c.model.y_max);
        set!(self.epsilon => c.model.epsilon);
        set!(self.rho_max => c.model.rho_max);
        set!(self.ic_center => c.model.ic_center);
        set!(self.ic_profile => c.model.ic_profile);
        set!(self.levels => c.level_set_values);
        set!(self.picard_tol => c.tolerances.picard_tol);
        set!(self.max_picard_iterations => c.tolerances.max_picard_iterations);
        set!(self.linear_tol => c.tolerances.linear_tol);
        set!(self.max_linear_iterations => c.tolerances.max_linear_iterations);
        set!(self.root_tol => c.tolerances.root_tol);
        set!(self.max_root_iterations => c.tolerances.max_root_iterations);
        set!(self.density_floor => c.tolerances.density_floor);
        set!(self.boundary_guard => c.tolerances.boundary_guard);
        set!(self.support_threshold => c.diagnostics.support_threshold);
        set!(self.acceleration_margin => c.diagnostics.acceleration_margin);
        if let Some(w) = self.speed_window {
            c.diagnostics.speed_window = Some(w);
        }
        if self.early_window.is_some() || self.late_window.is_some() {
            let (early, late) = c.acceleration_windows();
            c.diagnostics.acceleration_windows =
                Some((self.early_window.unwrap_or(early), self.late_window.unwrap_or(late)));
        }
        match &self.output_times {
            Some(times) => c.output_times = times.clone(),
            None if self.t_max.is_some() || self.dt.is_some() => {
                // Keep the inherited times that still fit, and always end at T.
                let (t_max, dt) = (c.t_max, c.dt);
                c.output_times.retain(|&t| t < t_max && ((t / dt) - (t / dt).round()).abs() < 1e-6);
                c.output_times.push(t_max);
            }
            None => {}
        }
    }
}

/// Resolves a preset name, config file or manifest.
pub fn load_config(source: &str) -> Result<RunConfig, CliError> {
    let path = Path::new(source);
    if !path.exists() {
        return RunConfig::preset(source).map_err(|e| match e {
            ModelError::UnknownPreset(_) => {
                CliError::Config(format!("`{source}` is neither a preset nor an existing file"))
            }
            other => other.into(),
        });
    }
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let table: toml::Table = text
        .parse()
        .map_err(|e| CliError::Config(format!("{source}: {e}")))?;
    let value = match table.get("config") {
        Some(inner) => inner.clone(),
        None => toml::Value::Table(table),
    };
    value
        .try_into()
        .map_err(|e| CliError::Config(format!("{source}: {e}")))
}

#[derive(Debug, Serialize)]
struct ArtifactList {
    steps: String,
    snapshots: Vec<String>,
    diagnostics: Vec<String>,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    status: String,
    wall_clock_seconds: f64,
    threads: usize,
    artifacts: ArtifactList,
    config: &'a RunConfig,
}

/// Writes snapshots and step rows as the run progresses.
struct ArtifactWriter<'a> {
    config: &'a RunConfig,
    out: &'a Path,
    steps: BufWriter<File>,
    snapshots: Vec<String>,
    diagnostics: FrontDiagnostics,
}

impl ArtifactWriter<'_> {
    fn sink_error(path: &Path, e: impl std::fmt::Display) -> SolverError {
        SolverError::Sink(format!("{}: {e}", path.display()))
    }
}

impl RunObserver for ArtifactWriter<'_> {
    fn on_snapshot(&mut self, field: &DensityField, grid: &Grid) -> Result<(), SolverError> {
        let name = format!("snapshots/t_{}.csv", field.time);
        let path = self.out.join(&name);
        let file = File::create(&path).map_err(|e| Self::sink_error(&path, e))?;
        let mut w = BufWriter::new(file);
        write_snapshot(&mut w, field, grid)
            .and_then(|_| w.flush())
            .map_err(|e| Self::sink_error(&path, e))?;
        self.snapshots.push(name);
        let snap = SnapshotDiagnostics::evaluate(
            field,
            grid,
            &self.config.model,
            self.config.diagnostics.support_threshold,
        )
        .map_err(|e| SolverError::Sink(e.to_string()))?;
        if field.time == 0.0 {
            self.diagnostics.tracker.record(&snap.rho, grid);
        }
        self.diagnostics.snapshots.push(snap);
        Ok(())
    }

    fn on_step(&mut self, field: &DensityField, grid: &Grid, r: &StepReport) -> Result<(), SolverError> {
        writeln!(
            self.steps,
            "{},{},{:e},{:e},{:e},{:e},{:e}",
            field.time,
            r.picard_iterations,
            r.picard_residual,
            r.linear_residual,
            r.root_max_residual,
            r.mass_before,
            r.mass_after
        )
        .map_err(|e| Self::sink_error(Path::new("steps.csv"), e))?;
        let rho = compute_rho(field, grid)?;
        self.diagnostics.tracker.record(&rho, grid);
        Ok(())
    }
}

/// Result of a completed or failed run, after all artifacts are written.
#[derive(Debug)]
pub struct RunOutcome {
    pub config: RunConfig,
    pub diagnostics: FrontDiagnostics,
    /// `(level, acceleration)` for levels with enough samples.
    pub acceleration: Vec<(f64, Acceleration)>,
    pub error: Option<SolverError>,
}

fn write_file(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> io::Result<()>) -> Result<(), CliError> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    f(&mut w).and_then(|_| w.flush()).map_err(io_err(path))
}

/// Runs `config` and writes the artifact tree under `out`. Solver failures
/// are reported in the outcome after the partial artifacts are written.
pub fn execute_run(config: &RunConfig, out: &Path, threads: usize) -> Result<RunOutcome, CliError> {
    config.validate()?;
    let grid = Grid::from_config(config)?;
    for dir in [out.to_path_buf(), out.join("snapshots"), out.join("diagnostics")] {
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    }
    let steps_path = out.join("steps.csv");
    let mut steps = BufWriter::new(File::create(&steps_path).map_err(io_err(&steps_path))?);
    writeln!(
        steps,
        "t,picard_iters,picard_residual,linear_residual,root_max_residual,mass_before,mass_after"
    )
    .map_err(io_err(&steps_path))?;

    let mut writer = ArtifactWriter {
        config,
        out,
        steps,
        snapshots: Vec::new(),
        diagnostics: FrontDiagnostics {
            tracker: LevelTracker::new(&config.level_set_values),
            ..FrontDiagnostics::default()
        },
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    let started = Instant::now();
    let result = pool.install(|| run(config, &mut writer));
    let elapsed = started.elapsed().as_secs_f64();
    writer.steps.flush().map_err(io_err(&steps_path))?;
    let error = result.err().map(|f| f.error);

    let ArtifactWriter {
        snapshots,
        mut diagnostics,
        ..
    } = writer;
    diagnostics.fit_speeds(config.speed_window());
    let (early, late) = config.acceleration_windows();
    let acceleration: Vec<(f64, Acceleration)> = diagnostics
        .tracker
        .iter()
        .filter_map(|(level, track)| {
            detect_acceleration(track, early, late, config.diagnostics.acceleration_margin)
                .ok()
                .map(|a| (level, a))
        })
        .collect();

    let diag = out.join("diagnostics");
    write_file(&diag.join("level_tracks.csv"), |w| write_level_tracks(w, &diagnostics.tracker))?;
    write_file(&diag.join("ybar.csv"), |w| {
        write_ybar(w, &diagnostics.snapshots, &grid, &config.model)
    })?;
    write_file(&diag.join("speeds.csv"), |w| write_speeds(w, &diagnostics.fitted_speeds))?;
    write_file(&diag.join("summary.csv"), |w| write_summary(w, &diagnostics.snapshots))?;
    write_file(&diag.join("acceleration.csv"), |w| {
        writeln!(w, "level,early_slope,late_slope,accelerating")?;
        for (level, a) in &acceleration {
            writeln!(w, "{level},{:.16e},{:.16e},{}", a.early.slope, a.late.slope, a.accelerating)?;
        }
        Ok(())
    })?;

    let manifest = Manifest {
        tool: "phenofront",
        version: env!("CARGO_PKG_VERSION"),
        status: match &error {
            None => "completed".into(),
            Some(e) => format!("failed: {e}"),
        },
        wall_clock_seconds: elapsed,
        threads,
        artifacts: ArtifactList {
            steps: "steps.csv".into(),
            snapshots,
            diagnostics: ["level_tracks", "ybar", "speeds", "summary", "acceleration"]
                .iter()
                .map(|n| format!("diagnostics/{n}.csv"))
                .collect(),
        },
        config,
    };
    let text = toml::to_string(&manifest).map_err(|e| CliError::Config(format!("manifest: {e}")))?;
    let manifest_path = out.join("manifest");
    fs::write(&manifest_path, text).map_err(io_err(&manifest_path))?;

    Ok(RunOutcome {
        config: config.clone(),
        diagnostics,
        acceleration,
        error,
    })
}

pub fn cmd_run(args: &RunArgs) -> Result<RunOutcome, CliError> {
    let mut config = load_config(&args.source)?;
    args.overrides.apply(&mut config);
    execute_run(&config, &args.out, args.threads)
}

pub fn cmd_verify(args: &VerifyArgs) -> Result<bool, CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.threads.max(1))
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    let report = pool.install(|| run_suite(args.suite))?;
    for p in &report.properties {
        println!("{}: {p}", report.suite);
    }
    Ok(report.passed())
}

fn report_run(outcome: &RunOutcome) {
    for (level, fit) in &outcome.diagnostics.fitted_speeds {
        match fit {
            Ok(f) => println!("level {level}: speed {:.4} (rms residual {:.2e})", f.slope, f.residual),
            Err(e) => println!("level {level}: {e}"),
        }
    }
    for (level, a) in &outcome.acceleration {
        println!(
            "level {level}: early slope {:.4}, late slope {:.4}, accelerating = {}",
            a.early.slope, a.late.slope, a.accelerating
        );
    }
    if let Some(s) = outcome.diagnostics.latest() {
        if let Some(b) = s.cstar_bound {
            println!("t = {}: minimal-speed bound {b:.4}", s.t);
        }
    }
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let result = match &cli.command {
        Command::Run(args) => cmd_run(args).and_then(|outcome| {
            report_run(&outcome);
            match outcome.error {
                Some(e) => Err(CliError::Solver(e)),
                None => Ok(()),
            }
        }),
        Command::Verify(args) => cmd_verify(args).and_then(|ok| {
            if ok {
                Ok(())
            } else {
                Err(CliError::Verify(format!("suite {} has failing properties", args.suite)))
            }
        }),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
