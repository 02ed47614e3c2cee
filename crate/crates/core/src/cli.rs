//! Command-line front end.
//!
//! Exit codes: 0 success, 1 usage, 2 degenerate input or parse failure,
//! 3 I/O failure.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::io::{
    generate_phantom, load_landmarks, read_trials_csv, report, write_phantom, write_report, IoError, LoadedScenario,
    PhantomParams, Summary, SCENARIO_FILE,
};
use crate::registration::{estimate_similarity, LandmarkId, RegistrationError, ScaleMode};
use crate::service::{AppState, ScenarioRegistry};
use crate::simulation::{run_simulation, NoiseProfile, SimulationConfig, Study};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_IO: i32 = 3;

pub const SEED_ENV: &str = "VENTRONAV_SEED";

#[derive(Debug, Parser)]
#[command(name = "ventronav", version, about = "Landmark registration and catheter guidance engine")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Seed for every random draw.
    #[arg(long, global = true, env = SEED_ENV)]
    pub seed: Option<u64>,
    /// JSON file with default values for flags not given on the command line.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    /// Print machine-readable JSON only.
    #[arg(long, short, global = true)]
    pub quiet: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit model landmarks to world landmarks.
    Register(RegisterArgs),
    /// Run a Monte Carlo study of end-to-end sessions.
    Simulate(SimulateArgs),
    /// Generate a synthetic phantom scenario.
    Phantom(PhantomArgs),
    /// Serve sessions over HTTP.
    Serve(ServeArgs),
    /// Recompute a summary from a trials CSV.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScaleArg {
    /// Scale fixed at 1.
    Fixed,
    /// Estimated within [0.9, 1.1].
    Estimated,
    /// Estimated without bounds.
    Unbounded,
}

impl From<ScaleArg> for ScaleMode {
    fn from(a: ScaleArg) -> Self {
        match a {
            ScaleArg::Fixed => ScaleMode::Fixed,
            ScaleArg::Estimated => ScaleMode::bounded(),
            ScaleArg::Unbounded => ScaleMode::unbounded(),
        }
    }
}

#[derive(Debug, Args)]
pub struct RegisterArgs {
    #[arg(long)]
    pub model_landmarks: PathBuf,
    #[arg(long)]
    pub world_landmarks: PathBuf,
    #[arg(long, value_enum)]
    pub scale_mode: Option<ScaleArg>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Scenario file, or a directory containing scenario.json.
    #[arg(long)]
    pub scenario: PathBuf,
    #[arg(long, default_value_t = 1000, value_parser = clap::value_parser!(u64).range(1..))]
    pub trials: u64,
    /// Noise profile JSON; `calibrated` for the built-in profile, `scenario`
    /// for the scenario's own noise model.
    #[arg(long, default_value = "calibrated")]
    pub noise_profile: String,
    /// Multiplies every noise magnitude.
    #[arg(long, default_value_t = 1.0)]
    pub noise_scale: f64,
    #[arg(long)]
    pub picks_per_landmark: Option<usize>,
    #[arg(long, value_enum)]
    pub scale_mode: Option<ScaleArg>,
    /// Worker threads (output does not depend on this).
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Args)]
pub struct PhantomArgs {
    #[arg(long)]
    pub out: PathBuf,
    /// Phantom parameter JSON; defaults apply to missing fields.
    #[arg(long)]
    pub params: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    /// Directory of scenario folders.
    #[arg(long)]
    pub scenarios: Option<PathBuf>,
    /// Append session event logs here as JSON lines.
    #[arg(long)]
    pub log_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
}

/// Defaults read from `--config`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub output: Option<PathBuf>,
    pub scale_mode: Option<ScaleArg>,
    pub workers: Option<usize>,
    pub picks_per_landmark: Option<usize>,
    pub scenarios: Option<PathBuf>,
}

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn usage(m: impl Into<String>) -> Self {
        Self { code: EXIT_USAGE, message: m.into() }
    }
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        Self { code: if e.is_io() { EXIT_IO } else { EXIT_INPUT }, message: e.to_string() }
    }
}

impl From<RegistrationError> for CliError {
    fn from(e: RegistrationError) -> Self {
        Self { code: EXIT_INPUT, message: e.to_string() }
    }
}

/// Shipped scenario directory.
pub fn default_scenarios_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join("scenarios")
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            let _ = if e.use_stderr() { err.write_all(text.as_bytes()) } else { out.write_all(text.as_bytes()) };
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
        }
    };
    match execute(&cli, out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {}", e.message);
            e.code
        }
    }
}

pub fn execute(cli: &Cli, out: &mut dyn Write) -> Result<(), CliError> {
    let file = match &cli.global.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::from(IoError::io(p, e)))?;
            serde_json::from_str::<FileConfig>(&text).map_err(|e| CliError::from(IoError::json(p, e)))?
        }
        None => FileConfig::default(),
    };
    let seed = cli.global.seed.or(file.seed);
    let output = cli.global.output.clone().or(file.output.clone());
    let quiet = cli.global.quiet;
    match &cli.command {
        Command::Register(a) => cmd_register(a, a.scale_mode.or(file.scale_mode), quiet, out),
        Command::Simulate(a) => cmd_simulate(a, &file, seed, output, quiet, out),
        Command::Phantom(a) => cmd_phantom(a, seed.unwrap_or(0), quiet, out),
        Command::Serve(a) => cmd_serve(a, a.scenarios.clone().or(file.scenarios.clone()), out),
        Command::Report(a) => cmd_report(a, output, quiet, out),
    }
}

fn emit(out: &mut dyn Write, text: &str) -> Result<(), CliError> {
    out.write_all(text.as_bytes()).map_err(|e| CliError { code: EXIT_IO, message: format!("stdout: {e}") })
}

pub fn cmd_register(
    a: &RegisterArgs,
    scale: Option<ScaleArg>,
    quiet: bool,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let model = load_landmarks(&a.model_landmarks)?;
    let world = load_landmarks(&a.world_landmarks)?;
    let mode = scale.map(ScaleMode::from).unwrap_or_default();
    let r = estimate_similarity(&model, &world, mode)?;
    if quiet {
        return emit(out, &(serde_json::to_string_pretty(&r).expect("result serializes") + "\n"));
    }
    let m = r.transform.rotation.matrix();
    let t = r.transform.translation;
    let mut s = String::new();
    s += &format!("scale        {:.6}\n", r.transform.scale);
    for i in 0..3 {
        let lead = if i == 0 { "rotation" } else { "" };
        s += &format!("{lead:<12} [{:>9.6} {:>9.6} {:>9.6}]\n", m[(i, 0)], m[(i, 1)], m[(i, 2)]);
    }
    s += &format!("translation  ({:.3}, {:.3}, {:.3}) mm\n", t.x, t.y, t.z);
    s += &format!("RMSE         {:.3} mm\n", r.rmse);
    s += &format!("condition    {:?} (ratio {:.4})\n", r.condition.kind, r.condition.condition_ratio);
    s += "residuals\n";
    for id in LandmarkId::ALL {
        if let Some(v) = r.residuals.get(&id) {
            s += &format!("  {:<20} {:.3} mm\n", id.label(), v);
        }
    }
    emit(out, &s)
}

fn scenario_file(p: &Path) -> PathBuf {
    if p.is_dir() {
        p.join(SCENARIO_FILE)
    } else {
        p.to_path_buf()
    }
}

pub fn cmd_simulate(
    a: &SimulateArgs,
    file: &FileConfig,
    seed: Option<u64>,
    output: Option<PathBuf>,
    quiet: bool,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    if !(a.noise_scale.is_finite() && a.noise_scale >= 0.0) {
        return Err(CliError::usage("--noise-scale must be a non-negative number"));
    }
    let scenario = LoadedScenario::load(&scenario_file(&a.scenario))?;
    let noise = match a.noise_profile.as_str() {
        "calibrated" => NoiseProfile::calibrated().noise,
        "scenario" => scenario.scenario.noise,
        path => NoiseProfile::load(Path::new(path))?.noise,
    }
    .scaled(a.noise_scale);
    let picks = a.picks_per_landmark.or(file.picks_per_landmark).unwrap_or(scenario.scenario.picks_per_landmark);
    if picks == 0 {
        return Err(CliError::usage("--picks-per-landmark must be at least 1"));
    }
    let cfg = SimulationConfig {
        trials: a.trials as usize,
        seed: seed.unwrap_or(scenario.scenario.seed),
        picks_per_landmark: picks,
        scale_mode: a.scale_mode.or(file.scale_mode).map(ScaleMode::from).unwrap_or_default(),
        workers: a.workers.or(file.workers),
    };
    let records = run_simulation(&Study::from_scenario(&scenario), &noise, &cfg);
    let dir = output.unwrap_or_else(|| PathBuf::from("ventronav-out"));
    let (summary, files) = write_report(&records, &dir)?;
    if quiet {
        emit(out, &report::summary_to_json(&summary))
    } else {
        emit(out, &summary_table(&summary))?;
        emit(out, &format!("wrote {} and {}\n", files.csv.display(), files.summary.display()))
    }
}

pub fn summary_table(s: &Summary) -> String {
    let mut t = format!("trials {} (completed {}, failed {})\n", s.trials, s.completed, s.failed);
    t += &format!("{:<16} {:>8} {:>8} {:>8} {:>8} {:>8}\n", "metric (mm)", "mean", "sd", "p05", "p50", "p95");
    for (name, st) in [("RMSE", &s.rmse_mm), ("TRE entry", &s.tre_mm), ("TRE target", &s.target_tre_mm)] {
        if let Some(st) = st {
            t += &format!(
                "{name:<16} {:>8.3} {:>8.3} {:>8.3} {:>8.3} {:>8.3}\n",
                st.mean, st.sd, st.p05, st.p50, st.p95
            );
        }
    }
    t += &format!(
        "reference RMSE   {:.2} ± {:.2}\nTRE < {} mm      {:.4}\n",
        s.reference_rmse.mean_mm, s.reference_rmse.sd_mm, s.tre_threshold_mm, s.fraction_tre_under_threshold
    );
    t
}

pub fn cmd_phantom(a: &PhantomArgs, seed: u64, quiet: bool, out: &mut dyn Write) -> Result<(), CliError> {
    let params = match &a.params {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::from(IoError::io(p, e)))?;
            serde_json::from_str::<PhantomParams>(&text).map_err(|e| CliError::from(IoError::json(p, e)))?
        }
        None => PhantomParams::default(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut phantom = generate_phantom(&params, &mut rng);
    phantom.scenario.seed = seed;
    write_phantom(&phantom, &a.out)?;
    let path = a.out.join(SCENARIO_FILE);
    if quiet {
        emit(out, &(serde_json::json!({ "scenario": path }).to_string() + "\n"))
    } else {
        emit(
            out,
            &format!(
                "wrote {} ({} head triangles, {} ventricle triangles)\n",
                path.display(),
                phantom.head.triangle_count(),
                phantom.ventricles.triangle_count()
            ),
        )
    }
}

pub fn cmd_serve(a: &ServeArgs, scenarios: Option<PathBuf>, out: &mut dyn Write) -> Result<(), CliError> {
    let dir = scenarios.unwrap_or_else(default_scenarios_dir);
    let registry = ScenarioRegistry::load_dir(&dir)?;
    let mut state = AppState::new(registry);
    if let Some(d) = &a.log_dir {
        std::fs::create_dir_all(d).map_err(|e| CliError::from(IoError::io(d, e)))?;
        state = state.with_log_dir(d.clone());
    }
    let rt = tokio::runtime::Runtime::new().map_err(|e| CliError { code: EXIT_IO, message: e.to_string() })?;
    let addr = format!("{}:{}", a.host, a.port);
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind(&addr)
            .await
            .map_err(|e| CliError { code: EXIT_IO, message: format!("cannot bind {addr}: {e}") })?;
        let local = listener.local_addr().map(|a| a.to_string()).unwrap_or(addr.clone());
        emit(out, &format!("listening on http://{local}\n"))?;
        out.flush().ok();
        crate::service::serve(listener, Arc::new(state))
            .await
            .map_err(|e| CliError { code: EXIT_IO, message: e.to_string() })
    })
}

pub fn cmd_report(a: &ReportArgs, output: Option<PathBuf>, quiet: bool, out: &mut dyn Write) -> Result<(), CliError> {
    let records = read_trials_csv(&a.input)?;
    if records.is_empty() {
        return Err(CliError { code: EXIT_INPUT, message: format!("{}: no trials", a.input.display()) });
    }
    let summary = crate::io::summarize(&records);
    let json = report::summary_to_json(&summary);
    if let Some(dir) = output {
        std::fs::create_dir_all(&dir).map_err(|e| CliError::from(IoError::io(&dir, e)))?;
        let p = dir.join(report::SUMMARY_JSON);
        std::fs::write(&p, &json).map_err(|e| CliError::from(IoError::io(&p, e)))?;
    }
    if quiet {
        emit(out, &json)
    } else {
        emit(out, &summary_table(&summary))
    }
}
