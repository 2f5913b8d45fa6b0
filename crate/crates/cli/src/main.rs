//! `awsim`: acoustic wave simulation, dataset generation, snapshot export
//! and epicenter-regression evaluation.
//!
//! Exit codes: 0 success, 2 configuration or input error, 3 runtime or
//! numerical failure. `AWD_THREADS` caps the worker pool.

mod config;
mod render;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use awsim_core::acquisition::{record, Seismogram};
use awsim_core::dataset::{generate_with, load_all, npy, GenerateOptions};
use awsim_core::harness::{evaluate, train, InputMode, ModelKind};
use awsim_core::Error;

use config::{ConfigError, RunConfig};

#[derive(Parser)]
#[command(name = "awsim", version, about = "Acoustic wave simulator and seismic dataset generator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation and write its seismograms.
    Simulate(SimulateArgs),
    /// Dataset operations.
    #[command(subcommand)]
    Dataset(DatasetCommand),
    /// Export one snapshot frame as a PGM image or CSV table.
    Render(RenderArgs),
    /// Fit a model on one dataset and report its error on another.
    Eval(EvalArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory for seismograms.npy, snapshots.npy and summary.json.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum DatasetCommand {
    /// Generate every split of the [dataset] table into <out>/<split>/.
    Generate(GenerateArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// TOML run configuration with a [dataset] table.
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Worker threads; 0 uses the default pool. Output does not depend on it.
    #[arg(long, default_value_t = 0)]
    workers: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Pgm,
    Csv,
}

#[derive(Args)]
struct RenderArgs {
    /// Snapshot NPY file of shape (nx, ny), (frames, nx, ny) or (frames, nx, ny, nz).
    snapshot: PathBuf,
    /// Output format; PGM is min-max normalized per frame.
    #[arg(long, value_enum)]
    format: Format,
    /// Output file.
    #[arg(long)]
    out: PathBuf,
    /// Frame index; defaults to the last frame.
    #[arg(long)]
    frame: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Model {
    Baseline,
    Ridge,
    Knn,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Raw,
    Features,
}

#[derive(Args)]
struct EvalArgs {
    /// Training manifest.json.
    #[arg(long)]
    train: PathBuf,
    /// Test manifest.json.
    #[arg(long)]
    test: PathBuf,
    /// Model family.
    #[arg(long, value_enum)]
    model: Model,
    /// Design-matrix construction [default: the config's harness.input_mode, else features].
    #[arg(long, value_enum)]
    input_mode: Option<Mode>,
    /// Neighbor count for knn [default: from the config's harness.models, else 5].
    #[arg(long)]
    k: Option<usize>,
    /// Regularization strength for ridge [default: from the config's harness.models, else 1.0].
    #[arg(long)]
    lambda: Option<f64>,
    /// Run configuration whose [harness] table supplies defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Report JSON path; residuals go next to it with a .csv extension.
    #[arg(long)]
    out: PathBuf,
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Runtime(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Runtime(m) => m,
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.0)
    }
}

fn classify(e: Error) -> Failure {
    match e {
        Error::Record { .. } | Error::Instability { .. } | Error::Io { .. } => Failure::Runtime(e.to_string()),
        e if e.is_config() => Failure::Config(e.to_string()),
        Error::Format { .. } | Error::Integrity { .. } | Error::Manifest(_) => Failure::Config(e.to_string()),
        e => Failure::Runtime(e.to_string()),
    }
}

fn io_failure(what: &str, path: &Path, e: std::io::Error) -> Failure {
    Failure::Runtime(format!("{what} {}: {e}", path.display()))
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(raw) = std::env::var("AWD_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Failure::Config(format!("AWD_THREADS must be a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::Runtime(e.to_string()))
}

fn simulate(args: &SimulateArgs) -> Result<(), Failure> {
    let cfg = RunConfig::load(&args.config)?;
    let (medium, sim) = cfg.validate_simulation()?;
    let started = Instant::now();
    let (result, traces) = record(
        &cfg.grid,
        &medium,
        &cfg.source(),
        &sim,
        &cfg.interrogators,
        cfg.acquisition.rate,
    )
    .map_err(classify)?;
    let wall = started.elapsed().as_secs_f64();

    fs::create_dir_all(&args.out).map_err(|e| io_failure("creating", &args.out, e))?;
    let samples = traces.first().map_or(0, |t: &Seismogram| t.samples.len());
    let data: Vec<f64> = traces.iter().flat_map(|t| t.samples.iter().copied()).collect();
    npy::save_array(&args.out.join("seismograms.npy"), &[traces.len(), samples], &data).map_err(classify)?;

    let snapshot_times: Vec<f64> = result.snapshots.iter().map(|(t, _)| *t).collect();
    let snapshot_path = args.out.join("snapshots.npy");
    if result.snapshots.is_empty() {
        // a stale file from an earlier run would not match this summary
        if snapshot_path.exists() {
            fs::remove_file(&snapshot_path).map_err(|e| io_failure("removing", &snapshot_path, e))?;
        }
    } else {
        let mut shape = vec![result.snapshots.len()];
        shape.extend_from_slice(cfg.grid.points());
        let data: Vec<f64> = result
            .snapshots
            .iter()
            .flat_map(|(_, f)| f.values().iter().copied())
            .collect();
        npy::save_array(&snapshot_path, &shape, &data).map_err(classify)?;
    }

    let summary = serde_json::json!({
        "dt": result.dt,
        "steps": result.steps,
        "wall_time_s": wall,
        "rate": cfg.acquisition.rate,
        "samples": samples,
        "interrogators": cfg.interrogators.iter().map(|p| p.id.as_str()).collect::<Vec<_>>(),
        "snapshot_times": snapshot_times,
    });
    let path = args.out.join("summary.json");
    let text = serde_json::to_string_pretty(&summary).map_err(|e| Failure::Runtime(e.to_string()))? + "\n";
    fs::write(&path, text).map_err(|e| io_failure("writing", &path, e))?;
    println!(
        "dt = {:e} s, {} steps, {} traces x {samples} samples -> {}",
        result.dt,
        result.steps,
        traces.len(),
        args.out.display()
    );
    Ok(())
}

fn generate(args: &GenerateArgs) -> Result<(), Failure> {
    let cfg = RunConfig::load(&args.config)?;
    let specs = cfg.dataset_specs()?;
    for spec in &specs {
        let dir = args.out.join(&spec.split);
        let manifest = generate_with(spec, &dir, GenerateOptions { workers: args.workers })
            .map_err(|e| Failure::Runtime(e.to_string()))?;
        println!("{}: {} records -> {}", spec.split, manifest.records.len(), dir.display());
    }
    Ok(())
}

fn render_snapshot(args: &RenderArgs) -> Result<(), Failure> {
    let bytes = fs::read(&args.snapshot).map_err(|e| Failure::Config(format!("cannot read {}: {e}", args.snapshot.display())))?;
    let array = npy::decode(&bytes).map_err(|e| Failure::Config(format!("{}: {e}", args.snapshot.display())))?;
    let frame = render::select_frame(&array, args.frame)
        .map_err(|e| Failure::Config(format!("{}: {e}", args.snapshot.display())))?;
    let mut out = Vec::new();
    match args.format {
        Format::Pgm => render::write_pgm(&frame, &mut out),
        Format::Csv => render::write_csv(&frame, &mut out),
    }
    .map_err(|e| Failure::Runtime(e.to_string()))?;
    fs::write(&args.out, out).map_err(|e| io_failure("writing", &args.out, e))?;
    Ok(())
}

fn eval(args: &EvalArgs) -> Result<(), Failure> {
    let harness = match &args.config {
        Some(path) => RunConfig::load(path)?.harness,
        None => None,
    };
    let listed = |family: &str| {
        harness
            .as_ref()
            .and_then(|h| h.models.iter().copied().find(|m| m.name() == family))
    };
    let kind = match args.model {
        Model::Baseline => ModelKind::Baseline,
        Model::Ridge => {
            let lambda = args.lambda.or(match listed("ridge") {
                Some(ModelKind::Ridge { lambda }) => Some(lambda),
                _ => None,
            });
            ModelKind::Ridge {
                lambda: lambda.unwrap_or(1.0),
            }
        }
        Model::Knn => {
            let k = args.k.or(match listed("knn") {
                Some(ModelKind::Knn { k }) => Some(k),
                _ => None,
            });
            ModelKind::Knn { k: k.unwrap_or(5) }
        }
    };
    let mode = match args.input_mode {
        Some(Mode::Raw) => InputMode::Raw,
        Some(Mode::Features) => InputMode::Features,
        None => harness.as_ref().and_then(|h| h.input_mode).unwrap_or(InputMode::Features),
    };
    let train_set = load_all(&args.train).map_err(classify)?;
    let test_set = load_all(&args.test).map_err(classify)?;
    let model = train(kind, &train_set, mode).map_err(classify)?;
    let report = evaluate(&model, &test_set, mode).map_err(classify)?;

    if let Some(dir) = args.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| io_failure("creating", dir, e))?;
    }
    fs::write(&args.out, report.to_json().map_err(classify)?).map_err(|e| io_failure("writing", &args.out, e))?;
    let csv_path = args.out.with_extension("csv");
    let mut csv = Vec::new();
    report.write_csv(&mut csv).map_err(|e| Failure::Runtime(e.to_string()))?;
    fs::write(&csv_path, csv).map_err(|e| io_failure("writing", &csv_path, e))?;
    if report.rank_deficient {
        eprintln!("warning: design matrix is rank deficient, using the minimum-norm solution");
    }
    println!("total_mse = {:e}", report.total_mse);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = configure_threads().and_then(|()| match &cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Dataset(DatasetCommand::Generate(a)) => generate(a),
        Command::Render(a) => render_snapshot(a),
        Command::Eval(a) => eval(a),
    });
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
