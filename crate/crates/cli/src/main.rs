use std::io::{ErrorKind, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use optofeedback::config::{ConfigError, RunConfig};
use optofeedback::experiments::{
    optimize_gain, run_sweep_with, simulate, validate_suite, write_atomic, write_sweep,
    SweepOptions,
};
use optofeedback::gaussian::{CovarianceMatrix, LossBase};
use optofeedback::Error;

/// Exit codes: 0 success, 1 failed validation checks, 2 configuration or
/// usage error, 3 unstable operating point, 4 numerical or output failure.
#[derive(Parser)]
#[command(
    name = "optofeedback",
    version,
    about = "Filtered output entanglement of a feedback-cooled optomechanical cavity"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate one operating point and print its metrics as JSON.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Include the covariance matrices in the output (and write
        /// `<stem>_cm.json` when --out is given).
        #[arg(long)]
        dump_cm: bool,
    },
    /// Run the [sweep] grid and write `<stem>.csv` plus a `<stem>.json` sidecar.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        workers: Workers,
        /// Continue from the checkpoint left by an interrupted run.
        #[arg(long)]
        resume: bool,
    },
    /// Maximize E_N or F over one parameter as set in [optimize].
    Optimize {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        workers: Workers,
    },
    /// Run the self-check suite and print a plain-text report.
    Validate {
        #[command(flatten)]
        common: Common,
        /// Multiply every check tolerance (overrides [validate]).
        #[arg(long)]
        tolerance_scale: Option<f64>,
    },
    /// Print the effective configuration.
    PrintConfig {
        #[command(flatten)]
        common: Common,
        /// Print JSON instead of TOML.
        #[arg(long)]
        json: bool,
    },
}

#[derive(Args)]
struct Common {
    /// TOML run configuration (JSON if the extension is .json). Defaults to
    /// the built-in two-mode reference point.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory (overrides [output].dir).
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Exponential base of the fiber attenuation law.
    #[arg(long, value_enum)]
    loss_base: Option<BaseArg>,
}

#[derive(Args)]
struct Workers {
    /// Worker threads.
    #[arg(long, env = "OPTOFB_WORKERS")]
    workers: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum BaseArg {
    E,
    #[value(name = "10")]
    Ten,
}

enum Failure {
    Validation,
    Config(String),
    Unstable(String),
    Numerical(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Validation => 1,
            Failure::Config(_) => 2,
            Failure::Unstable(_) => 3,
            Failure::Numerical(_) => 4,
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(format!("configuration error: {e}"))
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameter { .. } => Failure::Config(format!("configuration error: {e}")),
            e if e.is_instability() => Failure::Unstable(e.to_string()),
            e => Failure::Numerical(e.to_string()),
        }
    }
}

struct Loaded {
    config: RunConfig,
    out: Option<PathBuf>,
    stem: String,
}

impl Loaded {
    fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("."))
    }
}

fn load(common: &Common) -> Result<Loaded, Failure> {
    let mut config = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::reference(),
    };
    if let Some(base) = common.loss_base {
        let loss = config.loss.as_mut().ok_or_else(|| {
            Failure::Config("configuration error: --loss-base needs a [loss] section".into())
        })?;
        loss.base = match base {
            BaseArg::E => LossBase::E,
            BaseArg::Ten => LossBase::Ten,
        };
    }
    let out = common
        .out
        .clone()
        .or_else(|| config.output.dir.as_ref().map(PathBuf::from));
    let stem = config
        .output
        .stem
        .clone()
        .or_else(|| {
            common
                .config
                .as_ref()
                .and_then(|p| p.file_stem())
                .map(|s| s.to_string_lossy().into_owned())
        })
        .unwrap_or_else(|| "run".into());
    Ok(Loaded { config, out, stem })
}

fn pool(workers: &Workers) -> Result<rayon::ThreadPool, Failure> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers.workers {
        if n == 0 {
            return Err(Failure::Config(
                "configuration error: --workers must be at least 1".into(),
            ));
        }
        builder = builder.num_threads(n);
    }
    builder
        .build()
        .map_err(|e| Failure::Numerical(e.to_string()))
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).expect("json serializes");
    write_atomic(path, text.as_bytes()).map_err(Failure::from)
}

/// Writes to stdout. A closed pipe (`| head`) ends output quietly.
fn emit(text: &str) -> Result<(), Failure> {
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|_| out.flush()) {
        Err(e) if e.kind() != ErrorKind::BrokenPipe => {
            Err(Failure::Numerical(format!("stdout: {e}")))
        }
        _ => Ok(()),
    }
}

fn emit_json(value: &serde_json::Value) -> Result<(), Failure> {
    emit(&(serde_json::to_string_pretty(value).expect("json serializes") + "\n"))
}

fn rows(v: &CovarianceMatrix) -> Vec<Vec<f64>> {
    let m = v.matrix();
    (0..4)
        .map(|i| (0..4).map(|j| m[(i, j)]).collect())
        .collect()
}

fn cmd_simulate(common: &Common, dump_cm: bool) -> Result<(), Failure> {
    let loaded = load(common)?;
    let scenario = loaded.config.to_scenario()?;
    let sim = simulate(&scenario)?;
    let mut out = json!({
        "metrics": sim.metrics,
        "lossless_metrics": sim.lossless_metrics,
        "eta": sim.eta,
        "quad_error": sim.quad_error,
        "evaluations": sim.evaluations,
    });
    if dump_cm {
        let cm = json!({
            "covariance": rows(&sim.covariance),
            "delivered_covariance": sim.lossy_covariance.as_ref().map(rows),
        });
        if loaded.out.is_some() {
            write_json(
                &loaded.out_dir().join(format!("{}_cm.json", loaded.stem)),
                &cm,
            )?;
        }
        out["covariance"] = cm["covariance"].clone();
        out["delivered_covariance"] = cm["delivered_covariance"].clone();
    }
    emit_json(&out)?;
    Ok(())
}

fn cmd_sweep(common: &Common, workers: &Workers, resume: bool) -> Result<(), Failure> {
    let loaded = load(common)?;
    let spec = loaded.config.sweep_spec()?;
    let dir = loaded.out_dir();
    std::fs::create_dir_all(&dir)
        .map_err(|e| Failure::Numerical(format!("{}: {e}", dir.display())))?;
    let options = SweepOptions {
        workers: workers.workers,
        checkpoint: Some(dir.join(format!("{}.checkpoint.jsonl", loaded.stem))),
        resume,
    };
    if options.workers == Some(0) {
        return Err(Failure::Config(
            "configuration error: --workers must be at least 1".into(),
        ));
    }
    let table = run_sweep_with(&spec, &options)?;
    let files = write_sweep(
        &dir,
        &loaded.stem,
        &spec,
        &table,
        Some(loaded.config.to_json_value()),
    )?;
    let summary = json!({
        "csv": files.csv,
        "lossless_csv": files.lossless_csv,
        "metadata": files.metadata,
        "rows": table.rows.len(),
        "unstable": table.rows.iter().filter(|r| !r.result.stable).count(),
        "errors": table.rows.iter().filter(|r| r.result.error.is_some()).count(),
    });
    emit_json(&summary)?;
    Ok(())
}

fn cmd_optimize(common: &Common, workers: &Workers) -> Result<(), Failure> {
    let loaded = load(common)?;
    let scenario = loaded.config.to_scenario()?;
    let options = loaded.config.optimize_options();
    let optimum = pool(workers)?.install(|| optimize_gain(&scenario, &options))?;
    let out = json!({
        "parameter": options.parameter,
        "objective": options.objective,
        "argmax": optimum.argmax,
        "value": optimum.value,
        "cancellation_gain": optimum.cancellation_gain,
        "cancellation_offset": optimum.cancellation_offset,
        "evaluations": optimum.evaluations,
        "history": optimum.history,
        "grid": optimum.grid,
    });
    if loaded.out.is_some() {
        write_json(
            &loaded
                .out_dir()
                .join(format!("{}_optimum.json", loaded.stem)),
            &out,
        )?;
    }
    emit_json(&out)?;
    Ok(())
}

fn cmd_validate(common: &Common, tolerance_scale: Option<f64>) -> Result<(), Failure> {
    let loaded = load(common)?;
    let scenario = loaded.config.to_scenario()?;
    let mut options = loaded.config.validate;
    if let Some(scale) = tolerance_scale {
        options.tolerance_scale = scale;
    }
    let report = validate_suite(&scenario, &options);
    let text = report.to_string();
    if loaded.out.is_some() {
        let path = loaded
            .out_dir()
            .join(format!("{}_validation.txt", loaded.stem));
        write_atomic(&path, text.as_bytes())?;
    }
    emit(&text)?;
    if report.passed() {
        Ok(())
    } else {
        Err(Failure::Validation)
    }
}

fn cmd_print_config(common: &Common, as_json: bool) -> Result<(), Failure> {
    let loaded = load(common)?;
    loaded.config.to_scenario()?;
    if as_json {
        emit_json(&loaded.config.to_json_value())?;
    } else {
        emit(&loaded.config.to_toml_string())?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate { common, dump_cm } => cmd_simulate(common, *dump_cm),
        Command::Sweep {
            common,
            workers,
            resume,
        } => cmd_sweep(common, workers, *resume),
        Command::Optimize { common, workers } => cmd_optimize(common, workers),
        Command::Validate {
            common,
            tolerance_scale,
        } => cmd_validate(common, *tolerance_scale),
        Command::PrintConfig { common, json } => cmd_print_config(common, *json),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            match &failure {
                Failure::Validation => {}
                Failure::Config(m) => eprintln!("error: {m}"),
                Failure::Unstable(m) => eprintln!("error: unstable operating point: {m}"),
                Failure::Numerical(m) => eprintln!("error: {m}"),
            }
            ExitCode::from(failure.code())
        }
    }
}
