//! `percept` command line.
//!
//! Exit codes: 0 success, 1 other failure, 2 schema violation, 3 engine
//! validation or numerical error, 4 resource limit. Failures print an
//! [`ErrorBody`](crate::error::ErrorBody) as JSON on stderr and, when an
//! output directory is known, to `error.json` in it.

use std::ffi::OsString;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use percept_core::pipeline::default_run_id;
use percept_core::{Backend, RunConfig, RunMode, RunResult};
use serde_json::Value;

use crate::error::{Result, ServiceError};
use crate::export::{self, write_json, CsfTables};
use crate::jobs::{self, Outcome};
use crate::schema::{canonical_json, parse_config};
use crate::server::{self, ServiceConfig};

#[derive(Debug, Parser)]
#[command(name = "percept", version, about = "Predict motion artifacts and stereo depth errors of sampled displays")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum BackendArg {
    Auto,
    Cpu,
    Accelerator,
}

impl From<BackendArg> for Backend {
    fn from(b: BackendArg) -> Self {
        match b {
            BackendArg::Auto => Backend::Auto,
            BackendArg::Cpu => Backend::Cpu,
            BackendArg::Accelerator => Backend::Accelerator,
        }
    }
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Configuration file (JSON).
    #[arg(short, long)]
    pub config: PathBuf,
    /// Output directory.
    #[arg(short, long)]
    pub out: PathBuf,
    /// Overrides the backend named in the configuration.
    #[arg(long, value_enum)]
    pub backend: Option<BackendArg>,
    /// Also compare against this master configuration; the bundle goes to `<out>/comparison`.
    #[arg(long, value_name = "MASTER_JSON")]
    pub compare: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the prediction (or the stereo path for STEREO configurations).
    Run(RunArgs),
    /// Run the stereo disparity model.
    Stereo {
        #[arg(short, long)]
        config: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        #[arg(long, value_enum)]
        backend: Option<BackendArg>,
    },
    /// Compare runs against a master run or their own continuous percepts.
    ///
    /// Each input is a configuration file or a directory written by `run`.
    Compare {
        #[arg(short, long = "config", required = true)]
        configs: Vec<PathBuf>,
        #[arg(long)]
        master: Option<PathBuf>,
        #[arg(short, long)]
        out: PathBuf,
        #[arg(long, value_enum)]
        backend: Option<BackendArg>,
    },
    /// Export contrast-sensitivity curves and surfaces as CSV and PNG.
    Csf {
        #[arg(short, long)]
        out: PathBuf,
        /// Adapting luminances in cd/m^2 (repeatable).
        #[arg(short, long = "luminance")]
        luminances: Vec<f64>,
        #[arg(long, default_value_t = 5.0)]
        object_size_deg: f64,
        #[arg(long, default_value_t = 64)]
        points: usize,
    },
    /// Start the HTTP service.
    Serve {
        #[arg(long, env = "PERCEPT_PORT", default_value_t = 8080)]
        port: u16,
        #[arg(long, env = "PERCEPT_HOST", default_value = "127.0.0.1")]
        host: String,
        #[arg(long, env = "PERCEPT_DATA_DIR", default_value = "percept-data")]
        data_dir: PathBuf,
        #[arg(long, env = "PERCEPT_WORKERS")]
        workers: Option<usize>,
        #[arg(long, env = "PERCEPT_QUEUE", default_value_t = 64)]
        queue: usize,
    },
}

impl Command {
    fn out_dir(&self) -> Option<&Path> {
        match self {
            Command::Run(a) => Some(&a.out),
            Command::Stereo { out, .. } | Command::Compare { out, .. } | Command::Csf { out, .. } => Some(out),
            Command::Serve { .. } => None,
        }
    }
}

fn load_config(path: &Path, backend: Option<BackendArg>) -> Result<(RunConfig, Value)> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ServiceError::Schema(format!("cannot read {}: {e}", path.display())))?;
    let mut config = parse_config(&text)?;
    let posted: Value = serde_json::from_str(&text).map_err(|e| ServiceError::Schema(e.to_string()))?;
    if let Some(b) = backend {
        config.backend = b.into();
    }
    Ok((config, posted))
}

fn print_json(v: &Value) {
    use std::io::Write;
    let _ = writeln!(std::io::stdout(), "{}", serde_json::to_string_pretty(v).unwrap_or_default());
}

/// Runs one configuration into `out`, writing the posted config as canonical JSON.
fn run_one(config: &RunConfig, posted: &Value, out: &Path) -> Result<(String, Outcome)> {
    let run_id = config.id.clone().unwrap_or_else(|| default_run_id(config));
    std::fs::create_dir_all(out)?;
    export::write_atomic(&out.join("config.json"), canonical_json(posted).as_bytes())?;
    let outcome = jobs::run_to_dir(config, out)?;
    Ok((run_id, outcome))
}

fn prediction(outcome: Outcome, what: &str) -> Result<RunResult> {
    match outcome {
        Outcome::Prediction(r) => Ok(*r),
        Outcome::Stereo(_) => Err(percept_core::Error::Incompatible(format!("{what} is a stereo configuration")).into()),
    }
}

/// A `compare` input: a run directory or a configuration to run in memory.
fn load_input(path: &Path, backend: Option<BackendArg>) -> Result<RunResult> {
    if path.is_dir() {
        let id = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        return jobs::load_prediction(path, &id);
    }
    let (config, _) = load_config(path, backend)?;
    prediction(jobs::execute(&config)?, &path.display().to_string())
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Run(args) => {
            let (config, posted) = load_config(&args.config, args.backend)?;
            let (run_id, outcome) = run_one(&config, &posted, &args.out)?;
            let mut summary = jobs::summary(&run_id, &outcome);
            if let Some(master_path) = &args.compare {
                let (master_cfg, _) = load_config(master_path, args.backend)?;
                let master = prediction(jobs::execute(&master_cfg)?, "the master")?;
                let run = prediction(outcome, "the run")?;
                let cmp = jobs::compare_to_dir(Some(&master), &[&run], &args.out.join("comparison"), &run_id)?;
                summary["comparison"] = serde_json::to_value(cmp).unwrap_or(Value::Null);
            }
            print_json(&summary);
        }
        Command::Stereo { config, out, backend } => {
            let (config, posted) = load_config(&config, backend)?;
            if config.mode != RunMode::Stereo {
                return Err(percept_core::Error::validation("mode", "the stereo command needs mode STEREO").into());
            }
            let (run_id, outcome) = run_one(&config, &posted, &out)?;
            print_json(&jobs::summary(&run_id, &outcome));
        }
        Command::Compare {
            configs,
            master,
            out,
            backend,
        } => {
            let master = master.map(|m| load_input(&m, backend)).transpose()?;
            let runs = configs
                .iter()
                .map(|c| load_input(c, backend))
                .collect::<Result<Vec<_>>>()?;
            let refs: Vec<&RunResult> = runs.iter().collect();
            let cmp = jobs::compare_to_dir(master.as_ref(), &refs, &out, "comparison")?;
            print_json(&serde_json::to_value(cmp).unwrap_or(Value::Null));
        }
        Command::Csf {
            out,
            luminances,
            object_size_deg,
            points,
        } => {
            let mut tables = CsfTables {
                object_size_deg,
                points,
                ..CsfTables::default()
            };
            if !luminances.is_empty() {
                tables.luminances_cdm2 = luminances;
            }
            let files = export::write_csf(&out, &tables)?;
            let names: Vec<String> = files.iter().map(|f| f.display().to_string()).collect();
            print_json(&serde_json::json!({ "files": names }));
        }
        Command::Serve {
            port,
            host,
            data_dir,
            workers,
            queue,
        } => {
            let addr: SocketAddr = format!("{host}:{port}")
                .parse()
                .map_err(|e| ServiceError::Schema(format!("bad address {host}:{port}: {e}")))?;
            let workers = workers.unwrap_or_else(|| std::thread::available_parallelism().map_or(2, |n| n.get()));
            let config = ServiceConfig {
                data_dir,
                workers,
                queue_capacity: queue,
            };
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(server::serve(config, addr))?;
        }
    }
    Ok(())
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let out = cli.command.out_dir().map(Path::to_path_buf);
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            let body = e.body();
            eprintln!("{}", serde_json::to_string(&body).unwrap_or_else(|_| e.to_string()));
            if let Some(dir) = out {
                if let Err(w) = write_json(&dir.join("error.json"), &body) {
                    log::warn!("could not write error.json: {w}");
                }
            }
            e.exit_code()
        }
    }
}
