//! Command-line verbs. Exit codes: 0 success, 1 verify rejected,
//! 2 validation error, 3 internal error.

use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use hapass_core::analysis::{cohort_complexity, cohort_entropy, AnalysisError};
use hapass_core::config::{Config, ConfigError};
use hapass_core::evaluation::protocol::Aggregation;
use hapass_core::evaluation::{load_cohort, loo_tune, Cohort, run_protocol, EvalError, TuningCohort, TuningGrid};
use hapass_core::matcher::weights::WeightOptions;
use hapass_core::matcher::Method;
use hapass_core::service::{Service, ServiceError};
use hapass_core::synth::{generate_cohort, write_cohort, Preset, SynthError};
use hapass_core::trace::{compute_state, parse_trace, parse_trace_csv, Channel, PasswordTrace, Task, TraceError};
use hapass_core::wavelet::{modwt, MotherWavelet, WaveletError, PIPELINE_DEPTH};

pub const EXIT_REJECTED: u8 = 1;
pub const EXIT_INVALID: u8 = 2;
pub const EXIT_INTERNAL: u8 = 3;

fn parse<T: FromStr>(s: &str) -> Result<T, String>
where
    T::Err: Display,
{
    s.parse::<T>().map_err(|e| e.to_string())
}

#[derive(Debug, Parser)]
#[command(name = "hapass", version, about = "Force-sensitive stroke password enrollment, verification and evaluation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// TOML file overriding default parameters.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StoreArgs {
    /// Directory of the user store.
    #[arg(long, default_value = "hapass-store")]
    pub store: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic cohort in the split directory layout.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, value_parser = parse::<Preset>)]
        preset: Option<Preset>,
        #[arg(long)]
        users: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Add enrollment traces for a user, creating the user if needed.
    Enroll {
        #[arg(long)]
        user: String,
        #[arg(long, value_parser = parse::<Task>)]
        task: Option<Task>,
        #[arg(long, value_parser = parse::<Method>)]
        method: Option<Method>,
        #[arg(required = true)]
        traces: Vec<PathBuf>,
        #[command(flatten)]
        store: StoreArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Verify one trace. Exits 1 when rejected.
    Verify {
        #[arg(long)]
        user: String,
        #[arg(long, value_parser = parse::<Method>)]
        method: Option<Method>,
        /// Apply the adaptive template update when accepted.
        #[arg(long)]
        adapt: bool,
        trace: PathBuf,
        #[command(flatten)]
        store: StoreArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Run the two-session protocol over a cohort directory.
    Evaluate {
        cohort: PathBuf,
        #[arg(long = "method", value_parser = parse::<Method>)]
        methods: Vec<Method>,
        #[arg(long, value_parser = parse::<Task>)]
        task: Option<Task>,
        #[arg(long)]
        fmr_target: Option<f64>,
        /// Average per-user results instead of pooling scores.
        #[arg(long)]
        per_user: bool,
        /// Only print rows with this adaptivity.
        #[arg(long)]
        adaptive: Option<bool>,
        /// Directory for report.json, report.md and DET CSVs.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Leave-one-out grid search over wavelets and matcher parameters.
    Tune {
        cohort: PathBuf,
        #[arg(long, value_parser = parse::<Method>, default_value = "euclidean")]
        method: Method,
        #[arg(long)]
        fmr_target: Option<f64>,
        /// Write every grid cell as JSON here.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Complexity or entropy of a cohort's enrollment traces.
    Analyze {
        #[command(subcommand)]
        what: Analyze,
    },
    /// Serve the HTTP JSON API.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: String,
        #[command(flatten)]
        store: StoreArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Print a user's record as JSON.
    Export {
        #[arg(long)]
        user: String,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        store: StoreArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Register a user from an exported record.
    Import {
        document: PathBuf,
        #[command(flatten)]
        store: StoreArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Dump the MODWT pyramid of one trace channel as CSV.
    Modwt {
        trace: PathBuf,
        #[arg(long, value_parser = parse::<MotherWavelet>, default_value = "C12")]
        wavelet: MotherWavelet,
        #[arg(long, value_parser = parse::<Channel>, default_value = "f")]
        channel: Channel,
        #[arg(long, default_value_t = PIPELINE_DEPTH)]
        depth: usize,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Debug, Subcommand)]
pub enum Analyze {
    Complexity {
        cohort: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    Entropy {
        cohort: PathBuf,
        #[arg(long, value_parser = parse::<MotherWavelet>)]
        wavelet: Option<MotherWavelet>,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Debug)]
pub enum CliError {
    Invalid(String),
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Invalid(_) => EXIT_INVALID,
            CliError::Internal(_) => EXIT_INTERNAL,
        }
    }
}

impl Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Invalid(m) | CliError::Internal(m) => f.write_str(m),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Invalid(e.to_string())
    }
}

impl From<ServiceError> for CliError {
    fn from(e: ServiceError) -> Self {
        if e.is_client_error() {
            CliError::Invalid(e.to_string())
        } else {
            CliError::Internal(e.to_string())
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Io(m) => CliError::Internal(m),
            e => CliError::Invalid(e.to_string()),
        }
    }
}

impl From<AnalysisError> for CliError {
    fn from(e: AnalysisError) -> Self {
        CliError::Invalid(e.to_string())
    }
}

impl From<SynthError> for CliError {
    fn from(e: SynthError) -> Self {
        match e {
            SynthError::Io(e) => CliError::Internal(e.to_string()),
            e => CliError::Invalid(e.to_string()),
        }
    }
}

impl From<WaveletError> for CliError {
    fn from(e: WaveletError) -> Self {
        CliError::Invalid(e.to_string())
    }
}

fn io(path: &Path, e: std::io::Error) -> CliError {
    if e.kind() == std::io::ErrorKind::NotFound {
        CliError::Invalid(format!("{}: {e}", path.display()))
    } else {
        CliError::Internal(format!("{}: {e}", path.display()))
    }
}

fn cohort_at(path: &Path) -> Result<Cohort, CliError> {
    if !path.is_dir() {
        return Err(CliError::Invalid(format!("{}: not a cohort directory", path.display())));
    }
    Ok(load_cohort(path)?)
}

fn load_config(common: &Common) -> Result<Config, CliError> {
    match &common.config {
        Some(path) => Ok(Config::load(path)?),
        None => Ok(Config::default()),
    }
}

/// Reads a `.json` or `.csv` trace file.
pub fn read_trace(path: &Path) -> Result<PasswordTrace, CliError> {
    let bytes = fs::read(path).map_err(|e| io(path, e))?;
    let parsed = if path.extension().is_some_and(|e| e == "csv") {
        parse_trace_csv(&bytes)
    } else {
        parse_trace(&bytes)
    };
    parsed.map_err(|e: TraceError| CliError::Invalid(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| io(parent, e))?;
    }
    fs::write(path, contents).map_err(|e| io(path, e))
}

fn json<T: serde::Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("output serializes")
}

/// Runs one command and returns the process exit code.
pub fn run(cli: Cli) -> ExitCode {
    match execute(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn execute(command: Command) -> Result<u8, CliError> {
    match command {
        Command::Synth { out, seed, preset, users, common } => {
            let cfg = load_config(&common)?;
            let mut synth = cfg.synth.clone();
            if let Some(p) = preset {
                synth.preset = p;
            }
            if let Some(n) = users {
                synth.users = n;
            }
            let cohort = generate_cohort(seed, &synth)?;
            write_cohort(&out, &cohort)?;
            println!("wrote {} synthetic users to {}", cohort.cohort.users.len(), out.display());
            Ok(0)
        }
        Command::Enroll { user, task, method, traces, store, common } => {
            let svc = Service::open(&store.store, load_config(&common)?)?;
            if !svc.store().contains(&user)? {
                svc.create_user(&user, task, method)?;
            }
            for path in &traces {
                let trace = read_trace(path)?;
                let progress = svc.enroll(&user, &trace)?;
                println!("{}", serde_json::to_string(&progress).expect("progress serializes"));
            }
            Ok(0)
        }
        Command::Verify { user, method, adapt, trace, store, common } => {
            let svc = Service::open(&store.store, load_config(&common)?)?;
            let outcome = svc.verify(&user, &read_trace(&trace)?, method, adapt)?;
            println!("{}", json(&outcome));
            Ok(if outcome.accepted { 0 } else { EXIT_REJECTED })
        }
        Command::Evaluate { cohort, methods, task, fmr_target, per_user, adaptive, out, common } => {
            let cfg = load_config(&common)?;
            let mut protocol = cfg.protocol();
            if !methods.is_empty() {
                protocol.methods = methods;
            }
            protocol.task = task;
            if let Some(f) = fmr_target {
                protocol.fmr_target = f;
            }
            if per_user {
                protocol.aggregation = Aggregation::PerUser;
            }
            let mut report = run_protocol(&cohort_at(&cohort)?, &protocol)?;
            if let Some(a) = adaptive {
                report.rows.retain(|r| r.adaptive == a);
            }
            if let Some(dir) = out {
                write_file(&dir.join("report.json"), &report.to_json())?;
                write_file(&dir.join("report.md"), &report.to_markdown())?;
                report.write_det_csvs(&dir)?;
            }
            print!("{}", report.to_markdown());
            Ok(0)
        }
        Command::Tune { cohort, method, fmr_target, out, common } => {
            let cfg = load_config(&common)?;
            let mut grid = match method {
                Method::Euclidean => TuningGrid::euclidean_default(),
                Method::Hamming => TuningGrid::hamming_default(),
            };
            if let Some(f) = fmr_target {
                grid.fmr_target = f;
            }
            let cohort = cohort_at(&cohort)?;
            let data = TuningCohort::from_cohort(&cohort, &grid.wavelets, cfg.enrollment.count)?;
            let options = WeightOptions {
                tolerance: cfg.euclidean.tolerance,
                max_iterations: cfg.euclidean.max_iterations,
                weight_floor: cfg.euclidean.weight_floor,
            };
            let result = loo_tune(&data, &grid, &options)?;
            if let Some(path) = out {
                write_file(&path, &json(&result))?;
            }
            println!("{}", json(&result.best));
            Ok(0)
        }
        Command::Analyze { what } => match what {
            Analyze::Complexity { cohort, common } => {
                let cfg = load_config(&common)?;
                let report = cohort_complexity(&cohort_at(&cohort)?, cfg.enrollment.count, &cfg.hamming)?;
                println!("{}", json(&report));
                Ok(0)
            }
            Analyze::Entropy { cohort, wavelet, common } => {
                let cfg = load_config(&common)?;
                let wavelet = wavelet.unwrap_or(cfg.euclidean.wavelet);
                let report = cohort_entropy(&cohort_at(&cohort)?, cfg.enrollment.count, wavelet)?;
                println!("{}", json(&report));
                Ok(0)
            }
        },
        Command::Serve { addr, store, common } => {
            let svc = Arc::new(Service::open(&store.store, load_config(&common)?)?);
            let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::Internal(e.to_string()))?;
            runtime.block_on(async move {
                let listener = tokio::net::TcpListener::bind(&addr)
                    .await
                    .map_err(|e| CliError::Invalid(format!("bind {addr}: {e}")))?;
                eprintln!("listening on {addr}");
                axum::serve(listener, crate::api::router(svc))
                    .with_graceful_shutdown(async {
                        let _ = tokio::signal::ctrl_c().await;
                    })
                    .await
                    .map_err(|e| CliError::Internal(e.to_string()))
            })?;
            Ok(0)
        }
        Command::Export { user, out, store, common } => {
            let svc = Service::open(&store.store, load_config(&common)?)?;
            let doc = svc.export_user(&user)?;
            match out {
                Some(path) => write_file(&path, &doc)?,
                None => println!("{doc}"),
            }
            Ok(0)
        }
        Command::Import { document, store, common } => {
            let svc = Service::open(&store.store, load_config(&common)?)?;
            let text = fs::read_to_string(&document).map_err(|e| io(&document, e))?;
            let status = svc.import_user(&text)?;
            println!("{}", json(&status));
            Ok(0)
        }
        Command::Modwt { trace, wavelet, channel, depth, common } => {
            load_config(&common)?;
            let trace = read_trace(&trace)?;
            let state = compute_state(&trace);
            let pyramid = modwt(state.channel(channel), wavelet, depth)?;
            print!("{}", pyramid.to_csv());
            Ok(0)
        }
    }
}
