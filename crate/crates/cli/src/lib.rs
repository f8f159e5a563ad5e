//! `mbstat` command line: synthetic data generation, rolling-window analysis
//! of asset pairs, and closed-form verification against the brute-force
//! oracle.

// `!(x > 0.0)` and friends are meant to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod engine;
pub mod report;

use std::fmt;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use mbstat_core::synth::{self, SynthConfig, SynthMode};
use mbstat_core::{parse_trades, trade_series, Error, TradeSeries};

use engine::{Engine, EngineError, EngineParams, Stat, StatFamily};
use report::{Format, ReportHeader, ReportWriter};

/// Process exit statuses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok = 0,
    ToleranceBreach = 1,
    InvalidFlags = 2,
    Io = 3,
    InvalidInput = 4,
    InsufficientHistory = 5,
}

impl Status {
    pub fn code(self) -> i32 {
        self as i32
    }
}

#[derive(Debug)]
pub struct Failure {
    pub status: Status,
    pub message: String,
}

impl Failure {
    fn new(status: Status, message: impl Into<String>) -> Self {
        Failure {
            status,
            message: message.into(),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<EngineError> for Failure {
    fn from(e: EngineError) -> Self {
        let status = match &e {
            EngineError::InvalidParams(_) => Status::InvalidFlags,
            EngineError::InsufficientHistory(_) => Status::InsufficientHistory,
            EngineError::Validation(_) | EngineError::NonFinite { .. } => Status::InvalidInput,
            EngineError::Io(_) => Status::Io,
        };
        Failure::new(status, e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "mbstat", version, about = "Market-based statistics of trade series")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a seeded synthetic trade series as CSV.
    Generate(GenerateArgs),
    /// Rolling-window market-based and frequency-based statistics.
    Analyze(AnalyzeArgs),
    /// Check closed forms against the brute-force oracle on every window.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Free,
    ConstantVolume,
    ConstantPastValue,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Number of ticks (at least 2).
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "free")]
    pub mode: ModeArg,
    /// Past-value lag in grid steps for `constant-past-value`.
    #[arg(long, default_value_t = 1)]
    pub alpha: usize,
    #[arg(long, default_value_t = 100.0)]
    pub price_start: f64,
    /// Standard deviation of the per-tick log-price step.
    #[arg(long, default_value_t = 0.01)]
    pub price_step_sd: f64,
    #[arg(long, default_value_t = 4.0)]
    pub volume_log_mean: f64,
    #[arg(long, default_value_t = 0.5)]
    pub volume_log_sd: f64,
    #[arg(long, default_value_t = 0)]
    pub start_time: i64,
    /// Grid spacing.
    #[arg(long, default_value_t = 1)]
    pub epsilon: i64,
    /// Output file; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Json,
    Csv,
}

#[derive(Debug, Args)]
pub struct InputArgs {
    #[arg(long)]
    pub asset1: PathBuf,
    /// Second asset; the first asset is paired with itself when omitted.
    #[arg(long)]
    pub asset2: Option<PathBuf>,
    /// Return lag of asset 1, grid steps.
    #[arg(long, default_value_t = 1)]
    pub alpha: usize,
    /// Lag of asset 2 (and its return lag), grid steps.
    #[arg(long, default_value_t = 0)]
    pub beta: usize,
    /// Ticks per window.
    #[arg(long)]
    pub window: usize,
    /// Grid steps between consecutive windows.
    #[arg(long, default_value_t = 1)]
    pub stride: usize,
    /// Comma-separated subset of price_corr, return_corr, price_return_corr,
    /// price_vol, return_vol, joint_moments, or `all`.
    #[arg(long, default_value = "all")]
    pub stats: String,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, value_enum, default_value = "json")]
    pub format: FormatArg,
    /// Output file; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Largest accepted relative deviation.
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
}

/// Runs a parsed command, writing summaries and diagnostics to `stdout`.
pub fn run(cli: Cli, stdout: &mut dyn Write) -> Result<Status, Failure> {
    match cli.command {
        Command::Generate(args) => run_generate(&args, stdout),
        Command::Analyze(args) => run_analyze(&args, stdout),
        Command::Verify(args) => run_verify(&args, stdout),
    }
}

fn io_failure(what: &str, path: Option<&Path>, e: io::Error) -> Failure {
    match path {
        Some(p) => Failure::new(Status::Io, format!("{what} {}: {e}", p.display())),
        None => Failure::new(Status::Io, format!("{what}: {e}")),
    }
}

/// Writes through `write` to `path`, or to `stdout` when `path` is `None`.
fn with_output<F>(path: Option<&Path>, stdout: &mut dyn Write, write: F) -> Result<(), Failure>
where
    F: FnOnce(&mut dyn Write) -> Result<(), Failure>,
{
    match path {
        Some(p) => {
            let file = File::create(p).map_err(|e| io_failure("cannot create", Some(p), e))?;
            let mut out = BufWriter::with_capacity(1 << 16, file);
            write(&mut out)?;
            out.flush().map_err(|e| io_failure("cannot write", Some(p), e))
        }
        None => {
            let mut out = BufWriter::with_capacity(1 << 16, stdout);
            write(&mut out)?;
            out.flush().map_err(|e| io_failure("cannot write", None, e))
        }
    }
}

pub fn run_generate(args: &GenerateArgs, stdout: &mut dyn Write) -> Result<Status, Failure> {
    let config = SynthConfig {
        n_ticks: args.n,
        seed: args.seed,
        price_start: args.price_start,
        log_price_step_sd: args.price_step_sd,
        volume_log_mean: args.volume_log_mean,
        volume_log_sd: args.volume_log_sd,
        mode: match args.mode {
            ModeArg::Free => SynthMode::Free,
            ModeArg::ConstantVolume => SynthMode::ConstantVolume,
            ModeArg::ConstantPastValue => SynthMode::ConstantPastValue { alpha: args.alpha },
        },
        start_time: args.start_time,
        epsilon: args.epsilon,
    };
    let series = synth::gen_trades(&config).map_err(|e| Failure::new(Status::InvalidFlags, e.to_string()))?;
    with_output(args.out.as_deref(), stdout, |out| {
        trade_series::write_trades(&series, out).map_err(|e| io_failure("cannot write", args.out.as_deref(), e))
    })?;
    Ok(Status::Ok)
}

fn asset_id(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

pub fn load_series(path: &Path) -> Result<TradeSeries, Failure> {
    let text = fs::read_to_string(path).map_err(|e| io_failure("cannot read", Some(path), e))?;
    parse_trades(asset_id(path), &text).map_err(|e: Error| {
        Failure::new(Status::InvalidInput, format!("{}: {e}", path.display()))
    })
}

pub fn parse_stats(list: &str) -> Result<Vec<Stat>, Failure> {
    let mut stats = Vec::new();
    for name in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        if name == "all" {
            stats.extend(Stat::ALL);
            continue;
        }
        let stat = Stat::parse(name)
            .ok_or_else(|| Failure::new(Status::InvalidFlags, format!("unknown statistic `{name}`")))?;
        stats.push(stat);
    }
    if stats.is_empty() {
        return Err(Failure::new(Status::InvalidFlags, "no statistics requested"));
    }
    Ok(stats)
}

struct Inputs {
    asset1: TradeSeries,
    asset2: Option<TradeSeries>,
    params: EngineParams,
}

impl Inputs {
    fn load(args: &InputArgs) -> Result<Self, Failure> {
        if args.window == 0 {
            return Err(Failure::new(Status::InvalidFlags, "--window must be >= 1"));
        }
        if args.stride == 0 {
            return Err(Failure::new(Status::InvalidFlags, "--stride must be >= 1"));
        }
        let stats = parse_stats(&args.stats)?;
        let asset1 = load_series(&args.asset1)?;
        let asset2 = args.asset2.as_deref().map(load_series).transpose()?;
        Ok(Inputs {
            asset1,
            asset2,
            params: EngineParams {
                alpha: args.alpha,
                beta: args.beta,
                window: args.window,
                stride: args.stride,
                stats,
            },
        })
    }

    fn second(&self) -> &TradeSeries {
        self.asset2.as_ref().unwrap_or(&self.asset1)
    }

    fn engine(&self) -> Result<Engine<'_>, Failure> {
        Ok(Engine::new(&self.asset1, self.second(), self.params.clone())?)
    }
}

pub fn run_analyze(args: &AnalyzeArgs, stdout: &mut dyn Write) -> Result<Status, Failure> {
    let inputs = Inputs::load(&args.input)?;
    let engine = inputs.engine()?;
    let header = ReportHeader {
        asset1: inputs.asset1.asset_id().to_string(),
        asset2: inputs.second().asset_id().to_string(),
        alpha: args.input.alpha as i64,
        beta: args.input.beta as i64,
        window: args.input.window,
        stride: args.input.stride,
    };
    let format = match args.format {
        FormatArg::Json => Format::Json,
        FormatArg::Csv => Format::Csv,
    };
    let path = args.out.as_deref();
    with_output(path, stdout, |out| {
        let io_err = |e| io_failure("cannot write", path, e);
        let mut writer = ReportWriter::new(out, format);
        writer.begin(&header).map_err(io_err)?;
        engine.run(|record| Ok(writer.write(record)?))?;
        writer.finish().map_err(io_err)?;
        Ok(())
    })?;
    Ok(Status::Ok)
}

/// Relative deviation `|a - b| / max(|a|, |b|)`, zero when both are zero.
pub fn relative_deviation(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Worst deviation seen for one family during `verify`.
#[derive(Debug, Clone, PartialEq)]
pub struct FamilySummary {
    pub family: StatFamily,
    pub windows: usize,
    pub max_deviation: f64,
    pub worst_t_center: f64,
}

pub fn verify_engine(engine: &Engine<'_>) -> Result<Vec<FamilySummary>, Failure> {
    let mut summaries: Vec<FamilySummary> = engine
        .families()
        .iter()
        .map(|&family| FamilySummary {
            family,
            windows: 0,
            max_deviation: 0.0,
            worst_t_center: f64::NAN,
        })
        .collect();
    for start in engine.positions() {
        let t_center = engine.t_center_of(start);
        for (summary, (_, closed, brute)) in summaries.iter_mut().zip(engine.oracle_pairs(start)?) {
            let dev = relative_deviation(closed, brute);
            if !dev.is_finite() {
                return Err(Failure::new(
                    Status::InvalidInput,
                    format!("non-finite {} at t_center={t_center}", summary.family.name()),
                ));
            }
            summary.windows += 1;
            if dev > summary.max_deviation || summary.worst_t_center.is_nan() {
                summary.max_deviation = dev;
                summary.worst_t_center = t_center;
            }
        }
    }
    Ok(summaries)
}

pub fn run_verify(args: &VerifyArgs, stdout: &mut dyn Write) -> Result<Status, Failure> {
    if !(args.tol >= 0.0) {
        return Err(Failure::new(Status::InvalidFlags, "--tol must be >= 0"));
    }
    let inputs = Inputs::load(&args.input)?;
    let engine = inputs.engine()?;
    let summaries = verify_engine(&engine)?;
    let mut status = Status::Ok;
    let mut text = String::new();
    for s in &summaries {
        let verdict = if s.max_deviation <= args.tol {
            "ok"
        } else {
            status = Status::ToleranceBreach;
            "FAIL"
        };
        text.push_str(&format!(
            "{verdict} {} windows={} max_rel_dev={:e} at t_center={}\n",
            s.family.name(),
            s.windows,
            s.max_deviation,
            s.worst_t_center
        ));
    }
    if status == Status::ToleranceBreach {
        text.push_str(&format!("tolerance {:e} exceeded\n", args.tol));
    }
    stdout
        .write_all(text.as_bytes())
        .map_err(|e| io_failure("cannot write", None, e))?;
    Ok(status)
}
