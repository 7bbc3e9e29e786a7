//! Command-line entry points.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 invalid config or usage,
//! 3 remote backend unreachable, 130 interrupted (after flushing output).

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use tracing_subscriber::EnvFilter;

use crate::backends::{remote::probe_endpoint, LatencyModel};
use crate::config::{Config, ConfigError};
use crate::corpus::{sample_adjacent, split_segment, SplitRatio};
use crate::eval::{build_report, read_decisions, render_table, CiderOptions, EvalOptions};
use crate::pipeline::{run_threaded, simulate, PipelineError, Setup};
use crate::sink::{DecisionSink, JsonlSink};
use crate::stream::{Speed, StreamManifest, ANOMALY_ONSET};
use crate::time::Timestamp;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_BACKEND: i32 = 3;
pub const EXIT_INTERRUPTED: i32 = 130;

#[derive(Debug, Parser)]
#[command(name = "watchtower", version, about = "Multi-agent streaming orchestrator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Replay a stream through the pipeline and write decisions as JSONL.
    Run(RunArgs),
    /// Run on virtual time with mock backends and print a timing report.
    Simulate(SimulateArgs),
    /// Compute detection, text and latency metrics from decision logs.
    Eval(EvalArgs),
    /// Fixture and dataset tools.
    #[command(subcommand)]
    Corpus(CorpusCommand),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Pipeline config file (TOML).
    #[arg(long)]
    pub config: PathBuf,
    /// Replay speed multiplier, or "inf".
    #[arg(long)]
    pub speed: Option<Speed>,
    /// Decision JSONL output file (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Seed for mock latency and fault draws.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Serve the queues over the length-prefixed wire protocol.
    #[arg(long)]
    pub wire: bool,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Fixed per-call latency override, e.g. `reasoner=1.5` (seconds).
    #[arg(long = "latency", value_name = "ROLE=SECS")]
    pub latency: Vec<String>,
    /// Print the report as JSON.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Decision JSONL files.
    #[arg(long = "decisions", required = true)]
    pub decisions: Vec<PathBuf>,
    /// Stream manifests carrying labels and onset markers.
    #[arg(long = "manifest")]
    pub manifests: Vec<PathBuf>,
    /// JSON object mapping stream id to reference texts.
    #[arg(long)]
    pub references: Option<PathBuf>,
    /// Average BLEU per sentence instead of pooling the corpus.
    #[arg(long)]
    pub sentence_bleu: bool,
    /// Multiply CIDEr by 10.
    #[arg(long)]
    pub cider_scale10: bool,
    /// Write the JSON report here as well as printing the table.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum CorpusCommand {
    /// Split a manifest into fixed-length clips with historical/adjacent parts.
    Split(SplitArgs),
    /// Write a constant-rate synthetic manifest.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// One of 3:7, 1:1, 7:3.
    #[arg(long)]
    pub ratio: SplitRatio,
    /// Frames per clip; a multiple of 10.
    #[arg(long, default_value_t = 100)]
    pub clip_len: usize,
    /// Frames resampled from each adjacent segment.
    #[arg(long, default_value_t = 8)]
    pub k: usize,
    /// Directory for per-clip historical/adjacent manifests.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value = "synthetic")]
    pub stream_id: String,
    #[arg(long, default_value_t = 300)]
    pub frames: u64,
    #[arg(long, default_value_t = 30.0)]
    pub fps: f64,
    /// Anomaly onset marker in seconds.
    #[arg(long)]
    pub onset: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Error carrying the exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn new(code: i32, message: impl Into<String>) -> Self {
        CliError {
            code,
            message: message.into(),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::new(EXIT_CONFIG, format!("invalid config: {e}"))
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        let code = match e {
            PipelineError::Config(_)
            | PipelineError::Manifest(_)
            | PipelineError::Vocabulary(_)
            | PipelineError::Prompts(_) => EXIT_CONFIG,
            _ => EXIT_FAILURE,
        };
        CliError::new(code, e.to_string())
    }
}

fn io_err(path: &Path) -> impl Fn(io::Error) -> CliError + '_ {
    move |e| CliError::new(EXIT_FAILURE, format!("{}: {e}", path.display()))
}

/// Parses process arguments, runs the command and returns the exit code.
pub fn main() -> i32 {
    let _ = tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("warn")))
        .with_writer(io::stderr)
        .try_init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

pub fn execute(cli: Cli) -> Result<i32, CliError> {
    match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Corpus(CorpusCommand::Split(args)) => cmd_split(args),
        Command::Corpus(CorpusCommand::Synth(args)) => cmd_synth(args),
    }
}

fn load_config(common: &CommonArgs) -> Result<Config, CliError> {
    let mut cfg = Config::load(&common.config)?;
    if let Some(speed) = common.speed {
        cfg.stream.speed = speed;
    }
    if let Some(seed) = common.seed {
        cfg.stream.seed = seed;
    }
    if let Some(out) = &common.out {
        cfg.output.decisions = Some(out.clone());
    }
    Ok(cfg)
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write + Send>, CliError> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(io_err(p))?)),
        None => Box::new(io::stdout()),
    })
}

/// A closed pipe (`| head`) is not an error.
fn write_stdout(text: &str) -> Result<(), CliError> {
    let mut out = io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|_| out.flush()) {
        Err(e) if e.kind() != io::ErrorKind::BrokenPipe => {
            Err(CliError::new(EXIT_FAILURE, format!("stdout: {e}")))
        }
        _ => Ok(()),
    }
}

fn probe_remotes(cfg: &Config) -> Result<(), CliError> {
    for (field, remote) in cfg.backends.remote_endpoints() {
        let timeout = remote.timeout.to_std().max(Duration::from_millis(100));
        probe_endpoint(&remote.endpoint, timeout).map_err(|e| {
            CliError::new(EXIT_BACKEND, format!("{field} unreachable: {e}"))
        })?;
    }
    Ok(())
}

fn cmd_run(args: RunArgs) -> Result<i32, CliError> {
    let cfg = load_config(&args.common)?;
    probe_remotes(&cfg)?;
    let setup = Setup::load(cfg)?;
    let out_path = setup.config.output.decisions.clone();
    let mut sink = JsonlSink::new(open_output(out_path.as_deref())?);

    if setup.config.stream.speed.is_unbounded() && !args.wire {
        let out = simulate(&setup)?;
        for d in &out.decisions {
            match sink.emit(d) {
                Ok(()) => {}
                Err(e) if e.kind() == io::ErrorKind::BrokenPipe => break,
                Err(e) => return Err(CliError::new(EXIT_FAILURE, format!("writing decisions: {e}"))),
            }
        }
        eprintln!("{}", out.report.counts.render());
        return Ok(EXIT_OK);
    }

    let stop = Arc::new(AtomicBool::new(false));
    let interrupted = Arc::new(AtomicBool::new(false));
    {
        let stop = Arc::clone(&stop);
        let interrupted = Arc::clone(&interrupted);
        if let Err(e) = ctrlc::set_handler(move || {
            interrupted.store(true, Ordering::SeqCst);
            stop.store(true, Ordering::SeqCst);
        }) {
            tracing::warn!(error = %e, "interrupt handler not installed");
        }
    }
    let counts = match run_threaded(&setup, setup.config.stream.speed, args.wire, stop, &mut sink) {
        Err(PipelineError::Sink(e)) if e.kind() == io::ErrorKind::BrokenPipe => return Ok(EXIT_OK),
        r => r?,
    };
    eprintln!("{}", counts.render());
    Ok(if interrupted.load(Ordering::SeqCst) {
        EXIT_INTERRUPTED
    } else {
        EXIT_OK
    })
}

/// Applies `role=secs` fixed-latency overrides.
pub fn apply_latency_overrides(cfg: &mut Config, overrides: &[String]) -> Result<(), CliError> {
    for item in overrides {
        let (role, secs) = item
            .split_once('=')
            .ok_or_else(|| CliError::new(EXIT_CONFIG, format!("--latency expects ROLE=SECS, got {item:?}")))?;
        let secs: f64 = secs
            .trim()
            .parse()
            .ok()
            .filter(|s: &f64| s.is_finite() && *s >= 0.0)
            .ok_or_else(|| CliError::new(EXIT_CONFIG, format!("--latency {item:?}: seconds must be >= 0")))?;
        let slot = match role.trim() {
            "captioner" => cfg.backends.captioner.latency_mut(),
            "summarizer" => cfg.backends.summarizer.latency_mut(),
            "reasoner" => cfg.backends.reasoner.latency_mut(),
            other => {
                return Err(CliError::new(
                    EXIT_CONFIG,
                    format!("--latency role {other:?}; expected captioner, summarizer or reasoner"),
                ))
            }
        };
        match slot {
            Some(l) => *l = LatencyModel::fixed(secs),
            None => {
                return Err(CliError::new(
                    EXIT_CONFIG,
                    format!("backends.{}: latency overrides need a mock backend", role.trim()),
                ))
            }
        }
    }
    Ok(())
}

fn cmd_simulate(args: SimulateArgs) -> Result<i32, CliError> {
    let mut cfg = load_config(&args.common)?;
    if let Some((field, _)) = cfg.backends.remote_endpoints().first() {
        let field = field.trim_end_matches(".endpoint");
        return Err(CliError::new(
            EXIT_CONFIG,
            format!("{field}: simulate runs mock backends only"),
        ));
    }
    apply_latency_overrides(&mut cfg, &args.latency)?;
    let setup = Setup::load(cfg)?;
    let out = simulate(&setup)?;
    if let Some(path) = &setup.config.output.decisions {
        let mut sink = JsonlSink::new(open_output(Some(path))?);
        for d in &out.decisions {
            sink.emit(d).map_err(io_err(path))?;
        }
    }
    let text = if args.json {
        serde_json::to_string_pretty(&out.report).expect("report serializes") + "\n"
    } else {
        out.report.render()
    };
    write_stdout(&text)?;
    Ok(EXIT_OK)
}

fn cmd_eval(args: EvalArgs) -> Result<i32, CliError> {
    let mut decisions = Vec::new();
    for path in &args.decisions {
        let file = File::open(path).map_err(io_err(path))?;
        decisions.extend(
            read_decisions(BufReader::new(file))
                .map_err(|e| CliError::new(EXIT_FAILURE, format!("{}: {e}", path.display())))?,
        );
    }
    let manifests = args
        .manifests
        .iter()
        .map(|p| {
            StreamManifest::load(p).map_err(|e| CliError::new(EXIT_CONFIG, format!("{}: {e}", p.display())))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let references: Option<BTreeMap<String, Vec<String>>> = match &args.references {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(io_err(p))?;
            Some(
                serde_json::from_str(&text)
                    .map_err(|e| CliError::new(EXIT_CONFIG, format!("{}: {e}", p.display())))?,
            )
        }
        None => None,
    };
    let opts = EvalOptions {
        sentence_bleu: args.sentence_bleu,
        cider: CiderOptions {
            scale10: args.cider_scale10,
        },
    };
    let report = build_report(&decisions, &manifests, references.as_ref(), &opts)
        .map_err(|e| CliError::new(EXIT_FAILURE, e.to_string()))?;
    if let Some(p) = &args.json {
        let json = serde_json::to_string_pretty(&report).expect("report serializes");
        std::fs::write(p, json + "\n").map_err(io_err(p))?;
    }
    write_stdout(&render_table(&report))?;
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct ClipSplit {
    clip: usize,
    historical: Vec<u64>,
    adjacent: Vec<u64>,
    adjacent_sample: Vec<u64>,
}

fn sub_manifest(m: &StreamManifest, suffix: &str, ids: &[u64]) -> StreamManifest {
    StreamManifest {
        stream_id: format!("{}-{suffix}", m.stream_id),
        fps: m.fps,
        frames: m
            .frames
            .iter()
            .filter(|f| ids.binary_search(&f.frame_id).is_ok())
            .cloned()
            .collect(),
        markers: Vec::new(),
        label: m.label,
    }
}

fn cmd_split(args: SplitArgs) -> Result<i32, CliError> {
    let manifest = StreamManifest::load(&args.manifest)
        .map_err(|e| CliError::new(EXIT_CONFIG, format!("{}: {e}", args.manifest.display())))?;
    let ids: Vec<u64> = manifest.frames.iter().map(|f| f.frame_id).collect();
    if args.clip_len == 0 {
        return Err(CliError::new(EXIT_CONFIG, "--clip-len must be positive"));
    }
    let mut clips = Vec::new();
    for (n, chunk) in ids.chunks_exact(args.clip_len).enumerate() {
        let (historical, adjacent) =
            split_segment(chunk, args.ratio).map_err(|e| CliError::new(EXIT_CONFIG, e.to_string()))?;
        let adjacent_sample =
            sample_adjacent(&adjacent, args.k).map_err(|e| CliError::new(EXIT_CONFIG, e.to_string()))?;
        if let Some(dir) = &args.out_dir {
            std::fs::create_dir_all(dir).map_err(io_err(dir))?;
            for (suffix, ids) in [
                (format!("c{n}-historical"), &historical),
                (format!("c{n}-adjacent"), &adjacent_sample),
            ] {
                let sub = sub_manifest(&manifest, &suffix, ids);
                let path = dir.join(format!("{}.json", sub.stream_id));
                std::fs::write(&path, sub.to_json_pretty() + "\n").map_err(io_err(&path))?;
            }
        }
        clips.push(ClipSplit {
            clip: n,
            historical,
            adjacent,
            adjacent_sample,
        });
    }
    write_stdout(&(serde_json::to_string_pretty(&clips).expect("splits serialize") + "\n"))?;
    Ok(EXIT_OK)
}

fn cmd_synth(args: SynthArgs) -> Result<i32, CliError> {
    if !(args.fps.is_finite() && args.fps > 0.0) {
        return Err(CliError::new(EXIT_CONFIG, "--fps must be positive"));
    }
    let mut m = StreamManifest::synthetic(args.stream_id, args.fps, args.frames);
    if let Some(onset) = args.onset {
        m = m.with_marker(Timestamp::from_secs_f64(onset), ANOMALY_ONSET);
    }
    let text = m.to_json_pretty() + "\n";
    match &args.out {
        Some(p) => std::fs::write(p, text).map_err(io_err(p))?,
        None => write_stdout(&text)?,
    }
    Ok(EXIT_OK)
}
