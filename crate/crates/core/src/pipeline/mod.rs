//! Drivers wiring the frame source, the three agents and the queues.
//!
//! [`simulate`] runs the pipeline as a discrete-event simulation on
//! virtual time: each agent step starts at a scheduled instant and ends
//! after the latency its backend spent. It is used for speed `inf` and is
//! fully deterministic. [`run_threaded`] runs one thread per agent against
//! wall time for finite replay speeds, optionally with the queues served
//! over the wire protocol.

mod sim;
mod threaded;

use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use sim::{simulate, CriticalPath, SimOutput, StageSpan, StageTiming, TimingReport};
pub use threaded::run_threaded;

use crate::agents::{CaptionAgent, DiscriminationAgent, FilterSettings, Prompts, SummaryAgent};
use crate::backends::{build_captioner, build_reasoner, build_summarizer};
use crate::bus::{QueueName, QueueStats};
use crate::clock::SharedClock;
use crate::config::{Config, ConfigError};
use crate::entity::{EntityVocabulary, VocabularyError};
use crate::stream::{ManifestError, StreamManifest};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("manifest: {0}")]
    Manifest(#[from] ManifestError),
    #[error("vocabulary: {0}")]
    Vocabulary(#[from] VocabularyError),
    #[error("prompts: {0}")]
    Prompts(std::io::Error),
    #[error("sink: {0}")]
    Sink(std::io::Error),
    #[error("wire transport: {0}")]
    Wire(String),
    #[error("worker {0} panicked")]
    Worker(&'static str),
}

/// Everything a driver needs, loaded from a validated config.
#[derive(Clone, Debug)]
pub struct Setup {
    pub config: Config,
    pub manifest: StreamManifest,
    pub vocab: Arc<EntityVocabulary>,
    pub prompts: Arc<Prompts>,
}

impl Setup {
    /// Loads the manifest, vocabulary and prompts named by `config`.
    pub fn load(config: Config) -> Result<Self, PipelineError> {
        let manifest_path: PathBuf = config
            .stream
            .manifest
            .clone()
            .ok_or_else(|| ConfigError::invalid("stream.manifest", "a stream manifest is required"))?;
        let manifest = StreamManifest::load(&manifest_path)?;
        let vocab_path = config
            .filter
            .vocab
            .clone()
            .ok_or_else(|| ConfigError::invalid("filter.vocab", "vocabulary file is required"))?;
        let vocab = EntityVocabulary::load(&vocab_path)?;
        let prompts = match &config.prompts.dir {
            Some(dir) => Prompts::load_dir(dir).map_err(PipelineError::Prompts)?,
            None => Prompts::default(),
        };
        Ok(Setup {
            config,
            manifest,
            vocab: Arc::new(vocab),
            prompts: Arc::new(prompts),
        })
    }

    /// In-memory setup for tests and embedding.
    pub fn new(config: Config, manifest: StreamManifest, vocab: EntityVocabulary) -> Self {
        Setup {
            config,
            manifest,
            vocab: Arc::new(vocab),
            prompts: Arc::new(Prompts::default()),
        }
    }

    pub(crate) fn caption_agent(&self, clock: SharedClock) -> CaptionAgent {
        let cfg = &self.config;
        CaptionAgent::new(
            build_captioner(&cfg.backends.captioner, clock.clone(), cfg.stream.seed),
            Arc::clone(&self.vocab),
            Arc::clone(&self.prompts),
            cfg.window.samples_per_window,
            clock,
        )
    }

    pub(crate) fn summary_agent(&self, clock: SharedClock) -> SummaryAgent {
        let cfg = &self.config;
        SummaryAgent::new(
            build_summarizer(&cfg.backends.summarizer, clock.clone(), cfg.stream.seed),
            Arc::clone(&self.vocab),
            self.prompts.summarizer.clone(),
            FilterSettings {
                tau: cfg.filter.tau,
                rule: cfg.filter.screen_rule,
                horizon: cfg.horizon(),
            },
            clock,
        )
    }

    pub(crate) fn discrimination_agent(&self, clock: SharedClock) -> DiscriminationAgent {
        let cfg = &self.config;
        DiscriminationAgent::new(
            build_reasoner(&cfg.backends.reasoner, clock.clone(), cfg.stream.seed),
            self.prompts.discriminator.clone(),
            cfg.window.clone(),
            self.manifest.fps,
            cfg.agents.threshold,
            cfg.agents.cold_start,
            clock,
        )
    }
}

/// Totals printed when a run ends.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunCounts {
    pub frames: u64,
    pub windows: u64,
    pub caption_batches: u64,
    pub caption_gaps: u64,
    pub summaries: u64,
    pub carried_summaries: u64,
    pub decisions: u64,
    pub suppressed_decisions: u64,
    pub q1: QueueStats,
    pub q2: QueueStats,
    pub q3: QueueStats,
}

impl RunCounts {
    pub fn queue(&self, name: QueueName) -> &QueueStats {
        match name {
            QueueName::Q1Captions => &self.q1,
            QueueName::Q2Summaries => &self.q2,
            QueueName::Q3Decisions => &self.q3,
        }
    }

    pub fn drops(&self) -> u64 {
        self.q1.dropped + self.q2.dropped + self.q3.dropped
    }

    pub fn render(&self) -> String {
        format!(
            "frames={} windows={} caption_batches={} caption_gaps={} summaries={} carried={} decisions={} suppressed={} drops={} (Q1={} Q2={} Q3={})",
            self.frames,
            self.windows,
            self.caption_batches,
            self.caption_gaps,
            self.summaries,
            self.carried_summaries,
            self.decisions,
            self.suppressed_decisions,
            self.drops(),
            self.q1.dropped,
            self.q2.dropped,
            self.q3.dropped,
        )
    }
}
