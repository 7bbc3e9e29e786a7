//! Inference backends behind one request/response protocol.
//!
//! Three roles exist: the captioner (frame -> description), the summarizer
//! (prompt, descriptions, previous summary -> summary) and the reasoner
//! (discrimination request -> structured result). Each role has a
//! deterministic mock and an HTTP/JSON client.
//!
//! Remote protocol, all bodies UTF-8 JSON:
//!
//! | endpoint            | request                                                       | response |
//! |---------------------|---------------------------------------------------------------|----------|
//! | `POST /caption`     | `{frame_id, payload}`                                         | `{text}` |
//! | `POST /summarize`   | `{prompt, descriptions, previous}`                            | `{summary}` |
//! | `POST /discriminate`| `{instruction, identifier, summary, frame_ids, frames}`       | `{subject, location, cause, score}` |

pub mod mock;
pub mod remote;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::DiscriminationRequest;
use crate::clock::SharedClock;
use crate::model::FrameRef;
use crate::time::Span;

pub use mock::{MockCaptioner, MockReasoner, MockSummarizer};
pub use remote::{RemoteCaptioner, RemoteReasoner, RemoteSummarizer};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BackendError {
    #[error("backend timed out")]
    Timeout,
    #[error("backend protocol error: {0}")]
    Protocol(String),
    #[error("backend unavailable: {0}")]
    Unavailable(String),
}

pub trait Captioner: Send {
    fn caption(&mut self, frame: &FrameRef) -> Result<String, BackendError>;
}

pub trait Summarizer: Send {
    fn summarize(&mut self, request: &SummarizeRequest) -> Result<String, BackendError>;
}

pub trait Reasoner: Send {
    fn discriminate(
        &mut self,
        request: &DiscriminationRequest,
    ) -> Result<ReasonerResponse, BackendError>;
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaptionRequest {
    pub frame_id: u64,
    pub payload: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaptionReply {
    pub text: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SummarizeRequest {
    pub prompt: String,
    pub descriptions: Vec<String>,
    pub previous: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SummarizeReply {
    pub summary: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiscriminateWireRequest {
    pub instruction: String,
    pub identifier: String,
    pub summary: String,
    pub frame_ids: Vec<u64>,
    /// Payload locators, same order as `frame_ids`.
    pub frames: Vec<String>,
}

impl From<&DiscriminationRequest> for DiscriminateWireRequest {
    fn from(req: &DiscriminationRequest) -> Self {
        DiscriminateWireRequest {
            instruction: req.instruction.clone(),
            identifier: req.identifier.clone(),
            summary: req.summary.clone(),
            frame_ids: req.frames.iter().map(|f| f.frame_id).collect(),
            frames: req.frames.iter().map(|f| f.payload.clone()).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReasonerResponse {
    pub subject: String,
    pub location: String,
    pub cause: String,
    pub score: f64,
}

impl ReasonerResponse {
    pub fn validate(self) -> Result<Self, BackendError> {
        if !(0.0..=1.0).contains(&self.score) {
            return Err(BackendError::Protocol(format!(
                "score {} outside [0, 1]",
                self.score
            )));
        }
        Ok(self)
    }

    pub fn negative() -> Self {
        ReasonerResponse {
            subject: "none".into(),
            location: "unknown".into(),
            cause: "no abnormal behavior observed".into(),
            score: 0.1,
        }
    }
}

/// Extra time a mock spends on each call.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LatencyModel {
    Fixed { secs: Span },
    Uniform { lo: Span, hi: Span },
}

impl Default for LatencyModel {
    fn default() -> Self {
        LatencyModel::Fixed { secs: Span::ZERO }
    }
}

impl LatencyModel {
    pub fn fixed(secs: f64) -> Self {
        LatencyModel::Fixed {
            secs: Span::from_secs_f64(secs),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        match *self {
            LatencyModel::Fixed { secs } if secs.is_negative() => {
                Err("latency must be >= 0".into())
            }
            LatencyModel::Uniform { lo, hi } if lo.is_negative() || hi < lo => {
                Err("uniform latency needs 0 <= lo <= hi".into())
            }
            _ => Ok(()),
        }
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> Span {
        match *self {
            LatencyModel::Fixed { secs } => secs,
            LatencyModel::Uniform { lo, hi } => {
                Span::from_micros(rng.gen_range(lo.as_micros()..=hi.as_micros()))
            }
        }
    }

    /// Smallest latency the model can produce.
    pub fn floor(&self) -> Span {
        match *self {
            LatencyModel::Fixed { secs } => secs,
            LatencyModel::Uniform { lo, .. } => lo,
        }
    }
}

/// Faults injected into a mock backend. A faulted call reports a timeout.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FaultSpec {
    /// Probability that any call fails.
    pub probability: f64,
    /// Zero-based call ordinals that fail.
    pub calls: Vec<u64>,
    /// Frame ids whose caption calls fail (captioner only).
    pub frames: Vec<u64>,
}

impl FaultSpec {
    pub fn is_empty(&self) -> bool {
        self.probability == 0.0 && self.calls.is_empty() && self.frames.is_empty()
    }
}

fn default_timeout() -> Span {
    Span::from_secs_f64(2.0)
}

fn default_retries() -> u32 {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RemoteSpec {
    pub endpoint: String,
    #[serde(default = "default_timeout")]
    pub timeout: Span,
    #[serde(default = "default_retries")]
    pub retries: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound(deserialize = "S: Deserialize<'de> + Default"))]
pub struct MockSpec<S> {
    #[serde(default)]
    pub script: S,
    #[serde(default)]
    pub latency: LatencyModel,
    #[serde(default, skip_serializing_if = "FaultSpec::is_empty")]
    pub faults: FaultSpec,
}

impl<S: Default> Default for MockSpec<S> {
    fn default() -> Self {
        MockSpec {
            script: S::default(),
            latency: LatencyModel::default(),
            faults: FaultSpec::default(),
        }
    }
}

/// How one backend role is provided.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(
    tag = "mode",
    rename_all = "snake_case",
    bound(deserialize = "S: Deserialize<'de> + Default")
)]
pub enum BackendSpec<S> {
    Mock(MockSpec<S>),
    Remote(RemoteSpec),
}

impl<S: Default> Default for BackendSpec<S> {
    fn default() -> Self {
        BackendSpec::Mock(MockSpec::default())
    }
}

impl<S> BackendSpec<S> {
    pub fn is_remote(&self) -> bool {
        matches!(self, BackendSpec::Remote(_))
    }

    pub fn validate(&self) -> Result<(), (&'static str, String)> {
        match self {
            BackendSpec::Mock(m) => {
                m.latency.validate().map_err(|e| ("latency", e))?;
                if !(0.0..=1.0).contains(&m.faults.probability) {
                    return Err(("faults.probability", "must be within [0, 1]".into()));
                }
                Ok(())
            }
            BackendSpec::Remote(r) => {
                if r.endpoint.trim().is_empty() {
                    return Err(("endpoint", "remote mode needs an endpoint".into()));
                }
                if r.timeout <= Span::ZERO {
                    return Err(("timeout", "must be > 0".into()));
                }
                Ok(())
            }
        }
    }

    /// Mock latency, or `None` for remote backends.
    pub fn latency_mut(&mut self) -> Option<&mut LatencyModel> {
        match self {
            BackendSpec::Mock(m) => Some(&mut m.latency),
            BackendSpec::Remote(_) => None,
        }
    }
}

/// Scripted captions for the mock captioner.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CaptionScript {
    pub frames: Vec<ScriptedFrame>,
    pub ranges: Vec<ScriptedRange>,
    /// Used when no entry matches; `{frame_id}` is substituted.
    pub fallback: String,
}

impl Default for CaptionScript {
    fn default() -> Self {
        CaptionScript {
            frames: Vec::new(),
            ranges: Vec::new(),
            fallback: "frame {frame_id}".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptedFrame {
    pub frame_id: u64,
    pub text: String,
}

/// Caption for every frame id in `[from, to)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptedRange {
    pub from: u64,
    pub to: u64,
    pub text: String,
}

/// The mock summarizer has a fixed rule and takes no script.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SummaryScript {}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReasonerScript {
    /// Exact matches on (summary text, frame id set).
    pub entries: Vec<ReasonerEntry>,
    /// First rule whose needle occurs in the summary wins.
    pub rules: Vec<ReasonerRule>,
    pub default: ReasonerResponse,
}

impl Default for ReasonerScript {
    fn default() -> Self {
        ReasonerScript {
            entries: Vec::new(),
            rules: Vec::new(),
            default: ReasonerResponse::negative(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReasonerEntry {
    pub summary: String,
    pub frame_ids: Vec<u64>,
    pub response: ReasonerResponse,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReasonerRule {
    pub summary_contains: String,
    pub response: ReasonerResponse,
}

pub type CaptionerSpec = BackendSpec<CaptionScript>;
pub type SummarizerSpec = BackendSpec<SummaryScript>;
pub type ReasonerSpec = BackendSpec<ReasonerScript>;

/// Seeds are mixed per role so the three mocks draw independent streams.
fn role_seed(seed: u64, role: u64) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(role)
}

pub fn build_captioner(spec: &CaptionerSpec, clock: SharedClock, seed: u64) -> Box<dyn Captioner> {
    match spec {
        BackendSpec::Mock(m) => Box::new(MockCaptioner::new(m.clone(), clock, role_seed(seed, 1))),
        BackendSpec::Remote(r) => Box::new(RemoteCaptioner::new(r)),
    }
}

pub fn build_summarizer(
    spec: &SummarizerSpec,
    clock: SharedClock,
    seed: u64,
) -> Box<dyn Summarizer> {
    match spec {
        BackendSpec::Mock(m) => Box::new(MockSummarizer::new(
            m.latency,
            m.faults.clone(),
            clock,
            role_seed(seed, 2),
        )),
        BackendSpec::Remote(r) => Box::new(RemoteSummarizer::new(r)),
    }
}

pub fn build_reasoner(spec: &ReasonerSpec, clock: SharedClock, seed: u64) -> Box<dyn Reasoner> {
    match spec {
        BackendSpec::Mock(m) => Box::new(MockReasoner::new(m.clone(), clock, role_seed(seed, 3))),
        BackendSpec::Remote(r) => Box::new(RemoteReasoner::new(r)),
    }
}
