//! Records that flow between the agents.

use serde::{Deserialize, Serialize};

use crate::time::Timestamp;

/// Version tag written into every Decision JSON line.
pub const DECISION_SCHEMA_VERSION: u32 = 1;

/// Sentinel used for "no predecessor" / "no summary yet".
pub const NO_SEQ: i64 = -1;

/// Timestamped handle to one image frame.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameRef {
    pub stream_id: String,
    pub frame_id: u64,
    pub ts: Timestamp,
    /// Opaque locator: a path relative to the manifest, or an inline token.
    pub payload: String,
}

/// Frame-level description of one sampled frame.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Caption {
    pub text: String,
    pub frame_id: u64,
    pub ts: Timestamp,
    pub window_seq: u64,
    /// Distinct vocabulary entity ids mentioned in `text`, ascending.
    pub entities: Vec<usize>,
}

/// A sampled frame whose caption could not be produced.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaptionGap {
    pub frame_id: u64,
    pub reason: String,
}

/// All captions produced for one window, in frame order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaptionBatch {
    pub window_seq: u64,
    pub captions: Vec<Caption>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub gaps: Vec<CaptionGap>,
}

impl CaptionBatch {
    /// Number of frames the batch accounts for, captioned or not.
    pub fn frame_count(&self) -> usize {
        self.captions.len() + self.gaps.len()
    }
}

/// One link of the causal summary chain.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Summary {
    pub summary_seq: u64,
    pub text: String,
    /// `summary_seq - 1`, or [`NO_SEQ`] for the first link.
    pub prev_seq: i64,
    pub source_window_seq: u64,
    pub created_ts: Timestamp,
    /// Set when the summarizer failed and the predecessor text was carried forward.
    #[serde(default)]
    pub carried: bool,
}

/// Structured discrimination result for one request.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub schema_version: u32,
    pub stream_id: String,
    pub decision_id: u64,
    /// Summary the request carried, or [`NO_SEQ`] on a cold start.
    pub summary_seq: i64,
    pub frame_ids: Vec<u64>,
    pub subject: String,
    pub location: String,
    pub cause: String,
    pub is_anomalous: bool,
    pub score: f64,
    pub emitted_ts: Timestamp,
}

impl Decision {
    /// Single-line rendering used as the candidate text for generation metrics.
    pub fn describe(&self) -> String {
        format!("{} {} {}", self.subject, self.location, self.cause)
    }
}
