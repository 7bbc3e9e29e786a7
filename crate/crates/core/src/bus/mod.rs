//! The three queues connecting the agents.
//!
//! | queue | payload        | default policy            |
//! |-------|----------------|---------------------------|
//! | Q1    | `CaptionBatch` | block, capacity 4         |
//! | Q2    | `Summary`      | latest-wins, capacity 1   |
//! | Q3    | `Decision`     | drop-oldest, capacity 4096|
//!
//! Queues are single-producer/single-consumer. Every publish is stamped
//! with a per-queue sequence number; consumers observe strictly increasing
//! numbers and `published = delivered + dropped + in_flight` holds at all
//! times.

mod queue;
pub mod wire;

use std::fmt;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{CaptionBatch, Decision, Summary};
use crate::time::Timestamp;

pub use queue::{Queue, QueueStats};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PayloadKind {
    CaptionBatch,
    Summary,
    Decision,
}

impl fmt::Display for PayloadKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PayloadKind::CaptionBatch => "caption_batch",
            PayloadKind::Summary => "summary",
            PayloadKind::Decision => "decision",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "body", rename_all = "snake_case")]
pub enum Payload {
    CaptionBatch(CaptionBatch),
    Summary(Summary),
    Decision(Decision),
}

impl Payload {
    pub fn kind(&self) -> PayloadKind {
        match self {
            Payload::CaptionBatch(_) => PayloadKind::CaptionBatch,
            Payload::Summary(_) => PayloadKind::Summary,
            Payload::Decision(_) => PayloadKind::Decision,
        }
    }

    pub fn into_caption_batch(self) -> Option<CaptionBatch> {
        match self {
            Payload::CaptionBatch(b) => Some(b),
            _ => None,
        }
    }

    pub fn into_summary(self) -> Option<Summary> {
        match self {
            Payload::Summary(s) => Some(s),
            _ => None,
        }
    }

    pub fn into_decision(self) -> Option<Decision> {
        match self {
            Payload::Decision(d) => Some(d),
            _ => None,
        }
    }
}

/// A payload as delivered by a queue.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub seq: u64,
    pub produced_ts: Timestamp,
    pub payload: Payload,
}

impl Envelope {
    pub fn kind(&self) -> PayloadKind {
        self.payload.kind()
    }

    /// Canonical JSON bytes.
    pub fn to_canonical_json(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("envelope serializes")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum QueueName {
    #[serde(rename = "Q1_captions")]
    Q1Captions,
    #[serde(rename = "Q2_summaries")]
    Q2Summaries,
    #[serde(rename = "Q3_decisions")]
    Q3Decisions,
}

impl QueueName {
    pub fn kind(self) -> PayloadKind {
        match self {
            QueueName::Q1Captions => PayloadKind::CaptionBatch,
            QueueName::Q2Summaries => PayloadKind::Summary,
            QueueName::Q3Decisions => PayloadKind::Decision,
        }
    }
}

impl fmt::Display for QueueName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            QueueName::Q1Captions => "Q1_captions",
            QueueName::Q2Summaries => "Q2_summaries",
            QueueName::Q3Decisions => "Q3_decisions",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Overflow {
    /// Producer waits for space.
    Block,
    /// Oldest undelivered item is discarded to make room.
    DropOldest,
    /// Every publish discards all undelivered items.
    LatestWins,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QueuePolicy {
    pub capacity: usize,
    pub overflow: Overflow,
}

impl QueuePolicy {
    pub fn default_for(name: QueueName) -> Self {
        match name {
            QueueName::Q1Captions => QueuePolicy {
                capacity: 4,
                overflow: Overflow::Block,
            },
            QueueName::Q2Summaries => QueuePolicy {
                capacity: 1,
                overflow: Overflow::LatestWins,
            },
            QueueName::Q3Decisions => QueuePolicy {
                capacity: 4096,
                overflow: Overflow::DropOldest,
            },
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BusError {
    #[error("queue expects {expected} payloads, got {got}")]
    KindMismatch {
        expected: PayloadKind,
        got: PayloadKind,
    },
    #[error("queue closed")]
    Closed,
    #[error("no item ready")]
    NotReady,
    #[error("queue full")]
    Full,
    #[error("transport: {0}")]
    Transport(String),
}

/// The queue operations shared by in-process queues and wire clients.
pub trait Endpoint: Send + Sync {
    fn publish(&self, payload: Payload, produced_ts: Timestamp) -> Result<u64, BusError>;
    /// Blocks until an item arrives or the queue is closed and drained.
    fn consume(&self) -> Result<Envelope, BusError>;
    /// Like `consume`, but returns `NotReady` after `timeout`.
    fn consume_timeout(&self, timeout: Duration) -> Result<Envelope, BusError>;
    fn close(&self);
}

/// Fault reported by an agent instead of a payload.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FaultEvent {
    pub stage: String,
    pub ts: Timestamp,
    pub message: String,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn queue_names_serialize_like_config_keys() {
        assert_eq!(
            serde_json::to_string(&QueueName::Q2Summaries).unwrap(),
            "\"Q2_summaries\""
        );
        assert_eq!(QueueName::Q1Captions.kind(), PayloadKind::CaptionBatch);
    }

    #[test]
    fn default_policies() {
        assert_eq!(
            QueuePolicy::default_for(QueueName::Q2Summaries).overflow,
            Overflow::LatestWins
        );
        assert_eq!(
            QueuePolicy::default_for(QueueName::Q1Captions).overflow,
            Overflow::Block
        );
        assert_eq!(
            QueuePolicy::default_for(QueueName::Q3Decisions).overflow,
            Overflow::DropOldest
        );
    }
}
