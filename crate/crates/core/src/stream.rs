//! Stream manifests and fixture replay.
//!
//! A manifest is a JSON document listing the frames of one stream:
//!
//! ```json
//! {
//!   "stream_id": "cam-01",
//!   "fps": 30.0,
//!   "frames": [ { "frame_id": 0, "ts": 0.0, "payload": "frames/000000.jpg" } ],
//!   "markers": [ { "ts": 2.0, "label": "anomaly_onset" } ]
//! }
//! ```
//!
//! `ts` values are seconds relative to stream start and are stored with
//! microsecond resolution. Payload locators are paths relative to the
//! manifest file. `markers` and `label` are optional.

use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::model::FrameRef;
use crate::time::Timestamp;

pub const DEFAULT_FPS: f64 = 30.0;
pub const ANOMALY_ONSET: &str = "anomaly_onset";
pub const CRIME_ONSET: &str = "crime_onset";

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("fps must be positive and finite, got {0}")]
    InvalidFps(f64),
    #[error("duplicate frame_id {0}")]
    DuplicateFrameId(u64),
    #[error("frame_id {0} is not greater than its predecessor")]
    FrameIdNotIncreasing(u64),
    #[error("frame {0} has a timestamp earlier than its predecessor")]
    UnorderedTimestamp(u64),
    #[error("marker {label:?} has a negative timestamp")]
    InvalidMarker { label: String },
    #[error("reading manifest {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parsing manifest: {0}")]
    Parse(#[from] serde_json::Error),
}

impl ManifestError {
    /// Frame id of the first offending frame, when the error is about one.
    pub fn frame_id(&self) -> Option<u64> {
        match self {
            ManifestError::DuplicateFrameId(id)
            | ManifestError::FrameIdNotIncreasing(id)
            | ManifestError::UnorderedTimestamp(id) => Some(*id),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestFrame {
    pub frame_id: u64,
    pub ts: Timestamp,
    pub payload: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Marker {
    pub ts: Timestamp,
    pub label: String,
}

fn default_fps() -> f64 {
    DEFAULT_FPS
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StreamManifest {
    pub stream_id: String,
    #[serde(default = "default_fps")]
    pub fps: f64,
    pub frames: Vec<ManifestFrame>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub markers: Vec<Marker>,
    /// Ground-truth stream label. When absent the stream counts as positive
    /// iff it carries an onset marker.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<bool>,
}

impl StreamManifest {
    /// Constant-rate fixture with `frame_count` frames whose ids equal their ordinal.
    pub fn synthetic(stream_id: impl Into<String>, fps: f64, frame_count: u64) -> Self {
        let frames = (0..frame_count)
            .map(|i| ManifestFrame {
                frame_id: i,
                ts: Timestamp::of_frame(i, fps),
                payload: format!("frames/{i:06}.jpg"),
            })
            .collect();
        StreamManifest {
            stream_id: stream_id.into(),
            fps,
            frames,
            markers: Vec::new(),
            label: None,
        }
    }

    pub fn with_marker(mut self, ts: Timestamp, label: impl Into<String>) -> Self {
        self.markers.push(Marker {
            ts,
            label: label.into(),
        });
        self
    }

    pub fn from_json(text: &str) -> Result<Self, ManifestError> {
        let manifest: StreamManifest = serde_json::from_str(text)?;
        manifest.validate()?;
        Ok(manifest)
    }

    pub fn load(path: &Path) -> Result<Self, ManifestError> {
        let text = std::fs::read_to_string(path).map_err(|source| ManifestError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }

    pub fn validate(&self) -> Result<(), ManifestError> {
        if !(self.fps.is_finite() && self.fps > 0.0) {
            return Err(ManifestError::InvalidFps(self.fps));
        }
        let mut seen = std::collections::HashSet::with_capacity(self.frames.len());
        let mut prev: Option<&ManifestFrame> = None;
        for frame in &self.frames {
            if !seen.insert(frame.frame_id) {
                return Err(ManifestError::DuplicateFrameId(frame.frame_id));
            }
            if let Some(p) = prev {
                if frame.frame_id <= p.frame_id {
                    return Err(ManifestError::FrameIdNotIncreasing(frame.frame_id));
                }
                if frame.ts < p.ts {
                    return Err(ManifestError::UnorderedTimestamp(frame.frame_id));
                }
            }
            prev = Some(frame);
        }
        if let Some(m) = self.markers.iter().find(|m| m.ts < Timestamp::ZERO) {
            return Err(ManifestError::InvalidMarker {
                label: m.label.clone(),
            });
        }
        Ok(())
    }

    /// First marker with the given label.
    pub fn marker(&self, label: &str) -> Option<Timestamp> {
        self.markers.iter().find(|m| m.label == label).map(|m| m.ts)
    }

    pub fn is_positive(&self) -> bool {
        self.label.unwrap_or_else(|| {
            self.marker(ANOMALY_ONSET).is_some() || self.marker(CRIME_ONSET).is_some()
        })
    }

    pub fn frame_ref(&self, frame: &ManifestFrame) -> FrameRef {
        FrameRef {
            stream_id: self.stream_id.clone(),
            frame_id: frame.frame_id,
            ts: frame.ts,
            payload: frame.payload.clone(),
        }
    }
}

/// Replay-speed multiplier.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub enum Speed {
    /// As fast as possible.
    #[default]
    Unbounded,
    Factor(f64),
}

impl Speed {
    pub fn is_unbounded(self) -> bool {
        matches!(self, Speed::Unbounded)
    }

    pub fn validate(self) -> Result<Self, String> {
        match self {
            Speed::Factor(f) if !(f.is_finite() && f > 0.0) => {
                Err(format!("speed must be > 0 or \"inf\", got {f}"))
            }
            s => Ok(s),
        }
    }
}

impl fmt::Display for Speed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Speed::Unbounded => f.write_str("inf"),
            Speed::Factor(x) => write!(f, "{x}"),
        }
    }
}

impl FromStr for Speed {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("inf") || s.eq_ignore_ascii_case("infinity") || s == "∞" {
            return Ok(Speed::Unbounded);
        }
        let f: f64 = s.parse().map_err(|_| format!("invalid speed {s:?}"))?;
        if f.is_infinite() && f > 0.0 {
            return Ok(Speed::Unbounded);
        }
        Speed::Factor(f).validate()
    }
}

impl Serialize for Speed {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Speed::Unbounded => s.serialize_str("inf"),
            Speed::Factor(f) => s.serialize_f64(*f),
        }
    }
}

impl<'de> Deserialize<'de> for Speed {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(f) if f.is_infinite() && f > 0.0 => Ok(Speed::Unbounded),
            Raw::Num(f) => Speed::Factor(f).validate().map_err(serde::de::Error::custom),
            Raw::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Replays a manifest, pacing frames by their timestamps divided by the speed.
///
/// Single consumer. The first frame is yielded immediately; frame `i` is
/// yielded no earlier than `(ts_i - ts_0) / speed` after the first.
pub struct FrameSource {
    manifest: StreamManifest,
    speed: Speed,
    next: usize,
    started: Option<Instant>,
}

pub fn open_stream(manifest: StreamManifest, speed: Speed) -> Result<FrameSource, ManifestError> {
    manifest.validate()?;
    Ok(FrameSource {
        manifest,
        speed,
        next: 0,
        started: None,
    })
}

impl FrameSource {
    pub fn manifest(&self) -> &StreamManifest {
        &self.manifest
    }

    pub fn remaining(&self) -> usize {
        self.manifest.frames.len() - self.next
    }
}

impl Iterator for FrameSource {
    type Item = FrameRef;

    fn next(&mut self) -> Option<FrameRef> {
        let frame = self.manifest.frames.get(self.next)?;
        if let Speed::Factor(speed) = self.speed {
            let origin = self.manifest.frames[0].ts;
            let started = *self.started.get_or_insert_with(Instant::now);
            let offset = (frame.ts - origin).as_secs_f64() / speed;
            let due = started + std::time::Duration::from_secs_f64(offset.max(0.0));
            let now = Instant::now();
            if due > now {
                std::thread::sleep(due - now);
            }
        }
        self.next += 1;
        Some(self.manifest.frame_ref(frame))
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        (self.remaining(), Some(self.remaining()))
    }
}
