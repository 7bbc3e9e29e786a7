use serde::{Deserialize, Serialize};

use super::MetricError;
use crate::model::Decision;
use crate::stream::{StreamManifest, ANOMALY_ONSET};
use crate::time::{Span, Timestamp};

/// Time from the onset marker to the first positive decision.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatencyRecord {
    pub stream_id: String,
    pub onset_ts: Timestamp,
    pub first_positive_ts: Option<Timestamp>,
    /// Absent when no positive decision followed the onset.
    pub latency: Option<Span>,
    /// Positive decisions emitted before the onset.
    pub false_positives: usize,
}

impl LatencyRecord {
    pub fn missed(&self) -> bool {
        self.latency.is_none()
    }
}

pub fn detection_latency(
    decisions: &[Decision],
    manifest: &StreamManifest,
) -> Result<LatencyRecord, MetricError> {
    let onset = manifest
        .marker(ANOMALY_ONSET)
        .ok_or_else(|| MetricError::NoOnset(manifest.stream_id.clone()))?;
    let mut positives: Vec<&Decision> = decisions
        .iter()
        .filter(|d| d.stream_id == manifest.stream_id && d.is_anomalous)
        .collect();
    positives.sort_by_key(|d| (d.emitted_ts, d.decision_id));
    let false_positives = positives.iter().filter(|d| d.emitted_ts < onset).count();
    let first = positives.iter().find(|d| d.emitted_ts >= onset).map(|d| d.emitted_ts);
    Ok(LatencyRecord {
        stream_id: manifest.stream_id.clone(),
        onset_ts: onset,
        first_positive_ts: first,
        latency: first.map(|t| t - onset),
        false_positives,
    })
}
