//! Frame sampling schedules.
//!
//! Two schedules feed the agents. Caption windows are `window_len` frames
//! long and start every `stride` frames; each closed window contributes
//! `samples_per_window` uniformly spaced frames. The adjacent buffer picks
//! `adjacent_count` frames spaced `adjacent_spacing` apart, ending at the
//! current timestamp.
//!
//! Window positions are frame ordinals (arrival order within the stream).
//! For fixture manifests the ordinal equals the frame id.

use std::collections::VecDeque;
use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::FrameRef;
use crate::time::{Span, Timestamp};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum WindowError {
    #[error("cannot take {k} samples from a window of {len} frames")]
    TooManySamples { k: usize, len: u64 },
    #[error("invalid window config: {0}")]
    InvalidConfig(&'static str),
}

/// Not enough history before `now` to cover the adjacent span.
#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
#[error("adjacent buffer not ready")]
pub struct NotReady;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindowConfig {
    pub window_len: u64,
    pub stride: u64,
    pub samples_per_window: usize,
    pub adjacent_count: usize,
    pub adjacent_spacing: Span,
}

impl Default for WindowConfig {
    fn default() -> Self {
        WindowConfig {
            window_len: 100,
            stride: 70,
            samples_per_window: 5,
            adjacent_count: 8,
            adjacent_spacing: Span::from_millis(100),
        }
    }
}

impl WindowConfig {
    /// Checks the config invariants, naming the offending field.
    pub fn validate(&self) -> Result<(), (&'static str, WindowError)> {
        if self.stride == 0 || self.stride > self.window_len {
            return Err((
                "stride",
                WindowError::InvalidConfig("0 < stride <= window_len"),
            ));
        }
        if self.samples_per_window == 0 || self.samples_per_window as u64 > self.window_len {
            return Err((
                "samples_per_window",
                WindowError::InvalidConfig("1 <= samples_per_window <= window_len"),
            ));
        }
        if self.adjacent_count == 0 {
            return Err((
                "adjacent_count",
                WindowError::InvalidConfig("adjacent_count >= 1"),
            ));
        }
        if self.adjacent_spacing <= Span::ZERO {
            return Err((
                "adjacent_spacing",
                WindowError::InvalidConfig("adjacent_spacing > 0"),
            ));
        }
        Ok(())
    }

    /// Frames shared by two consecutive windows.
    pub fn overlap(&self) -> u64 {
        self.window_len - self.stride
    }

    /// Stream time covered by the adjacent buffer, first to last target.
    pub fn adjacent_span(&self) -> Span {
        self.adjacent_spacing.times(self.adjacent_count as i64 - 1)
    }
}

/// Half-open ordinal interval of window `window_seq`.
pub fn window_bounds(window_seq: u64, cfg: &WindowConfig) -> Range<u64> {
    let start = window_seq * cfg.stride;
    start..start + cfg.window_len
}

/// `k` ordinals `start + floor(j * (end - start) / k)` for `j = 0..k`.
pub fn uniform_sample(start: u64, end: u64, k: usize) -> Result<Vec<u64>, WindowError> {
    let len = end.saturating_sub(start);
    if k == 0 || k as u64 > len {
        return Err(WindowError::TooManySamples { k, len });
    }
    let k = k as u64;
    Ok((0..k).map(|j| start + j * len / k).collect())
}

/// Picks the frame nearest to each target `now - j * spacing`, oldest first.
///
/// `buffer` must be in chronological order. Ties go to the earlier frame.
/// A frame may be picked twice when the stream is sparser than the spacing.
pub fn adjacent_frames(
    buffer: &[FrameRef],
    now: Timestamp,
    cfg: &WindowConfig,
) -> Result<Vec<FrameRef>, NotReady> {
    let first = buffer.first().ok_or(NotReady)?;
    let earliest_target = now - cfg.adjacent_span();
    if first.ts > earliest_target {
        return Err(NotReady);
    }
    let n = cfg.adjacent_count as i64;
    Ok((0..n)
        .rev()
        .map(|j| {
            let target = now - cfg.adjacent_spacing.times(j);
            buffer[nearest_index(buffer, target)].clone()
        })
        .collect())
}

fn nearest_index(buffer: &[FrameRef], target: Timestamp) -> usize {
    let after = buffer.partition_point(|f| f.ts < target);
    if after == 0 {
        return 0;
    }
    if after == buffer.len() {
        return buffer.len() - 1;
    }
    let before = after - 1;
    let d_before = target - buffer[before].ts;
    let d_after = buffer[after].ts - target;
    if d_after < d_before {
        after
    } else {
        before
    }
}

/// Single-writer ring of the most recent frames, oldest first.
#[derive(Debug, Clone)]
pub struct FrameRing {
    frames: VecDeque<FrameRef>,
    capacity: usize,
}

impl FrameRing {
    pub fn new(capacity: usize) -> Self {
        let capacity = capacity.max(1);
        FrameRing {
            frames: VecDeque::with_capacity(capacity),
            capacity,
        }
    }

    /// Capacity of at least twice the frames spanned by the adjacent buffer.
    pub fn for_stream(fps: f64, cfg: &WindowConfig) -> Self {
        let spanned = (fps * cfg.adjacent_spacing.as_secs_f64() * cfg.adjacent_count as f64).ceil();
        let capacity = (spanned as usize).max(cfg.adjacent_count) * 2;
        FrameRing::new(capacity)
    }

    pub fn push(&mut self, frame: FrameRef) {
        if self.frames.len() == self.capacity {
            self.frames.pop_front();
        }
        self.frames.push_back(frame);
    }

    pub fn latest(&self) -> Option<&FrameRef> {
        self.frames.back()
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Adjacent frames ending at the newest frame in the ring.
    pub fn adjacent(&mut self, cfg: &WindowConfig) -> Result<Vec<FrameRef>, NotReady> {
        let now = self.latest().ok_or(NotReady)?.ts;
        adjacent_frames(self.frames.make_contiguous(), now, cfg)
    }
}

/// A caption window whose last frame has arrived.
#[derive(Clone, Debug, PartialEq)]
pub struct ClosedWindow {
    pub window_seq: u64,
    pub bounds: Range<u64>,
    /// The uniformly sampled frames, in frame order.
    pub frames: Vec<FrameRef>,
    /// Timestamp of the frame that closed the window.
    pub closed_ts: Timestamp,
}

/// Turns frame arrivals into closed windows. Partial windows are never emitted.
#[derive(Debug)]
pub struct WindowTracker {
    cfg: WindowConfig,
    recent: VecDeque<FrameRef>,
    arrived: u64,
    next_seq: u64,
    offsets: Vec<u64>,
}

impl WindowTracker {
    pub fn new(cfg: WindowConfig) -> Result<Self, WindowError> {
        cfg.validate().map_err(|(_, e)| e)?;
        let offsets = uniform_sample(0, cfg.window_len, cfg.samples_per_window)?;
        Ok(WindowTracker {
            recent: VecDeque::with_capacity(cfg.window_len as usize),
            cfg,
            arrived: 0,
            next_seq: 0,
            offsets,
        })
    }

    pub fn frames_seen(&self) -> u64 {
        self.arrived
    }

    pub fn windows_closed(&self) -> u64 {
        self.next_seq
    }

    pub fn push(&mut self, frame: FrameRef) -> Option<ClosedWindow> {
        if self.recent.len() as u64 == self.cfg.window_len {
            self.recent.pop_front();
        }
        self.recent.push_back(frame);
        self.arrived += 1;

        let bounds = window_bounds(self.next_seq, &self.cfg);
        if self.arrived != bounds.end {
            return None;
        }
        // `recent` now holds exactly the ordinals of `bounds`.
        let frames: Vec<FrameRef> = self
            .offsets
            .iter()
            .map(|&o| self.recent[o as usize].clone())
            .collect();
        let closed = ClosedWindow {
            window_seq: self.next_seq,
            bounds,
            frames,
            closed_ts: self.recent.back().map(|f| f.ts).unwrap_or_default(),
        };
        self.next_seq += 1;
        Some(closed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stream::StreamManifest;

    fn frames(fps: f64, n: u64) -> Vec<FrameRef> {
        let m = StreamManifest::synthetic("s", fps, n);
        m.frames.iter().map(|f| m.frame_ref(f)).collect()
    }

    #[test]
    fn bounds_of_first_windows() {
        let cfg = WindowConfig::default();
        assert_eq!(window_bounds(0, &cfg), 0..100);
        assert_eq!(window_bounds(1, &cfg), 70..170);
        assert_eq!(window_bounds(2, &cfg), 140..240);
        let w1 = window_bounds(1, &cfg);
        let w2 = window_bounds(2, &cfg);
        assert_eq!(w1.end - w2.start, 30);
        assert_eq!(cfg.overlap(), 30);
    }

    #[test]
    fn uniform_sample_floor_rule() {
        assert_eq!(uniform_sample(0, 100, 5).unwrap(), vec![0, 20, 40, 60, 80]);
        assert_eq!(uniform_sample(0, 100, 1).unwrap(), vec![0]);
        assert_eq!(
            uniform_sample(70, 170, 5).unwrap(),
            vec![70, 90, 110, 130, 150]
        );
        assert_eq!(
            uniform_sample(0, 4, 5),
            Err(WindowError::TooManySamples { k: 5, len: 4 })
        );
        assert!(uniform_sample(0, 10, 0).is_err());
    }

    /// Linear-scan nearest neighbour, earlier frame on ties.
    fn brute_nearest(buffer: &[FrameRef], target: Timestamp) -> u64 {
        let mut best = &buffer[0];
        for f in buffer {
            let d = (f.ts - target).as_micros().abs();
            let bd = (best.ts - target).as_micros().abs();
            if d < bd {
                best = f;
            }
        }
        best.frame_id
    }

    #[test]
    fn adjacent_at_30fps_matches_nearest_neighbour_oracle() {
        let buffer = frames(30.0, 61);
        let cfg = WindowConfig::default();
        let now = Timestamp::from_secs_f64(1.0);
        let picked = adjacent_frames(&buffer, now, &cfg).unwrap();
        let expected: Vec<u64> = (0..8)
            .rev()
            .map(|j| brute_nearest(&buffer, now - cfg.adjacent_spacing.times(j)))
            .collect();
        assert_eq!(
            picked.iter().map(|f| f.frame_id).collect::<Vec<_>>(),
            expected
        );
        // 0.3, 0.4, ... 1.0 s land exactly on frames 9, 12, ... 30
        assert_eq!(expected, vec![9, 12, 15, 18, 21, 24, 27, 30]);
    }

    #[test]
    fn adjacent_not_ready_with_short_history() {
        let buffer: Vec<_> = frames(30.0, 61).into_iter().filter(|f| f.frame_id >= 24).collect();
        let cfg = WindowConfig::default();
        // buffer spans 0.8..1.0 s only
        assert_eq!(
            adjacent_frames(&buffer, Timestamp::from_secs_f64(1.0), &cfg),
            Err(NotReady)
        );
        assert_eq!(adjacent_frames(&[], Timestamp::ZERO, &cfg), Err(NotReady));
    }

    #[test]
    fn adjacent_at_10fps_is_last_eight_frames() {
        let buffer = frames(10.0, 30);
        let cfg = WindowConfig::default();
        let now = buffer[29].ts;
        let picked = adjacent_frames(&buffer, now, &cfg).unwrap();
        assert_eq!(
            picked.iter().map(|f| f.frame_id).collect::<Vec<_>>(),
            (22..30).collect::<Vec<_>>()
        );
    }

    #[test]
    fn sparse_stream_duplicates_frames() {
        let buffer = frames(5.0, 20);
        let cfg = WindowConfig::default();
        let picked = adjacent_frames(&buffer, buffer[19].ts, &cfg).unwrap();
        assert_eq!(picked.len(), 8);
        assert!(picked.windows(2).all(|w| w[0].ts <= w[1].ts));
        let mut ids: Vec<_> = picked.iter().map(|f| f.frame_id).collect();
        ids.dedup();
        assert!(ids.len() < 8);
    }

    #[test]
    fn ring_evicts_oldest() {
        let mut ring = FrameRing::new(3);
        for f in frames(30.0, 5) {
            ring.push(f);
        }
        assert_eq!(ring.len(), 3);
        assert_eq!(ring.latest().unwrap().frame_id, 4);
        assert_eq!(
            FrameRing::for_stream(30.0, &WindowConfig::default()).capacity(),
            48
        );
    }

    #[test]
    fn tracker_emits_complete_windows_only() {
        let mut tracker = WindowTracker::new(WindowConfig::default()).unwrap();
        let closed: Vec<_> = frames(30.0, 300)
            .into_iter()
            .filter_map(|f| tracker.push(f))
            .collect();
        assert_eq!(closed.len(), 3);
        assert_eq!(closed[1].bounds, 70..170);
        assert_eq!(
            closed[1].frames.iter().map(|f| f.frame_id).collect::<Vec<_>>(),
            vec![70, 90, 110, 130, 150]
        );
        assert_eq!(closed[0].closed_ts, Timestamp::from_micros(3_300_000));
    }

    #[test]
    fn config_validation_names_field() {
        let cfg = WindowConfig {
            stride: 120,
            ..WindowConfig::default()
        };
        assert_eq!(cfg.validate().unwrap_err().0, "stride");
        let cfg = WindowConfig {
            adjacent_spacing: Span::ZERO,
            ..WindowConfig::default()
        };
        assert_eq!(cfg.validate().unwrap_err().0, "adjacent_spacing");
    }
}
