//! The three agent workers as step functions.
//!
//! Agent 1 captions the sampled frames of each closed window. Agent 2
//! folds each caption batch into the summary chain after redundancy
//! filtering. Agent 3 pairs the freshest summary with the adjacent frames
//! and asks the reasoner for a structured decision.
//!
//! Agents own their backend and read time from their [`SharedClock`]; the
//! drivers in [`crate::pipeline`] decide when each step runs.

mod prompts;

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tracing::{debug, warn};

pub use prompts::{Prompts, CAPTION_PLACEHOLDER};

use crate::backends::{BackendError, Captioner, Reasoner, SummarizeRequest, Summarizer};
use crate::bus::FaultEvent;
use crate::clock::SharedClock;
use crate::entity::{self, EntityVocabulary, RollingHorizon, ScreenRule};
use crate::model::{
    Caption, CaptionBatch, CaptionGap, Decision, FrameRef, Summary, DECISION_SCHEMA_VERSION,
    NO_SEQ,
};
use crate::time::Timestamp;
use crate::windowing::{FrameRing, NotReady, WindowConfig};

pub const IMAGE_TOKEN: &str = "<image>";
pub const FRAME_SEPARATOR: &str = "<sep>";
pub const HISTORY_OPEN: &str = "<history>";
pub const HISTORY_CLOSE: &str = "</history>";
pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AgentError {
    #[error("expected {expected} sampled frames, got {got}")]
    SampleCount { expected: usize, got: usize },
    #[error("caption batch for window {got} arrived while expecting window {expected}")]
    OutOfOrder { expected: u64, got: u64 },
}

/// Text handed to the reasoner: instruction, frame/history markup and the summary.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiscriminationRequest {
    pub instruction: String,
    /// Frame placeholders joined by separators, then the history envelope.
    pub identifier: String,
    pub summary: String,
    /// Summary sequence number, or [`NO_SEQ`] on a cold start.
    pub summary_seq: i64,
    pub frames: Vec<FrameRef>,
}

impl DiscriminationRequest {
    /// Concatenated prompt text, instruction first.
    pub fn text(&self) -> String {
        format!("{}\n{}", self.instruction, self.identifier)
    }
}

fn escape_markup(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            c => out.push(c),
        }
    }
    out
}

/// Builds the frame/history identifier for `frame_count` frames.
pub fn identifier(frame_count: usize, summary: &str) -> String {
    let frames = vec![IMAGE_TOKEN; frame_count].join(FRAME_SEPARATOR);
    format!("{frames}{HISTORY_OPEN}{}{HISTORY_CLOSE}", escape_markup(summary))
}

/// Assembles a discrimination request; `None` summary is the cold-start case.
pub fn assemble(
    instruction: &str,
    summary: Option<&Summary>,
    frames: Vec<FrameRef>,
) -> DiscriminationRequest {
    let (text, seq) = match summary {
        Some(s) => (s.text.clone(), s.summary_seq as i64),
        None => (String::new(), NO_SEQ),
    };
    DiscriminationRequest {
        instruction: instruction.to_string(),
        identifier: identifier(frames.len(), &text),
        summary: text,
        summary_seq: seq,
        frames,
    }
}

/// Agent 1: one caption per sampled frame.
pub struct CaptionAgent {
    captioner: Box<dyn Captioner>,
    vocab: Arc<EntityVocabulary>,
    prompts: Arc<Prompts>,
    samples_per_window: usize,
    clock: SharedClock,
}

impl CaptionAgent {
    pub fn new(
        captioner: Box<dyn Captioner>,
        vocab: Arc<EntityVocabulary>,
        prompts: Arc<Prompts>,
        samples_per_window: usize,
        clock: SharedClock,
    ) -> Self {
        CaptionAgent {
            captioner,
            vocab,
            prompts,
            samples_per_window,
            clock,
        }
    }

    /// Captions `frames` in order. Failed frames become gap records.
    pub fn step(&mut self, window_seq: u64, frames: &[FrameRef]) -> Result<CaptionBatch, AgentError> {
        if frames.len() != self.samples_per_window {
            return Err(AgentError::SampleCount {
                expected: self.samples_per_window,
                got: frames.len(),
            });
        }
        let mut captions = Vec::with_capacity(frames.len());
        let mut gaps = Vec::new();
        for frame in frames {
            match self.captioner.caption(frame) {
                Ok(raw) => {
                    let text = self.prompts.format_caption(&raw);
                    captions.push(Caption {
                        entities: self.vocab.detect(&text),
                        text,
                        frame_id: frame.frame_id,
                        ts: frame.ts,
                        window_seq,
                    });
                }
                Err(e) => {
                    warn!(window_seq, frame_id = frame.frame_id, error = %e, "caption skipped");
                    gaps.push(CaptionGap {
                        frame_id: frame.frame_id,
                        reason: e.to_string(),
                    });
                }
            }
        }
        Ok(CaptionBatch {
            window_seq,
            captions,
            gaps,
        })
    }

    pub fn now(&self) -> Timestamp {
        self.clock.now()
    }
}

/// Redundancy filter settings used by Agent 2.
#[derive(Clone, Debug, PartialEq)]
pub struct FilterSettings {
    pub tau: u32,
    pub rule: ScreenRule,
    /// Captions in the rolling counting horizon.
    pub horizon: usize,
}

/// Result of one Agent 2 step.
#[derive(Clone, Debug, PartialEq)]
pub struct SummaryStep {
    pub summary: Summary,
    /// Descriptions passed to the summarizer.
    pub descriptions: Vec<String>,
    /// Captions removed as redundant.
    pub filtered: usize,
    pub fault: Option<BackendError>,
}

/// Agent 2: maintains the causal summary chain.
pub struct SummaryAgent {
    summarizer: Box<dyn Summarizer>,
    vocab: Arc<EntityVocabulary>,
    prompt: String,
    settings: FilterSettings,
    horizon: RollingHorizon,
    prev: Option<Summary>,
    next_window: u64,
    clock: SharedClock,
}

impl SummaryAgent {
    pub fn new(
        summarizer: Box<dyn Summarizer>,
        vocab: Arc<EntityVocabulary>,
        prompt: String,
        settings: FilterSettings,
        clock: SharedClock,
    ) -> Self {
        SummaryAgent {
            summarizer,
            vocab,
            prompt,
            horizon: RollingHorizon::new(settings.horizon),
            settings,
            prev: None,
            next_window: 0,
            clock,
        }
    }

    pub fn previous(&self) -> Option<&Summary> {
        self.prev.as_ref()
    }

    /// Filters the batch, extends the chain by one link and returns it.
    pub fn step(&mut self, batch: &CaptionBatch) -> Result<SummaryStep, AgentError> {
        if batch.window_seq != self.next_window {
            return Err(AgentError::OutOfOrder {
                expected: self.next_window,
                got: batch.window_seq,
            });
        }
        self.horizon.extend(batch.captions.iter().cloned());
        let freq = self.horizon.count(&self.vocab);
        let screen = entity::screen_main_entities(&freq, self.settings.tau, self.settings.rule);
        let kept = entity::filter_captions(&batch.captions, &screen);
        let filtered = batch.captions.len() - kept.len();
        let descriptions: Vec<String> = kept.into_iter().map(|c| c.text).collect();

        let previous = self.prev.as_ref().map(|s| s.text.clone()).unwrap_or_default();
        let request = SummarizeRequest {
            prompt: self.prompt.clone(),
            descriptions,
            previous,
        };
        let (text, carried, fault) = match self.summarizer.summarize(&request) {
            Ok(text) => (text, false, None),
            Err(e) => {
                warn!(window_seq = batch.window_seq, error = %e, "summary carried forward");
                (request.previous.clone(), true, Some(e))
            }
        };
        let seq = batch.window_seq;
        let summary = Summary {
            summary_seq: seq,
            text,
            prev_seq: seq as i64 - 1,
            source_window_seq: batch.window_seq,
            created_ts: self.clock.now(),
            carried,
        };
        debug!(seq, filtered, carried, "summary emitted");
        self.prev = Some(summary.clone());
        self.next_window += 1;
        Ok(SummaryStep {
            summary,
            descriptions: request.descriptions,
            filtered,
            fault,
        })
    }
}

/// What Agent 3 does before the first summary arrives.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColdStart {
    /// Discriminate with an empty history envelope.
    #[default]
    EmptyHistory,
    /// Skip discrimination until a summary exists.
    Wait,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Agent3Outcome {
    Decision(Decision),
    /// Not enough frame history, or waiting for the first summary.
    NotReady,
    /// Backend failure or schema violation; no decision is emitted.
    Fault(FaultEvent),
}

/// Agent 3: adjacent-frame buffer plus discrimination.
pub struct DiscriminationAgent {
    reasoner: Box<dyn Reasoner>,
    instruction: String,
    cfg: WindowConfig,
    threshold: f64,
    cold_start: ColdStart,
    ring: FrameRing,
    summary: Option<Summary>,
    next_decision: u64,
    clock: SharedClock,
}

impl DiscriminationAgent {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        reasoner: Box<dyn Reasoner>,
        instruction: String,
        cfg: WindowConfig,
        fps: f64,
        threshold: f64,
        cold_start: ColdStart,
        clock: SharedClock,
    ) -> Self {
        DiscriminationAgent {
            reasoner,
            instruction,
            ring: FrameRing::for_stream(fps, &cfg),
            cfg,
            threshold,
            cold_start,
            summary: None,
            next_decision: 0,
            clock,
        }
    }

    pub fn observe(&mut self, frame: FrameRef) {
        self.ring.push(frame);
    }

    /// Replaces the held summary if `summary` is newer.
    pub fn offer_summary(&mut self, summary: Summary) {
        if self
            .summary
            .as_ref()
            .is_none_or(|s| summary.summary_seq > s.summary_seq)
        {
            self.summary = Some(summary);
        }
    }

    pub fn summary(&self) -> Option<&Summary> {
        self.summary.as_ref()
    }

    pub fn assemble(&mut self) -> Result<DiscriminationRequest, NotReady> {
        if self.summary.is_none() && self.cold_start == ColdStart::Wait {
            return Err(NotReady);
        }
        let frames = self.ring.adjacent(&self.cfg)?;
        Ok(assemble(&self.instruction, self.summary.as_ref(), frames))
    }

    /// Runs one discrimination on the current summary and adjacent frames.
    pub fn step(&mut self) -> Agent3Outcome {
        let request = match self.assemble() {
            Ok(r) => r,
            Err(NotReady) => return Agent3Outcome::NotReady,
        };
        let response = self
            .reasoner
            .discriminate(&request)
            .and_then(|r| r.validate());
        let now = self.clock.now();
        match response {
            Ok(r) => {
                let decision = Decision {
                    schema_version: DECISION_SCHEMA_VERSION,
                    stream_id: request
                        .frames
                        .first()
                        .map(|f| f.stream_id.clone())
                        .unwrap_or_default(),
                    decision_id: self.next_decision,
                    summary_seq: request.summary_seq,
                    frame_ids: request.frames.iter().map(|f| f.frame_id).collect(),
                    is_anomalous: r.score >= self.threshold,
                    subject: r.subject,
                    location: r.location,
                    cause: r.cause,
                    score: r.score,
                    emitted_ts: now,
                };
                self.next_decision += 1;
                Agent3Outcome::Decision(decision)
            }
            Err(e) => {
                warn!(summary_seq = request.summary_seq, error = %e, "decision suppressed");
                Agent3Outcome::Fault(FaultEvent {
                    stage: "agent3".into(),
                    ts: now,
                    message: e.to_string(),
                })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backends::{
        FaultSpec, LatencyModel, MockCaptioner, MockReasoner, MockSpec, MockSummarizer,
        ReasonerResponse, ReasonerRule, ReasonerScript, CaptionScript, ScriptedRange,
    };
    use crate::clock::VirtualClock;
    use crate::stream::StreamManifest;

    fn clock() -> SharedClock {
        Arc::new(VirtualClock::new())
    }

    fn frames(n: u64) -> Vec<FrameRef> {
        let m = StreamManifest::synthetic("cam", 30.0, n);
        m.frames.iter().map(|f| m.frame_ref(f)).collect()
    }

    fn vocab() -> Arc<EntityVocabulary> {
        Arc::new(EntityVocabulary::parse("person|man|woman\nbag\ntree\nshelf\n").unwrap())
    }

    fn caption(text: &str, window_seq: u64, v: &EntityVocabulary) -> Caption {
        Caption {
            text: text.into(),
            frame_id: 0,
            ts: Timestamp::ZERO,
            window_seq,
            entities: v.detect(text),
        }
    }

    fn summary(seq: u64, text: &str) -> Summary {
        Summary {
            summary_seq: seq,
            text: text.into(),
            prev_seq: seq as i64 - 1,
            source_window_seq: seq,
            created_ts: Timestamp::ZERO,
            carried: false,
        }
    }

    fn summary_agent(faults: FaultSpec, v: Arc<EntityVocabulary>) -> SummaryAgent {
        SummaryAgent::new(
            Box::new(MockSummarizer::new(LatencyModel::default(), faults, clock(), 1)),
            v,
            Prompts::default().summarizer,
            FilterSettings {
                tau: 3,
                rule: ScreenRule::PrefixCut,
                horizon: 10,
            },
            clock(),
        )
    }

    #[test]
    fn identifier_has_separators_and_one_history_envelope() {
        let fs = frames(8);
        let req = assemble("inst", Some(&summary(0, "S0")), fs);
        assert_eq!(req.identifier.matches(FRAME_SEPARATOR).count(), 7);
        assert_eq!(req.identifier.matches(IMAGE_TOKEN).count(), 8);
        assert!(req.identifier.ends_with("<history>S0</history>"));
        assert_eq!(req.identifier.matches("<history>").count(), 1);
        assert_eq!(req.summary_seq, 0);
    }

    #[test]
    fn cold_start_has_empty_history() {
        let req = assemble("inst", None, frames(8));
        assert!(req.identifier.ends_with("<history></history>"));
        assert_eq!(req.summary_seq, NO_SEQ);
    }

    #[test]
    fn summary_markup_is_escaped() {
        let req = assemble("i", Some(&summary(1, "a <history> & b")), frames(2));
        assert_eq!(req.identifier.matches("<history>").count(), 1);
        assert!(req.identifier.contains("a &lt;history&gt; &amp; b"));
    }

    #[test]
    fn assembly_is_byte_deterministic() {
        let a = assemble("i", Some(&summary(3, "S")), frames(8));
        let b = assemble("i", Some(&summary(3, "S")), frames(8));
        assert_eq!(
            serde_json::to_vec(&a).unwrap(),
            serde_json::to_vec(&b).unwrap()
        );
        assert_eq!(a.text(), b.text());
    }

    fn caption_agent(spec: MockSpec<CaptionScript>) -> CaptionAgent {
        CaptionAgent::new(
            Box::new(MockCaptioner::new(spec, clock(), 0)),
            vocab(),
            Arc::new(Prompts::default()),
            5,
            clock(),
        )
    }

    #[test]
    fn agent1_captions_in_frame_order() {
        let mut agent = caption_agent(MockSpec {
            script: CaptionScript {
                fallback: "caption {frame_id}".into(),
                ..CaptionScript::default()
            },
            ..MockSpec::default()
        });
        let fs = frames(100);
        let sampled: Vec<FrameRef> = [0, 20, 40, 60, 80].iter().map(|&i| fs[i].clone()).collect();
        let batch = agent.step(0, &sampled).unwrap();
        let texts: Vec<&str> = batch.captions.iter().map(|c| c.text.as_str()).collect();
        assert_eq!(
            texts,
            [
                "A picture of caption 0.",
                "A picture of caption 20.",
                "A picture of caption 40.",
                "A picture of caption 60.",
                "A picture of caption 80."
            ]
        );
        assert!(batch.captions.iter().all(|c| c.window_seq == 0));
        assert!(batch.gaps.is_empty());
        assert!(agent.step(1, &sampled[..4]).is_err());
    }

    #[test]
    fn agent1_records_gap_on_backend_fault() {
        let mut agent = caption_agent(MockSpec {
            script: CaptionScript {
                ranges: vec![ScriptedRange {
                    from: 0,
                    to: 100,
                    text: "a man with a bag".into(),
                }],
                ..CaptionScript::default()
            },
            faults: FaultSpec {
                frames: vec![40],
                ..FaultSpec::default()
            },
            ..MockSpec::default()
        });
        let fs = frames(100);
        let sampled: Vec<FrameRef> = [0, 20, 40, 60, 80].iter().map(|&i| fs[i].clone()).collect();
        let batch = agent.step(0, &sampled).unwrap();
        assert_eq!(batch.captions.len(), 4);
        assert_eq!(batch.gaps.len(), 1);
        assert_eq!(batch.gaps[0].frame_id, 40);
        assert_eq!(batch.frame_count(), 5);
        let v = vocab();
        assert_eq!(
            batch.captions[0].entities,
            vec![v.id_of("person").unwrap(), v.id_of("bag").unwrap()]
        );
    }

    #[test]
    fn agent2_chains_summaries() {
        let v = vocab();
        let mut agent = summary_agent(FaultSpec::default(), v.clone());
        let b0 = CaptionBatch {
            window_seq: 0,
            captions: vec![caption("b", 0, &v), caption("c", 0, &v)],
            gaps: vec![],
        };
        let s0 = agent.step(&b0).unwrap().summary;
        assert_eq!((s0.summary_seq, s0.prev_seq), (0, NO_SEQ));
        assert_eq!(s0.text, "|b c");
        let b1 = CaptionBatch {
            window_seq: 1,
            captions: vec![caption("d", 1, &v)],
            gaps: vec![],
        };
        let s1 = agent.step(&b1).unwrap().summary;
        assert_eq!((s1.summary_seq, s1.prev_seq), (1, 0));
        assert_eq!(s1.text, "|b c|d");
        let stale = CaptionBatch {
            window_seq: 1,
            ..b1
        };
        assert_eq!(
            agent.step(&stale).unwrap_err(),
            AgentError::OutOfOrder {
                expected: 2,
                got: 1
            }
        );
    }

    #[test]
    fn agent2_all_redundant_batch_sends_no_descriptions() {
        let v = vocab();
        let mut agent = summary_agent(FaultSpec::default(), v.clone());
        let warm = CaptionBatch {
            window_seq: 0,
            captions: (0..5).map(|_| caption("a person walks", 0, &v)).collect(),
            gaps: vec![],
        };
        let s0 = agent.step(&warm).unwrap().summary;
        // horizon counts person 5, tree 1: S = {person}, D = {tree}
        let only_tree = CaptionBatch {
            window_seq: 1,
            captions: vec![caption("a tree", 1, &v)],
            gaps: vec![],
        };
        let step = agent.step(&only_tree).unwrap();
        assert_eq!(step.filtered, 1);
        assert!(step.descriptions.is_empty());
        assert_eq!(step.summary.text, format!("{}|", s0.text));
        assert_eq!(step.summary.prev_seq, 0);
    }

    #[test]
    fn agent2_carries_on_failure() {
        let v = vocab();
        let mut agent = summary_agent(
            FaultSpec {
                calls: vec![1],
                ..FaultSpec::default()
            },
            v.clone(),
        );
        let batch = |w| CaptionBatch {
            window_seq: w,
            captions: vec![caption(&format!("w{w}"), w, &v)],
            gaps: vec![],
        };
        let s0 = agent.step(&batch(0)).unwrap();
        let s1 = agent.step(&batch(1)).unwrap();
        let s2 = agent.step(&batch(2)).unwrap();
        assert!(!s0.summary.carried);
        assert!(s1.summary.carried);
        assert_eq!(s1.fault, Some(BackendError::Timeout));
        assert_eq!(s1.summary.text, s0.summary.text);
        assert_eq!(s1.summary.summary_seq, 1);
        assert_eq!(s2.summary.text, format!("{}|w2", s0.summary.text));
    }

    fn agent3(script: ReasonerScript, cold_start: ColdStart) -> DiscriminationAgent {
        DiscriminationAgent::new(
            Box::new(MockReasoner::scripted(script, clock())),
            Prompts::default().discriminator,
            WindowConfig::default(),
            30.0,
            DEFAULT_THRESHOLD,
            cold_start,
            clock(),
        )
    }

    fn positive(score: f64) -> ReasonerScript {
        ReasonerScript {
            rules: vec![ReasonerRule {
                summary_contains: "S".into(),
                response: ReasonerResponse {
                    subject: "man in black".into(),
                    location: "store aisle".into(),
                    cause: "concealing item".into(),
                    score,
                },
            }],
            ..ReasonerScript::default()
        }
    }

    #[test]
    fn agent3_scripted_positive() {
        let mut agent = agent3(positive(0.9), ColdStart::EmptyHistory);
        for f in frames(31) {
            agent.observe(f);
        }
        agent.offer_summary(summary(0, "S_theft"));
        let Agent3Outcome::Decision(d) = agent.step() else {
            panic!("expected a decision")
        };
        assert!(d.is_anomalous);
        assert_eq!(d.subject, "man in black");
        assert_eq!(d.frame_ids, vec![9, 12, 15, 18, 21, 24, 27, 30]);
        assert_eq!(d.summary_seq, 0);
        assert_eq!(d.stream_id, "cam");
    }

    #[test]
    fn agent3_threshold_is_inclusive() {
        let mut agent = agent3(positive(0.5), ColdStart::EmptyHistory);
        for f in frames(31) {
            agent.observe(f);
        }
        agent.offer_summary(summary(0, "S"));
        let Agent3Outcome::Decision(d) = agent.step() else {
            panic!()
        };
        assert!(d.is_anomalous);
    }

    #[test]
    fn agent3_rejects_out_of_range_score() {
        let mut agent = agent3(positive(1.2), ColdStart::EmptyHistory);
        for f in frames(31) {
            agent.observe(f);
        }
        agent.offer_summary(summary(0, "S"));
        assert!(matches!(agent.step(), Agent3Outcome::Fault(_)));
    }

    #[test]
    fn agent3_not_ready_without_history() {
        let mut agent = agent3(positive(0.9), ColdStart::EmptyHistory);
        for f in frames(6) {
            agent.observe(f);
        }
        assert_eq!(agent.step(), Agent3Outcome::NotReady);
        let mut waiting = agent3(positive(0.9), ColdStart::Wait);
        for f in frames(31) {
            waiting.observe(f);
        }
        assert_eq!(waiting.step(), Agent3Outcome::NotReady);
        waiting.offer_summary(summary(0, "S"));
        assert!(matches!(waiting.step(), Agent3Outcome::Decision(_)));
    }

    #[test]
    fn agent3_keeps_freshest_summary() {
        let mut agent = agent3(ReasonerScript::default(), ColdStart::EmptyHistory);
        agent.offer_summary(summary(2, "two"));
        agent.offer_summary(summary(1, "one"));
        assert_eq!(agent.summary().unwrap().summary_seq, 2);
    }
}
