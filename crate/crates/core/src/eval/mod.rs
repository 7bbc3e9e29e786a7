//! Detection, generation and latency metrics computed from decision logs.

mod detection;
mod latency;
mod text;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::BufRead;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use detection::{ap, auc, f1, LabeledOutcome};
pub use latency::{detection_latency, LatencyRecord};
pub use text::{
    bleu_components, bleu_cumulative, bleu_cumulative_sentence, cider, cider_scores, meteor_basic,
    ngram_counts, rouge_l, tokenize, CiderOptions, TextPair, MAX_NGRAM, ROUGE_BETA,
};

use crate::model::Decision;
use crate::stream::StreamManifest;
use crate::time::Span;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("metric undefined: outcomes contain a single class")]
    SingleClass,
    #[error("cider needs a non-empty corpus")]
    EmptyCorpus,
    #[error("text pair has no reference")]
    NoReference,
    #[error("stream {0} has no anomaly_onset marker")]
    NoOnset(String),
    #[error("decision log line {line}: {message}")]
    DecisionLog { line: usize, message: String },
}

/// Reads a Decision JSONL stream, skipping blank lines.
pub fn read_decisions<R: BufRead>(reader: R) -> Result<Vec<Decision>, MetricError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| MetricError::DecisionLog {
            line: i + 1,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line).map_err(|e| MetricError::DecisionLog {
                line: i + 1,
                message: e.to_string(),
            })?,
        );
    }
    Ok(out)
}

/// Stream-level outcome: positive iff any decision is positive, scored by
/// the maximum decision score (0 without decisions).
pub fn video_outcome(decisions: &[Decision], manifest: &StreamManifest) -> LabeledOutcome {
    let own = decisions.iter().filter(|d| d.stream_id == manifest.stream_id);
    let (mut score, mut predicted) = (0.0f64, false);
    for d in own {
        score = score.max(d.score);
        predicted |= d.is_anomalous;
    }
    LabeledOutcome {
        item_id: manifest.stream_id.clone(),
        label: manifest.is_positive(),
        score,
        predicted,
    }
}

/// Candidate text for a stream: its highest-scoring decision, earliest on ties.
pub fn stream_candidate(decisions: &[Decision], stream_id: &str) -> Option<String> {
    decisions
        .iter()
        .filter(|d| d.stream_id == stream_id)
        .fold(None::<&Decision>, |best, d| match best {
            Some(b) if b.score >= d.score => Some(b),
            _ => Some(d),
        })
        .map(Decision::describe)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    /// Average BLEU per sentence instead of pooling the corpus.
    pub sentence_bleu: bool,
    pub cider: CiderOptions,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionMetrics {
    pub items: usize,
    pub positives: usize,
    pub f1: f64,
    pub auc: Option<f64>,
    pub ap: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TextMetrics {
    pub items: usize,
    pub bleu_mode: String,
    /// BLEU-1 through BLEU-4.
    pub bleu_n: [f64; MAX_NGRAM],
    pub bleu: f64,
    pub cider: f64,
    pub rouge_l: f64,
    pub meteor: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub notes: Vec<String>,
    pub detection: Option<DetectionMetrics>,
    pub text: Option<TextMetrics>,
    pub latency: Vec<LatencyRecord>,
    pub mean_latency: Option<Span>,
}

const METEOR_NOTE: &str =
    "meteor is meteor_basic: exact unigram alignment only, no stemming or synonym matching";

pub fn build_report(
    decisions: &[Decision],
    manifests: &[StreamManifest],
    references: Option<&BTreeMap<String, Vec<String>>>,
    opts: &EvalOptions,
) -> Result<MetricReport, MetricError> {
    let mut notes = Vec::new();

    let detection = (!manifests.is_empty()).then(|| {
        let outcomes: Vec<LabeledOutcome> =
            manifests.iter().map(|m| video_outcome(decisions, m)).collect();
        let auc = auc(&outcomes).ok();
        let ap = ap(&outcomes).ok();
        if auc.is_none() {
            notes.push("auc/ap undefined: all streams share one label".to_string());
        }
        DetectionMetrics {
            items: outcomes.len(),
            positives: outcomes.iter().filter(|o| o.label).count(),
            f1: f1(&outcomes),
            auc,
            ap,
        }
    });

    let text = match references {
        Some(refs) if !refs.is_empty() => {
            let pairs = refs
                .iter()
                .map(|(id, r)| {
                    let candidate = stream_candidate(decisions, id).unwrap_or_default();
                    TextPair::new(&candidate, r)
                })
                .collect::<Result<Vec<_>, _>>()?;
            notes.push(METEOR_NOTE.to_string());
            let bleu_n = if opts.sentence_bleu {
                let mut acc = [0.0; MAX_NGRAM];
                for p in &pairs {
                    for (a, b) in acc.iter_mut().zip(bleu_components(std::slice::from_ref(p))) {
                        *a += b / pairs.len() as f64;
                    }
                }
                acc
            } else {
                bleu_components(&pairs)
            };
            let n = pairs.len() as f64;
            Some(TextMetrics {
                items: pairs.len(),
                bleu_mode: if opts.sentence_bleu { "sentence" } else { "corpus" }.into(),
                bleu_n,
                bleu: bleu_n.iter().sum(),
                cider: cider(&pairs, opts.cider)?,
                rouge_l: pairs.iter().map(rouge_l).sum::<f64>() / n,
                meteor: pairs.iter().map(meteor_basic).sum::<f64>() / n,
            })
        }
        _ => None,
    };

    let latency: Vec<LatencyRecord> = manifests
        .iter()
        .filter(|m| m.marker(crate::stream::ANOMALY_ONSET).is_some())
        .map(|m| detection_latency(decisions, m))
        .collect::<Result<_, _>>()?;
    let detected: Vec<Span> = latency.iter().filter_map(|r| r.latency).collect();
    let mean_latency = (!detected.is_empty()).then(|| {
        Span::from_micros(
            detected.iter().map(|s| s.as_micros()).sum::<i64>() / detected.len() as i64,
        )
    });

    Ok(MetricReport {
        notes,
        detection,
        text,
        latency,
        mean_latency,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "n/a".into())
}

/// Plain-text rendering with one aligned table per metric group.
pub fn render_table(report: &MetricReport) -> String {
    let mut out = String::new();
    for note in &report.notes {
        let _ = writeln!(out, "# {note}");
    }
    if let Some(d) = &report.detection {
        let _ = writeln!(out, "\n{:<10}{:>8}{:>8}{:>8}{:>8}", "streams", "pos", "F1", "AUC", "AP");
        let _ = writeln!(
            out,
            "{:<10}{:>8}{:>8.4}{:>8}{:>8}",
            d.items,
            d.positives,
            d.f1,
            opt(d.auc),
            opt(d.ap)
        );
    }
    if let Some(t) = &report.text {
        let _ = writeln!(
            out,
            "\n{:<8}{:>10}{:>10}{:>10}{:>10}",
            "items", "BLEU", "CIDEr", "ROUGE", "METEOR"
        );
        let _ = writeln!(
            out,
            "{:<8}{:>10.4}{:>10.4}{:>10.4}{:>10.4}",
            t.items, t.bleu, t.cider, t.rouge_l, t.meteor
        );
    }
    if !report.latency.is_empty() {
        let _ = writeln!(
            out,
            "\n{:<20}{:>10}{:>14}{:>10}{:>6}",
            "stream", "onset", "first_pos", "latency", "FP"
        );
        for r in &report.latency {
            let first = r
                .first_positive_ts
                .map(|t| format!("{:.3}", t.as_secs_f64()))
                .unwrap_or_else(|| "-".into());
            let lat = r
                .latency
                .map(|s| format!("{:.3}", s.as_secs_f64()))
                .unwrap_or_else(|| "missed".into());
            let _ = writeln!(
                out,
                "{:<20}{:>10.3}{:>14}{:>10}{:>6}",
                r.stream_id,
                r.onset_ts.as_secs_f64(),
                first,
                lat,
                r.false_positives
            );
        }
        if let Some(m) = report.mean_latency {
            let _ = writeln!(out, "mean latency {:.3} s", m.as_secs_f64());
        }
    }
    out
}
