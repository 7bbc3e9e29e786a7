//! Generation metrics over tokenized text.
//!
//! Tokenization lowercases, strips punctuation and splits on whitespace.
//! METEOR uses exact unigram matches only; no stemming or synonyms.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::MetricError;

pub const MAX_NGRAM: usize = 4;
pub const ROUGE_BETA: f64 = 1.2;

pub fn tokenize(text: &str) -> Vec<String> {
    text.chars()
        .filter(|c| !c.is_ascii_punctuation())
        .collect::<String>()
        .to_lowercase()
        .split_whitespace()
        .map(str::to_string)
        .collect()
}

/// A candidate and its references, already tokenized.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TextPair {
    pub candidate: Vec<String>,
    pub references: Vec<Vec<String>>,
}

impl TextPair {
    pub fn new<S: AsRef<str>>(candidate: &str, references: &[S]) -> Result<Self, MetricError> {
        if references.is_empty() {
            return Err(MetricError::NoReference);
        }
        Ok(TextPair {
            candidate: tokenize(candidate),
            references: references.iter().map(|r| tokenize(r.as_ref())).collect(),
        })
    }
}

pub type Ngram<'a> = &'a [String];

pub fn ngram_counts(tokens: &[String], n: usize) -> HashMap<Ngram<'_>, u32> {
    let mut counts = HashMap::new();
    if n > 0 && tokens.len() >= n {
        for gram in tokens.windows(n) {
            *counts.entry(gram).or_insert(0) += 1;
        }
    }
    counts
}

/// Clipped n-gram matches and candidate n-gram total for one pair.
fn clipped(pair: &TextPair, n: usize) -> (u64, u64) {
    let cand = ngram_counts(&pair.candidate, n);
    let mut max_ref: HashMap<Ngram<'_>, u32> = HashMap::new();
    for r in &pair.references {
        for (g, c) in ngram_counts(r, n) {
            let e = max_ref.entry(g).or_insert(0);
            *e = (*e).max(c);
        }
    }
    let matched = cand
        .iter()
        .map(|(g, &c)| c.min(max_ref.get(g).copied().unwrap_or(0)) as u64)
        .sum();
    let total = pair.candidate.len().saturating_sub(n - 1) as u64;
    (matched, total)
}

/// Reference length closest to `c`, the shorter one on ties.
fn closest_ref_len(pair: &TextPair) -> usize {
    let c = pair.candidate.len() as i64;
    pair.references
        .iter()
        .map(|r| r.len())
        .min_by_key(|&r| ((r as i64 - c).abs(), r))
        .unwrap_or(0)
}

fn brevity_penalty(c: usize, r: usize) -> f64 {
    if c == 0 {
        0.0
    } else if c > r {
        1.0
    } else {
        (1.0 - r as f64 / c as f64).exp()
    }
}

/// Individual BLEU-n scores for n = 1..=4 pooled over the corpus.
pub fn bleu_components(pairs: &[TextPair]) -> [f64; MAX_NGRAM] {
    let c: usize = pairs.iter().map(|p| p.candidate.len()).sum();
    let r: usize = pairs.iter().map(closest_ref_len).sum();
    let bp = brevity_penalty(c, r);
    let mut out = [0.0; MAX_NGRAM];
    for (i, slot) in out.iter_mut().enumerate() {
        let (m, t) = pairs
            .iter()
            .map(|p| clipped(p, i + 1))
            .fold((0, 0), |acc, x| (acc.0 + x.0, acc.1 + x.1));
        *slot = if t == 0 { 0.0 } else { bp * m as f64 / t as f64 };
    }
    out
}

/// Sum of BLEU-1..BLEU-4 over the corpus; lies in [0, 4].
pub fn bleu_cumulative(pairs: &[TextPair]) -> f64 {
    bleu_components(pairs).iter().sum()
}

/// Mean of per-pair cumulative BLEU.
pub fn bleu_cumulative_sentence(pairs: &[TextPair]) -> f64 {
    if pairs.is_empty() {
        return 0.0;
    }
    pairs
        .iter()
        .map(|p| bleu_cumulative(std::slice::from_ref(p)))
        .sum::<f64>()
        / pairs.len() as f64
}

fn lcs_len(a: &[String], b: &[String]) -> usize {
    let mut row = vec![0usize; b.len() + 1];
    for x in a {
        let mut diag = 0;
        for (j, y) in b.iter().enumerate() {
            let above = row[j + 1];
            row[j + 1] = if x == y { diag + 1 } else { above.max(row[j]) };
            diag = above;
        }
    }
    row[b.len()]
}

/// LCS F-measure, best over references.
pub fn rouge_l(pair: &TextPair) -> f64 {
    let beta2 = ROUGE_BETA * ROUGE_BETA;
    pair.references
        .iter()
        .map(|r| {
            let lcs = lcs_len(&pair.candidate, r) as f64;
            if lcs == 0.0 {
                return 0.0;
            }
            let p = lcs / pair.candidate.len() as f64;
            let rec = lcs / r.len() as f64;
            (1.0 + beta2) * p * rec / (rec + beta2 * p)
        })
        .fold(0.0, f64::max)
}

/// Exact-match alignment: each candidate token takes the earliest unused
/// equal reference token, preferring the one right after the previous match.
fn align(candidate: &[String], reference: &[String]) -> Vec<(usize, usize)> {
    let mut used = vec![false; reference.len()];
    let mut pairs = Vec::new();
    let mut last: Option<usize> = None;
    for (i, tok) in candidate.iter().enumerate() {
        let next = last.map(|l| l + 1).filter(|&j| {
            j < reference.len() && !used[j] && &reference[j] == tok
        });
        let pick = next.or_else(|| (0..reference.len()).find(|&j| !used[j] && &reference[j] == tok));
        if let Some(j) = pick {
            used[j] = true;
            pairs.push((i, j));
            last = Some(j);
        }
    }
    pairs
}

fn meteor_single(candidate: &[String], reference: &[String]) -> f64 {
    let alignment = align(candidate, reference);
    let m = alignment.len();
    if m == 0 {
        return 0.0;
    }
    let chunks = 1 + alignment
        .windows(2)
        .filter(|w| !(w[1].0 == w[0].0 + 1 && w[1].1 == w[0].1 + 1))
        .count();
    let p = m as f64 / candidate.len() as f64;
    let r = m as f64 / reference.len() as f64;
    let fmean = 10.0 * p * r / (r + 9.0 * p);
    let penalty = 0.5 * (chunks as f64 / m as f64).powi(3);
    fmean * (1.0 - penalty)
}

/// METEOR with exact matching only, best over references.
pub fn meteor_basic(pair: &TextPair) -> f64 {
    pair.references
        .iter()
        .map(|r| meteor_single(&pair.candidate, r))
        .fold(0.0, f64::max)
}

/// Scaling applied to CIDEr.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CiderOptions {
    /// Multiply by 10, as in the common reporting convention.
    pub scale10: bool,
}

type Weighted<'a> = HashMap<Ngram<'a>, f64>;

fn tfidf<'a>(tokens: &'a [String], n: usize, df: &HashMap<Ngram<'_>, usize>, log_n: f64) -> Weighted<'a> {
    ngram_counts(tokens, n)
        .into_iter()
        .map(|(g, tf)| {
            let d = df.get(g).copied().unwrap_or(0).max(1) as f64;
            (g, tf as f64 * (log_n - d.ln()))
        })
        .collect()
}

fn cosine(a: &Weighted<'_>, b: &Weighted<'_>) -> f64 {
    let dot: f64 = a.iter().map(|(g, w)| w * b.get(g).copied().unwrap_or(0.0)).sum();
    let na = a.values().map(|w| w * w).sum::<f64>().sqrt();
    let nb = b.values().map(|w| w * w).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Per-pair CIDEr scores. Document frequency counts the pairs whose
/// reference set contains each n-gram.
pub fn cider_scores(pairs: &[TextPair], opts: CiderOptions) -> Result<Vec<f64>, MetricError> {
    if pairs.is_empty() {
        return Err(MetricError::EmptyCorpus);
    }
    let log_n = (pairs.len() as f64).ln();
    let mut scores = vec![0.0; pairs.len()];
    for n in 1..=MAX_NGRAM {
        let mut df: HashMap<Ngram<'_>, usize> = HashMap::new();
        for p in pairs {
            let grams: HashSet<Ngram<'_>> = p
                .references
                .iter()
                .flat_map(|r| ngram_counts(r, n).into_keys())
                .collect();
            for g in grams {
                *df.entry(g).or_insert(0) += 1;
            }
        }
        for (p, score) in pairs.iter().zip(scores.iter_mut()) {
            let cand = tfidf(&p.candidate, n, &df, log_n);
            let sim: f64 = p
                .references
                .iter()
                .map(|r| cosine(&cand, &tfidf(r, n, &df, log_n)))
                .sum::<f64>()
                / p.references.len() as f64;
            *score += sim / MAX_NGRAM as f64;
        }
    }
    if opts.scale10 {
        scores.iter_mut().for_each(|s| *s *= 10.0);
    }
    Ok(scores)
}

/// Corpus CIDEr: mean of the per-pair scores.
pub fn cider(pairs: &[TextPair], opts: CiderOptions) -> Result<f64, MetricError> {
    let scores = cider_scores(pairs, opts)?;
    Ok(scores.iter().sum::<f64>() / scores.len() as f64)
}
