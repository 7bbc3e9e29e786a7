//! Reference implementations shared by the property tests and the
//! acceptance runner. Each one is written the slow, obvious way and does
//! not call into the code it checks.
#![allow(dead_code)]

use std::collections::{BTreeSet, VecDeque};

/// Fraction of (positive, negative) pairs ranked correctly, ties counted half.
pub fn pairwise_auc(labels: &[bool], scores: &[f64]) -> Option<f64> {
    let mut good = 0.0;
    let mut pairs = 0u64;
    for (i, &li) in labels.iter().enumerate() {
        for (j, &lj) in labels.iter().enumerate() {
            if li && !lj {
                pairs += 1;
                if scores[i] > scores[j] {
                    good += 1.0;
                } else if scores[i] == scores[j] {
                    good += 0.5;
                }
            }
        }
    }
    (pairs > 0).then(|| good / pairs as f64)
}

/// Main/redundant sets by evaluating the prefix-cut rule directly.
pub fn screen_oracle(counts: &[u32], tau: u32) -> (BTreeSet<usize>, BTreeSet<usize>) {
    // selection sort: repeatedly take the largest count, lowest id first
    let mut left: Vec<usize> = (0..counts.len()).filter(|&i| counts[i] > 0).collect();
    let mut order = Vec::new();
    while !left.is_empty() {
        let mut best = 0;
        for k in 1..left.len() {
            if counts[left[k]] > counts[left[best]] {
                best = k;
            }
        }
        order.push(left.remove(best));
    }
    let mut cut = order.len();
    for j in 1..order.len() {
        if counts[order[j - 1]] > 2 * counts[order[j]] {
            cut = j;
            break;
        }
    }
    let mut main = BTreeSet::new();
    for &e in &order[..cut] {
        if counts[e] > tau {
            main.insert(e);
        } else {
            break;
        }
    }
    let redundant = order.iter().copied().filter(|e| !main.contains(e)).collect();
    (main, redundant)
}

/// Sequential model of a bounded queue: `(seq, value)` items plus counters.
#[derive(Debug, Default)]
pub struct QueueModel {
    pub capacity: usize,
    pub policy: &'static str,
    pub items: VecDeque<u64>,
    pub next_seq: u64,
    pub published: u64,
    pub delivered: u64,
    pub dropped: u64,
}

impl QueueModel {
    pub fn new(policy: &'static str, capacity: usize) -> Self {
        QueueModel {
            capacity,
            policy,
            ..Default::default()
        }
    }

    /// `None` when a blocking queue is full.
    pub fn publish(&mut self) -> Option<u64> {
        match self.policy {
            "block" if self.items.len() >= self.capacity => return None,
            "latest_wins" => {
                self.dropped += self.items.len() as u64;
                self.items.clear();
            }
            "drop_oldest" if self.items.len() >= self.capacity => {
                self.items.pop_front();
                self.dropped += 1;
            }
            _ => {}
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.published += 1;
        self.items.push_back(seq);
        Some(seq)
    }

    pub fn consume(&mut self) -> Option<u64> {
        let s = self.items.pop_front()?;
        self.delivered += 1;
        Some(s)
    }
}

fn grams(tokens: &[&str], n: usize) -> Vec<String> {
    if tokens.len() < n {
        return Vec::new();
    }
    (0..=tokens.len() - n).map(|i| tokens[i..i + n].join(" ")).collect()
}

fn lower_words(s: &str) -> Vec<&str> {
    s.split_whitespace().collect()
}

/// CIDEr as dense TF-IDF cosine over the full n-gram vocabulary.
///
/// Inputs must already be lowercase and unpunctuated.
pub fn cider_oracle(corpus: &[(&str, Vec<&str>)]) -> Vec<f64> {
    let n_docs = corpus.len() as f64;
    let mut out = vec![0.0; corpus.len()];
    for n in 1..=4 {
        let mut vocab = BTreeSet::new();
        for (c, refs) in corpus {
            vocab.extend(grams(&lower_words(c), n));
            for r in refs {
                vocab.extend(grams(&lower_words(r), n));
            }
        }
        let vocab: Vec<String> = vocab.into_iter().collect();
        let df: Vec<f64> = vocab
            .iter()
            .map(|g| {
                corpus
                    .iter()
                    .filter(|(_, refs)| refs.iter().any(|r| grams(&lower_words(r), n).contains(g)))
                    .count() as f64
            })
            .collect();
        let vector = |text: &str| -> Vec<f64> {
            let gs = grams(&lower_words(text), n);
            vocab
                .iter()
                .zip(&df)
                .map(|(g, &d)| {
                    let tf = gs.iter().filter(|x| *x == g).count() as f64;
                    tf * (n_docs.ln() - d.max(1.0).ln())
                })
                .collect()
        };
        let cos = |a: &[f64], b: &[f64]| {
            let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
            let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
            let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
            if na == 0.0 || nb == 0.0 {
                0.0
            } else {
                dot / (na * nb)
            }
        };
        for (k, (c, refs)) in corpus.iter().enumerate() {
            let vc = vector(c);
            let mean = refs.iter().map(|r| cos(&vc, &vector(r))).sum::<f64>() / refs.len() as f64;
            out[k] += mean / 4.0;
        }
    }
    out
}

/// Three-document corpus used by the CIDEr checks.
pub fn cider_corpus() -> Vec<(&'static str, Vec<&'static str>)> {
    vec![
        (
            "a man puts a bottle in his coat",
            vec!["a man hides a bottle in his coat", "a man steals a bottle"],
        ),
        (
            "two people fight near a car",
            vec!["two men fight next to a car", "people fighting beside a parked car"],
        ),
        (
            "a woman walks her dog",
            vec!["a woman walks a dog along the street", "a person walking a dog"],
        ),
    ]
}

/// Hand-computed cumulative BLEU (sum of individual BLEU-1..4), one pair each.
///
/// 1. c=r=6, BP=1: unigrams 5/6, bigrams 3/5, trigrams 1/4, 4-grams 0/3.
/// 2. c=4 > r=2, BP=1: "the" clipped to 1 of 4; no higher matches.
/// 3. c=3, closest r=4, BP=exp(-1/3): p1=p2=p3=1, no 4-grams.
/// 4. c=r=4: unigrams 4/4, bigrams 1/3 ("runs fast"), trigrams 0/2, 4-grams 0/1.
/// 5. two refs, r=5: unigrams 5/5, bigrams 3/4 (the dog x2, dog barks),
///    trigrams 1/3 (the dog barks), 4-grams 0/2.
pub fn bleu_hand_cases() -> Vec<(&'static str, Vec<&'static str>, f64)> {
    vec![
        ("the cat sat on the mat", vec!["the cat is on the mat"], 5.0 / 6.0 + 3.0 / 5.0 + 1.0 / 4.0),
        ("the the the the", vec!["the cat"], 0.25),
        ("a man runs", vec!["a man runs fast", "a man is running"], 3.0 * (-1.0f64 / 3.0).exp()),
        ("man a runs fast", vec!["a man runs fast"], 1.0 + 1.0 / 3.0),
        (
            "the dog the dog barks",
            vec!["the dog barks", "the dog and the dog"],
            1.0 + 0.75 + 1.0 / 3.0,
        ),
    ]
}

/// Window bounds and floor-rule samples written out longhand.
pub fn window_oracle(frames: u64, len: u64, stride: u64, k: u64) -> Vec<(u64, u64, Vec<u64>)> {
    let mut out = Vec::new();
    let mut w = 0;
    loop {
        let start = w * stride;
        let end = start + len;
        if end > frames {
            break;
        }
        let samples = (0..k).map(|j| start + (j * len) / k).collect();
        out.push((start, end, samples));
        w += 1;
    }
    out
}
