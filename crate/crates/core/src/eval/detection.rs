//! Binary detection metrics.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::MetricError;

/// One scored item with its ground truth.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledOutcome {
    pub item_id: String,
    pub label: bool,
    pub score: f64,
    pub predicted: bool,
}

impl LabeledOutcome {
    pub fn new(item_id: impl Into<String>, label: bool, score: f64, threshold: f64) -> Self {
        LabeledOutcome {
            item_id: item_id.into(),
            label,
            score,
            predicted: score >= threshold,
        }
    }
}

/// F1 of the `predicted` flags; 0 when precision and recall are both 0.
pub fn f1(outcomes: &[LabeledOutcome]) -> f64 {
    let (mut tp, mut fp, mut fneg) = (0u64, 0u64, 0u64);
    for o in outcomes {
        match (o.predicted, o.label) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fneg += 1,
            (false, false) => {}
        }
    }
    if tp == 0 {
        return 0.0;
    }
    let precision = tp as f64 / (tp + fp) as f64;
    let recall = tp as f64 / (tp + fneg) as f64;
    2.0 * precision * recall / (precision + recall)
}

fn class_counts(outcomes: &[LabeledOutcome]) -> Result<(usize, usize), MetricError> {
    let pos = outcomes.iter().filter(|o| o.label).count();
    let neg = outcomes.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(MetricError::SingleClass);
    }
    Ok((pos, neg))
}

fn by_score_desc(a: &LabeledOutcome, b: &LabeledOutcome) -> Ordering {
    b.score.total_cmp(&a.score)
}

/// Area under the ROC curve as the Mann-Whitney statistic, ties counted 1/2.
pub fn auc(outcomes: &[LabeledOutcome]) -> Result<f64, MetricError> {
    let (pos, neg) = class_counts(outcomes)?;
    let mut sorted: Vec<&LabeledOutcome> = outcomes.iter().collect();
    sorted.sort_by(|a, b| a.score.total_cmp(&b.score));
    // sum of midranks of positives, ranks starting at 1
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j < sorted.len() && sorted[j].score == sorted[i].score {
            j += 1;
        }
        let midrank = (i + 1 + j) as f64 / 2.0;
        rank_sum += midrank * sorted[i..j].iter().filter(|o| o.label).count() as f64;
        i = j;
    }
    let pos_f = pos as f64;
    Ok((rank_sum - pos_f * (pos_f + 1.0) / 2.0) / (pos_f * neg as f64))
}

/// Average precision over a descending sweep with tied scores grouped.
pub fn ap(outcomes: &[LabeledOutcome]) -> Result<f64, MetricError> {
    let (pos, _) = class_counts(outcomes)?;
    let mut sorted: Vec<&LabeledOutcome> = outcomes.iter().collect();
    sorted.sort_by(|a, b| by_score_desc(a, b));
    let (mut tp, mut seen) = (0usize, 0usize);
    let mut prev_recall = 0.0;
    let mut total = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j < sorted.len() && sorted[j].score == sorted[i].score {
            j += 1;
        }
        tp += sorted[i..j].iter().filter(|o| o.label).count();
        seen += j - i;
        let recall = tp as f64 / pos as f64;
        let precision = tp as f64 / seen as f64;
        total += (recall - prev_recall) * precision;
        prev_recall = recall;
        i = j;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn outcomes(labels: &[u8], scores: &[f64]) -> Vec<LabeledOutcome> {
        labels
            .iter()
            .zip(scores)
            .enumerate()
            .map(|(i, (&l, &s))| LabeledOutcome::new(i.to_string(), l == 1, s, 0.5))
            .collect()
    }

    /// Fraction of correctly ordered (pos, neg) pairs, ties 1/2.
    fn pairwise_auc(o: &[LabeledOutcome]) -> f64 {
        let (mut num, mut den) = (0.0, 0.0);
        for p in o.iter().filter(|x| x.label) {
            for n in o.iter().filter(|x| !x.label) {
                den += 1.0;
                num += match p.score.partial_cmp(&n.score).unwrap() {
                    Ordering::Greater => 1.0,
                    Ordering::Equal => 0.5,
                    Ordering::Less => 0.0,
                };
            }
        }
        num / den
    }

    #[test]
    fn perfect_ranking() {
        let o = outcomes(&[1, 1, 0, 0], &[0.9, 0.8, 0.3, 0.1]);
        assert_eq!(auc(&o).unwrap(), 1.0);
        assert_eq!(ap(&o).unwrap(), 1.0);
    }

    #[test]
    fn all_tied_is_half() {
        let o = outcomes(&[1, 0, 1, 0], &[0.4; 4]);
        assert_eq!(auc(&o).unwrap(), 0.5);
        assert_eq!(ap(&o).unwrap(), 0.5);
    }

    #[test]
    fn mixed_ranking_matches_pairwise_oracle() {
        let o = outcomes(&[1, 0, 1, 0], &[0.9, 0.8, 0.7, 0.1]);
        // pairs: (0.9,0.8) (0.9,0.1) (0.7,0.1) ordered, (0.7,0.8) not
        assert_eq!(pairwise_auc(&o), 0.75);
        assert!((auc(&o).unwrap() - 0.75).abs() < 1e-12);
        // sweep: 0.9 -> P=1,R=.5 ; 0.8 -> miss ; 0.7 -> P=2/3,R=1
        assert!((ap(&o).unwrap() - (0.5 + 0.5 * 2.0 / 3.0)).abs() < 1e-12);
    }

    #[test]
    fn single_class_is_undefined() {
        let o = outcomes(&[1, 1], &[0.2, 0.3]);
        assert_eq!(auc(&o), Err(MetricError::SingleClass));
        assert_eq!(ap(&o), Err(MetricError::SingleClass));
    }

    #[test]
    fn f1_cases() {
        let o = outcomes(&[1, 0, 1, 0], &[0.9, 0.8, 0.2, 0.1]);
        // tp 1, fp 1, fn 1
        assert!((f1(&o) - 0.5).abs() < 1e-12);
        let none = outcomes(&[1, 0], &[0.1, 0.2]);
        assert_eq!(f1(&none), 0.0);
    }
}
