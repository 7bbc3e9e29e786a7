//! Clip segmentation for fixture and dataset preparation.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::windowing::uniform_sample;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CorpusError {
    #[error("unsupported ratio {0:?}; supported: 3:7, 1:1, 7:3")]
    UnsupportedRatio(String),
    #[error("segment length {0} must be a positive multiple of 10")]
    BadLength(usize),
    #[error("need at least {k} adjacent frames, got {got}")]
    TooFewAdjacent { k: usize, got: usize },
}

/// Historical-to-adjacent split ratio.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SplitRatio {
    #[serde(rename = "3:7")]
    ThreeSeven,
    #[serde(rename = "1:1")]
    OneOne,
    #[serde(rename = "7:3")]
    SevenThree,
}

impl SplitRatio {
    pub const ALL: [SplitRatio; 3] = [SplitRatio::ThreeSeven, SplitRatio::OneOne, SplitRatio::SevenThree];

    /// Historical share in tenths.
    pub fn historical_tenths(self) -> usize {
        match self {
            SplitRatio::ThreeSeven => 3,
            SplitRatio::OneOne => 5,
            SplitRatio::SevenThree => 7,
        }
    }
}

impl FromStr for SplitRatio {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "3:7" => Ok(SplitRatio::ThreeSeven),
            "1:1" => Ok(SplitRatio::OneOne),
            "7:3" => Ok(SplitRatio::SevenThree),
            other => Err(CorpusError::UnsupportedRatio(other.to_string())),
        }
    }
}

impl fmt::Display for SplitRatio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SplitRatio::ThreeSeven => "3:7",
            SplitRatio::OneOne => "1:1",
            SplitRatio::SevenThree => "7:3",
        })
    }
}

/// Splits a clip into a historical prefix and an adjacent suffix.
pub fn split_segment<T: Clone>(ids: &[T], ratio: SplitRatio) -> Result<(Vec<T>, Vec<T>), CorpusError> {
    if ids.is_empty() || !ids.len().is_multiple_of(10) {
        return Err(CorpusError::BadLength(ids.len()));
    }
    let cut = ids.len() / 10 * ratio.historical_tenths();
    Ok((ids[..cut].to_vec(), ids[cut..].to_vec()))
}

/// Picks `k` ids from the adjacent segment with the window sampling rule.
pub fn sample_adjacent<T: Clone>(adjacent: &[T], k: usize) -> Result<Vec<T>, CorpusError> {
    if k == 0 || adjacent.len() < k {
        return Err(CorpusError::TooFewAdjacent {
            k,
            got: adjacent.len(),
        });
    }
    let offsets = uniform_sample(0, adjacent.len() as u64, k).expect("k checked above");
    Ok(offsets.into_iter().map(|o| adjacent[o as usize].clone()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(range: std::ops::Range<u64>) -> Vec<u64> {
        range.collect()
    }

    #[test]
    fn published_ratios() {
        let clip = ids(0..100);
        for (ratio, cut) in [("3:7", 30), ("1:1", 50), ("7:3", 70)] {
            let (h, a) = split_segment(&clip, ratio.parse().unwrap()).unwrap();
            assert_eq!(h, ids(0..cut));
            assert_eq!(a, ids(cut..100));
        }
    }

    #[test]
    fn unsupported_ratio_lists_supported() {
        let err = "2:8".parse::<SplitRatio>().unwrap_err();
        assert!(err.to_string().contains("3:7, 1:1, 7:3"));
        assert!(split_segment(&ids(0..95), SplitRatio::OneOne).is_err());
    }

    #[test]
    fn adjacent_resampling() {
        let adjacent = ids(30..100);
        assert_eq!(
            sample_adjacent(&adjacent, 8).unwrap(),
            vec![30, 38, 47, 56, 65, 73, 82, 91]
        );
        assert_eq!(sample_adjacent(&ids(0..8), 8).unwrap(), ids(0..8));
        assert!(sample_adjacent(&ids(0..7), 8).is_err());
    }
}
