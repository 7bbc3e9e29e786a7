//! Main-entity screening and redundant-caption filtering.
//!
//! Entity mentions are found lexically: captions are lowercased and split
//! into alphanumeric words, and each vocabulary alias (possibly several
//! words) must match whole words. At each position the longest matching
//! alias wins, so one span is never counted twice.
//!
//! Screening sorts the nonzero counts in descending order (vocabulary order
//! on ties) and keeps the high-frequency head as the main set `S`; every
//! other mentioned entity is redundant (`D`). A caption is dropped iff it
//! mentions at least one entity and all of its entities are in `D`.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::Caption;

pub const DEFAULT_TAU: u32 = 3;

#[derive(Debug, Error)]
pub enum VocabularyError {
    #[error("line {line}: empty entity or alias")]
    EmptyTerm { line: usize },
    #[error("line {line}: term {term:?} already defined")]
    DuplicateTerm { line: usize, term: String },
    #[error("vocabulary is empty")]
    Empty,
    #[error("reading vocabulary {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Entity {
    /// Canonical name: the first term on the vocabulary line.
    pub name: String,
    /// All surface forms including the canonical name, lowercased.
    pub aliases: Vec<String>,
}

/// Ordered entity list `e_1 .. e_n` with alias folding.
#[derive(Clone, Debug)]
pub struct EntityVocabulary {
    entities: Vec<Entity>,
    /// First word of an alias -> (alias words, entity id), longest first.
    index: HashMap<String, Vec<(Vec<String>, usize)>>,
}

pub(crate) fn words(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect()
}

impl EntityVocabulary {
    /// Parses one entity per line, aliases separated by `|`.
    /// Blank lines and lines starting with `#` are skipped.
    pub fn parse(text: &str) -> Result<Self, VocabularyError> {
        let mut entities = Vec::new();
        let mut seen = HashMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut aliases = Vec::new();
            for term in line.split('|') {
                let term = words(term).join(" ");
                if term.is_empty() {
                    return Err(VocabularyError::EmptyTerm { line: i + 1 });
                }
                if seen.insert(term.clone(), entities.len()).is_some() {
                    return Err(VocabularyError::DuplicateTerm { line: i + 1, term });
                }
                aliases.push(term);
            }
            entities.push(Entity {
                name: aliases[0].clone(),
                aliases,
            });
        }
        Self::from_entities(entities)
    }

    pub fn load(path: &Path) -> Result<Self, VocabularyError> {
        let text = std::fs::read_to_string(path).map_err(|source| VocabularyError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    /// Vocabulary of single-alias entities, in the given order.
    pub fn from_names<I, S>(names: I) -> Result<Self, VocabularyError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let text: Vec<String> = names.into_iter().map(|s| s.as_ref().to_string()).collect();
        Self::parse(&text.join("\n"))
    }

    fn from_entities(entities: Vec<Entity>) -> Result<Self, VocabularyError> {
        if entities.is_empty() {
            return Err(VocabularyError::Empty);
        }
        let mut index: HashMap<String, Vec<(Vec<String>, usize)>> = HashMap::new();
        for (id, e) in entities.iter().enumerate() {
            for alias in &e.aliases {
                let ws: Vec<String> = alias.split(' ').map(str::to_string).collect();
                index.entry(ws[0].clone()).or_default().push((ws, id));
            }
        }
        for candidates in index.values_mut() {
            candidates.sort_by_key(|c| std::cmp::Reverse(c.0.len()));
        }
        Ok(EntityVocabulary { entities, index })
    }

    pub fn len(&self) -> usize {
        self.entities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entities.is_empty()
    }

    pub fn entities(&self) -> &[Entity] {
        &self.entities
    }

    pub fn name(&self, id: usize) -> &str {
        &self.entities[id].name
    }

    pub fn id_of(&self, name: &str) -> Option<usize> {
        let key = words(name).join(" ");
        self.entities.iter().position(|e| e.aliases.contains(&key))
    }

    /// Entity id of every mention in `text`, in order, with multiplicity.
    pub fn mentions(&self, text: &str) -> Vec<usize> {
        let ws = words(text);
        let mut out = Vec::new();
        let mut i = 0;
        while i < ws.len() {
            let hit = self.index.get(&ws[i]).and_then(|cands| {
                cands
                    .iter()
                    .find(|(alias, _)| ws[i..].starts_with(alias))
                    .map(|(alias, id)| (alias.len(), *id))
            });
            match hit {
                Some((len, id)) => {
                    out.push(id);
                    i += len;
                }
                None => i += 1,
            }
        }
        out
    }

    /// Distinct entity ids mentioned in `text`, ascending.
    pub fn detect(&self, text: &str) -> Vec<usize> {
        let set: BTreeSet<usize> = self.mentions(text).into_iter().collect();
        set.into_iter().collect()
    }
}

/// Occurrence count `N_i` per vocabulary entity over a caption horizon.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FrequencyTable {
    pub counts: Vec<u32>,
    /// Number of captions counted.
    pub horizon: usize,
}

impl FrequencyTable {
    pub fn from_counts(counts: Vec<u32>) -> Self {
        FrequencyTable { counts, horizon: 0 }
    }

    pub fn get(&self, id: usize) -> u32 {
        self.counts[id]
    }

    pub fn named<'a>(&'a self, vocab: &'a EntityVocabulary) -> impl Iterator<Item = (&'a str, u32)> {
        self.counts
            .iter()
            .enumerate()
            .map(move |(id, &n)| (vocab.name(id), n))
    }
}

pub fn count_texts<'a, I>(texts: I, vocab: &EntityVocabulary) -> FrequencyTable
where
    I: IntoIterator<Item = &'a str>,
{
    let mut counts = vec![0u32; vocab.len()];
    let mut horizon = 0;
    for text in texts {
        horizon += 1;
        for id in vocab.mentions(text) {
            counts[id] += 1;
        }
    }
    FrequencyTable { counts, horizon }
}

pub fn count_entities(captions: &[Caption], vocab: &EntityVocabulary) -> FrequencyTable {
    count_texts(captions.iter().map(|c| c.text.as_str()), vocab)
}

/// How the cliff criterion selects the main entity set.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScreenRule {
    /// Keep the head of the sorted counts up to the first halving drop,
    /// restricted to counts above tau.
    #[default]
    PrefixCut,
    /// Keep each entity right after a halving drop whose count exceeds tau.
    Literal,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScreenResult {
    /// Main entity set `S`.
    pub main: BTreeSet<usize>,
    /// Redundant entity set `D`: mentioned entities outside `S`.
    pub redundant: BTreeSet<usize>,
    /// Nonzero `(entity id, count)` pairs, descending, vocabulary order on ties.
    pub sorted_counts: Vec<(usize, u32)>,
}

pub fn sorted_nonzero(freq: &FrequencyTable) -> Vec<(usize, u32)> {
    let mut sorted: Vec<(usize, u32)> = freq
        .counts
        .iter()
        .enumerate()
        .filter(|(_, &n)| n > 0)
        .map(|(id, &n)| (id, n))
        .collect();
    // stable sort keeps vocabulary order among equal counts
    sorted.sort_by_key(|e| std::cmp::Reverse(e.1));
    sorted
}

pub fn screen_main_entities(freq: &FrequencyTable, tau: u32, rule: ScreenRule) -> ScreenResult {
    let sorted = sorted_nonzero(freq);
    let is_cliff = |j: usize| sorted[j - 1].1 > 2 * sorted[j].1;

    let main: BTreeSet<usize> = match rule {
        ScreenRule::PrefixCut => {
            let cut = (1..sorted.len()).find(|&j| is_cliff(j)).unwrap_or(sorted.len());
            sorted[..cut]
                .iter()
                .filter(|(_, n)| *n > tau)
                .map(|(id, _)| *id)
                .collect()
        }
        ScreenRule::Literal => (1..sorted.len())
            .filter(|&j| sorted[j].1 > tau && is_cliff(j))
            .map(|j| sorted[j].0)
            .collect(),
    };
    let redundant = sorted
        .iter()
        .map(|(id, _)| *id)
        .filter(|id| !main.contains(id))
        .collect();
    ScreenResult {
        main,
        redundant,
        sorted_counts: sorted,
    }
}

/// True when the caption mentions only redundant entities.
pub fn is_redundant(caption: &Caption, screen: &ScreenResult) -> bool {
    !caption.entities.is_empty() && caption.entities.iter().all(|e| screen.redundant.contains(e))
}

/// Drops redundant captions; survivors keep their relative order.
pub fn filter_captions(captions: &[Caption], screen: &ScreenResult) -> Vec<Caption> {
    captions
        .iter()
        .filter(|c| !is_redundant(c, screen))
        .cloned()
        .collect()
}

/// The most recent captions over which entity frequencies are counted.
#[derive(Clone, Debug)]
pub struct RollingHorizon {
    captions: VecDeque<Caption>,
    capacity: usize,
}

impl RollingHorizon {
    pub fn new(capacity: usize) -> Self {
        RollingHorizon {
            captions: VecDeque::with_capacity(capacity),
            capacity: capacity.max(1),
        }
    }

    pub fn extend(&mut self, captions: impl IntoIterator<Item = Caption>) {
        for c in captions {
            if self.captions.len() == self.capacity {
                self.captions.pop_front();
            }
            self.captions.push_back(c);
        }
    }

    pub fn len(&self) -> usize {
        self.captions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.captions.is_empty()
    }

    pub fn count(&self, vocab: &EntityVocabulary) -> FrequencyTable {
        count_texts(self.captions.iter().map(|c| c.text.as_str()), vocab)
    }
}
