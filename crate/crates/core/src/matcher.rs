//! Levenshtein similarity, threshold-gated matching and response selection.

use alloc::vec::Vec;
use core::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::knowledge::Statement;
use crate::text;

/// Minimum similarity for a match when nothing else is configured.
pub const DEFAULT_THRESHOLD: f64 = 0.90;

/// A similarity value in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct SimilarityScore(f64);

#[derive(Debug, Clone, Copy, PartialEq, Error)]
#[error("similarity {0} is outside [0, 1]")]
pub struct ScoreOutOfRange(pub f64);

impl SimilarityScore {
    pub const ZERO: Self = Self(0.0);
    pub const ONE: Self = Self(1.0);

    pub fn new(value: f64) -> Result<Self, ScoreOutOfRange> {
        if (0.0..=1.0).contains(&value) {
            Ok(Self(value))
        } else {
            Err(ScoreOutOfRange(value))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for SimilarityScore {
    type Error = ScoreOutOfRange;
    fn try_from(v: f64) -> Result<Self, Self::Error> {
        Self::new(v)
    }
}

impl From<SimilarityScore> for f64 {
    fn from(s: SimilarityScore) -> f64 {
        s.0
    }
}

impl fmt::Display for SimilarityScore {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.4}", self.0)
    }
}

/// Minimum number of single-character insertions, deletions and
/// substitutions turning `a` into `b`. Works on chars, not bytes.
pub fn levenshtein_distance(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut curr = alloc::vec![0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        curr[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let cost = usize::from(ca != cb);
            curr[j + 1] = (prev[j + 1] + 1).min(curr[j] + 1).min(prev[j] + cost);
        }
        core::mem::swap(&mut prev, &mut curr);
    }
    prev[b.len()]
}

/// `1 - distance / max_len`, with two empty strings counting as identical.
pub fn similarity(a: &str, b: &str) -> SimilarityScore {
    let max_len = a.chars().count().max(b.chars().count());
    if max_len == 0 {
        return SimilarityScore::ONE;
    }
    let d = levenshtein_distance(a, b);
    SimilarityScore(1.0 - d as f64 / max_len as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchResult<'a> {
    pub statement: &'a Statement,
    pub score: SimilarityScore,
}

/// Best-scoring candidate if it reaches `threshold`.
///
/// Query and candidates are compared in their normalized form (lowercase,
/// punctuation removed, single spaces). Equal scores go to the lower id.
pub fn find_best_match<'a, I>(
    query: &str,
    candidates: I,
    threshold: SimilarityScore,
) -> Option<MatchResult<'a>>
where
    I: IntoIterator<Item = &'a Statement>,
{
    let query = text::normalize(query).join(" ");
    let mut best: Option<MatchResult<'a>> = None;
    for statement in candidates {
        let score = similarity(&query, &statement.processed.normalized_text());
        let better = match &best {
            None => true,
            Some(b) => score > b.score || (score == b.score && statement.id < b.statement.id),
        };
        if better {
            best = Some(MatchResult { statement, score });
        }
    }
    best.filter(|m| m.score >= threshold)
}

/// How to pick among several known responses to a matched statement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ResponsePolicy {
    #[default]
    First,
    Random,
    MostFrequent,
}

impl core::str::FromStr for ResponsePolicy {
    type Err = SelectError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "first" => Ok(Self::First),
            "random" => Ok(Self::Random),
            "most-frequent" => Ok(Self::MostFrequent),
            _ => Err(SelectError::UnknownPolicy),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SelectError {
    #[error("matched statement has no recorded responses")]
    NoResponses,
    #[error("unknown response policy (expected first, random or most-frequent)")]
    UnknownPolicy,
}

/// Pick a response.
///
/// `first` takes the first entry of `responses`, `random` draws uniformly
/// from `rng`, `most-frequent` takes the highest occurrence count with ties
/// to the lowest id.
pub fn select_response<'a, R: Rng + ?Sized>(
    responses: &[&'a Statement],
    policy: ResponsePolicy,
    rng: &mut R,
) -> Result<&'a Statement, SelectError> {
    if responses.is_empty() {
        return Err(SelectError::NoResponses);
    }
    let chosen = match policy {
        ResponsePolicy::First => responses[0],
        ResponsePolicy::Random => responses[rng.random_range(0..responses.len())],
        ResponsePolicy::MostFrequent => responses
            .iter()
            .copied()
            .max_by(|a, b| {
                a.occurrence_count
                    .cmp(&b.occurrence_count)
                    .then(b.id.cmp(&a.id))
            })
            .expect("non-empty"),
    };
    Ok(chosen)
}
