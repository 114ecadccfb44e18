//! Keyword counting, threshold-based candidate selection and same-frequency
//! group detection.
//!
//! The threshold is a fraction of the number of *distinct* keywords: with
//! ten keywords and a threshold of 0.4, the four most frequent keywords are
//! selected, plus any keyword tied with the last one selected.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use thiserror::Error;

use crate::fraction::Fraction;
use crate::text_ingest::{Token, TokenSource};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FrequencyError {
    #[error("cannot select candidates from an empty frequency table")]
    EmptyTable,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct FrequencyTable {
    counts: BTreeMap<String, u64>,
}

impl FrequencyTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, keyword: impl Into<String>) {
        *self.counts.entry(keyword.into()).or_insert(0) += 1;
    }

    /// Adds `n` occurrences; `n == 0` is a no-op so zero counts never appear.
    pub fn add_n(&mut self, keyword: impl Into<String>, n: u64) {
        if n > 0 {
            *self.counts.entry(keyword.into()).or_insert(0) += n;
        }
    }

    pub fn count(&self, keyword: &str) -> u64 {
        self.counts.get(keyword).copied().unwrap_or(0)
    }

    /// Number of distinct keywords.
    pub fn total_keywords(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u64)> {
        self.counts.iter().map(|(k, &v)| (k.as_str(), v))
    }
}

impl<S: Into<String>> FromIterator<(S, u64)> for FrequencyTable {
    fn from_iter<I: IntoIterator<Item = (S, u64)>>(iter: I) -> Self {
        let mut t = FrequencyTable::new();
        for (k, n) in iter {
            t.add_n(k, n);
        }
        t
    }
}

/// Counts tokens whose source is enabled.
pub fn count_frequencies(tokens: &[Token], enabled: &BTreeSet<TokenSource>) -> FrequencyTable {
    let mut table = FrequencyTable::new();
    for t in tokens.iter().filter(|t| enabled.contains(&t.source)) {
        table.add(t.text.as_str());
    }
    table
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CandidateSet {
    /// Sorted by count descending, then keyword ascending.
    pub members: Vec<(String, u64)>,
    #[serde(serialize_with = "serialize_fraction")]
    pub threshold: Fraction,
}

fn serialize_fraction<S: serde::Serializer>(f: &Fraction, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&f.to_string())
}

impl CandidateSet {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn count(&self, keyword: &str) -> Option<u64> {
        self.members
            .iter()
            .find(|(k, _)| k == keyword)
            .map(|&(_, c)| c)
    }

    pub fn keywords(&self) -> impl Iterator<Item = &str> {
        self.members.iter().map(|(k, _)| k.as_str())
    }
}

fn by_count_then_keyword(a: &(String, u64), b: &(String, u64)) -> std::cmp::Ordering {
    b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0))
}

/// Selects the top `max(1, round(threshold × V))` keywords by count, where V
/// is the number of distinct keywords, extended with every keyword tied at
/// the cut.
pub fn select_candidates(
    table: &FrequencyTable,
    threshold: Fraction,
) -> Result<CandidateSet, FrequencyError> {
    if table.is_empty() {
        return Err(FrequencyError::EmptyTable);
    }
    let mut ranked: Vec<(String, u64)> = table.iter().map(|(k, c)| (k.to_string(), c)).collect();
    ranked.sort_by(by_count_then_keyword);

    let v = ranked.len() as u64;
    let k = threshold.round_half_up_of(v).clamp(1, v) as usize;
    let cut = ranked[k - 1].1;
    ranked.retain(|&(_, c)| c >= cut);
    Ok(CandidateSet {
        members: ranked,
        threshold,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TieGroup {
    pub count: u64,
    pub keywords: BTreeSet<String>,
}

/// One group per count shared by two or more candidates, highest count first.
pub fn detect_ties(candidates: &CandidateSet) -> Vec<TieGroup> {
    let mut by_count: BTreeMap<u64, BTreeSet<String>> = BTreeMap::new();
    for (k, c) in &candidates.members {
        by_count.entry(*c).or_default().insert(k.clone());
    }
    by_count
        .into_iter()
        .rev()
        .filter(|(_, ks)| ks.len() >= 2)
        .map(|(count, keywords)| TieGroup { count, keywords })
        .collect()
}
