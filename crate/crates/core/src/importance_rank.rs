//! Correlation rank of keywords over the knowledge base.
//!
//! `R(b) = Σ_{a -> b} (T(a, b) + R(a))` with `T(a, b) = 1 / n_total` for every
//! rule and `R(x) = 0` when `x` has no backward words. On an acyclic rule
//! graph this equals the number of directed paths ending at `b`, divided by
//! `n_total`; [`oracle_path_count`] enumerates those paths independently.
//!
//! Scores are exact rationals. Cyclic ancestor sets are rejected.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::Serialize;
use thiserror::Error;

use crate::frequency::TieGroup;
use crate::knowledge_base::{CycleReport, KbError, KnowledgeBase};

/// Fractional digits in decimal renderings of scores.
pub const DECIMAL_DIGITS: usize = 6;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RankError {
    #[error("unknown keyword(s): {}", keywords.join(", "))]
    UnknownKeyword { keywords: Vec<String> },
    #[error("cyclic knowledge base: {0}")]
    CyclicKnowledgeBase(CycleReport),
}

impl From<KbError> for RankError {
    fn from(e: KbError) -> Self {
        match e {
            KbError::Cycle(c) => RankError::CyclicKnowledgeBase(c),
            KbError::UnknownKeyword { keywords } => RankError::UnknownKeyword { keywords },
            other => unreachable!("graph queries only fail on cycles or unknown words: {other}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankScore {
    pub keyword: String,
    pub score: BigRational,
    /// Equals `score × n_total`.
    pub contributing_paths: BigUint,
    pub n_total: usize,
}

impl RankScore {
    fn new(keyword: &str, score: BigRational, n_total: usize) -> Self {
        let scaled = &score * BigRational::from_integer(BigInt::from(n_total));
        debug_assert!(
            scaled.is_integer(),
            "rank of {keyword} is not a multiple of 1/{n_total}"
        );
        let contributing_paths = scaled
            .to_integer()
            .to_biguint()
            .expect("ranks are non-negative");
        RankScore {
            keyword: keyword.to_string(),
            score,
            contributing_paths,
            n_total,
        }
    }

    /// Score of a keyword outside the knowledge base.
    pub fn zero(keyword: &str, n_total: usize) -> Self {
        RankScore::new(keyword, BigRational::zero(), n_total)
    }

    pub fn decimal(&self) -> String {
        render_decimal(&self.score, DECIMAL_DIGITS)
    }

    /// `paths/n_total`, unreduced.
    pub fn rational(&self) -> String {
        format!("{}/{}", self.contributing_paths, self.n_total)
    }

    pub fn as_f64(&self) -> f64 {
        self.score.to_f64().unwrap_or(f64::NAN)
    }
}

/// Renders a non-negative rational with at most `digits` fractional digits,
/// rounding half up and dropping trailing zeros.
pub fn render_decimal(value: &BigRational, digits: usize) -> String {
    let sign = if value.is_negative() { "-" } else { "" };
    let value = value.abs();
    let scale = BigInt::from(10u32).pow(digits as u32);
    let scaled = value * BigRational::from_integer(scale.clone());
    let half = BigRational::new(BigInt::from(1), BigInt::from(2));
    let rounded = (scaled + half).floor().to_integer();
    let int_part = &rounded / &scale;
    let frac_part = &rounded % &scale;
    let mut out = format!("{sign}{int_part}");
    if !frac_part.is_zero() {
        let frac = format!("{:0>width$}", frac_part.to_string(), width = digits);
        let _ = write!(out, ".{}", frac.trim_end_matches('0'));
    }
    out
}

fn compare_scores(a: &RankScore, b: &RankScore) -> Ordering {
    b.score
        .cmp(&a.score)
        .then_with(|| a.keyword.cmp(&b.keyword))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImportanceReport {
    pub scores: BTreeMap<String, RankScore>,
    pub kb_fingerprint: String,
}

impl ImportanceReport {
    pub fn get(&self, keyword: &str) -> Option<&RankScore> {
        self.scores.get(keyword)
    }

    pub fn score_of(&self, keyword: &str) -> BigRational {
        self.get(keyword)
            .map_or_else(BigRational::zero, |s| s.score.clone())
    }

    /// Scores ordered by score descending, then keyword ascending.
    pub fn ranked(&self) -> Vec<&RankScore> {
        let mut v: Vec<&RankScore> = self.scores.values().collect();
        v.sort_by(|a, b| compare_scores(a, b));
        v
    }

    /// `keyword\tscore_decimal\tscore_rational\tpath_count` per line.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for s in self.ranked() {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}",
                s.keyword,
                s.decimal(),
                s.rational(),
                s.contributing_paths
            );
        }
        out
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RankLine {
    pub keyword: String,
    pub score: String,
    pub rational: String,
    pub paths: String,
}

impl From<&RankScore> for RankLine {
    fn from(s: &RankScore) -> Self {
        RankLine {
            keyword: s.keyword.clone(),
            score: s.decimal(),
            rational: s.rational(),
            paths: s.contributing_paths.to_string(),
        }
    }
}

/// `1 / n_total` when the rule `a -> b` exists, else 0.
pub fn transition_weight(kb: &KnowledgeBase, a: &str, b: &str) -> Result<BigRational, RankError> {
    let unknown: Vec<String> = [a, b]
        .into_iter()
        .filter(|w| !kb.contains(w))
        .map(String::from)
        .collect();
    if !unknown.is_empty() {
        return Err(RankError::UnknownKeyword { keywords: unknown });
    }
    Ok(if kb.has_rule(a, b) {
        unit_weight(kb)
    } else {
        BigRational::zero()
    })
}

fn unit_weight(kb: &KnowledgeBase) -> BigRational {
    BigRational::new(BigInt::from(1), BigInt::from(kb.n_total()))
}

pub fn rank(kb: &KnowledgeBase, keyword: &str) -> Result<RankScore, RankError> {
    kb.validate_acyclic(keyword)?;
    let mut memo = HashMap::new();
    let score = evaluate(kb, keyword, &mut memo);
    Ok(RankScore::new(keyword, score, kb.n_total()))
}

/// Ranks every word, sharing one memo table. Unknown words are all reported
/// together.
pub fn rank_all<'w>(
    kb: &KnowledgeBase,
    words: impl IntoIterator<Item = &'w str>,
) -> Result<ImportanceReport, RankError> {
    let words: BTreeSet<&str> = words.into_iter().collect();
    let unknown: Vec<String> = words
        .iter()
        .filter(|w| !kb.contains(w))
        .map(|w| w.to_string())
        .collect();
    if !unknown.is_empty() {
        return Err(RankError::UnknownKeyword { keywords: unknown });
    }
    let mut memo = HashMap::new();
    let mut scores = BTreeMap::new();
    for w in words {
        kb.validate_acyclic(w)?;
        let w = kb.vocabulary().get(w).map(String::as_str).unwrap_or(w);
        let score = evaluate(kb, w, &mut memo);
        scores.insert(w.to_string(), RankScore::new(w, score, kb.n_total()));
    }
    Ok(ImportanceReport {
        scores,
        kb_fingerprint: kb.fingerprint(),
    })
}

/// Post-order evaluation over the ancestor DAG of `target`. The caller has
/// already checked that this DAG is acyclic.
fn evaluate<'a>(
    kb: &'a KnowledgeBase,
    target: &'a str,
    memo: &mut HashMap<&'a str, BigRational>,
) -> BigRational {
    let weight = unit_weight(kb);
    let mut stack: Vec<(&str, bool)> = vec![(target, false)];
    while let Some((node, expanded)) = stack.pop() {
        if memo.contains_key(node) {
            continue;
        }
        let preds = kb.predecessors(node);
        if expanded {
            let total = preds
                .iter()
                .map(|a| &weight + &memo[a.as_str()])
                .fold(BigRational::zero(), |acc, x| acc + x);
            memo.insert(node, total);
        } else {
            stack.push((node, true));
            stack.extend(
                preds
                    .iter()
                    .filter(|a| !memo.contains_key(a.as_str()))
                    .map(|a| (a.as_str(), false)),
            );
        }
    }
    memo[target].clone()
}

/// Counts every directed path of length at least one that ends at `keyword`,
/// by exhaustive enumeration without memoization.
pub fn oracle_path_count(kb: &KnowledgeBase, keyword: &str) -> Result<u64, RankError> {
    kb.validate_acyclic(keyword)?;
    let mut count = 0u64;
    let mut frontier: Vec<&str> = vec![keyword];
    while let Some(node) = frontier.pop() {
        for a in kb.predecessors(node) {
            count += 1;
            frontier.push(a);
        }
    }
    Ok(count)
}

/// Orders `keywords` by score descending, then keyword ascending. Keywords
/// missing from the report score 0.
pub fn order_by_rank<'k>(
    report: &ImportanceReport,
    keywords: impl IntoIterator<Item = &'k str>,
) -> Vec<String> {
    let mut scored: Vec<(BigRational, &str)> = keywords
        .into_iter()
        .map(|k| (report.score_of(k), k))
        .collect();
    scored.sort_by(|(sa, ka), (sb, kb)| sb.cmp(sa).then_with(|| ka.cmp(kb)));
    scored.dedup_by(|a, b| a.1 == b.1);
    scored.into_iter().map(|(_, k)| k.to_string()).collect()
}

/// Orders a same-frequency group by correlation rank. Words outside the
/// knowledge base rank 0.
pub fn resolve_tie(kb: &KnowledgeBase, group: &TieGroup) -> Result<Vec<String>, RankError> {
    let known = group
        .keywords
        .iter()
        .map(String::as_str)
        .filter(|k| kb.contains(k));
    let report = rank_all(kb, known)?;
    Ok(order_by_rank(
        &report,
        group.keywords.iter().map(String::as_str),
    ))
}
