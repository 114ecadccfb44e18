//! The word-correlation knowledge base: directed rules `x -> y` meaning "x is
//! a backward word of y", together with the vocabulary whose size sets the
//! uniform transition weight.
//!
//! File format (UTF-8; fields separated by single tabs, shown here as `|`):
//!
//! ```text
//! # comments anywhere
//! ID|TermsX|TermsY
//! 3|water|mountain
//! 4|himalaya|mountain
//! [vocabulary]
//! water
//! ...
//! ```
//!
//! The `[vocabulary]` section is optional; without it the vocabulary is the
//! set of rule endpoints.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::{self, Write as _};

use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::fraction::Fraction;
use crate::text_ingest::is_normalized;

pub const HEADER: &str = "ID\tTermsX\tTermsY";
pub const VOCABULARY_MARKER: &str = "[vocabulary]";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum KbError {
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("declared vocabulary is missing rule endpoints: {}", missing.join(", "))]
    Vocabulary { missing: Vec<String> },
    #[error("rule {keyword} -> {keyword} is a self-loop")]
    SelfLoop { keyword: String },
    #[error("unknown keyword(s): {}", keywords.join(", "))]
    UnknownKeyword { keywords: Vec<String> },
    #[error("cyclic knowledge base: {0}")]
    Cycle(CycleReport),
    #[error("no transactions to mine")]
    EmptyInput,
}

impl KbError {
    fn format(line: usize, message: impl Into<String>) -> Self {
        KbError::Format {
            line,
            message: message.into(),
        }
    }
}

/// A directed cycle found while walking backward words.
///
/// `cycle[i + 1]` is a backward word of `cycle[i]`, and the first and last
/// entries are the same keyword.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CycleReport {
    pub cycle: Vec<String>,
}

impl fmt::Display for CycleReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.cycle.join(" <- "))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct Rule {
    pub id: u64,
    pub antecedent: String,
    pub consequent: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LoadWarning {
    DuplicateRule {
        line: usize,
        antecedent: String,
        consequent: String,
    },
}

impl fmt::Display for LoadWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LoadWarning::DuplicateRule {
                line,
                antecedent,
                consequent,
            } => write!(
                f,
                "line {line}: duplicate rule {antecedent} -> {consequent} ignored"
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KnowledgeBase {
    rules: Vec<Rule>,
    vocabulary: BTreeSet<String>,
    backward: BTreeMap<String, Vec<String>>,
}

impl KnowledgeBase {
    /// Builds a knowledge base from rules in file order. Later duplicates of an
    /// `(antecedent, consequent)` pair are dropped with a warning.
    pub fn from_rules(
        rules: impl IntoIterator<Item = Rule>,
        declared_vocabulary: Option<BTreeSet<String>>,
    ) -> Result<(Self, Vec<LoadWarning>), KbError> {
        Self::build(rules.into_iter().map(|r| (0, r)), declared_vocabulary)
    }

    /// Convenience constructor numbering rules from 1.
    pub fn from_pairs<A, B>(
        pairs: impl IntoIterator<Item = (A, B)>,
        declared_vocabulary: Option<&[&str]>,
    ) -> Result<Self, KbError>
    where
        A: Into<String>,
        B: Into<String>,
    {
        let rules = pairs.into_iter().zip(1..).map(|((a, b), id)| Rule {
            id,
            antecedent: a.into(),
            consequent: b.into(),
        });
        let vocab = declared_vocabulary.map(|v| v.iter().map(|s| s.to_string()).collect());
        Self::from_rules(rules, vocab).map(|(kb, _)| kb)
    }

    fn build(
        rules: impl Iterator<Item = (usize, Rule)>,
        declared_vocabulary: Option<BTreeSet<String>>,
    ) -> Result<(Self, Vec<LoadWarning>), KbError> {
        let mut warnings = Vec::new();
        let mut seen = BTreeSet::new();
        let mut kept = Vec::new();
        for (line, mut rule) in rules {
            rule.antecedent = normalize_term(&rule.antecedent, line)?;
            rule.consequent = normalize_term(&rule.consequent, line)?;
            if rule.antecedent == rule.consequent {
                return Err(KbError::SelfLoop {
                    keyword: rule.antecedent,
                });
            }
            if !seen.insert((rule.antecedent.clone(), rule.consequent.clone())) {
                let w = LoadWarning::DuplicateRule {
                    line,
                    antecedent: rule.antecedent,
                    consequent: rule.consequent,
                };
                log::warn!("{w}");
                warnings.push(w);
                continue;
            }
            kept.push(rule);
        }

        let endpoints: BTreeSet<String> = kept
            .iter()
            .flat_map(|r| [r.antecedent.clone(), r.consequent.clone()])
            .collect();
        let vocabulary = match declared_vocabulary {
            Some(declared) => {
                let declared = declared
                    .iter()
                    .map(|w| normalize_term(w, 0))
                    .collect::<Result<BTreeSet<_>, _>>()?;
                let missing: Vec<String> = endpoints.difference(&declared).cloned().collect();
                if !missing.is_empty() {
                    return Err(KbError::Vocabulary { missing });
                }
                declared
            }
            None => endpoints,
        };
        if vocabulary.is_empty() {
            return Err(KbError::format(0, "knowledge base has an empty vocabulary"));
        }

        let mut backward: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for r in &kept {
            backward
                .entry(r.consequent.clone())
                .or_default()
                .push(r.antecedent.clone());
        }
        for preds in backward.values_mut() {
            preds.sort();
        }
        Ok((
            KnowledgeBase {
                rules: kept,
                vocabulary,
                backward,
            },
            warnings,
        ))
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn vocabulary(&self) -> &BTreeSet<String> {
        &self.vocabulary
    }

    /// Size of the vocabulary; each rule carries weight `1 / n_total`.
    pub fn n_total(&self) -> usize {
        self.vocabulary.len()
    }

    pub fn contains(&self, keyword: &str) -> bool {
        self.vocabulary.contains(keyword)
    }

    pub fn has_rule(&self, antecedent: &str, consequent: &str) -> bool {
        self.predecessors(consequent)
            .binary_search_by(|p| p.as_str().cmp(antecedent))
            .is_ok()
    }

    /// Backward words without the vocabulary check; empty for unknown words.
    pub(crate) fn predecessors(&self, keyword: &str) -> &[String] {
        self.backward.get(keyword).map_or(&[], Vec::as_slice)
    }

    /// All `a` with a rule `a -> keyword`.
    pub fn backward_words(&self, keyword: &str) -> Result<BTreeSet<&str>, KbError> {
        self.require(keyword)?;
        Ok(self
            .predecessors(keyword)
            .iter()
            .map(String::as_str)
            .collect())
    }

    pub(crate) fn require(&self, keyword: &str) -> Result<(), KbError> {
        if self.contains(keyword) {
            Ok(())
        } else {
            Err(KbError::UnknownKeyword {
                keywords: vec![keyword.to_string()],
            })
        }
    }

    /// Depth-first search over the backward words reachable from `target`.
    /// Fails with the first directed cycle found.
    pub fn validate_acyclic(&self, target: &str) -> Result<(), KbError> {
        self.require(target)?;
        let mut done: HashMap<&str, bool> = HashMap::new();
        self.find_cycle_from(target, &mut done)
            .map_or(Ok(()), |c| Err(KbError::Cycle(c)))
    }

    /// Checks every vocabulary word, sharing work across starts.
    pub fn validate_all(&self) -> Result<(), KbError> {
        let mut done: HashMap<&str, bool> = HashMap::new();
        for w in &self.vocabulary {
            if let Some(c) = self.find_cycle_from(w, &mut done) {
                return Err(KbError::Cycle(c));
            }
        }
        Ok(())
    }

    /// `state[w] == false` while `w` is on the DFS stack, `true` once finished.
    fn find_cycle_from<'a>(
        &'a self,
        start: &'a str,
        state: &mut HashMap<&'a str, bool>,
    ) -> Option<CycleReport> {
        if state.contains_key(start) {
            return None;
        }
        state.insert(start, false);
        let mut stack: Vec<(&str, usize)> = vec![(start, 0)];
        while let Some((node, next)) = stack.last_mut() {
            let preds = self.predecessors(node);
            if *next == preds.len() {
                state.insert(node, true);
                stack.pop();
                continue;
            }
            let p = preds[*next].as_str();
            *next += 1;
            match state.get(p) {
                Some(true) => {}
                Some(false) => {
                    let pos = stack.iter().position(|(n, _)| *n == p).unwrap_or(0);
                    let mut cycle: Vec<String> =
                        stack[pos..].iter().map(|(n, _)| n.to_string()).collect();
                    cycle.push(p.to_string());
                    return Some(CycleReport { cycle });
                }
                None => {
                    state.insert(p, false);
                    stack.push((p, 0));
                }
            }
        }
        None
    }

    /// SHA-256 of the canonical file rendering.
    pub fn fingerprint(&self) -> String {
        hex::encode(Sha256::digest(save_kb(self).as_bytes()))
    }

    fn needs_vocabulary_section(&self) -> bool {
        let endpoints: BTreeSet<&str> = self
            .rules
            .iter()
            .flat_map(|r| [r.antecedent.as_str(), r.consequent.as_str()])
            .collect();
        endpoints.len() != self.vocabulary.len()
    }
}

fn normalize_term(raw: &str, line: usize) -> Result<String, KbError> {
    let term = raw.trim().to_lowercase();
    if term.is_empty() {
        return Err(KbError::format(line, "missing column"));
    }
    if !is_normalized(&term) {
        return Err(KbError::format(
            line,
            format!("keyword {raw:?} contains non-alphanumeric characters"),
        ));
    }
    Ok(term)
}

/// Loaded knowledge base plus any non-fatal findings.
#[derive(Debug, Clone)]
pub struct LoadedKb {
    pub kb: KnowledgeBase,
    pub warnings: Vec<LoadWarning>,
}

pub fn parse_kb(bytes: &[u8]) -> Result<LoadedKb, KbError> {
    let text =
        std::str::from_utf8(bytes).map_err(|e| KbError::format(0, format!("not UTF-8: {e}")))?;
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);

    let mut header_seen = false;
    let mut in_vocabulary = false;
    let mut rules = Vec::new();
    let mut vocabulary: Option<BTreeSet<String>> = None;

    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let content = raw.split_once('#').map_or(raw, |(before, _)| before);
        if content.trim().is_empty() {
            continue;
        }
        if !header_seen {
            let cols: Vec<&str> = content.split('\t').map(str::trim).collect();
            if cols != ["ID", "TermsX", "TermsY"] {
                return Err(KbError::format(
                    line_no,
                    format!("expected header {HEADER:?}, found {:?}", content.trim()),
                ));
            }
            header_seen = true;
            continue;
        }
        if content.trim() == VOCABULARY_MARKER {
            if in_vocabulary {
                return Err(KbError::format(line_no, "repeated [vocabulary] section"));
            }
            in_vocabulary = true;
            vocabulary = Some(BTreeSet::new());
            continue;
        }
        if in_vocabulary {
            let word = content.trim();
            if word.contains(char::is_whitespace) {
                return Err(KbError::format(line_no, "one keyword per vocabulary line"));
            }
            let word = normalize_term(word, line_no)?;
            vocabulary.get_or_insert_with(BTreeSet::new).insert(word);
            continue;
        }
        let cols: Vec<&str> = content.trim_end().split('\t').collect();
        if cols.len() != 3 {
            return Err(KbError::format(
                line_no,
                format!("expected 3 tab-separated columns, found {}", cols.len()),
            ));
        }
        let id: u64 = cols[0].trim().parse().map_err(|_| {
            KbError::format(line_no, format!("non-integer ID {:?}", cols[0].trim()))
        })?;
        rules.push((
            line_no,
            Rule {
                id,
                antecedent: cols[1].to_string(),
                consequent: cols[2].to_string(),
            },
        ));
    }
    if !header_seen {
        return Err(KbError::format(0, format!("missing header {HEADER:?}")));
    }
    let (kb, warnings) = KnowledgeBase::build(rules.into_iter(), vocabulary)?;
    Ok(LoadedKb { kb, warnings })
}

pub fn load_kb(bytes: &[u8]) -> Result<KnowledgeBase, KbError> {
    parse_kb(bytes).map(|l| l.kb)
}

pub fn save_kb(kb: &KnowledgeBase) -> String {
    render(kb, |_| None)
}

fn render(kb: &KnowledgeBase, comment: impl Fn(&Rule) -> Option<String>) -> String {
    let mut out = String::new();
    out.push_str(HEADER);
    out.push('\n');
    for r in &kb.rules {
        let _ = write!(out, "{}\t{}\t{}", r.id, r.antecedent, r.consequent);
        if let Some(c) = comment(r) {
            let _ = write!(out, "\t# {c}");
        }
        out.push('\n');
    }
    if kb.needs_vocabulary_section() {
        out.push_str(VOCABULARY_MARKER);
        out.push('\n');
        for w in &kb.vocabulary {
            out.push_str(w);
            out.push('\n');
        }
    }
    out
}

/// Support and confidence of one mined rule.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RuleStats {
    pub antecedent: String,
    pub consequent: String,
    /// Transactions containing both words.
    pub pair_count: u64,
    /// Transactions containing the antecedent.
    pub antecedent_count: u64,
    pub transactions: u64,
}

impl RuleStats {
    pub fn support(&self) -> (u64, u64) {
        (self.pair_count, self.transactions)
    }

    pub fn confidence(&self) -> (u64, u64) {
        (self.pair_count, self.antecedent_count)
    }
}

#[derive(Debug, Clone)]
pub struct MinedRules {
    pub kb: KnowledgeBase,
    pub stats: Vec<RuleStats>,
}

impl MinedRules {
    /// KB file text with support and confidence as trailing comments.
    pub fn to_kb_text(&self) -> String {
        let by_pair: HashMap<(&str, &str), &RuleStats> = self
            .stats
            .iter()
            .map(|s| ((s.antecedent.as_str(), s.consequent.as_str()), s))
            .collect();
        render(&self.kb, |r| {
            by_pair
                .get(&(r.antecedent.as_str(), r.consequent.as_str()))
                .map(|s| {
                    let (sn, sd) = s.support();
                    let (cn, cd) = s.confidence();
                    format!("support={sn}/{sd} confidence={cn}/{cd}")
                })
        })
    }
}

/// Mines pairwise rules `x -> y` with
/// `support = |{t : x, y ∈ t}| / |T| >= min_support` and
/// `confidence = support({x, y}) / support({x}) >= min_confidence`.
///
/// The vocabulary is every keyword seen in any transaction.
pub fn mine_rules(
    transactions: &[BTreeSet<String>],
    min_support: Fraction,
    min_confidence: Fraction,
) -> Result<MinedRules, KbError> {
    if transactions.is_empty() {
        return Err(KbError::EmptyInput);
    }
    let n = transactions.len() as u64;
    let mut item_count: BTreeMap<String, u64> = BTreeMap::new();
    let mut pair_count: BTreeMap<(String, String), u64> = BTreeMap::new();
    for t in transactions {
        let items = t
            .iter()
            .map(|w| normalize_term(w, 0))
            .collect::<Result<BTreeSet<_>, _>>()?;
        for x in &items {
            *item_count.entry(x.clone()).or_insert(0) += 1;
        }
        let items: Vec<&String> = items.iter().collect();
        for (i, x) in items.iter().enumerate() {
            for y in &items[i + 1..] {
                *pair_count.entry(((*x).clone(), (*y).clone())).or_insert(0) += 1;
            }
        }
    }
    if item_count.is_empty() {
        return Err(KbError::EmptyInput);
    }

    let mut stats = Vec::new();
    for ((x, y), &both) in &pair_count {
        if !min_support.is_met_by(both, n) {
            continue;
        }
        for (a, b) in [(x, y), (y, x)] {
            let a_count = item_count[a];
            if min_confidence.is_met_by(both, a_count) {
                stats.push(RuleStats {
                    antecedent: a.clone(),
                    consequent: b.clone(),
                    pair_count: both,
                    antecedent_count: a_count,
                    transactions: n,
                });
            }
        }
    }
    stats.sort_by(|p, q| (&p.antecedent, &p.consequent).cmp(&(&q.antecedent, &q.consequent)));

    let rules = stats.iter().zip(1..).map(|(s, id)| Rule {
        id,
        antecedent: s.antecedent.clone(),
        consequent: s.consequent.clone(),
    });
    let (kb, _) = KnowledgeBase::from_rules(rules, Some(item_count.into_keys().collect()))?;
    Ok(MinedRules { kb, stats })
}

/// Parses a transactions file: one transaction per line, keywords separated
/// by whitespace or commas, `#` comments.
pub fn parse_transactions(text: &str) -> Vec<BTreeSet<String>> {
    text.lines()
        .map(|l| l.split_once('#').map_or(l, |(before, _)| before))
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            l.split(|c: char| c.is_whitespace() || c == ',')
                .filter(|w| !w.is_empty())
                .map(str::to_lowercase)
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    pub(crate) const NATURE_KB: &str = "ID\tTermsX\tTermsY\n\
        3\twater\tmountain\n\
        4\thimalaya\tmountain\n\
        5\tnature\tmountain\n\
        6\ttree\tnature\n\
        7\tleaves\ttree\n\
        8\tgreenary\tleaves\n\
        9\tbird\tnature\n\
        10\tgreenary\tgrass\n\
        11\tnature\tsky\n\
        12\tsun\tsky\n";

    fn letters_kb() -> KnowledgeBase {
        KnowledgeBase::from_pairs(
            [
                ("a", "b"),
                ("c", "b"),
                ("d", "b"),
                ("e", "d"),
                ("f", "e"),
                ("g", "f"),
                ("h", "d"),
                ("g", "j"),
            ],
            Some(&["a", "b", "c", "d", "e", "f", "g", "h", "i", "j"]),
        )
        .unwrap()
    }

    fn set<'a>(words: &[&'a str]) -> BTreeSet<&'a str> {
        words.iter().copied().collect()
    }

    #[test]
    fn loads_nature_kb() {
        let kb = load_kb(NATURE_KB.as_bytes()).unwrap();
        assert_eq!(kb.rules().len(), 10);
        assert_eq!(kb.n_total(), 11);
        assert_eq!(kb.rules()[0].id, 3);
        assert_eq!(kb.backward_words("nature").unwrap(), set(&["tree", "bird"]));
    }

    #[test]
    fn two_endpoints() {
        let kb = load_kb(b"ID\tTermsX\tTermsY\n1\ta\tb\n").unwrap();
        assert_eq!(kb.n_total(), 2);
    }

    #[test]
    fn declared_vocabulary_sets_n_total() {
        let text = "ID\tTermsX\tTermsY\n1\ta\tb\n2\tc\tb\n3\td\tb\n4\te\td\n5\tf\te\n\
                    6\tg\tf\n7\th\td\n8\tg\tj\n[vocabulary]\na\nb\nc\nd\ne\nf\ng\nh\ni\nj\n";
        let kb = load_kb(text.as_bytes()).unwrap();
        assert_eq!(kb.n_total(), 10);
        assert_eq!(kb, letters_kb());
    }

    #[test]
    fn backward_words_letters() {
        let kb = letters_kb();
        assert_eq!(kb.backward_words("b").unwrap(), set(&["a", "c", "d"]));
        assert!(kb.backward_words("a").unwrap().is_empty());
        assert!(matches!(
            kb.backward_words("zz"),
            Err(KbError::UnknownKeyword { .. })
        ));
    }

    #[test]
    fn format_errors() {
        let bad_header = load_kb(b"id,x,y\n1\ta\tb\n").unwrap_err();
        assert!(matches!(bad_header, KbError::Format { line: 1, .. }));
        let bad_id = load_kb(b"ID\tTermsX\tTermsY\nx\ta\tb\n").unwrap_err();
        assert!(matches!(bad_id, KbError::Format { line: 2, .. }));
        let missing = load_kb(b"ID\tTermsX\tTermsY\n1\ta\n").unwrap_err();
        assert!(matches!(missing, KbError::Format { line: 2, .. }));
        let empty_col = load_kb(b"ID\tTermsX\tTermsY\n1\ta\t\n").unwrap_err();
        assert!(matches!(empty_col, KbError::Format { line: 2, .. }));
        let punct = load_kb(b"ID\tTermsX\tTermsY\n1\tsea-side\tb\n").unwrap_err();
        assert!(matches!(punct, KbError::Format { .. }));
        assert!(matches!(load_kb(b""), Err(KbError::Format { .. })));
        assert!(matches!(
            load_kb(b"ID\tTermsX\tTermsY\n"),
            Err(KbError::Format { .. })
        ));
    }

    #[test]
    fn vocabulary_must_cover_endpoints() {
        let err = load_kb(b"ID\tTermsX\tTermsY\n1\ta\tb\n[vocabulary]\na\n").unwrap_err();
        assert_eq!(
            err,
            KbError::Vocabulary {
                missing: vec!["b".into()]
            }
        );
    }

    #[test]
    fn self_loop_rejected() {
        let err = load_kb(b"ID\tTermsX\tTermsY\n1\ta\tA\n").unwrap_err();
        assert_eq!(
            err,
            KbError::SelfLoop {
                keyword: "a".into()
            }
        );
    }

    #[test]
    fn duplicates_warn_and_collapse() {
        let loaded = parse_kb(b"ID\tTermsX\tTermsY\n1\ta\tb\n# again\n2\tA\tb\n3\tb\tc\n").unwrap();
        assert_eq!(loaded.kb.rules().len(), 2);
        assert_eq!(loaded.warnings.len(), 1);
        assert!(matches!(
            loaded.warnings[0],
            LoadWarning::DuplicateRule { line: 4, .. }
        ));
    }

    #[test]
    fn comments_and_blank_lines() {
        let kb = load_kb(b"# kb\n\nID\tTermsX\tTermsY # hdr\n1\ta\tb  # note\n\n").unwrap();
        assert_eq!(kb.rules().len(), 1);
    }

    #[test]
    fn acyclic_letters() {
        assert_eq!(letters_kb().validate_acyclic("b"), Ok(()));
        assert_eq!(letters_kb().validate_all(), Ok(()));
    }

    #[test]
    fn two_cycle_reported() {
        let kb = KnowledgeBase::from_pairs([("x", "y"), ("y", "x")], None).unwrap();
        let err = kb.validate_acyclic("y").unwrap_err();
        assert_eq!(
            err,
            KbError::Cycle(CycleReport {
                cycle: vec!["y".into(), "x".into(), "y".into()]
            })
        );
    }

    #[test]
    fn diamond_is_not_a_cycle() {
        let kb = KnowledgeBase::from_pairs([("x", "y"), ("x", "z"), ("z", "y")], None).unwrap();
        assert_eq!(kb.validate_acyclic("y"), Ok(()));
    }

    #[test]
    fn cycle_outside_ancestors_is_ignored() {
        let kb = KnowledgeBase::from_pairs([("p", "q"), ("q", "p"), ("q", "r"), ("s", "t")], None)
            .unwrap();
        assert_eq!(kb.validate_acyclic("t"), Ok(()));
        assert!(kb.validate_acyclic("r").is_err());
        assert!(kb.validate_all().is_err());
    }

    #[test]
    fn save_load_nature_kb_is_identity() {
        let kb = load_kb(NATURE_KB.as_bytes()).unwrap();
        let text = save_kb(&kb);
        assert!(!text.contains(VOCABULARY_MARKER));
        assert_eq!(load_kb(text.as_bytes()).unwrap(), kb);
        assert_eq!(
            kb.fingerprint(),
            load_kb(text.as_bytes()).unwrap().fingerprint()
        );
        assert_eq!(
            load_kb(save_kb(&letters_kb()).as_bytes()).unwrap(),
            letters_kb()
        );
    }

    fn tx(rows: &[&[&str]]) -> Vec<BTreeSet<String>> {
        rows.iter()
            .map(|r| r.iter().map(|s| s.to_string()).collect())
            .collect()
    }

    fn frac(s: &str) -> Fraction {
        s.parse().unwrap()
    }

    fn rule_pairs(kb: &KnowledgeBase) -> Vec<(&str, &str)> {
        kb.rules()
            .iter()
            .map(|r| (r.antecedent.as_str(), r.consequent.as_str()))
            .collect()
    }

    #[test]
    fn mines_water_mountain() {
        let t = tx(&[
            &["water", "mountain"],
            &["water", "mountain"],
            &["water", "sky"],
        ]);
        let mined = mine_rules(&t, frac("0.5"), frac("0.6")).unwrap();
        assert_eq!(
            rule_pairs(&mined.kb),
            [("mountain", "water"), ("water", "mountain")]
        );
        assert_eq!(mined.kb.rules()[0].id, 1);
        assert_eq!(mined.stats[0].confidence(), (2, 2));
        assert_eq!(mined.stats[1].support(), (2, 3));
        assert_eq!(mined.stats[1].confidence(), (2, 3));
        assert_eq!(mined.kb.n_total(), 3);
        let text = mined.to_kb_text();
        assert!(text.contains("support=2/3 confidence=2/3"));
        assert_eq!(load_kb(text.as_bytes()).unwrap(), mined.kb);
    }

    #[test]
    fn single_item_mines_nothing() {
        let mined = mine_rules(&tx(&[&["a"]]), frac("0.1"), frac("0.1")).unwrap();
        assert!(mined.kb.rules().is_empty());
        assert_eq!(load_kb(mined.to_kb_text().as_bytes()).unwrap(), mined.kb);
    }

    #[test]
    fn full_thresholds_on_one_pair() {
        let mined = mine_rules(&tx(&[&["a", "b"]]), frac("1"), frac("1")).unwrap();
        assert_eq!(rule_pairs(&mined.kb), [("a", "b"), ("b", "a")]);
    }

    #[test]
    fn mining_nothing_is_an_error() {
        assert_eq!(
            mine_rules(&[], frac("1"), frac("1")).unwrap_err(),
            KbError::EmptyInput
        );
    }

    #[test]
    fn transactions_file() {
        let t = parse_transactions("water, Mountain\n# c\n\nsky sun\n");
        assert_eq!(t, tx(&[&["mountain", "water"], &["sky", "sun"]]));
    }

    fn arb_kb() -> impl Strategy<Value = KnowledgeBase> {
        let words = "[a-f]{1,2}";
        (
            proptest::collection::vec((words, words), 0..12),
            proptest::collection::btree_set(words, 0..4),
        )
            .prop_filter_map("needs a usable rule set", |(pairs, extra)| {
                let pairs: Vec<_> = pairs.into_iter().filter(|(a, b)| a != b).collect();
                let mut vocab: BTreeSet<String> = pairs
                    .iter()
                    .flat_map(|(a, b)| [a.clone(), b.clone()])
                    .collect();
                vocab.extend(extra);
                let rules = pairs.into_iter().zip(1..).map(|((a, b), id)| Rule {
                    id,
                    antecedent: a,
                    consequent: b,
                });
                KnowledgeBase::from_rules(rules, Some(vocab))
                    .ok()
                    .map(|(kb, _)| kb)
            })
    }

    proptest! {
        #[test]
        fn save_load_round_trip(kb in arb_kb()) {
            prop_assert_eq!(load_kb(save_kb(&kb).as_bytes()).unwrap(), kb);
        }

        #[test]
        fn backward_words_within_vocabulary(kb in arb_kb()) {
            for w in kb.vocabulary() {
                for a in kb.backward_words(w).unwrap() {
                    prop_assert!(kb.contains(a));
                    prop_assert!(kb.has_rule(a, w));
                }
            }
        }

        #[test]
        fn mined_rules_meet_thresholds(
            rows in proptest::collection::vec(proptest::collection::btree_set("[a-e]", 0..5), 1..10),
            s in 1u64..=10,
            c in 1u64..=10,
        ) {
            let (s, c) = (Fraction::new(s, 10).unwrap(), Fraction::new(c, 10).unwrap());
            let Ok(mined) = mine_rules(&rows, s, c) else {
                prop_assert!(rows.iter().all(|r| r.is_empty()));
                return Ok(());
            };
            let n = rows.len() as u64;
            for r in mined.kb.rules() {
                prop_assert_ne!(&r.antecedent, &r.consequent);
                let both = rows.iter().filter(|t| t.contains(&r.antecedent) && t.contains(&r.consequent)).count() as u64;
                let ante = rows.iter().filter(|t| t.contains(&r.antecedent)).count() as u64;
                prop_assert!(s.is_met_by(both, n));
                prop_assert!(c.is_met_by(both, ante));
            }
            prop_assert_eq!(load_kb(mined.to_kb_text().as_bytes()).unwrap(), mined.kb);
        }
    }
}
