//! Per-image annotations and the keyword → image inverted index.
//!
//! Index file layout (UTF-8, one record per line):
//!
//! ```text
//! kwrankidx 1
//! <image_id>\t<owner_doc>\t<keyword>:<count>:<rank>\t...
//! end\t<number of image records>
//! ```
//!
//! `rank` is an exact rational such as `7/10` or `0`. Tabs, newlines and `%`
//! inside ids are percent-escaped. The trailing `end` line detects truncation.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use thiserror::Error;

use crate::frequency::{CandidateSet, FrequencyTable};
use crate::importance_rank::{render_decimal, ImportanceReport, DECIMAL_DIGITS};
use crate::text_ingest::{is_normalized, Document};

pub const FORMAT_VERSION_LINE: &str = "kwrankidx 1";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum IndexError {
    #[error("index line {line}: {message}")]
    Format { line: usize, message: String },
}

fn format_err(line: usize, message: impl Into<String>) -> IndexError {
    IndexError::Format {
        line,
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Annotation {
    pub keyword: String,
    pub count: u64,
    pub rank: BigRational,
}

impl Annotation {
    pub fn rank_decimal(&self) -> String {
        render_decimal(&self.rank, DECIMAL_DIGITS)
    }
}

/// Frequency descending, then rank descending, then keyword ascending.
fn annotation_order(a: &Annotation, b: &Annotation) -> Ordering {
    b.count
        .cmp(&a.count)
        .then_with(|| b.rank.cmp(&a.rank))
        .then_with(|| a.keyword.cmp(&b.keyword))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotatedImage {
    pub image_id: String,
    pub owner_doc: String,
    pub annotations: Vec<Annotation>,
}

impl AnnotatedImage {
    pub fn annotation(&self, keyword: &str) -> Option<&Annotation> {
        self.annotations.iter().find(|a| a.keyword == keyword)
    }

    pub fn keywords(&self) -> impl Iterator<Item = &str> {
        self.annotations.iter().map(|a| a.keyword.as_str())
    }
}

/// Annotates every image of `doc` with its own alt-text keywords plus the
/// page's candidate keywords, at most `max_annotations` per image.
///
/// Alt-text keywords are selected before any candidate, so they survive
/// truncation whenever there is room for them. The final list follows the
/// usual annotation order. Images left with no keyword at all are skipped.
pub fn annotate_images(
    doc: &Document,
    table: &FrequencyTable,
    candidates: &CandidateSet,
    report: &ImportanceReport,
    max_annotations: usize,
) -> Vec<AnnotatedImage> {
    let max_annotations = max_annotations.max(1);
    let annotate = |keyword: &str, count: u64| Annotation {
        keyword: keyword.to_string(),
        count,
        rank: report.score_of(keyword),
    };

    let mut out = Vec::with_capacity(doc.images.len());
    for image in &doc.images {
        let own: BTreeSet<&str> = image.alt_keywords.iter().map(String::as_str).collect();
        let mut alt: Vec<Annotation> = own
            .iter()
            .map(|k| annotate(k, candidates.count(k).unwrap_or_else(|| table.count(k))))
            .collect();
        alt.sort_by(annotation_order);
        alt.truncate(max_annotations);

        let mut rest: Vec<Annotation> = candidates
            .members
            .iter()
            .filter(|(k, _)| !own.contains(k.as_str()))
            .map(|(k, c)| annotate(k, *c))
            .collect();
        rest.sort_by(annotation_order);
        rest.truncate(max_annotations - alt.len());

        let mut annotations = alt;
        annotations.extend(rest);
        if annotations.is_empty() {
            continue;
        }
        annotations.sort_by(annotation_order);
        out.push(AnnotatedImage {
            image_id: image.image_id.clone(),
            owner_doc: image.owner_doc.clone(),
            annotations,
        });
    }
    out
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct InvertedIndex {
    postings: BTreeMap<String, BTreeSet<String>>,
    images: BTreeMap<String, AnnotatedImage>,
}

impl InvertedIndex {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn postings(&self) -> &BTreeMap<String, BTreeSet<String>> {
        &self.postings
    }

    pub fn images(&self) -> &BTreeMap<String, AnnotatedImage> {
        &self.images
    }

    pub fn image(&self, image_id: &str) -> Option<&AnnotatedImage> {
        self.images.get(image_id)
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    /// Inserts images, replacing any previous record with the same id
    /// together with its postings.
    pub fn add(&mut self, images: impl IntoIterator<Item = AnnotatedImage>) {
        for image in images {
            self.remove(&image.image_id);
            for k in image.keywords() {
                self.postings
                    .entry(k.to_string())
                    .or_default()
                    .insert(image.image_id.clone());
            }
            self.images.insert(image.image_id.clone(), image);
        }
    }

    fn remove(&mut self, image_id: &str) {
        let Some(old) = self.images.remove(image_id) else {
            return;
        };
        for k in old.keywords() {
            if let Some(ids) = self.postings.get_mut(k) {
                ids.remove(image_id);
                if ids.is_empty() {
                    self.postings.remove(k);
                }
            }
        }
    }

    /// Images annotated with `keyword`, best annotation first.
    pub fn query(&self, keyword: &str) -> Vec<&AnnotatedImage> {
        let keyword = keyword.trim().to_lowercase();
        let Some(ids) = self.postings.get(&keyword) else {
            return Vec::new();
        };
        let mut hits: Vec<(&Annotation, &AnnotatedImage)> = ids
            .iter()
            .filter_map(|id| self.images.get(id))
            .filter_map(|img| img.annotation(&keyword).map(|a| (a, img)))
            .collect();
        hits.sort_by(|(a, ia), (b, ib)| {
            b.count
                .cmp(&a.count)
                .then_with(|| b.rank.cmp(&a.rank))
                .then_with(|| ia.image_id.cmp(&ib.image_id))
        });
        hits.into_iter().map(|(_, img)| img).collect()
    }

    /// Walks both maps and reports every inconsistency found.
    pub fn audit(&self) -> Result<(), Vec<String>> {
        let mut problems = Vec::new();
        for (k, ids) in &self.postings {
            if ids.is_empty() {
                problems.push(format!("empty posting list for {k:?}"));
            }
            for id in ids {
                match self.images.get(id) {
                    None => problems.push(format!("posting {k:?} -> missing image {id:?}")),
                    Some(img) if img.annotation(k).is_none() => {
                        problems.push(format!("posting {k:?} -> {id:?} not in its annotations"))
                    }
                    Some(_) => {}
                }
            }
        }
        for (id, img) in &self.images {
            if &img.image_id != id {
                problems.push(format!(
                    "image stored under {id:?} has id {:?}",
                    img.image_id
                ));
            }
            if img.annotations.is_empty() {
                problems.push(format!("image {id:?} has no annotations"));
            }
            let mut seen = BTreeSet::new();
            for a in &img.annotations {
                if !seen.insert(a.keyword.as_str()) {
                    problems.push(format!("image {id:?} repeats keyword {:?}", a.keyword));
                }
                if !self
                    .postings
                    .get(&a.keyword)
                    .is_some_and(|ids| ids.contains(id))
                {
                    problems.push(format!(
                        "image {id:?} keyword {:?} has no posting",
                        a.keyword
                    ));
                }
            }
            if img
                .annotations
                .windows(2)
                .any(|w| annotation_order(&w[0], &w[1]) != Ordering::Less)
            {
                problems.push(format!("image {id:?} annotations out of order"));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(problems)
        }
    }
}

pub fn save_index(idx: &InvertedIndex) -> String {
    let mut out = String::new();
    out.push_str(FORMAT_VERSION_LINE);
    out.push('\n');
    for img in idx.images.values() {
        let _ = write!(out, "{}\t{}", escape(&img.image_id), escape(&img.owner_doc));
        for a in &img.annotations {
            let _ = write!(out, "\t{}:{}:{}", a.keyword, a.count, a.rank);
        }
        out.push('\n');
    }
    let _ = writeln!(out, "end\t{}", idx.images.len());
    out
}

pub fn load_index(bytes: &[u8]) -> Result<InvertedIndex, IndexError> {
    let text = std::str::from_utf8(bytes).map_err(|e| format_err(0, format!("not UTF-8: {e}")))?;
    if !text.ends_with('\n') {
        return Err(format_err(0, "truncated: missing final newline"));
    }
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    match lines.next() {
        Some((_, FORMAT_VERSION_LINE)) => {}
        Some((n, other)) => {
            return Err(format_err(
                n,
                format!("expected {FORMAT_VERSION_LINE:?}, found {other:?}"),
            ))
        }
        None => return Err(format_err(0, "empty index file")),
    }

    let mut idx = InvertedIndex::new();
    for (n, line) in lines.by_ref() {
        if let Some(count) = line.strip_prefix("end\t") {
            let declared: usize = count
                .parse()
                .map_err(|_| format_err(n, format!("bad record count {count:?}")))?;
            if declared != idx.len() {
                return Err(format_err(
                    n,
                    format!("truncated: {} records, footer says {declared}", idx.len()),
                ));
            }
            if let Some((extra, _)) = lines.next() {
                return Err(format_err(extra, "data after end marker"));
            }
            return Ok(idx);
        }
        let img = parse_record(n, line)?;
        if idx.images.contains_key(&img.image_id) {
            return Err(format_err(n, format!("duplicate image {:?}", img.image_id)));
        }
        idx.add([img]);
    }
    Err(format_err(0, "truncated: missing end marker"))
}

fn parse_record(n: usize, line: &str) -> Result<AnnotatedImage, IndexError> {
    let mut fields = line.split('\t');
    let image_id = unescape(fields.next().unwrap_or(""), n)?;
    let owner_doc = fields
        .next()
        .ok_or_else(|| format_err(n, "missing owner_doc"))
        .and_then(|f| unescape(f, n))?;
    if image_id.is_empty() {
        return Err(format_err(n, "empty image id"));
    }
    let mut annotations = Vec::new();
    for triple in fields {
        let mut parts = triple.splitn(3, ':');
        let (Some(keyword), Some(count), Some(rank)) = (parts.next(), parts.next(), parts.next())
        else {
            return Err(format_err(n, format!("bad annotation {triple:?}")));
        };
        if !is_normalized(keyword) {
            return Err(format_err(n, format!("bad keyword {keyword:?}")));
        }
        let count: u64 = count
            .parse()
            .map_err(|_| format_err(n, format!("bad count {count:?}")))?;
        let rank =
            parse_rational(rank).ok_or_else(|| format_err(n, format!("bad rank {rank:?}")))?;
        annotations.push(Annotation {
            keyword: keyword.to_string(),
            count,
            rank,
        });
    }
    if annotations.is_empty() {
        return Err(format_err(n, "image record without annotations"));
    }
    Ok(AnnotatedImage {
        image_id,
        owner_doc,
        annotations,
    })
}

fn parse_rational(s: &str) -> Option<BigRational> {
    let (num, den) = s.split_once('/').unwrap_or((s, "1"));
    let num = BigInt::from_str(num).ok()?;
    let den = BigInt::from_str(den).ok()?;
    if den.is_zero() || num < BigInt::zero() || den < BigInt::zero() {
        return None;
    }
    Some(BigRational::new(num, den))
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '%' => out.push_str("%25"),
            '\t' => out.push_str("%09"),
            '\n' => out.push_str("%0A"),
            '\r' => out.push_str("%0D"),
            c => out.push(c),
        }
    }
    out
}

fn unescape(s: &str, line: usize) -> Result<String, IndexError> {
    let mut out = String::with_capacity(s.len());
    let mut rest = s;
    while let Some(i) = rest.find('%') {
        out.push_str(&rest[..i]);
        let code = rest.get(i + 1..i + 3).unwrap_or("");
        out.push(match code {
            "25" => '%',
            "09" => '\t',
            "0A" => '\n',
            "0D" => '\r',
            _ => return Err(format_err(line, format!("bad escape %{code}"))),
        });
        rest = &rest[i + 3..];
    }
    out.push_str(rest);
    Ok(out)
}
