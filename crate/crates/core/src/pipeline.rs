//! End-to-end run: ingest every page on the URL list, select and rank
//! keywords per page, annotate its images and write the index.
//!
//! Configuration is a `key = value` file; relative paths in it are resolved
//! against the file's directory. Keys:
//!
//! | key                   | meaning                                   | default              |
//! |-----------------------|-------------------------------------------|----------------------|
//! | `url_list`            | URL list file                             | required             |
//! | `kb`                  | knowledge base file                       | required             |
//! | `index`               | index file to write                       | required             |
//! | `stopwords`           | stopword file, or `none`                  | built-in English     |
//! | `summary`             | JSON summary file                         | `<index>.summary.json` |
//! | `threshold`           | candidate fraction in (0, 1]              | `0.40`               |
//! | `max_annotations`     | keywords kept per image                   | `10`                 |
//! | `sources`             | comma list of token sources, or `all`     | `all`                |
//! | `fetch_timeout`       | seconds per remote fetch                  | `30`                 |
//! | `concurrency`         | parallel fetch/parse workers              | `4`                  |
//! | `rank_all_candidates` | rank every candidate, not only tie groups | `false`              |

use std::collections::{BTreeSet, HashSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::Serialize;
use thiserror::Error;

use crate::annotation_index::{annotate_images, save_index, InvertedIndex};
use crate::fraction::Fraction;
use crate::frequency::{count_frequencies, detect_ties, select_candidates, CandidateSet};
use crate::importance_rank::{order_by_rank, rank_all, RankError, RankLine};
use crate::knowledge_base::{parse_kb, KbError, KnowledgeBase};
use crate::text_ingest::{
    load_source, map_bounded, parse_document, parse_url_list, Document, FetchOptions, Stopwords,
    TokenSource,
};

pub const CONFIG_ENV: &str = "KWRANK_CONFIG";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config: {0}")]
    Config(String),
    #[error("knowledge base {path}: {source}")]
    Kb {
        path: String,
        #[source]
        source: KbError,
    },
    #[error("cannot access {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.display().to_string(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum StopwordSetting {
    Default,
    None,
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub url_list_path: PathBuf,
    pub kb_path: PathBuf,
    pub stopwords: StopwordSetting,
    pub threshold: Fraction,
    pub max_annotations: usize,
    pub enabled_sources: BTreeSet<TokenSource>,
    pub fetch_timeout: Duration,
    pub index_path: PathBuf,
    pub summary_path: PathBuf,
    pub concurrency: usize,
    pub rank_all_candidates: bool,
}

/// Partially specified configuration, as read from a file or from flags.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigOverrides {
    pub url_list: Option<PathBuf>,
    pub kb: Option<PathBuf>,
    pub stopwords: Option<StopwordSetting>,
    pub threshold: Option<Fraction>,
    pub max_annotations: Option<usize>,
    pub sources: Option<BTreeSet<TokenSource>>,
    pub fetch_timeout_secs: Option<f64>,
    pub index: Option<PathBuf>,
    pub summary: Option<PathBuf>,
    pub concurrency: Option<usize>,
    pub rank_all_candidates: Option<bool>,
}

pub fn parse_sources(value: &str) -> Result<BTreeSet<TokenSource>, String> {
    if value.trim().eq_ignore_ascii_case("all") {
        return Ok(TokenSource::ALL.into_iter().collect());
    }
    let set = value
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(str::parse)
        .collect::<Result<BTreeSet<_>, _>>()?;
    if set.is_empty() {
        return Err("no token sources enabled".into());
    }
    Ok(set)
}

pub fn parse_stopword_setting(value: &str, base: &Path) -> StopwordSetting {
    match value.trim() {
        v if v.eq_ignore_ascii_case("none") => StopwordSetting::None,
        v if v.eq_ignore_ascii_case("default") => StopwordSetting::Default,
        v => StopwordSetting::File(base.join(v)),
    }
}

impl ConfigOverrides {
    /// Parses `key = value` lines. Relative paths resolve against `base_dir`.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self, PipelineError> {
        let mut c = ConfigOverrides::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split_once('#').map_or(raw, |(before, _)| before).trim();
            if line.is_empty() {
                continue;
            }
            let bad = |msg: String| PipelineError::Config(format!("line {}: {msg}", i + 1));
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| bad(format!("expected key = value, found {line:?}")))?;
            let (key, value) = (key.trim(), value.trim());
            let path = || base_dir.join(value);
            match key {
                "url_list" => c.url_list = Some(path()),
                "kb" => c.kb = Some(path()),
                "index" => c.index = Some(path()),
                "summary" => c.summary = Some(path()),
                "stopwords" => c.stopwords = Some(parse_stopword_setting(value, base_dir)),
                "threshold" => c.threshold = Some(value.parse().map_err(|e| bad(format!("{e}")))?),
                "max_annotations" => {
                    c.max_annotations = Some(
                        value
                            .parse()
                            .map_err(|_| bad(format!("bad integer {value:?}")))?,
                    )
                }
                "sources" => c.sources = Some(parse_sources(value).map_err(bad)?),
                "fetch_timeout" => {
                    c.fetch_timeout_secs = Some(
                        value
                            .parse()
                            .map_err(|_| bad(format!("bad number {value:?}")))?,
                    )
                }
                "concurrency" => {
                    c.concurrency = Some(
                        value
                            .parse()
                            .map_err(|_| bad(format!("bad integer {value:?}")))?,
                    )
                }
                "rank_all_candidates" => {
                    c.rank_all_candidates = Some(
                        value
                            .parse()
                            .map_err(|_| bad(format!("bad boolean {value:?}")))?,
                    )
                }
                other => return Err(bad(format!("unknown key {other:?}"))),
            }
        }
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base)
    }

    /// Fields set in `other` win.
    pub fn merged_with(self, other: ConfigOverrides) -> ConfigOverrides {
        ConfigOverrides {
            url_list: other.url_list.or(self.url_list),
            kb: other.kb.or(self.kb),
            stopwords: other.stopwords.or(self.stopwords),
            threshold: other.threshold.or(self.threshold),
            max_annotations: other.max_annotations.or(self.max_annotations),
            sources: other.sources.or(self.sources),
            fetch_timeout_secs: other.fetch_timeout_secs.or(self.fetch_timeout_secs),
            index: other.index.or(self.index),
            summary: other.summary.or(self.summary),
            concurrency: other.concurrency.or(self.concurrency),
            rank_all_candidates: other.rank_all_candidates.or(self.rank_all_candidates),
        }
    }

    pub fn finish(self) -> Result<PipelineConfig, PipelineError> {
        let missing = |k: &str| PipelineError::Config(format!("missing required setting {k:?}"));
        let index_path = self.index.ok_or_else(|| missing("index"))?;
        let max_annotations = self.max_annotations.unwrap_or(10);
        if max_annotations == 0 {
            return Err(PipelineError::Config(
                "max_annotations must be at least 1".into(),
            ));
        }
        let timeout = self.fetch_timeout_secs.unwrap_or(30.0);
        if !(timeout.is_finite() && timeout > 0.0) {
            return Err(PipelineError::Config(
                "fetch_timeout must be positive".into(),
            ));
        }
        let summary_path = self.summary.unwrap_or_else(|| {
            let mut p = index_path.clone().into_os_string();
            p.push(".summary.json");
            PathBuf::from(p)
        });
        Ok(PipelineConfig {
            url_list_path: self.url_list.ok_or_else(|| missing("url_list"))?,
            kb_path: self.kb.ok_or_else(|| missing("kb"))?,
            stopwords: self.stopwords.unwrap_or(StopwordSetting::Default),
            threshold: self
                .threshold
                .unwrap_or_else(|| Fraction::new(2, 5).expect("0.4 is in range")),
            max_annotations,
            enabled_sources: self
                .sources
                .unwrap_or_else(|| TokenSource::ALL.into_iter().collect()),
            fetch_timeout: Duration::from_secs_f64(timeout),
            index_path,
            summary_path,
            concurrency: self.concurrency.unwrap_or(4).max(1),
            rank_all_candidates: self.rank_all_candidates.unwrap_or(false),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FailedDocument {
    pub location: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CandidateLine {
    pub keyword: String,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ResolvedTie {
    pub count: u64,
    /// Group members, most important first.
    pub ordered: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DocumentSummary {
    pub doc_id: String,
    pub title: String,
    pub images: usize,
    pub candidates: Vec<CandidateLine>,
    pub tie_groups: Vec<ResolvedTie>,
    pub ranks: Vec<RankLine>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub documents_processed: usize,
    pub documents_failed: Vec<FailedDocument>,
    pub images_indexed: usize,
    pub tie_groups_resolved: usize,
    pub kb_fingerprint: String,
    pub documents: Vec<DocumentSummary>,
}

impl RunSummary {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("summary serializes");
        s.push('\n');
        s
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "documents processed: {}\ndocuments failed: {}\nimages indexed: {}\ntie groups resolved: {}\n",
            self.documents_processed,
            self.documents_failed.len(),
            self.images_indexed,
            self.tie_groups_resolved
        );
        for f in &self.documents_failed {
            out.push_str(&format!("  failed {}: {}\n", f.location, f.reason));
        }
        for d in &self.documents {
            out.push_str(&format!("\n{} ({} images)\n", d.doc_id, d.images));
            let cands: Vec<String> = d
                .candidates
                .iter()
                .map(|c| format!("{}:{}", c.keyword, c.count))
                .collect();
            out.push_str(&format!("  candidates: {}\n", cands.join(" ")));
            for t in &d.tie_groups {
                out.push_str(&format!(
                    "  tie at {}: {}\n",
                    t.count,
                    t.ordered.join(" > ")
                ));
            }
            for r in &d.ranks {
                out.push_str(&format!(
                    "  rank {}\t{}\t{}\n",
                    r.keyword, r.score, r.rational
                ));
            }
        }
        out
    }
}

/// What one page contributed to the run.
#[derive(Debug, Clone)]
pub struct DocumentOutcome {
    pub summary: DocumentSummary,
    pub images: Vec<crate::annotation_index::AnnotatedImage>,
}

/// Runs count → select → tie detection → ranking → annotation for one page.
pub fn process_document(
    doc: &Document,
    kb: &KnowledgeBase,
    config: &PipelineConfig,
) -> Result<DocumentOutcome, RankError> {
    let table = count_frequencies(&doc.tokens, &config.enabled_sources);
    let candidates = select_candidates(&table, config.threshold).unwrap_or(CandidateSet {
        members: Vec::new(),
        threshold: config.threshold,
    });
    let ties = detect_ties(&candidates);

    let to_rank: BTreeSet<&str> = if config.rank_all_candidates {
        candidates.keywords().collect()
    } else {
        ties.iter()
            .flat_map(|g| g.keywords.iter().map(String::as_str))
            .collect()
    };
    let report = rank_all(kb, to_rank.into_iter().filter(|w| kb.contains(w)))?;
    let tie_groups = ties
        .iter()
        .map(|g| ResolvedTie {
            count: g.count,
            ordered: order_by_rank(&report, g.keywords.iter().map(String::as_str)),
        })
        .collect();

    let images = annotate_images(doc, &table, &candidates, &report, config.max_annotations);
    Ok(DocumentOutcome {
        summary: DocumentSummary {
            doc_id: doc.doc_id.clone(),
            title: doc.title.clone(),
            images: doc.images.len(),
            candidates: candidates
                .members
                .iter()
                .map(|(k, c)| CandidateLine {
                    keyword: k.clone(),
                    count: *c,
                })
                .collect(),
            tie_groups,
            ranks: report.ranked().into_iter().map(RankLine::from).collect(),
        },
        images,
    })
}

pub fn load_stopwords(setting: &StopwordSetting) -> Result<Stopwords, PipelineError> {
    match setting {
        StopwordSetting::Default => Ok(Stopwords::english()),
        StopwordSetting::None => Ok(Stopwords::empty()),
        StopwordSetting::File(p) => Stopwords::load(p).map_err(io_err(p)),
    }
}

/// Loads a knowledge base and checks that the whole rule graph is acyclic.
pub fn load_checked_kb(path: &Path) -> Result<KnowledgeBase, PipelineError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    let kb_err = |source| PipelineError::Kb {
        path: path.display().to_string(),
        source,
    };
    let loaded = parse_kb(&bytes).map_err(kb_err)?;
    loaded.kb.validate_all().map_err(kb_err)?;
    Ok(loaded.kb)
}

pub fn run_pipeline(config: &PipelineConfig) -> Result<RunSummary, PipelineError> {
    let kb = load_checked_kb(&config.kb_path)?;
    let stopwords = load_stopwords(&config.stopwords)?;
    let list_text =
        fs::read_to_string(&config.url_list_path).map_err(io_err(&config.url_list_path))?;
    let locations = parse_url_list(&list_text);

    let fetch = FetchOptions {
        timeout: config.fetch_timeout,
        base_dir: config.url_list_path.parent().map(Path::to_path_buf),
    };
    let mut seen = HashSet::new();
    let first_seen: Vec<bool> = locations.iter().map(|l| seen.insert(l.clone())).collect();
    let parsed = map_bounded(&locations, config.concurrency, |loc| {
        load_source(loc, &fetch).and_then(|bytes| parse_document(loc, &bytes, &stopwords))
    });

    let mut index = InvertedIndex::new();
    let mut documents = Vec::new();
    let mut failed = Vec::new();
    let mut tie_groups_resolved = 0;
    for ((location, result), first) in locations.iter().zip(parsed).zip(first_seen) {
        let doc = match (first, result) {
            (false, _) => {
                failed.push(FailedDocument {
                    location: location.clone(),
                    reason: "duplicate location in URL list".into(),
                });
                continue;
            }
            (true, Err(e)) => {
                log::warn!("skipping {location}: {e}");
                failed.push(FailedDocument {
                    location: location.clone(),
                    reason: e.to_string(),
                });
                continue;
            }
            (true, Ok(doc)) => doc,
        };
        let outcome = process_document(&doc, &kb, config).map_err(|e| PipelineError::Kb {
            path: config.kb_path.display().to_string(),
            source: match e {
                RankError::CyclicKnowledgeBase(c) => KbError::Cycle(c),
                RankError::UnknownKeyword { keywords } => KbError::UnknownKeyword { keywords },
            },
        })?;
        tie_groups_resolved += outcome.summary.tie_groups.len();
        index.add(outcome.images);
        documents.push(outcome.summary);
    }

    write_file(&config.index_path, save_index(&index).as_bytes())?;
    let summary = RunSummary {
        documents_processed: documents.len(),
        documents_failed: failed,
        images_indexed: index.len(),
        tie_groups_resolved,
        kb_fingerprint: kb.fingerprint(),
        documents,
    };
    write_file(&config.summary_path, summary.to_json().as_bytes())?;
    Ok(summary)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), PipelineError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    fs::write(path, bytes).map_err(io_err(path))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_file_parsing() {
        let text = "# run\nurl_list = urls.txt\nkb = kb/t3.kb\nindex = out/idx\n\
                    threshold = 0.5\nsources = alt, title\nstopwords = none\n\
                    rank_all_candidates = true\nfetch_timeout = 2.5\n";
        let c = ConfigOverrides::parse(text, Path::new("/base"))
            .unwrap()
            .finish()
            .unwrap();
        assert_eq!(c.url_list_path, Path::new("/base/urls.txt"));
        assert_eq!(c.kb_path, Path::new("/base/kb/t3.kb"));
        assert_eq!(c.summary_path, Path::new("/base/out/idx.summary.json"));
        assert_eq!(c.threshold, Fraction::new(1, 2).unwrap());
        assert_eq!(
            c.enabled_sources,
            [TokenSource::AltText, TokenSource::PageTitle]
                .into_iter()
                .collect()
        );
        assert_eq!(c.stopwords, StopwordSetting::None);
        assert!(c.rank_all_candidates);
        assert_eq!(c.fetch_timeout, Duration::from_millis(2500));
        assert_eq!(c.max_annotations, 10);
    }

    #[test]
    fn flags_override_file() {
        let file =
            ConfigOverrides::parse("url_list=a\nkb=b\nindex=c\nthreshold=0.5\n", Path::new(""))
                .unwrap();
        let flags = ConfigOverrides {
            threshold: Some(Fraction::new(1, 4).unwrap()),
            ..Default::default()
        };
        let c = file.merged_with(flags).finish().unwrap();
        assert_eq!(c.threshold, Fraction::new(1, 4).unwrap());
        assert_eq!(c.url_list_path, Path::new("a"));
    }

    #[test]
    fn config_errors() {
        let base = Path::new("");
        for bad in [
            "nonsense",
            "colour = blue",
            "threshold = 1.5",
            "threshold = 0",
            "max_annotations = -1",
            "sources = pixels",
            "sources = ,",
        ] {
            assert!(
                matches!(
                    ConfigOverrides::parse(bad, base),
                    Err(PipelineError::Config(_))
                ),
                "{bad}"
            );
        }
        let missing = ConfigOverrides::parse("kb = x\nindex = y", base)
            .unwrap()
            .finish();
        assert!(matches!(missing, Err(PipelineError::Config(_))));
        let zero = ConfigOverrides::parse("url_list=a\nkb=b\nindex=c\nmax_annotations=0", base)
            .unwrap()
            .finish();
        assert!(matches!(zero, Err(PipelineError::Config(_))));
        let timeout = ConfigOverrides::parse("url_list=a\nkb=b\nindex=c\nfetch_timeout=0", base)
            .unwrap()
            .finish();
        assert!(matches!(timeout, Err(PipelineError::Config(_))));
    }
}
