//! Document ingestion: loading pages and turning HTML into a source-tagged
//! keyword stream plus the page's image references.

mod html;
mod source;
mod tokenize;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use html::{parse_document, resolve_image_src};
pub use source::{
    is_remote, load_all, load_source, map_bounded, parse_url_list, FetchOptions, USER_AGENT,
};
pub use tokenize::{is_normalized, tokenize, Stopwords, MIN_TOKEN_CHARS};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{doc_id}: invalid encoding: {detail}")]
    InvalidEncoding { doc_id: String, detail: String },
    #[error("not found: {0}")]
    NotFound(String),
    #[error("fetch failed for {location}: {reason}")]
    Fetch { location: String, reason: String },
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Where in the page a token came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TokenSource {
    AltText,
    PageTitle,
    MetaKeywords,
    MetaDescription,
    Heading,
    Body,
}

impl TokenSource {
    pub const ALL: [TokenSource; 6] = [
        TokenSource::AltText,
        TokenSource::PageTitle,
        TokenSource::MetaKeywords,
        TokenSource::MetaDescription,
        TokenSource::Heading,
        TokenSource::Body,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TokenSource::AltText => "alt",
            TokenSource::PageTitle => "title",
            TokenSource::MetaKeywords => "meta_keywords",
            TokenSource::MetaDescription => "meta_description",
            TokenSource::Heading => "heading",
            TokenSource::Body => "body",
        }
    }
}

impl fmt::Display for TokenSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TokenSource {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        TokenSource::ALL
            .into_iter()
            .find(|src| src.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                let names: Vec<_> = TokenSource::ALL.iter().map(|s| s.name()).collect();
                format!(
                    "unknown token source {s:?} (expected one of {})",
                    names.join(", ")
                )
            })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub text: String,
    pub source: TokenSource,
}

impl Token {
    pub fn new(text: impl Into<String>, source: TokenSource) -> Self {
        Token {
            text: text.into(),
            source,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageRef {
    pub image_id: String,
    /// Verbatim alt attribute; alt texts of duplicate `img` tags are joined
    /// with a space.
    pub alt_text: String,
    pub owner_doc: String,
    /// `alt_text` run through the tokenizer that built the document.
    pub alt_keywords: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub title: String,
    pub images: Vec<ImageRef>,
    pub tokens: Vec<Token>,
}

impl Document {
    pub fn tokens_from(&self, source: TokenSource) -> impl Iterator<Item = &str> {
        self.tokens
            .iter()
            .filter(move |t| t.source == source)
            .map(|t| t.text.as_str())
    }
}
