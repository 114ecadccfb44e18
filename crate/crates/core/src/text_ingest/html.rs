use std::collections::HashMap;

use ego_tree::iter::Edge;
use scraper::node::{Element, Node};
use scraper::Html;
use url::Url;

use super::{tokenize, Document, ImageRef, IngestError, Stopwords, Token, TokenSource};

/// Elements whose text never reaches the token stream.
const HIDDEN: &[&str] = &["script", "style", "noscript", "template"];

/// Elements that do not break a word when they open or close.
const INLINE: &[&str] = &[
    "a", "abbr", "b", "bdi", "bdo", "cite", "code", "data", "dfn", "em", "font", "i", "kbd",
    "mark", "q", "s", "samp", "small", "span", "strong", "sub", "sup", "time", "u", "var",
];

fn is_heading(name: &str) -> bool {
    matches!(name, "h1" | "h2" | "h3" | "h4" | "h5" | "h6")
}

/// Parses one page. Tokens are emitted in document order; each carries the
/// part of the page it came from.
pub fn parse_document(
    doc_id: &str,
    html: &[u8],
    stopwords: &Stopwords,
) -> Result<Document, IngestError> {
    let text = std::str::from_utf8(html).map_err(|e| IngestError::InvalidEncoding {
        doc_id: doc_id.to_string(),
        detail: e.to_string(),
    })?;
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    let dom = Html::parse_document(text);

    let mut walk = Walk::new(doc_id, stopwords);
    for edge in dom.tree.root().traverse() {
        match edge {
            Edge::Open(node) => match node.value() {
                Node::Element(el) => walk.open(el),
                Node::Text(t) => walk.text(t),
                _ => {}
            },
            Edge::Close(node) => {
                if let Node::Element(el) = node.value() {
                    walk.close(el);
                }
            }
        }
    }
    Ok(walk.finish())
}

struct Walk<'a> {
    doc_id: &'a str,
    stopwords: &'a Stopwords,
    hidden: usize,
    heading: usize,
    title: usize,
    title_text: Option<String>,
    current_title: String,
    run: String,
    run_source: Option<TokenSource>,
    tokens: Vec<Token>,
    images: Vec<ImageRef>,
    image_slot: HashMap<String, usize>,
}

impl<'a> Walk<'a> {
    fn new(doc_id: &'a str, stopwords: &'a Stopwords) -> Self {
        Walk {
            doc_id,
            stopwords,
            hidden: 0,
            heading: 0,
            title: 0,
            title_text: None,
            current_title: String::new(),
            run: String::new(),
            run_source: None,
            tokens: Vec::new(),
            images: Vec::new(),
            image_slot: HashMap::new(),
        }
    }

    fn open(&mut self, el: &Element) {
        let name = el.name();
        if HIDDEN.contains(&name) {
            self.hidden += 1;
        } else if name == "title" {
            self.title += 1;
        } else if is_heading(name) {
            self.heading += 1;
        }
        if !INLINE.contains(&name) {
            self.run.push(' ');
        }
        if self.hidden > 0 {
            return;
        }
        match name {
            "img" => self.image(el),
            "meta" => self.meta(el),
            _ => {}
        }
    }

    fn close(&mut self, el: &Element) {
        let name = el.name();
        if HIDDEN.contains(&name) {
            self.hidden = self.hidden.saturating_sub(1);
        } else if name == "title" {
            self.title = self.title.saturating_sub(1);
            if self.title == 0 && self.title_text.is_none() {
                self.title_text = Some(collapse_ws(&self.current_title));
            }
        } else if is_heading(name) {
            self.heading = self.heading.saturating_sub(1);
        }
        if !INLINE.contains(&name) {
            self.run.push(' ');
        }
    }

    fn text(&mut self, text: &str) {
        if self.hidden > 0 {
            return;
        }
        let source = if self.title > 0 {
            if self.title_text.is_none() {
                self.current_title.push_str(text);
            }
            TokenSource::PageTitle
        } else if self.heading > 0 {
            TokenSource::Heading
        } else {
            TokenSource::Body
        };
        if self.run_source != Some(source) {
            self.flush();
            self.run_source = Some(source);
        }
        self.run.push_str(text);
    }

    fn flush(&mut self) {
        if let Some(source) = self.run_source.take() {
            let run = std::mem::take(&mut self.run);
            self.push_tokens(&run, source);
        }
        self.run.clear();
    }

    fn push_tokens(&mut self, raw: &str, source: TokenSource) {
        self.tokens.extend(
            tokenize(raw, self.stopwords)
                .into_iter()
                .map(|t| Token::new(t, source)),
        );
    }

    fn image(&mut self, el: &Element) {
        self.flush();
        let alt = el.attr("alt").unwrap_or("");
        let alt_keywords = tokenize(alt, self.stopwords);
        self.tokens.extend(
            alt_keywords
                .iter()
                .map(|t| Token::new(t.clone(), TokenSource::AltText)),
        );

        let Some(src) = el.attr("src").map(str::trim).filter(|s| !s.is_empty()) else {
            return;
        };
        let image_id = resolve_image_src(self.doc_id, src);
        match self.image_slot.get(&image_id) {
            Some(&i) => {
                let existing = &mut self.images[i];
                if !alt.is_empty() {
                    if !existing.alt_text.is_empty() {
                        existing.alt_text.push(' ');
                    }
                    existing.alt_text.push_str(alt);
                }
                existing.alt_keywords.extend(alt_keywords);
            }
            None => {
                self.image_slot.insert(image_id.clone(), self.images.len());
                self.images.push(ImageRef {
                    image_id,
                    alt_text: alt.to_string(),
                    owner_doc: self.doc_id.to_string(),
                    alt_keywords,
                });
            }
        }
    }

    fn meta(&mut self, el: &Element) {
        let source = match el.attr("name").map(str::trim) {
            Some(n) if n.eq_ignore_ascii_case("keywords") => TokenSource::MetaKeywords,
            Some(n) if n.eq_ignore_ascii_case("description") => TokenSource::MetaDescription,
            _ => return,
        };
        if let Some(content) = el.attr("content") {
            self.flush();
            self.push_tokens(content, source);
        }
    }

    fn finish(mut self) -> Document {
        self.flush();
        Document {
            doc_id: self.doc_id.to_string(),
            title: self.title_text.unwrap_or_default(),
            images: self.images,
            tokens: self.tokens,
        }
    }
}

fn collapse_ws(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Resolves an `img` src against the location of the page that holds it.
///
/// Absolute URLs and root-relative paths on local pages are returned
/// verbatim, as is anything that fails to resolve.
pub fn resolve_image_src(doc_id: &str, src: &str) -> String {
    if Url::parse(src).is_ok() {
        return src.to_string();
    }
    if let Ok(base) = Url::parse(doc_id) {
        if base.cannot_be_a_base() {
            return src.to_string();
        }
        return base
            .join(src)
            .map(String::from)
            .unwrap_or_else(|_| src.to_string());
    }
    if src.starts_with('/') {
        return src.to_string();
    }
    let parent = match doc_id.rfind('/') {
        Some(i) => &doc_id[..=i],
        None => "",
    };
    normalize_path(&format!("{parent}{src}"))
}

/// Lexically removes `.` and `..` segments from a `/`-separated path.
fn normalize_path(path: &str) -> String {
    let absolute = path.starts_with('/');
    let mut parts: Vec<&str> = Vec::new();
    for seg in path.split('/') {
        match seg {
            "" | "." => {}
            ".." => match parts.last() {
                Some(&last) if last != ".." => {
                    parts.pop();
                }
                _ if absolute => {}
                _ => parts.push(".."),
            },
            s => parts.push(s),
        }
    }
    let joined = parts.join("/");
    if absolute {
        format!("/{joined}")
    } else {
        joined
    }
}
