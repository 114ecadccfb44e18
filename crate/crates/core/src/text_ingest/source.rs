use std::fs;
use std::io::{self, Read};
use std::path::{Path, PathBuf};
use std::time::Duration;

use rayon::prelude::*;

use super::IngestError;

pub const USER_AGENT: &str = concat!("kwrank/", env!("CARGO_PKG_VERSION"));

const MAX_BODY_BYTES: u64 = 32 * 1024 * 1024;

#[derive(Debug, Clone)]
pub struct FetchOptions {
    pub timeout: Duration,
    /// Relative local paths are resolved against this directory.
    pub base_dir: Option<PathBuf>,
}

impl Default for FetchOptions {
    fn default() -> Self {
        FetchOptions {
            timeout: Duration::from_secs(30),
            base_dir: None,
        }
    }
}

pub fn is_remote(location: &str) -> bool {
    let lower = location.get(..8).unwrap_or(location).to_ascii_lowercase();
    lower.starts_with("http://") || lower.starts_with("https://")
}

/// Reads a local file or fetches an http(s) URL.
pub fn load_source(location: &str, opts: &FetchOptions) -> Result<Vec<u8>, IngestError> {
    if is_remote(location) {
        return fetch_remote(location, opts.timeout);
    }
    let path = local_path(location, opts.base_dir.as_deref());
    fs::read(&path).map_err(|e| match e.kind() {
        io::ErrorKind::NotFound => IngestError::NotFound(path.display().to_string()),
        _ => IngestError::Io {
            path: path.display().to_string(),
            source: e,
        },
    })
}

/// Loads every location on a pool of `concurrency` workers. Results come back
/// in input order.
pub fn load_all(
    locations: &[String],
    opts: &FetchOptions,
    concurrency: usize,
) -> Vec<Result<Vec<u8>, IngestError>> {
    map_bounded(locations, concurrency, |loc| load_source(loc, opts))
}

/// Maps `f` over `items` on at most `concurrency` threads, keeping input order.
pub fn map_bounded<T, R, F>(items: &[T], concurrency: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(concurrency.max(1))
        .build();
    match pool {
        Ok(pool) => pool.install(|| items.par_iter().map(&f).collect()),
        Err(e) => {
            log::warn!("falling back to sequential processing: {e}");
            items.iter().map(f).collect()
        }
    }
}

fn local_path(location: &str, base_dir: Option<&Path>) -> PathBuf {
    let raw = location.strip_prefix("file://").unwrap_or(location);
    let path = Path::new(raw);
    match base_dir {
        Some(base) if path.is_relative() => base.join(path),
        _ => path.to_path_buf(),
    }
}

fn fetch_remote(url: &str, timeout: Duration) -> Result<Vec<u8>, IngestError> {
    let agent = ureq::AgentBuilder::new()
        .timeout(timeout)
        .user_agent(USER_AGENT)
        .build();
    let fetch_err = |reason: String| IngestError::Fetch {
        location: url.to_string(),
        reason,
    };
    let resp = agent.get(url).call().map_err(|e| match e {
        ureq::Error::Status(code, _) => fetch_err(format!("HTTP {code}")),
        ureq::Error::Transport(t) => fetch_err(t.to_string()),
    })?;
    let mut body = Vec::new();
    resp.into_reader()
        .take(MAX_BODY_BYTES)
        .read_to_end(&mut body)
        .map_err(|e| fetch_err(e.to_string()))?;
    Ok(body)
}

/// Parses a URL list: one location per line, `#` starts a comment.
pub fn parse_url_list(text: &str) -> Vec<String> {
    text.lines()
        .map(|l| l.split_once('#').map_or(l, |(before, _)| before).trim())
        .filter(|l| !l.is_empty())
        .map(str::to_owned)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn url_list_comments_and_blanks() {
        let list = "# seeds\n\npages/a.html\n  https://example.org/x  # remote\n#\n";
        assert_eq!(
            parse_url_list(list),
            ["pages/a.html", "https://example.org/x"]
        );
    }

    #[test]
    fn missing_local_file_is_not_found() {
        let err = load_source("/definitely/not/here.html", &FetchOptions::default()).unwrap_err();
        assert!(matches!(err, IngestError::NotFound(_)));
    }

    #[test]
    fn reads_relative_to_base_dir() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("p.html"), b"<p>hi</p>").unwrap();
        let opts = FetchOptions {
            base_dir: Some(dir.path().to_path_buf()),
            ..FetchOptions::default()
        };
        assert_eq!(load_source("p.html", &opts).unwrap(), b"<p>hi</p>");
        let url = format!("file://{}", dir.path().join("p.html").display());
        assert_eq!(load_source(&url, &opts).unwrap(), b"<p>hi</p>");
    }

    #[test]
    fn remote_detection() {
        assert!(is_remote("HTTP://x"));
        assert!(is_remote("https://x"));
        assert!(!is_remote("httpdocs/a.html"));
        assert!(!is_remote("file:///a"));
    }
}
