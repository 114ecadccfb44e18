mod common;

use std::collections::BTreeSet;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::net::TcpListener;
use std::thread;

use serde_json::Value;

use kwrank::annotation_index::{annotate_images, load_index, save_index, InvertedIndex};
use kwrank::frequency::{count_frequencies, detect_ties, select_candidates};
use kwrank::importance_rank::{rank_all, resolve_tie};
use kwrank::knowledge_base::load_kb;
use kwrank::pipeline::run_pipeline;
use kwrank::text_ingest::{parse_document, Stopwords, TokenSource};

use common::{config, fixture, scratch_fixtures};

#[test]
fn worked_corpus_end_to_end() {
    let dir = scratch_fixtures();
    let cfg = config(dir.path(), "pipeline.conf");
    let summary = run_pipeline(&cfg).unwrap();
    assert_eq!(summary.documents_processed, 6);
    assert!(summary.documents_failed.is_empty());

    let json: Value =
        serde_json::from_str(&fs::read_to_string(&cfg.summary_path).unwrap()).unwrap();
    let page = json["documents"]
        .as_array()
        .unwrap()
        .iter()
        .find(|d| d["doc_id"] == "pages/counts.html")
        .unwrap();
    let cands: Vec<&str> = page["candidates"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["keyword"].as_str().unwrap())
        .collect();
    assert_eq!(cands, ["bravo", "delta", "echo", "alpha"]);
    assert_eq!(page["tie_groups"][0]["count"], 6);
    assert_eq!(
        page["tie_groups"][0]["ordered"],
        serde_json::json!(["bravo", "delta"])
    );
    assert_eq!(page["ranks"][0]["keyword"], "bravo");
    assert_eq!(page["ranks"][0]["score"], "0.7");
    assert_eq!(page["ranks"][1]["keyword"], "delta");
    assert_eq!(page["ranks"][1]["score"], "0.4");

    let idx = load_index(&fs::read(&cfg.index_path).unwrap()).unwrap();
    let one = idx.image("pages/photos/one.jpg").unwrap();
    let kws: Vec<&str> = one.keywords().collect();
    assert_eq!(kws, ["bravo", "delta", "echo", "alpha"]);
}

#[test]
fn empty_url_list_writes_empty_index() {
    let dir = scratch_fixtures();
    fs::write(dir.path().join("urls.txt"), "# nothing yet\n").unwrap();
    let cfg = config(dir.path(), "pipeline.conf");
    let summary = run_pipeline(&cfg).unwrap();
    assert_eq!(summary.documents_processed, 0);
    assert!(summary.documents_failed.is_empty());
    assert_eq!(summary.images_indexed, 0);
    assert_eq!(summary.tie_groups_resolved, 0);
    assert_eq!(
        fs::read_to_string(&cfg.index_path).unwrap(),
        "kwrankidx 1\nend\t0\n"
    );
}

#[test]
fn unreachable_host_is_recorded_not_fatal() {
    let dir = scratch_fixtures();
    fs::write(
        dir.path().join("urls.txt"),
        "pages/counts.html\nhttp://127.0.0.1:1/nope.html\npages/missing.html\npages/nature.html\n",
    )
    .unwrap();
    let mut cfg = config(dir.path(), "pipeline.conf");
    cfg.fetch_timeout = std::time::Duration::from_secs(2);
    let summary = run_pipeline(&cfg).unwrap();
    assert_eq!(summary.documents_processed, 2);
    let failed: Vec<&str> = summary
        .documents_failed
        .iter()
        .map(|f| f.location.as_str())
        .collect();
    assert_eq!(
        failed,
        ["http://127.0.0.1:1/nope.html", "pages/missing.html"]
    );
    assert_eq!(
        summary.documents_processed + summary.documents_failed.len(),
        4
    );
    assert_eq!(summary.images_indexed, 4);
}

#[test]
fn duplicate_entries_count_as_failures() {
    let dir = scratch_fixtures();
    fs::write(
        dir.path().join("urls.txt"),
        "pages/counts.html\npages/counts.html\n",
    )
    .unwrap();
    let summary = run_pipeline(&config(dir.path(), "pipeline.conf")).unwrap();
    assert_eq!(summary.documents_processed, 1);
    assert_eq!(summary.documents_failed.len(), 1);
}

/// Serves fixture pages over HTTP; unknown paths get a 404.
fn serve_pages(requests: usize) -> (String, thread::JoinHandle<()>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let base = format!("http://{}", listener.local_addr().unwrap());
    let handle = thread::spawn(move || {
        for stream in listener.incoming().take(requests) {
            let mut stream = stream.unwrap();
            let mut line = String::new();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            reader.read_line(&mut line).unwrap();
            loop {
                let mut header = String::new();
                if reader.read_line(&mut header).unwrap() == 0 || header == "\r\n" {
                    break;
                }
            }
            let path = line
                .split_whitespace()
                .nth(1)
                .unwrap_or("/")
                .trim_start_matches('/');
            let body = fs::read(fixture("pages").join(path)).ok();
            let response = match body {
                Some(b) => {
                    let mut r = format!(
                        "HTTP/1.1 200 OK\r\nContent-Type: text/html\r\nContent-Length: {}\r\nConnection: close\r\n\r\n",
                        b.len()
                    )
                    .into_bytes();
                    r.extend(b);
                    r
                }
                None => b"HTTP/1.1 404 Not Found\r\nContent-Length: 0\r\nConnection: close\r\n\r\n"
                    .to_vec(),
            };
            stream.write_all(&response).unwrap();
        }
    });
    (base, handle)
}

#[test]
fn remote_pages_and_http_errors() {
    let (base, server) = serve_pages(3);
    let dir = scratch_fixtures();
    fs::write(
        dir.path().join("urls.txt"),
        format!("{base}/nature.html\n{base}/gone.html\n{base}/counts.html\n"),
    )
    .unwrap();
    let mut cfg = config(dir.path(), "pipeline.conf");
    cfg.concurrency = 1;
    let summary = run_pipeline(&cfg).unwrap();
    server.join().unwrap();

    let docs: Vec<&str> = summary
        .documents
        .iter()
        .map(|d| d.doc_id.as_str())
        .collect();
    assert_eq!(
        docs,
        [format!("{base}/nature.html"), format!("{base}/counts.html")]
    );
    assert_eq!(summary.documents_failed.len(), 1);
    assert!(
        summary.documents_failed[0].reason.contains("404"),
        "{:?}",
        summary.documents_failed
    );

    // Relative image sources resolve against the page URL.
    let idx = load_index(&fs::read(&cfg.index_path).unwrap()).unwrap();
    assert!(idx.image(&format!("{base}/photos/one.jpg")).is_some());
    assert!(idx.image(&format!("{base}/img/peak.jpg")).is_some());
}

#[test]
fn output_does_not_depend_on_concurrency() {
    let mut outputs = Vec::new();
    for workers in [1, 3, 16] {
        let dir = scratch_fixtures();
        let mut cfg = config(dir.path(), "pipeline.conf");
        cfg.concurrency = workers;
        run_pipeline(&cfg).unwrap();
        outputs.push((
            fs::read(&cfg.index_path).unwrap(),
            fs::read(&cfg.summary_path).unwrap(),
        ));
    }
    assert!(outputs.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn pipeline_matches_manual_composition() {
    let dir = scratch_fixtures();
    let cfg = config(dir.path(), "nature.conf");
    run_pipeline(&cfg).unwrap();
    let from_pipeline = fs::read_to_string(&cfg.index_path).unwrap();

    let kb = load_kb(&fs::read(fixture("nature.kb")).unwrap()).unwrap();
    let all: BTreeSet<TokenSource> = TokenSource::ALL.into_iter().collect();
    let mut idx = InvertedIndex::new();
    for page in ["pages/nature.html", "pages/lake.html"] {
        let doc = parse_document(
            page,
            &fs::read(fixture(page)).unwrap(),
            &Stopwords::english(),
        )
        .unwrap();
        let table = count_frequencies(&doc.tokens, &all);
        let cands = select_candidates(&table, "0.40".parse().unwrap()).unwrap();
        let ties = detect_ties(&cands);
        let words: BTreeSet<&str> = ties
            .iter()
            .flat_map(|g| g.keywords.iter().map(String::as_str))
            .filter(|w| kb.contains(w))
            .collect();
        let report = rank_all(&kb, words).unwrap();
        for g in &ties {
            let ordered = resolve_tie(&kb, g).unwrap();
            assert_eq!(ordered.len(), g.keywords.len());
        }
        idx.add(annotate_images(&doc, &table, &cands, &report, 10));
    }
    assert_eq!(save_index(&idx), from_pipeline);

    let mountain: Vec<&str> = idx
        .query("mountain")
        .iter()
        .map(|i| i.image_id.as_str())
        .collect();
    assert_eq!(
        mountain,
        [
            "/img/peak.jpg",
            "pages/img/sunrise.jpg",
            "https://images.example.org/lake.jpg"
        ]
    );
}

#[test]
fn cyclic_kb_is_fatal() {
    let dir = scratch_fixtures();
    let mut cfg = config(dir.path(), "pipeline.conf");
    cfg.kb_path = dir.path().join("cyclic.kb");
    let err = run_pipeline(&cfg).unwrap_err();
    assert!(err.to_string().contains("cyclic"), "{err}");
    assert!(!cfg.index_path.exists());
}
