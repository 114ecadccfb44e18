use std::collections::BTreeSet;
use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use kwrank::annotation_index::{load_index, IndexError};
use kwrank::frequency::{count_frequencies, detect_ties, select_candidates, FrequencyError};
use kwrank::importance_rank::{rank_all, resolve_tie, RankError};
use kwrank::knowledge_base::{mine_rules, parse_kb, parse_transactions, KbError};
use kwrank::pipeline::{
    load_checked_kb, load_stopwords, parse_sources, parse_stopword_setting, run_pipeline,
    ConfigOverrides, PipelineError, StopwordSetting, CONFIG_ENV,
};
use kwrank::text_ingest::{load_source, parse_document, FetchOptions, IngestError, TokenSource};
use kwrank::Fraction;

#[derive(Parser)]
#[command(
    name = "kwrank",
    version,
    about = "Keyword annotation and indexing for web images"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline described by a config file.
    Run(RunArgs),
    /// Print correlation ranks of words.
    Rank {
        #[arg(long)]
        kb: PathBuf,
        #[arg(required = true)]
        words: Vec<String>,
    },
    /// Parse one page and print its candidate keywords and tie groups.
    Candidates {
        #[arg(long, default_value = "0.40")]
        threshold: Fraction,
        /// Stopword file, or `none`.
        #[arg(long)]
        stopwords: Option<String>,
        #[arg(long, value_parser = parse_sources)]
        sources: Option<BTreeSet<TokenSource>>,
        /// Order tie groups by rank over this knowledge base.
        #[arg(long)]
        kb: Option<PathBuf>,
        #[arg(long, default_value_t = 30.0)]
        fetch_timeout: f64,
        location: String,
    },
    /// Mine pairwise rules from a transactions file and print a knowledge base.
    Mine {
        #[arg(long)]
        min_support: Fraction,
        #[arg(long)]
        min_confidence: Fraction,
        #[arg(long, short)]
        output: Option<PathBuf>,
        transactions: PathBuf,
    },
    /// Print images annotated with a keyword.
    Query {
        #[arg(long)]
        index: PathBuf,
        keyword: String,
    },
    /// Check a knowledge base file for format errors and cycles.
    ValidateKb { file: PathBuf },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, env = CONFIG_ENV)]
    config: Option<PathBuf>,
    #[arg(long)]
    url_list: Option<PathBuf>,
    #[arg(long)]
    kb: Option<PathBuf>,
    /// Stopword file, `none`, or `default`.
    #[arg(long)]
    stopwords: Option<String>,
    #[arg(long)]
    threshold: Option<Fraction>,
    #[arg(long)]
    max_annotations: Option<usize>,
    #[arg(long, value_parser = parse_sources)]
    sources: Option<BTreeSet<TokenSource>>,
    #[arg(long)]
    fetch_timeout: Option<f64>,
    #[arg(long)]
    concurrency: Option<usize>,
    #[arg(long)]
    index: Option<PathBuf>,
    #[arg(long)]
    summary: Option<PathBuf>,
    #[arg(long)]
    rank_all_candidates: bool,
}

/// A failure reported as `error\t<kind>\t<message>` on stderr.
struct Failure {
    kind: &'static str,
    message: String,
}

impl Failure {
    fn new(kind: &'static str, message: impl Display) -> Self {
        Failure {
            kind,
            message: message.to_string(),
        }
    }
}

impl From<KbError> for Failure {
    fn from(e: KbError) -> Self {
        let kind = match &e {
            KbError::Format { .. } => "kb-format",
            KbError::Vocabulary { .. } => "kb-vocabulary",
            KbError::SelfLoop { .. } => "kb-self-loop",
            KbError::UnknownKeyword { .. } => "unknown-keyword",
            KbError::Cycle(_) => "cyclic-knowledge-base",
            KbError::EmptyInput => "empty-input",
        };
        Failure::new(kind, e)
    }
}

impl From<RankError> for Failure {
    fn from(e: RankError) -> Self {
        let kind = match &e {
            RankError::UnknownKeyword { .. } => "unknown-keyword",
            RankError::CyclicKnowledgeBase(_) => "cyclic-knowledge-base",
        };
        Failure::new(kind, e)
    }
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Config(_) => Failure::new("config", e),
            PipelineError::Kb { path, source } => {
                let inner = Failure::from(source);
                Failure::new(inner.kind, format!("{path}: {}", inner.message))
            }
            PipelineError::Io { .. } => Failure::new("io", e),
        }
    }
}

impl From<IngestError> for Failure {
    fn from(e: IngestError) -> Self {
        let kind = match &e {
            IngestError::InvalidEncoding { .. } => "invalid-encoding",
            IngestError::NotFound(_) => "not-found",
            IngestError::Fetch { .. } => "fetch",
            IngestError::Io { .. } => "io",
        };
        Failure::new(kind, e)
    }
}

impl From<IndexError> for Failure {
    fn from(e: IndexError) -> Self {
        Failure::new("index-format", e)
    }
}

impl From<FrequencyError> for Failure {
    fn from(e: FrequencyError) -> Self {
        Failure::new("empty-table", e)
    }
}

fn read(path: &Path) -> Result<Vec<u8>, Failure> {
    fs::read(path).map_err(|e| Failure::new("io", format!("{}: {e}", path.display())))
}

fn single_line(s: &str) -> String {
    s.replace(['\n', '\r', '\t'], " ")
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error\t{}\t{}", f.kind, single_line(&f.message));
            ExitCode::from(1)
        }
    }
}

fn dispatch(command: Command) -> Result<(), Failure> {
    match command {
        Command::Run(args) => run(args),
        Command::Rank { kb, words } => {
            let kb = load_checked_kb(&kb)?;
            let words: Vec<String> = words.iter().map(|w| w.trim().to_lowercase()).collect();
            let report = rank_all(&kb, words.iter().map(String::as_str))?;
            print!("{}", report.to_tsv());
            Ok(())
        }
        Command::Candidates {
            threshold,
            stopwords,
            sources,
            kb,
            fetch_timeout,
            location,
        } => {
            let setting = stopwords.map_or(StopwordSetting::Default, |s| {
                parse_stopword_setting(&s, Path::new(""))
            });
            let stopwords = load_stopwords(&setting)?;
            let opts = FetchOptions {
                timeout: std::time::Duration::from_secs_f64(fetch_timeout.max(0.001)),
                base_dir: None,
            };
            let bytes = load_source(&location, &opts)?;
            let doc = parse_document(&location, &bytes, &stopwords)?;
            let sources = sources.unwrap_or_else(|| TokenSource::ALL.into_iter().collect());
            let table = count_frequencies(&doc.tokens, &sources);
            if table.is_empty() {
                return Ok(());
            }
            let candidates = select_candidates(&table, threshold)?;
            let kb = kb.map(|p| load_checked_kb(&p)).transpose()?;
            for (k, c) in &candidates.members {
                println!("candidate\t{k}\t{c}");
            }
            for group in detect_ties(&candidates) {
                let ordered = match &kb {
                    Some(kb) => resolve_tie(kb, &group)?,
                    None => group.keywords.iter().cloned().collect(),
                };
                println!("tie\t{}\t{}", group.count, ordered.join(" "));
            }
            Ok(())
        }
        Command::Mine {
            min_support,
            min_confidence,
            output,
            transactions,
        } => {
            let text = String::from_utf8_lossy(&read(&transactions)?).into_owned();
            let mined = mine_rules(&parse_transactions(&text), min_support, min_confidence)?;
            let out = mined.to_kb_text();
            match output {
                Some(p) => fs::write(&p, out)
                    .map_err(|e| Failure::new("io", format!("{}: {e}", p.display())))?,
                None => print!("{out}"),
            }
            Ok(())
        }
        Command::Query { index, keyword } => {
            let idx = load_index(&read(&index)?)?;
            let keyword = keyword.trim().to_lowercase();
            for img in idx.query(&keyword) {
                if let Some(a) = img.annotation(&keyword) {
                    println!(
                        "{}\t{}\t{}\t{}",
                        img.image_id,
                        img.owner_doc,
                        a.count,
                        a.rank_decimal()
                    );
                }
            }
            Ok(())
        }
        Command::ValidateKb { file } => {
            let loaded = parse_kb(&read(&file)?)?;
            for w in &loaded.warnings {
                eprintln!("warning\t{w}");
            }
            loaded.kb.validate_all()?;
            println!(
                "ok\trules={}\tvocabulary={}",
                loaded.kb.rules().len(),
                loaded.kb.n_total()
            );
            Ok(())
        }
    }
}

fn run(args: RunArgs) -> Result<(), Failure> {
    let file = match &args.config {
        Some(p) => ConfigOverrides::load(p)?,
        None => ConfigOverrides::default(),
    };
    let cwd = Path::new("");
    let flags = ConfigOverrides {
        url_list: args.url_list,
        kb: args.kb,
        stopwords: args.stopwords.map(|s| parse_stopword_setting(&s, cwd)),
        threshold: args.threshold,
        max_annotations: args.max_annotations,
        sources: args.sources,
        fetch_timeout_secs: args.fetch_timeout,
        index: args.index,
        summary: args.summary,
        concurrency: args.concurrency,
        rank_all_candidates: args.rank_all_candidates.then_some(true),
    };
    let config = file.merged_with(flags).finish()?;
    let summary = run_pipeline(&config)?;
    print!("{}", summary.to_text());
    Ok(())
}
