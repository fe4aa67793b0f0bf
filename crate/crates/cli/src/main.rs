//! `onco` command line: convert, mcode, validate, match, score, serve.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};

use onco_core::catalog::Catalog;
use onco_core::conformance::Severity;
use onco_core::extraction::{BaselineExtractor, Extractor};
use onco_core::fhir::Bundle;
use onco_core::matching::{external_match, facts_from_bundle, match_all, MatchResult};
use onco_core::pipeline::{self, PipelineError};
use onco_core::registry::{paginate, Phase, Recruitment, Registry, RegistryError, StudyType, TrialFilter};
use onco_service::{HttpExtractor, HttpMatcherClient, ServiceConfig};

const EXIT_INVALID: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_IO: u8 = 3;

#[derive(Parser)]
#[command(name = "onco", version, about = "Clinical note to FHIR/mCODE conversion and trial matching")]
struct Cli {
    /// Catalog directory (code tables, value sets, profiles, corpus).
    #[arg(long, global = true, env = "ONCO_DATA_DIR")]
    data_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct InOut {
    /// Input file; standard input when omitted or "-".
    #[arg(long = "in")]
    input: Option<PathBuf>,
    /// Output file; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Plain-text note to document bundle.
    Convert(InOut),
    /// Bundle to mCODE-tagged bundle.
    Mcode(InOut),
    /// Check a bundle against the shipped profiles; exit 1 on any error.
    Validate {
        #[arg(long = "in")]
        input: Option<PathBuf>,
        /// Print the full report as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Rank registry trials for the patient in a bundle.
    Match {
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long, env = "ONCO_REGISTRY")]
        registry: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        page: usize,
        #[arg(long, default_value_t = 10)]
        page_size: usize,
        #[arg(long, value_parser = parse_recruitment)]
        recruitment: Option<Recruitment>,
        #[arg(long, value_parser = parse_phase)]
        phase: Option<Phase>,
        #[arg(long, value_parser = parse_study_type)]
        study_type: Option<StudyType>,
        #[arg(long)]
        condition: Option<String>,
        /// Also list trials ruled out.
        #[arg(long)]
        diagnostics: bool,
        /// Ask the matcher at ONCO_MATCHER_URL instead of the local registry engine.
        #[arg(long)]
        external: bool,
    },
    /// Score the extractor over a gold corpus.
    Score {
        #[arg(long)]
        corpus: Option<PathBuf>,
    },
    /// Run the HTTP service.
    Serve {
        #[arg(long, env = "ONCO_PORT", value_parser = clap::value_parser!(u16).range(1..))]
        port: Option<u16>,
        #[arg(long, env = "ONCO_HOST")]
        host: Option<std::net::IpAddr>,
        #[arg(long, env = "ONCO_REGISTRY")]
        registry: Option<PathBuf>,
        #[arg(long, env = "ONCO_CORS_ORIGIN")]
        cors_origin: Option<String>,
    },
}

fn parse_recruitment(s: &str) -> Result<Recruitment, String> {
    Recruitment::parse(s).ok_or_else(|| format!("expected one of {}", names(Recruitment::ALL.map(|r| r.as_str()))))
}

fn parse_phase(s: &str) -> Result<Phase, String> {
    Phase::parse(s).ok_or_else(|| format!("expected one of {}", names(Phase::ALL.map(|p| p.as_str()))))
}

fn parse_study_type(s: &str) -> Result<StudyType, String> {
    StudyType::parse(s).ok_or_else(|| format!("expected one of {}", names(StudyType::ALL.map(|p| p.as_str()))))
}

fn names<const N: usize>(v: [String; N]) -> String {
    v.join(", ")
}

/// A failure with its exit code; the message goes to stderr.
struct Failure(u8, String);

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        let code = match e.code() {
            "BackendFailure" | "CorpusError" => EXIT_IO,
            _ => EXIT_INVALID,
        };
        let msg = match e.path() {
            Some(p) => format!("{}: {e} ({p})", e.code()),
            None => format!("{}: {e}", e.code()),
        };
        Failure(code, msg)
    }
}

fn io_fail(path: &Path, e: std::io::Error) -> Failure {
    Failure(EXIT_IO, format!("{}: {e}", path.display()))
}

fn read_input(path: Option<&Path>) -> Result<String, Failure> {
    match path {
        Some(p) if p != Path::new("-") => std::fs::read_to_string(p).map_err(|e| io_fail(p, e)),
        _ => {
            let mut s = String::new();
            std::io::stdin()
                .read_to_string(&mut s)
                .map_err(|e| io_fail(Path::new("<stdin>"), e))?;
            Ok(s)
        }
    }
}

/// Writes the exact bytes, so stdout matches the service body.
fn write_output(path: Option<&Path>, text: &str) -> Result<(), Failure> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| io_fail(p, e)),
        None => {
            let mut out = std::io::stdout().lock();
            match out.write_all(text.as_bytes()).and_then(|_| out.flush()) {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(io_fail(Path::new("<stdout>"), e)),
                _ => Ok(()),
            }
        }
    }
}

fn catalog(dir: Option<&Path>) -> Result<&'static Catalog, Failure> {
    match dir {
        Some(d) => Catalog::load(d)
            .map(|c| &*Box::leak(Box::new(c)))
            .map_err(|e| Failure(EXIT_IO, format!("catalog: {e}"))),
        None => Catalog::try_global().map_err(|e| Failure(EXIT_IO, format!("catalog: {e}"))),
    }
}

fn extractor_timeout() -> Duration {
    let ms = std::env::var("ONCO_EXTRACTOR_TIMEOUT_MS")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(onco_service::DEFAULT_EXTRACTOR_TIMEOUT_MS);
    Duration::from_millis(ms)
}

fn extractor(cat: &'static Catalog) -> Box<dyn Extractor> {
    match std::env::var("ONCO_EXTRACTOR_URL").ok().filter(|u| !u.is_empty()) {
        Some(url) => Box::new(HttpExtractor::new(url, extractor_timeout())),
        None => Box::new(BaselineExtractor::new(cat)),
    }
}

fn load_registry(path: &Path) -> Result<Registry, Failure> {
    Registry::load(path).map_err(|e| match e {
        RegistryError::Io { .. } => Failure(EXIT_IO, e.to_string()),
        _ => Failure(EXIT_INVALID, format!("{}: {e}", path.display())),
    })
}

fn table(reg: &Registry, rows: &[MatchResult], first_rank: usize) -> String {
    let mut out = format!("{:<4} {:<15} {:>6}  {:<11} TITLE\n", "#", "LIKELIHOOD", "SCORE", "TRIAL");
    for (i, r) in rows.iter().enumerate() {
        let score = *r.score.numer() as f64 / *r.score.denom() as f64;
        let title = reg.get(&r.trial_id).map(|t| t.title.as_str()).unwrap_or("");
        out += &format!(
            "{:<4} {:<15} {:>6.3}  {:<11} {}\n",
            first_rank + i,
            r.likelihood.label(),
            score,
            r.trial_id,
            title
        );
    }
    out
}

fn run(cli: Cli) -> Result<u8, Failure> {
    match cli.command {
        Command::Convert(io) => {
            let cat = catalog(cli.data_dir.as_deref())?;
            let note = read_input(io.input.as_deref())?;
            let text = pipeline::convert_text(cat, extractor(cat).as_ref(), &note)?;
            write_output(io.out.as_deref(), &text)?;
            Ok(0)
        }
        Command::Mcode(io) => {
            let cat = catalog(cli.data_dir.as_deref())?;
            let text = pipeline::mcode_text(cat, &read_input(io.input.as_deref())?)?;
            write_output(io.out.as_deref(), &text)?;
            Ok(0)
        }
        Command::Validate { input, json } => {
            let cat = catalog(cli.data_dir.as_deref())?;
            let report = pipeline::validate(cat, &read_input(input.as_deref())?)?;
            let mut out = String::new();
            if json {
                out = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
            } else {
                for (path, issue) in report.all_issues() {
                    let sev = match issue.severity {
                        Severity::Error => "error",
                        Severity::Warning => "warning",
                    };
                    out += &format!("{sev}\t{path}\t{}\t{}\n", issue.rule, issue.message);
                }
                out += &format!(
                    "{}: {} error(s), {} warning(s)\n",
                    if report.conformant { "conformant" } else { "not conformant" },
                    report.error_count(),
                    report.warning_count()
                );
            }
            write_output(None, &out)?;
            Ok(if report.error_count() == 0 { 0 } else { EXIT_INVALID })
        }
        Command::Match {
            bundle,
            registry,
            page,
            page_size,
            recruitment,
            phase,
            study_type,
            condition,
            diagnostics,
            external,
        } => {
            if page == 0 || page_size == 0 {
                return Err(Failure(EXIT_USAGE, "--page and --page-size must be at least 1".into()));
            }
            let cat = catalog(cli.data_dir.as_deref())?;
            let b = Bundle::parse(&read_input(Some(&bundle))?).map_err(|e| Failure::from(PipelineError::from(e)))?;
            let reg_path = registry.unwrap_or_else(|| cat.dir.join("trials.ndjson"));
            let reg = load_registry(&reg_path)?;
            let filter = TrialFilter { recruitment, phase, study_type, condition_term: condition };
            let rows = if external {
                let url = std::env::var("ONCO_MATCHER_URL")
                    .ok()
                    .filter(|u| !u.is_empty())
                    .ok_or_else(|| Failure(EXIT_USAGE, "--external needs ONCO_MATCHER_URL".into()))?;
                let client = HttpMatcherClient::new(url, extractor_timeout());
                external_match(&client, &b)
                    .map_err(|e| Failure(EXIT_IO, e.to_string()))?
                    .into_iter()
                    .filter(|r| reg.get(&r.trial_id).is_some_and(|t| filter.accepts(t)))
                    .collect()
            } else {
                let facts = facts_from_bundle(cat, &b).map_err(|e| Failure(EXIT_INVALID, e.to_string()))?;
                let set = match_all(&reg, &facts, &filter);
                let mut rows = set.results;
                if diagnostics {
                    eprintln!("{} trial(s) ruled out", set.no_match.len());
                    rows.extend(set.no_match);
                }
                rows
            };
            let p = paginate(&rows, page, page_size).expect("paging checked above");
            let first = (page - 1) * page_size + 1;
            write_output(None, &format!("{}\n{}", p.range_label, table(&reg, &p.items, first)))?;
            Ok(0)
        }
        Command::Score { corpus } => {
            let cat = catalog(cli.data_dir.as_deref())?;
            let dir = corpus.unwrap_or_else(|| pipeline::default_corpus_dir(cat));
            let report = pipeline::score_corpus(cat, extractor(cat).as_ref(), &dir)?;
            write_output(None, &(serde_json::to_string_pretty(&report.to_value()).expect("report serializes") + "\n"))?;
            Ok(0)
        }
        Command::Serve { port, host, registry, cors_origin } => {
            let mut config = ServiceConfig::from_env().map_err(|e| Failure(EXIT_USAGE, e.to_string()))?;
            config.data_dir = cli.data_dir.or(config.data_dir);
            config.port = port.unwrap_or(config.port);
            config.host = host.unwrap_or(config.host);
            config.registry_path = registry.or(config.registry_path);
            config.cors_allowed_origin = cors_origin.unwrap_or(config.cors_allowed_origin);
            let rt = tokio::runtime::Runtime::new().map_err(|e| Failure(EXIT_IO, e.to_string()))?;
            rt.block_on(onco_service::serve(config)).map_err(|e| Failure(EXIT_IO, e.to_string()))?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(Failure(code, msg)) => {
            eprintln!("onco: {msg}");
            ExitCode::from(code)
        }
    }
}
