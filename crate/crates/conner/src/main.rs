use std::net::{IpAddr, Ipv4Addr, SocketAddr};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use conner::config::RunConfig;
use conner::pipeline::{self, TestQuery};
use conner::report;
use conner::server;
use conner::Error;
use conner_core::selection::{DEFAULT_DEMONSTRATIONS, DEFAULT_POOL_SAMPLE};
use conner_core::stats::DEFAULT_PERMUTATIONS;
use conner_core::MockBackend;

#[derive(Parser)]
#[command(name = "conner", version, about = "Reference-free evaluation of knowledge for knowledge-intensive tasks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Score every item of the configured dataset.
    Evaluate {
        #[arg(short, long)]
        config: PathBuf,
    },
    /// Somers' D between metric scores and human ratings.
    Correlate {
        #[arg(long)]
        scores: PathBuf,
        /// JSON lines with `id` and `human_ratings`.
        #[arg(long)]
        human: PathBuf,
        #[arg(long, num_args = 1.., value_delimiter = ',', required = true)]
        metrics: Vec<String>,
        #[arg(long, default_value_t = DEFAULT_PERMUTATIONS)]
        permutations: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Defaults to the directory of the scores file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Choose few-shot demonstrations and render the prompt.
    SelectPrompt {
        #[arg(short, long)]
        config: PathBuf,
        #[arg(long, default_value_t = DEFAULT_POOL_SAMPLE)]
        m: usize,
        #[arg(long, default_value_t = DEFAULT_DEMONSTRATIONS)]
        n: usize,
        /// Dataset item to build the prompt for.
        #[arg(long, conflicts_with_all = ["query", "topic"], required_unless_present = "query")]
        test_id: Option<String>,
        #[arg(long)]
        query: Option<String>,
        #[arg(long, requires = "query")]
        topic: Option<String>,
    },
    /// Pick the best generated candidate for each query.
    SelectKnowledge {
        #[arg(short, long)]
        config: PathBuf,
        #[arg(long)]
        candidates: PathBuf,
    },
    /// Serve the deterministic mock backend over HTTP.
    ServeMock {
        /// JSON lines with `source_id` and `text`.
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value_t = 8000)]
        port: u16,
        #[arg(long, default_value_t = IpAddr::V4(Ipv4Addr::LOCALHOST))]
        host: IpAddr,
    },
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    match cli.command {
        Command::Evaluate { config } => {
            let cfg = RunConfig::load(&config)?;
            let out = pipeline::run_evaluate(&cfg)?;
            let m = &out.manifest;
            println!(
                "{} items, {} failed; cache hits {} misses {}; backend calls {}; output in {}",
                m.items,
                m.failed.len(),
                m.cache.hits,
                m.cache.misses,
                m.cache.backend_calls,
                out.output_dir.display()
            );
            if !m.failed.is_empty() {
                return Err(Error::PartialFailure {
                    failed: m.failed.len(),
                    total: m.items,
                });
            }
        }
        Command::Correlate {
            scores,
            human,
            metrics,
            permutations,
            seed,
            out,
        } => {
            let out = out.unwrap_or_else(|| scores.parent().map(PathBuf::from).unwrap_or_default());
            let rows = pipeline::run_correlate(&scores, &human, &metrics, permutations, seed, &out)?;
            print!("{}", report::correlation_markdown(&rows));
        }
        Command::SelectPrompt {
            config,
            m,
            n,
            test_id,
            query,
            topic,
        } => {
            let cfg = RunConfig::load(&config)?;
            let test = match (test_id, query) {
                (Some(id), _) => TestQuery::Item(id),
                (None, Some(query)) => TestQuery::Text { query, topic },
                (None, None) => unreachable!("clap requires one"),
            };
            let (prompt, _) = pipeline::run_select_prompt(&cfg, m, n, &test)?;
            print!("{prompt}");
        }
        Command::SelectKnowledge { config, candidates } => {
            let cfg = RunConfig::load(&config)?;
            let manifest = pipeline::run_select_knowledge(&cfg, &candidates)?;
            println!(
                "{} queries selected, {} failed; output in {}",
                manifest.selections.len(),
                manifest.failed.len(),
                cfg.output_dir.display()
            );
            if !manifest.failed.is_empty() {
                return Err(Error::PartialFailure {
                    failed: manifest.failed.len(),
                    total: manifest.failed.len() + manifest.selections.len(),
                });
            }
        }
        Command::ServeMock { corpus, port, host } => {
            let passages = server::load_corpus(&corpus).map_err(Error::Data)?;
            let addr = SocketAddr::new(host, port);
            server::serve_forever(MockBackend::new(passages), addr)
                .map_err(|e| Error::Unavailable(format!("cannot serve on {addr}: {e}")))?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
