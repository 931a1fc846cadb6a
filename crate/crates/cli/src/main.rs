use std::io::{Read, Write};
use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::Context;
use chrono::{DateTime, Utc};
use clap::{Parser, Subcommand};
use iral_cli::views::{result_views, CompareResponse, SearchResponse};
use iral_cli::{
    build_state, parse_edge_list, parse_rank_input, read_to_string, run_pagerank, service,
};
use iral_core::evaluator::Judgments;
use iral_core::extractor::{compute_features, extract_meta};
use iral_core::query;
use iral_core::retriever::{decode_body, PageDocument};
use iral_core::{canonicalize, AppConfig, PageRankParams, Pipeline, RunMode, WeightVector};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(
    name = "iral",
    version,
    about = "Meta-search with SEO-feature re-ranking"
)]
struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true, default_value = "iral.toml", env = "IRAL_CONFIG")]
    config: PathBuf,
    /// Force offline mode (fixture engines and corpus pages only).
    #[arg(long, global = true)]
    offline: bool,
    /// JSON weights file with all nine parameter keys.
    #[arg(long, global = true)]
    weights: Option<PathBuf>,
    /// Number of results to keep.
    #[arg(long, global = true)]
    k: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Merged, re-ranked results for a query.
    Search { query: Vec<String> },
    /// Each engine's raw list next to the merged list.
    Compare {
        query: Vec<String>,
        /// Comma-separated engine ids to include.
        #[arg(long, value_delimiter = ',')]
        engines: Option<Vec<String>>,
    },
    /// Merge and rank SERP lists read from stdin.
    Rank,
    /// On-page signals (and features, given a query) of one HTML file.
    Extract {
        file: PathBuf,
        /// URL the page was served from; relative links resolve against it.
        #[arg(long, default_value = "http://localhost/")]
        url: String,
        #[arg(long)]
        query: Option<String>,
        #[arg(long, default_value = "")]
        snippet: String,
        /// Reference time for freshness (RFC 3339); defaults to now.
        #[arg(long)]
        now: Option<DateTime<Utc>>,
    },
    /// PageRank of an edge-list file.
    Pagerank {
        file: PathBuf,
        #[arg(long, default_value_t = 0.85)]
        damping: f64,
        #[arg(long, default_value_t = 1e-8)]
        epsilon: f64,
        #[arg(long, default_value_t = 100)]
        max_iters: usize,
    },
    /// Mean precision of every engine and of iral against judgments.
    Eval {
        /// Judgments file; defaults to the configured one.
        #[arg(long)]
        judgments: Option<PathBuf>,
        /// Print the comparison table instead of JSON.
        #[arg(long)]
        table: bool,
    },
    /// Run the JSON HTTP API.
    Serve {
        /// Address to bind, overriding `listen_address` from the config.
        #[arg(long)]
        listen: Option<SocketAddr>,
        /// Directory of static UI files served at `/`.
        #[arg(long, value_name = "DIR")]
        static_dir: Option<PathBuf>,
    },
}

fn print_out(text: &str) -> anyhow::Result<()> {
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|()| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn print_json<T: Serialize>(value: &T) -> anyhow::Result<()> {
    print_out(&(serde_json::to_string_pretty(value)? + "\n"))
}

fn load_config(cli: &Cli) -> anyhow::Result<AppConfig> {
    let mut cfg = AppConfig::load(&cli.config)?;
    if cli.offline {
        cfg.mode = RunMode::Offline;
        cfg.validate()?;
    }
    if let Some(path) = &cli.weights {
        cfg.weights = WeightVector::load(path)?;
    }
    if cli.k == Some(0) {
        anyhow::bail!("--k must be at least 1");
    }
    if let Some(k) = cli.k {
        cfg.default_k = k;
    }
    Ok(cfg)
}

async fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match &cli.command {
        Command::Search { query } => {
            let cfg = load_config(&cli)?;
            let pipeline = Pipeline::from_config(&cfg)?;
            let outcome = pipeline
                .search(&query.join(" "), cfg.default_k, None)
                .await?;
            print_json(&SearchResponse::from(&outcome))?;
        }
        Command::Compare { query, engines } => {
            let cfg = load_config(&cli)?;
            let pipeline = Pipeline::from_config(&cfg)?;
            let outcome = pipeline
                .compare(&query.join(" "), cfg.default_k, engines.as_deref())
                .await?;
            print_json(&CompareResponse::from(&outcome))?;
        }
        Command::Rank => {
            let cfg = load_config(&cli)?;
            let pipeline = Pipeline::from_config(&cfg)?;
            let mut input = String::new();
            std::io::stdin()
                .read_to_string(&mut input)
                .context("reading stdin")?;
            let (raw, lists) = parse_rank_input(&input)?;
            let q = pipeline.prepare_query(&raw).await?;
            let mut ranked = pipeline.rank_lists(&q, &lists, &cfg.weights).await;
            ranked.truncate(cfg.default_k);
            print_json(&result_views(&ranked))?;
        }
        Command::Extract {
            file,
            url,
            query,
            snippet,
            now,
        } => {
            let bytes =
                std::fs::read(file).with_context(|| format!("reading {}", file.display()))?;
            let doc = PageDocument {
                canonical_url: canonicalize(url)?,
                status: 200,
                content_type: "text/html".into(),
                last_modified: None,
                expires: None,
                body: decode_body(&bytes, "text/html"),
                fetched_at: Utc::now(),
            };
            let meta = extract_meta(&doc);
            let features = query
                .as_deref()
                .map(query::normalize)
                .transpose()?
                .map(|q| compute_features(&q, snippet, &meta, 0.0, now.unwrap_or_else(Utc::now)));
            print_json(&serde_json::json!({ "meta": meta, "features": features }))?;
        }
        Command::Pagerank {
            file,
            damping,
            epsilon,
            max_iters,
        } => {
            let graph = parse_edge_list(&read_to_string(file)?)?;
            let params = PageRankParams {
                damping: *damping,
                epsilon: *epsilon,
                max_iters: *max_iters,
            };
            let report = run_pagerank(&graph, &params)?;
            print_json(&report)?;
            if !report.converged {
                eprintln!(
                    "error: no convergence after {} iterations",
                    report.iterations
                );
                return Ok(ExitCode::from(2));
            }
        }
        Command::Eval { judgments, table } => {
            let cfg = load_config(&cli)?;
            let path = judgments
                .clone()
                .or_else(|| cfg.judgments_path.clone())
                .context("no judgments file given or configured")?;
            let judgments = Judgments::load(path)?;
            let pipeline = Pipeline::from_config(&cfg)?;
            let report = pipeline.evaluate(&judgments, cli.k).await?;
            if *table {
                print_out(&report.to_string())?;
            } else {
                print_json(&report)?;
            }
        }
        Command::Serve { listen, static_dir } => {
            let cfg = load_config(&cli)?;
            let addr = listen.unwrap_or(cfg.listen_address);
            let state = Arc::new(build_state(&cfg)?);
            let app = service::router(state, static_dir.clone());
            let listener = tokio::net::TcpListener::bind(addr)
                .await
                .with_context(|| format!("binding {addr}"))?;
            tracing::info!(%addr, "listening");
            axum::serve(listener, app).await?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

#[tokio::main]
async fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::from_default_env())
        .with_writer(std::io::stderr)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli).await {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
