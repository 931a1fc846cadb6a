//! Command line and HTTP front end for the iral meta-search engine.

pub mod service;
pub mod views;

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use anyhow::{bail, Context};
use iral_core::backends::parse_serp_fixture;
use iral_core::evaluator::{Judgments, RatingStore};
use iral_core::ranker::{pagerank, PageRankError, PageRankScores};
use iral_core::{AppConfig, LinkGraph, PageRankParams, Pipeline, SearchResultRecord};
use serde::Serialize;

use crate::service::AppState;

pub fn build_state(cfg: &AppConfig) -> anyhow::Result<AppState> {
    let pipeline = Pipeline::from_config(cfg).context("building pipeline")?;
    let judgments = cfg
        .judgments_path
        .as_ref()
        .map(Judgments::load)
        .transpose()
        .context("loading judgments")?;
    Ok(AppState {
        pipeline,
        ratings: Arc::new(RatingStore::open(cfg.ratings_path.clone())),
        judgments,
        default_k: cfg.default_k,
    })
}

/// Reads the `rank` command's input: a JSON array of SERP objects
/// (`{"engine", "query", "results": [{"rank", "url", "title", "snippet"}]}`)
/// that all answer the same query.
pub fn parse_rank_input(text: &str) -> anyhow::Result<(String, Vec<Vec<SearchResultRecord>>)> {
    let items: Vec<serde_json::Value> =
        serde_json::from_str(text).context("stdin is not a JSON array")?;
    let mut query: Option<String> = None;
    let mut lists = Vec::with_capacity(items.len());
    for (i, item) in items.iter().enumerate() {
        let fixture = parse_serp_fixture(&item.to_string(), &format!("stdin[{i}]"))?;
        let key = iral_core::query::normalize(&fixture.query)?.key();
        match &query {
            Some(q) if *q != key => bail!("stdin[{i}] answers {key:?}, expected {q:?}"),
            Some(_) => {}
            None => query = Some(key),
        }
        lists.push(fixture.records);
    }
    let Some(query) = query else {
        bail!("stdin holds no result lists");
    };
    Ok((query, lists))
}

/// Edge list: one `from to` pair per line. A line with a single token adds
/// an isolated node; blank lines and `#` comments are skipped.
pub fn parse_edge_list(text: &str) -> anyhow::Result<LinkGraph<String>> {
    let mut nodes = Vec::new();
    let mut edges = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        let fields: Vec<&str> = line.split_whitespace().collect();
        match fields.as_slice() {
            [] => {}
            [node] => nodes.push(node.to_string()),
            [from, to] => {
                nodes.push(from.to_string());
                nodes.push(to.to_string());
                edges.push((from.to_string(), to.to_string()));
            }
            _ => bail!("line {}: expected `from to`, got {line:?}", n + 1),
        }
    }
    let mut graph = LinkGraph::new(nodes);
    for (from, to) in &edges {
        graph.add_edge(from, to);
    }
    Ok(graph)
}

#[derive(Debug, Serialize)]
pub struct PageRankReport {
    pub converged: bool,
    pub iterations: usize,
    pub residual: f64,
    pub scores: BTreeMap<String, f64>,
}

pub fn run_pagerank(
    graph: &LinkGraph<String>,
    params: &PageRankParams,
) -> anyhow::Result<PageRankReport> {
    let result = pagerank(graph, params);
    let converged = result.is_ok();
    if let Err(e @ (PageRankError::InvalidParams(_) | PageRankError::EmptyGraph)) = &result {
        bail!("{e}");
    }
    let scores = PageRankScores::from_result(result).expect("only NoConvergence remains");
    Ok(PageRankReport {
        converged,
        iterations: scores.iterations,
        residual: scores.residual,
        scores: scores.scores,
    })
}

pub fn read_to_string(path: &Path) -> anyhow::Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}
