use std::collections::BTreeMap;

use iral_core::merger::Source;
use iral_core::pipeline::{CompareOutcome, SearchOutcome};
use iral_core::{Parameter, Query, RankedResult, SearchResultRecord};
use serde::{Deserialize, Serialize};

/// One ranked result as the UI sees it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultView {
    pub position: usize,
    pub url: String,
    pub url_hash: String,
    pub title: String,
    pub snippet: String,
    pub domain: String,
    pub score: f64,
    pub pagerank: f64,
    pub features: BTreeMap<String, f64>,
    pub sources: Vec<Source>,
}

impl From<&RankedResult> for ResultView {
    fn from(r: &RankedResult) -> Self {
        Self {
            position: r.position,
            url: r.record.canonical.to_string(),
            url_hash: format!("{:016x}", r.record.url_hash),
            title: r.record.title.clone(),
            snippet: r.record.snippet.clone(),
            domain: r.record.domain.clone(),
            score: r.score,
            pagerank: r.pagerank,
            features: Parameter::ALL
                .into_iter()
                .map(|p| (p.key().to_string(), r.features.get(p)))
                .collect(),
            sources: r.record.sources.clone(),
        }
    }
}

pub fn result_views(results: &[RankedResult]) -> Vec<ResultView> {
    results.iter().map(ResultView::from).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResponse {
    pub query: Query,
    pub k: usize,
    pub degraded: bool,
    pub failed_engines: Vec<String>,
    pub results: Vec<ResultView>,
}

impl From<&SearchOutcome> for SearchResponse {
    fn from(o: &SearchOutcome) -> Self {
        Self {
            query: o.query.clone(),
            k: o.k,
            degraded: o.degraded,
            failed_engines: o.failed_engines.clone(),
            results: result_views(&o.results),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineColumn {
    pub system_id: String,
    pub results: Vec<SearchResultRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareResponse {
    pub query: Query,
    pub k: usize,
    pub degraded: bool,
    pub failed_engines: Vec<String>,
    pub engines: Vec<EngineColumn>,
    pub iral: Vec<ResultView>,
}

impl From<&CompareOutcome> for CompareResponse {
    fn from(o: &CompareOutcome) -> Self {
        Self {
            query: o.query.clone(),
            k: o.k,
            degraded: o.degraded,
            failed_engines: o.failed_engines.clone(),
            engines: o
                .engines
                .iter()
                .map(|l| EngineColumn {
                    system_id: l.engine_id.clone(),
                    results: l.results.clone(),
                })
                .collect(),
            iral: result_views(&o.iral),
        }
    }
}
