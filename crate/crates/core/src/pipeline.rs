//! End-to-end path from a raw query to a ranked result list:
//! normalize, expand, fan out to backends, merge, retrieve pages, extract
//! features, rank.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backends::{build_backend, BackendError, SearchBackend, SearchResultRecord};
use crate::config::{AppConfig, RunMode};
use crate::evaluator::{evaluate_system, EvalError, Judgments, PrecisionTable};
use crate::extractor::{compute_features, extract_meta, PageMeta};
use crate::merger::{canonicalize, merge, CanonicalUrl, MergedRecord};
use crate::query::{self, Query, QueryError, RemoteThesaurus, Thesaurus};
use crate::ranker::{self, build_link_graph, pagerank, Candidate, PageRankParams, PageRankScores, RankError, RankedResult, WeightVector};
use crate::retriever::{Corpus, FetchError, Fetcher};

/// Identifier of the merged, re-ranked system in comparisons and ratings.
pub const SYSTEM_ID: &str = "iral";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Query(#[from] QueryError),
    #[error("all backends failed: {}", .0.join(", "))]
    AllBackendsFailed(Vec<String>),
    #[error("unknown engine {0}")]
    UnknownEngine(String),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Fetch(#[from] FetchError),
    #[error(transparent)]
    Rank(#[from] RankError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

pub enum ThesaurusProvider {
    Local(Thesaurus),
    Remote(RemoteThesaurus),
}

pub enum PageSource {
    Corpus(Corpus),
    Live(Fetcher),
}

pub struct EngineSlot {
    pub backend: Box<dyn SearchBackend>,
    pub page_size: usize,
}

pub struct Pipeline {
    pub engines: Vec<EngineSlot>,
    pub thesaurus: ThesaurusProvider,
    pub pages: PageSource,
    pub weights: WeightVector,
    pub pagerank: PageRankParams,
    pub use_pagerank_for_links: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome {
    pub query: Query,
    pub k: usize,
    pub degraded: bool,
    pub failed_engines: Vec<String>,
    pub results: Vec<RankedResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineList {
    pub engine_id: String,
    pub results: Vec<SearchResultRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareOutcome {
    pub query: Query,
    pub k: usize,
    pub degraded: bool,
    pub failed_engines: Vec<String>,
    pub engines: Vec<EngineList>,
    pub iral: Vec<RankedResult>,
}

struct Gathered {
    lists: Vec<EngineList>,
    failed: Vec<String>,
}

/// Canonical URLs of a raw engine list, first occurrence kept.
pub fn canonical_list(records: &[SearchResultRecord]) -> Vec<CanonicalUrl> {
    let mut seen = HashSet::new();
    records
        .iter()
        .filter_map(|r| canonicalize(&r.url).ok())
        .filter(|c| seen.insert(c.clone()))
        .collect()
}

/// Stand-in for a page that could not be retrieved: only the engine's title is known.
fn fallback_meta(record: &MergedRecord) -> PageMeta {
    PageMeta {
        title: (!record.title.is_empty()).then(|| record.title.clone()),
        ..PageMeta::default()
    }
}

impl Pipeline {
    pub fn from_config(cfg: &AppConfig) -> Result<Self, PipelineError> {
        let timeout = cfg.fetch_policy.timeout;
        let base = cfg.fixture_base();
        let engines = cfg
            .active_engines()
            .into_iter()
            .map(|e| {
                Ok(EngineSlot {
                    backend: build_backend(e, &base, timeout)?,
                    page_size: e.page_size as usize,
                })
            })
            .collect::<Result<Vec<_>, BackendError>>()?;
        let thesaurus = match (&cfg.thesaurus_path, &cfg.thesaurus_endpoint) {
            (Some(path), _) => ThesaurusProvider::Local(Thesaurus::load(path)?),
            (None, Some(endpoint)) => ThesaurusProvider::Remote(RemoteThesaurus::new(endpoint.clone(), timeout)?),
            (None, None) => ThesaurusProvider::Local(Thesaurus::empty()),
        };
        let pages = match cfg.mode {
            RunMode::Offline => PageSource::Corpus(Corpus::load(cfg.corpus_manifest.as_ref().expect("validated"))?),
            RunMode::Live => PageSource::Live(Fetcher::new(cfg.fetch_policy.clone())?),
        };
        Ok(Self {
            engines,
            thesaurus,
            pages,
            weights: cfg.weights,
            pagerank: cfg.pagerank,
            use_pagerank_for_links: cfg.use_pagerank_for_links,
        })
    }

    pub fn engine_ids(&self) -> Vec<&str> {
        self.engines.iter().map(|e| e.backend.engine_id()).collect()
    }

    /// Normalizes and expands. A remote thesaurus that cannot be reached
    /// contributes no expansions.
    pub async fn prepare_query(&self, raw: &str) -> Result<Query, PipelineError> {
        let q = query::normalize(raw)?;
        Ok(match &self.thesaurus {
            ThesaurusProvider::Local(t) => query::expand(q, t),
            ThesaurusProvider::Remote(remote) if q.terms.len() == 1 => match remote.lookup(&q.terms[0]).await {
                Ok(t) => query::expand(q, &t),
                Err(e) => {
                    tracing::warn!(error = %e, "thesaurus lookup failed");
                    q
                }
            },
            ThesaurusProvider::Remote(_) => q,
        })
    }

    async fn gather(&self, q: &Query, only: Option<&[String]>) -> Result<Gathered, PipelineError> {
        if let Some(filter) = only {
            if let Some(unknown) = filter.iter().find(|id| !self.engine_ids().contains(&id.as_str())) {
                return Err(PipelineError::UnknownEngine(unknown.clone()));
            }
        }
        let selected: Vec<&EngineSlot> = self
            .engines
            .iter()
            .filter(|e| only.is_none_or(|f| f.iter().any(|id| id == e.backend.engine_id())))
            .collect();
        let responses = futures::future::join_all(selected.iter().map(|e| e.backend.search(q, e.page_size))).await;
        let mut gathered = Gathered {
            lists: Vec::new(),
            failed: Vec::new(),
        };
        for (slot, response) in selected.iter().zip(responses) {
            let engine_id = slot.backend.engine_id().to_string();
            match response {
                Ok(results) => gathered.lists.push(EngineList { engine_id, results }),
                Err(e) => {
                    tracing::warn!(engine = %engine_id, error = %e, "backend failed");
                    gathered.failed.push(engine_id);
                }
            }
        }
        if gathered.lists.is_empty() && !gathered.failed.is_empty() {
            return Err(PipelineError::AllBackendsFailed(gathered.failed));
        }
        Ok(gathered)
    }

    /// Clock used for freshness: the corpus timestamp offline, wall time live.
    pub fn now(&self) -> DateTime<Utc> {
        match &self.pages {
            PageSource::Corpus(c) => c.fixed_timestamp,
            PageSource::Live(_) => Utc::now(),
        }
    }

    async fn retrieve(&self, records: &[MergedRecord]) -> BTreeMap<CanonicalUrl, PageMeta> {
        let origins: BTreeSet<String> = records.iter().map(|r| r.canonical.origin()).collect();
        let mut metas = BTreeMap::new();
        match &self.pages {
            PageSource::Corpus(corpus) => {
                let with_sitemap: BTreeSet<&String> = origins
                    .iter()
                    .filter(|o| {
                        canonicalize(&format!("{o}/sitemap.xml"))
                            .is_ok_and(|u| corpus.get(&u).is_some())
                    })
                    .collect();
                for r in records {
                    if let Some(doc) = corpus.get(&r.canonical).filter(|d| d.is_success()) {
                        let mut meta = extract_meta(doc);
                        meta.has_sitemap = with_sitemap.contains(&r.canonical.origin());
                        metas.insert(r.canonical.clone(), meta);
                    }
                }
            }
            PageSource::Live(fetcher) => {
                let origins: Vec<String> = origins.into_iter().collect();
                let probes: Vec<String> = origins.iter().map(|o| format!("{o}/sitemap.xml")).collect();
                let urls: Vec<String> = records.iter().map(|r| r.canonical.to_string()).collect();
                let (pages, probes) = futures::join!(fetcher.fetch_all(&urls), fetcher.fetch_all(&probes));
                let with_sitemap: BTreeSet<&String> = origins
                    .iter()
                    .zip(probes)
                    .filter(|(_, p)| p.as_ref().is_ok_and(|d| d.is_success()))
                    .map(|(o, _)| o)
                    .collect();
                for (r, page) in records.iter().zip(pages) {
                    match page {
                        Ok(doc) if doc.is_success() => {
                            let mut meta = extract_meta(&doc);
                            meta.has_sitemap = with_sitemap.contains(&r.canonical.origin());
                            metas.insert(r.canonical.clone(), meta);
                        }
                        Ok(doc) => tracing::debug!(url = %r.canonical, status = doc.status, "page not retrieved"),
                        Err(e) => tracing::debug!(url = %r.canonical, error = %e, "page not retrieved"),
                    }
                }
            }
        }
        metas
    }

    /// Merges raw engine lists and orders the merged records with `weights`.
    pub async fn rank_lists(&self, q: &Query, lists: &[Vec<SearchResultRecord>], weights: &WeightVector) -> Vec<RankedResult> {
        let merged = merge(lists);
        let metas = self.retrieve(&merged).await;
        let universe: BTreeSet<CanonicalUrl> = merged.iter().map(|r| r.canonical.clone()).collect();
        let graph = build_link_graph(&metas, &universe);

        let ranks: BTreeMap<CanonicalUrl, f64> = if graph.is_empty() {
            BTreeMap::new()
        } else {
            PageRankScores::from_result(pagerank(&graph, &self.pagerank))
                .map(|s| s.scores)
                .unwrap_or_default()
        };
        let links = if self.use_pagerank_for_links {
            let max = ranks.values().copied().fold(0.0, f64::max);
            ranks
                .iter()
                .map(|(u, s)| (u.clone(), if max > 0.0 { s / max } else { 0.0 }))
                .collect()
        } else {
            graph.inlink_norm()
        };

        let now = self.now();
        let candidates = merged
            .into_iter()
            .map(|record| {
                let fallback;
                let meta = match metas.get(&record.canonical) {
                    Some(m) => m,
                    None => {
                        fallback = fallback_meta(&record);
                        &fallback
                    }
                };
                let inlinks = links.get(&record.canonical).copied().unwrap_or(0.0);
                Candidate {
                    features: compute_features(q, &record.snippet, meta, inlinks, now),
                    pagerank: ranks.get(&record.canonical).copied().unwrap_or(0.0),
                    record,
                }
            })
            .collect();
        ranker::rank(candidates, weights)
    }

    pub async fn search(&self, raw: &str, k: usize, weights: Option<&WeightVector>) -> Result<SearchOutcome, PipelineError> {
        let q = self.prepare_query(raw).await?;
        let gathered = self.gather(&q, None).await?;
        let lists: Vec<Vec<SearchResultRecord>> = gathered.lists.into_iter().map(|l| l.results).collect();
        let mut results = self.rank_lists(&q, &lists, weights.unwrap_or(&self.weights)).await;
        results.truncate(k);
        Ok(SearchOutcome {
            query: q,
            k,
            degraded: !gathered.failed.is_empty(),
            failed_engines: gathered.failed,
            results,
        })
    }

    pub async fn compare(&self, raw: &str, k: usize, only: Option<&[String]>) -> Result<CompareOutcome, PipelineError> {
        let q = self.prepare_query(raw).await?;
        let gathered = self.gather(&q, only).await?;
        let lists: Vec<Vec<SearchResultRecord>> = gathered.lists.iter().map(|l| l.results.clone()).collect();
        let mut iral = self.rank_lists(&q, &lists, &self.weights).await;
        iral.truncate(k);
        let engines = gathered
            .lists
            .into_iter()
            .map(|mut l| {
                l.results.truncate(k);
                l
            })
            .collect();
        Ok(CompareOutcome {
            query: q,
            k,
            degraded: !gathered.failed.is_empty(),
            failed_engines: gathered.failed,
            engines,
            iral,
        })
    }

    /// Precision@k of every engine and of the merged ranking, one row per
    /// system, engines first in configured order.
    pub async fn evaluate(&self, judgments: &Judgments, k: Option<usize>) -> Result<PrecisionTable, PipelineError> {
        let k = k.unwrap_or(judgments.k);
        let mut per_system: BTreeMap<String, BTreeMap<String, Vec<CanonicalUrl>>> = BTreeMap::new();
        for judgment in &judgments.queries {
            let outcome = self.compare(&judgment.query, k, None).await?;
            for list in &outcome.engines {
                per_system
                    .entry(list.engine_id.clone())
                    .or_default()
                    .insert(judgment.query.clone(), canonical_list(&list.results));
            }
            per_system.entry(SYSTEM_ID.to_string()).or_default().insert(
                judgment.query.clone(),
                outcome.iral.iter().map(|r| r.record.canonical.clone()).collect(),
            );
        }
        let mut order: Vec<String> = self.engine_ids().into_iter().map(str::to_string).collect();
        order.push(SYSTEM_ID.to_string());
        let rows = order
            .iter()
            .map(|system| {
                let lists = per_system.get(system);
                evaluate_system(system, judgments, k, |q| {
                    lists.and_then(|l| l.get(q)).cloned().unwrap_or_default()
                })
            })
            .collect::<Result<Vec<_>, EvalError>>()?;
        Ok(PrecisionTable { k, rows })
    }
}
