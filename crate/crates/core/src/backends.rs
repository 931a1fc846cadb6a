//! Search backend contract: fixture-backed engines for offline runs and
//! live HTTP adapters that normalize vendor payloads into result records.

use std::collections::{BTreeSet, HashMap};
use std::path::{Path, PathBuf};
use std::time::Duration;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use url::Url;

use crate::query::{self, Query};

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("backend {engine} unavailable: {reason}")]
    BackendUnavailable { engine: String, reason: String },
    #[error("SERP fixture {path}: {reason}")]
    SchemaViolation { path: String, reason: String },
    #[error("invalid engine config {engine}: {reason}")]
    InvalidConfig { engine: String, reason: String },
}

/// One hit from one engine.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchResultRecord {
    pub engine_id: String,
    pub source_rank: u32,
    pub url: String,
    pub title: String,
    pub snippet: String,
    pub domain: String,
}

impl SearchResultRecord {
    /// Builds a record, deriving `domain` from the URL host. Returns `None`
    /// for rank 0 or a URL without a host.
    pub fn new(engine_id: &str, source_rank: u32, url: &str, title: &str, snippet: &str) -> Option<Self> {
        if source_rank == 0 {
            return None;
        }
        let domain = Url::parse(url).ok()?.host_str()?.to_lowercase();
        Some(Self {
            engine_id: engine_id.to_string(),
            source_rank,
            url: url.to_string(),
            title: title.to_string(),
            snippet: snippet.to_string(),
            domain,
        })
    }
}

/// Checks the per-response invariants: ranks unique and contiguous from 1,
/// domain equal to the URL host.
pub fn validate_response(records: &[SearchResultRecord]) -> Result<(), String> {
    let mut ranks: Vec<u32> = records.iter().map(|r| r.source_rank).collect();
    ranks.sort_unstable();
    for (i, rank) in ranks.iter().enumerate() {
        if *rank as usize != i + 1 {
            return Err(format!("ranks must be contiguous from 1, got {ranks:?}"));
        }
    }
    for r in records {
        let host = Url::parse(&r.url)
            .ok()
            .and_then(|u| u.host_str().map(str::to_lowercase));
        if host.as_deref() != Some(r.domain.as_str()) {
            return Err(format!("domain {:?} does not match url {:?}", r.domain, r.url));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EngineMode {
    Fixture,
    Live,
}

/// Vendor payload shape understood by the live adapter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LiveFlavor {
    /// `{"items": [{"link", "title", "snippet"}]}`
    #[default]
    GoogleCse,
    /// `{"webPages": {"value": [{"url", "name", "snippet"}]}}`
    BingWeb,
}

fn default_page_size() -> u32 {
    10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    pub engine_id: String,
    pub mode: EngineMode,
    #[serde(default)]
    pub fixture: Option<PathBuf>,
    #[serde(default)]
    pub endpoint: Option<String>,
    #[serde(default)]
    pub credential_env: Option<String>,
    #[serde(default)]
    pub flavor: LiveFlavor,
    #[serde(default = "default_page_size")]
    pub page_size: u32,
}

impl EngineConfig {
    pub fn fixture(engine_id: &str, dir: impl Into<PathBuf>) -> Self {
        Self {
            engine_id: engine_id.to_string(),
            mode: EngineMode::Fixture,
            fixture: Some(dir.into()),
            endpoint: None,
            credential_env: None,
            flavor: LiveFlavor::default(),
            page_size: default_page_size(),
        }
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        let fail = |reason: &str| BackendError::InvalidConfig {
            engine: self.engine_id.clone(),
            reason: reason.to_string(),
        };
        if self.engine_id.trim().is_empty() {
            return Err(fail("engine_id is empty"));
        }
        if self.page_size == 0 {
            return Err(fail("page_size must be at least 1"));
        }
        match self.mode {
            EngineMode::Fixture if self.fixture.is_none() => Err(fail("fixture mode requires a fixture path")),
            EngineMode::Live if self.endpoint.is_none() || self.credential_env.is_none() => {
                Err(fail("live mode requires endpoint and credential_env"))
            }
            _ => Ok(()),
        }
    }
}

#[async_trait]
pub trait SearchBackend: Send + Sync {
    fn engine_id(&self) -> &str;

    /// At most `limit` records ordered by source rank.
    async fn search(&self, q: &Query, limit: usize) -> Result<Vec<SearchResultRecord>, BackendError>;
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SerpFile {
    engine: String,
    query: String,
    results: Vec<SerpEntry>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SerpEntry {
    rank: u32,
    url: String,
    title: String,
    snippet: String,
}

/// A parsed SERP fixture file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SerpFixture {
    pub engine: String,
    pub query: String,
    pub records: Vec<SearchResultRecord>,
}

pub fn parse_serp_fixture(text: &str, origin: &str) -> Result<SerpFixture, BackendError> {
    let violation = |reason: String| BackendError::SchemaViolation {
        path: origin.to_string(),
        reason,
    };
    let file: SerpFile = serde_json::from_str(text).map_err(|e| violation(e.to_string()))?;
    let mut seen = BTreeSet::new();
    let mut records = Vec::with_capacity(file.results.len());
    for entry in file.results {
        if !seen.insert(entry.rank) {
            return Err(violation(format!("duplicate rank {}", entry.rank)));
        }
        let record = SearchResultRecord::new(&file.engine, entry.rank, &entry.url, &entry.title, &entry.snippet)
            .ok_or_else(|| violation(format!("bad rank {} or url {:?}", entry.rank, entry.url)))?;
        records.push(record);
    }
    validate_response(&records).map_err(violation)?;
    Ok(SerpFixture {
        engine: file.engine,
        query: file.query,
        records,
    })
}

/// Loads one SERP fixture. Records come back in file order.
pub fn load_serp_fixture(path: impl AsRef<Path>) -> Result<Vec<SearchResultRecord>, BackendError> {
    Ok(load_serp_file(path.as_ref())?.records)
}

fn load_serp_file(path: &Path) -> Result<SerpFixture, BackendError> {
    let text = std::fs::read_to_string(path).map_err(|e| BackendError::SchemaViolation {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    parse_serp_fixture(&text, &path.display().to_string())
}

/// Serves results from a directory of SERP fixture files, keyed by the
/// normalized query of each file.
#[derive(Debug, Clone)]
pub struct FixtureBackend {
    engine_id: String,
    by_query: HashMap<String, Vec<SearchResultRecord>>,
}

impl FixtureBackend {
    pub fn load(engine_id: &str, dir: impl AsRef<Path>) -> Result<Self, BackendError> {
        let dir = dir.as_ref();
        let unreadable = |e: std::io::Error| BackendError::SchemaViolation {
            path: dir.display().to_string(),
            reason: e.to_string(),
        };
        let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
            .map_err(unreadable)?
            .filter_map(|entry| entry.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|ext| ext == "json"))
            .collect();
        paths.sort();

        let mut by_query = HashMap::new();
        for path in paths {
            let fixture = load_serp_file(&path)?;
            let key = match query::normalize(&fixture.query) {
                Ok(q) => q.key(),
                Err(_) => continue,
            };
            let mut records = fixture.records;
            for r in &mut records {
                r.engine_id = engine_id.to_string();
            }
            records.sort_by_key(|r| r.source_rank);
            by_query.insert(key, records);
        }
        Ok(Self {
            engine_id: engine_id.to_string(),
            by_query,
        })
    }

    pub fn from_records(engine_id: &str, entries: impl IntoIterator<Item = (String, Vec<SearchResultRecord>)>) -> Self {
        Self {
            engine_id: engine_id.to_string(),
            by_query: entries.into_iter().collect(),
        }
    }

    pub fn queries(&self) -> impl Iterator<Item = &str> {
        self.by_query.keys().map(String::as_str)
    }
}

#[async_trait]
impl SearchBackend for FixtureBackend {
    fn engine_id(&self) -> &str {
        &self.engine_id
    }

    async fn search(&self, q: &Query, limit: usize) -> Result<Vec<SearchResultRecord>, BackendError> {
        Ok(self
            .by_query
            .get(&q.key())
            .map(|records| records.iter().take(limit).cloned().collect())
            .unwrap_or_default())
    }
}

/// HTTP adapter for a live engine API. The key is read from the configured
/// environment variable at request time.
#[derive(Debug, Clone)]
pub struct LiveBackend {
    engine_id: String,
    endpoint: String,
    credential_env: String,
    flavor: LiveFlavor,
    client: reqwest::Client,
}

impl LiveBackend {
    pub fn new(cfg: &EngineConfig, timeout: Duration) -> Result<Self, BackendError> {
        cfg.validate()?;
        let client = reqwest::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| BackendError::InvalidConfig {
                engine: cfg.engine_id.clone(),
                reason: e.to_string(),
            })?;
        Ok(Self {
            engine_id: cfg.engine_id.clone(),
            endpoint: cfg.endpoint.clone().unwrap_or_default(),
            credential_env: cfg.credential_env.clone().unwrap_or_default(),
            flavor: cfg.flavor,
            client,
        })
    }

    fn unavailable(&self, reason: impl ToString) -> BackendError {
        BackendError::BackendUnavailable {
            engine: self.engine_id.clone(),
            reason: reason.to_string(),
        }
    }

    fn to_records(&self, body: &serde_json::Value, limit: usize) -> Vec<SearchResultRecord> {
        let (items, url_key, title_key) = match self.flavor {
            LiveFlavor::GoogleCse => (body.pointer("/items"), "link", "title"),
            LiveFlavor::BingWeb => (body.pointer("/webPages/value"), "url", "name"),
        };
        let text = |item: &serde_json::Value, key: &str| item.get(key).and_then(|v| v.as_str()).unwrap_or("").to_string();
        items
            .and_then(|v| v.as_array())
            .into_iter()
            .flatten()
            .filter_map(|item| {
                let url = text(item, url_key);
                Url::parse(&url).ok()?.host_str()?;
                Some((url, text(item, title_key), text(item, "snippet")))
            })
            .take(limit)
            .enumerate()
            .filter_map(|(i, (url, title, snippet))| {
                SearchResultRecord::new(&self.engine_id, i as u32 + 1, &url, &title, &snippet)
            })
            .collect()
    }
}

#[async_trait]
impl SearchBackend for LiveBackend {
    fn engine_id(&self) -> &str {
        &self.engine_id
    }

    async fn search(&self, q: &Query, limit: usize) -> Result<Vec<SearchResultRecord>, BackendError> {
        let key = std::env::var(&self.credential_env)
            .map_err(|_| self.unavailable(format!("credential variable {} not set", self.credential_env)))?;
        let count = limit.to_string();
        let query_text = q.key();
        let request = match self.flavor {
            LiveFlavor::GoogleCse => self
                .client
                .get(&self.endpoint)
                .query(&[("q", query_text.as_str()), ("num", count.as_str()), ("key", key.as_str())]),
            LiveFlavor::BingWeb => self
                .client
                .get(&self.endpoint)
                .query(&[("q", query_text.as_str()), ("count", count.as_str())])
                .header("Ocp-Apim-Subscription-Key", key),
        };
        let body: serde_json::Value = request
            .send()
            .await
            .and_then(reqwest::Response::error_for_status)
            .map_err(|e| self.unavailable(e))?
            .json()
            .await
            .map_err(|e| self.unavailable(e))?;
        Ok(self.to_records(&body, limit))
    }
}

/// Instantiates the backend described by `cfg`. Relative fixture paths are
/// resolved against `base_dir`.
pub fn build_backend(cfg: &EngineConfig, base_dir: &Path, timeout: Duration) -> Result<Box<dyn SearchBackend>, BackendError> {
    cfg.validate()?;
    match cfg.mode {
        EngineMode::Fixture => {
            let dir = base_dir.join(cfg.fixture.as_ref().expect("validated"));
            Ok(Box::new(FixtureBackend::load(&cfg.engine_id, dir)?))
        }
        EngineMode::Live => Ok(Box::new(LiveBackend::new(cfg, timeout)?)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn ten_hits() -> Vec<SearchResultRecord> {
        (1..=10)
            .map(|i| SearchResultRecord::new("google", i, &format!("https://site{i}.example/page"), "t", "s").unwrap())
            .collect()
    }

    fn write_temp(text: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(text.as_bytes()).unwrap();
        f
    }

    #[tokio::test]
    async fn fixture_search_truncates() {
        let backend = FixtureBackend::from_records("google", [("alcoholism".to_string(), ten_hits())]);
        let q = query::normalize("Alcoholism").unwrap();
        let hits = backend.search(&q, 3).await.unwrap();
        assert_eq!(hits.iter().map(|h| h.source_rank).collect::<Vec<_>>(), vec![1, 2, 3]);
        assert!(hits.iter().all(|h| h.engine_id == "google"));
    }

    #[tokio::test]
    async fn fixture_search_unknown_query_is_empty() {
        let backend = FixtureBackend::from_records("google", [("alcoholism".to_string(), vec![])]);
        let q = query::normalize("alcoholism").unwrap();
        assert!(backend.search(&q, 10).await.unwrap().is_empty());
        let q = query::normalize("nothing here").unwrap();
        assert!(backend.search(&q, 10).await.unwrap().is_empty());
    }

    #[test]
    fn loads_well_formed_fixture() {
        let f = write_temp(
            r#"{"engine":"bing","query":"x","results":[
                {"rank":1,"url":"https://A.example/1","title":"a","snippet":"s"},
                {"rank":2,"url":"https://b.example/2","title":"b","snippet":"s"},
                {"rank":3,"url":"https://c.example/3","title":"c","snippet":"s"}]}"#,
        );
        let records = load_serp_fixture(f.path()).unwrap();
        assert_eq!(records.len(), 3);
        assert_eq!(records[0].domain, "a.example");
        assert_eq!(records[2].source_rank, 3);
    }

    #[test]
    fn duplicate_rank_is_violation() {
        let f = write_temp(
            r#"{"engine":"bing","query":"x","results":[
                {"rank":1,"url":"https://a.example/","title":"a","snippet":"s"},
                {"rank":1,"url":"https://b.example/","title":"b","snippet":"s"},
                {"rank":2,"url":"https://c.example/","title":"c","snippet":"s"}]}"#,
        );
        assert!(matches!(load_serp_fixture(f.path()), Err(BackendError::SchemaViolation { .. })));
    }

    #[test]
    fn rank_gap_and_missing_field_are_violations() {
        let gap = r#"{"engine":"e","query":"x","results":[
            {"rank":1,"url":"https://a.example/","title":"a","snippet":"s"},
            {"rank":3,"url":"https://b.example/","title":"b","snippet":"s"}]}"#;
        assert!(parse_serp_fixture(gap, "gap").is_err());
        let missing = r#"{"engine":"e","query":"x","results":[
            {"rank":1,"url":"https://a.example/","title":"a"}]}"#;
        let err = parse_serp_fixture(missing, "missing").unwrap_err();
        assert!(err.to_string().contains("snippet"));
    }

    #[test]
    fn config_validation() {
        let mut cfg = EngineConfig::fixture("google", "serp/google");
        assert!(cfg.validate().is_ok());
        cfg.fixture = None;
        assert!(cfg.validate().is_err());
        cfg.mode = EngineMode::Live;
        cfg.endpoint = Some("http://127.0.0.1:9/search".into());
        assert!(cfg.validate().is_err());
        cfg.credential_env = Some("IRAL_TEST_KEY".into());
        assert!(cfg.validate().is_ok());
    }

    #[tokio::test]
    async fn live_unreachable_is_unavailable() {
        let cfg = EngineConfig {
            engine_id: "bing".into(),
            mode: EngineMode::Live,
            fixture: None,
            endpoint: Some("http://127.0.0.1:9/search".into()),
            credential_env: Some("PATH".into()),
            flavor: LiveFlavor::BingWeb,
            page_size: 10,
        };
        let backend = LiveBackend::new(&cfg, Duration::from_millis(500)).unwrap();
        let q = query::normalize("alcoholism").unwrap();
        assert!(matches!(
            backend.search(&q, 5).await,
            Err(BackendError::BackendUnavailable { .. })
        ));
    }

    #[tokio::test]
    async fn live_missing_credential_is_unavailable() {
        let cfg = EngineConfig {
            engine_id: "google".into(),
            mode: EngineMode::Live,
            fixture: None,
            endpoint: Some("http://127.0.0.1:9/search".into()),
            credential_env: Some("IRAL_SURELY_UNSET_VARIABLE".into()),
            flavor: LiveFlavor::GoogleCse,
            page_size: 10,
        };
        let backend = LiveBackend::new(&cfg, Duration::from_millis(500)).unwrap();
        let q = query::normalize("alcoholism").unwrap();
        let err = backend.search(&q, 5).await.unwrap_err();
        assert!(err.to_string().contains("IRAL_SURELY_UNSET_VARIABLE"));
    }
}
