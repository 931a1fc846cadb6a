//! Page retrieval: a polite HTTP fetcher with timeout, size, redirect and
//! per-host concurrency limits, plus a deterministic on-disk corpus mode.

mod robots;

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use chrono::{DateTime, NaiveDate, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tokio::sync::{Mutex, Semaphore};

use crate::merger::{canonicalize, CanonicalUrl};

pub use robots::RobotsRules;

#[derive(Debug, Error)]
pub enum FetchError {
    #[error("invalid url {0:?}")]
    InvalidUrl(String),
    #[error("timed out fetching {0}")]
    Timeout(String),
    #[error("{url}: body exceeds {max_bytes} bytes")]
    TooLarge { url: String, max_bytes: usize },
    #[error("too many redirects fetching {0}")]
    TooManyRedirects(String),
    #[error("robots.txt disallows {0}")]
    RobotsDisallowed(String),
    #[error("network error fetching {url}: {reason}")]
    NetworkError { url: String, reason: String },
    #[error("corpus file missing: {0}")]
    MissingFile(PathBuf),
    #[error("corpus manifest {path}: {reason}")]
    SchemaViolation { path: String, reason: String },
    #[error("invalid fetch policy: {0}")]
    InvalidPolicy(String),
}

mod duration_ms {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_millis() as u64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        Ok(Duration::from_millis(u64::deserialize(d)?))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FetchPolicy {
    #[serde(rename = "timeout_ms", with = "duration_ms")]
    pub timeout: Duration,
    pub max_bytes: usize,
    pub max_redirects: usize,
    pub per_host_parallelism: usize,
    pub max_in_flight: usize,
    pub user_agent: String,
    pub obey_robots: bool,
}

impl Default for FetchPolicy {
    fn default() -> Self {
        Self {
            timeout: Duration::from_secs(10),
            max_bytes: 2 * 1024 * 1024,
            max_redirects: 5,
            per_host_parallelism: 2,
            max_in_flight: 16,
            user_agent: concat!("iral/", env!("CARGO_PKG_VERSION")).to_string(),
            obey_robots: true,
        }
    }
}

impl FetchPolicy {
    pub fn validate(&self) -> Result<(), FetchError> {
        if self.timeout.is_zero() {
            return Err(FetchError::InvalidPolicy("timeout must be positive".into()));
        }
        if self.per_host_parallelism == 0 || self.max_in_flight == 0 {
            return Err(FetchError::InvalidPolicy("parallelism must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PageDocument {
    pub canonical_url: CanonicalUrl,
    pub status: u16,
    pub content_type: String,
    pub last_modified: Option<DateTime<Utc>>,
    pub expires: Option<DateTime<Utc>>,
    pub body: String,
    pub fetched_at: DateTime<Utc>,
}

impl PageDocument {
    pub fn is_success(&self) -> bool {
        (200..300).contains(&self.status)
    }
}

/// Parses RFC 3339, HTTP dates (RFC 2822 style), and bare `YYYY-MM-DD` dates.
pub fn parse_timestamp(raw: &str) -> Option<DateTime<Utc>> {
    let raw = raw.trim();
    if let Ok(t) = DateTime::parse_from_rfc3339(raw) {
        return Some(t.with_timezone(&Utc));
    }
    if let Ok(t) = DateTime::parse_from_rfc2822(raw) {
        return Some(t.with_timezone(&Utc));
    }
    NaiveDate::parse_from_str(raw, "%Y-%m-%d")
        .ok()
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .map(|dt| dt.and_utc())
}

fn charset_from_content_type(content_type: &str) -> Option<&str> {
    content_type.split(';').skip(1).find_map(|param| {
        let (k, v) = param.split_once('=')?;
        k.trim()
            .eq_ignore_ascii_case("charset")
            .then(|| v.trim().trim_matches(['"', '\'']))
    })
}

/// Looks for `charset=` inside the first KiB of the document (covers both
/// `<meta charset>` and the http-equiv Content-Type form).
fn sniff_meta_charset(bytes: &[u8]) -> Option<String> {
    let head = &bytes[..bytes.len().min(1024)];
    let head = String::from_utf8_lossy(head).to_ascii_lowercase();
    let at = head.find("charset=")? + "charset=".len();
    let label: String = head[at..]
        .trim_start_matches(['"', '\''])
        .chars()
        .take_while(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | ':' | '.'))
        .collect();
    (!label.is_empty()).then_some(label)
}

/// Decodes a body using the header charset, then a meta charset, then UTF-8.
pub fn decode_body(bytes: &[u8], content_type: &str) -> String {
    let encoding = charset_from_content_type(content_type)
        .and_then(|label| encoding_rs::Encoding::for_label(label.as_bytes()))
        .or_else(|| sniff_meta_charset(bytes).and_then(|label| encoding_rs::Encoding::for_label(label.as_bytes())))
        .unwrap_or(encoding_rs::UTF_8);
    let (text, _, _) = encoding.decode(bytes);
    text.into_owned()
}

/// Live page fetcher. Shares robots.txt results and concurrency limits
/// across all requests made through it.
pub struct Fetcher {
    policy: FetchPolicy,
    client: reqwest::Client,
    global: Semaphore,
    hosts: Mutex<HashMap<String, Arc<Semaphore>>>,
    robots: Mutex<HashMap<String, Arc<RobotsRules>>>,
}

impl Fetcher {
    pub fn new(policy: FetchPolicy) -> Result<Self, FetchError> {
        policy.validate()?;
        let max_redirects = policy.max_redirects;
        let client = reqwest::Client::builder()
            .timeout(policy.timeout)
            .user_agent(policy.user_agent.clone())
            .redirect(reqwest::redirect::Policy::custom(move |attempt| {
                if attempt.previous().len() > max_redirects {
                    attempt.error("too many redirects")
                } else {
                    attempt.follow()
                }
            }))
            .build()
            .map_err(|e| FetchError::InvalidPolicy(e.to_string()))?;
        Ok(Self {
            global: Semaphore::new(policy.max_in_flight),
            policy,
            client,
            hosts: Mutex::new(HashMap::new()),
            robots: Mutex::new(HashMap::new()),
        })
    }

    pub fn policy(&self) -> &FetchPolicy {
        &self.policy
    }

    async fn host_slot(&self, host: &str) -> Arc<Semaphore> {
        let mut hosts = self.hosts.lock().await;
        hosts
            .entry(host.to_string())
            .or_insert_with(|| Arc::new(Semaphore::new(self.policy.per_host_parallelism)))
            .clone()
    }

    fn classify(&self, url: &str, err: reqwest::Error) -> FetchError {
        if err.is_timeout() {
            FetchError::Timeout(url.to_string())
        } else if err.is_redirect() {
            FetchError::TooManyRedirects(url.to_string())
        } else {
            FetchError::NetworkError {
                url: url.to_string(),
                reason: err.to_string(),
            }
        }
    }

    async fn robots_for(&self, origin: &str) -> Arc<RobotsRules> {
        if let Some(rules) = self.robots.lock().await.get(origin) {
            return rules.clone();
        }
        let url = format!("{origin}/robots.txt");
        let rules = match self.client.get(&url).send().await {
            Ok(resp) if resp.status().is_success() => match resp.text().await {
                Ok(text) => RobotsRules::parse(&text),
                Err(_) => RobotsRules::allow_all(),
            },
            _ => RobotsRules::allow_all(),
        };
        let rules = Arc::new(rules);
        self.robots.lock().await.insert(origin.to_string(), rules.clone());
        rules
    }

    pub async fn fetch(&self, url: &str) -> Result<PageDocument, FetchError> {
        let parsed = url::Url::parse(url).map_err(|_| FetchError::InvalidUrl(url.to_string()))?;
        let canonical = canonicalize(url).map_err(|_| FetchError::InvalidUrl(url.to_string()))?;

        if self.policy.obey_robots {
            let rules = self.robots_for(&canonical.origin()).await;
            let mut path = parsed.path().to_string();
            if let Some(q) = parsed.query() {
                path.push('?');
                path.push_str(q);
            }
            if !rules.is_allowed(&self.policy.user_agent, &path) {
                return Err(FetchError::RobotsDisallowed(url.to_string()));
            }
        }

        let host_slot = self.host_slot(canonical.host()).await;
        let _host = host_slot.acquire().await.expect("semaphore never closed");
        let _global = self.global.acquire().await.expect("semaphore never closed");

        let mut resp = self.client.get(parsed).send().await.map_err(|e| self.classify(url, e))?;
        let max_bytes = self.policy.max_bytes;
        if resp.content_length().is_some_and(|len| len as usize > max_bytes) {
            return Err(FetchError::TooLarge {
                url: url.to_string(),
                max_bytes,
            });
        }

        let status = resp.status().as_u16();
        let header = |name: reqwest::header::HeaderName| {
            resp.headers()
                .get(name)
                .and_then(|v| v.to_str().ok())
                .map(str::to_string)
        };
        let content_type = header(reqwest::header::CONTENT_TYPE).unwrap_or_default();
        let last_modified = header(reqwest::header::LAST_MODIFIED).and_then(|v| parse_timestamp(&v));
        let expires = header(reqwest::header::EXPIRES).and_then(|v| parse_timestamp(&v));
        let final_url = canonicalize(resp.url().as_str()).unwrap_or(canonical);

        let mut bytes: Vec<u8> = Vec::new();
        while let Some(chunk) = resp.chunk().await.map_err(|e| self.classify(url, e))? {
            if bytes.len() + chunk.len() > max_bytes {
                return Err(FetchError::TooLarge {
                    url: url.to_string(),
                    max_bytes,
                });
            }
            bytes.extend_from_slice(&chunk);
        }

        Ok(PageDocument {
            canonical_url: final_url,
            status,
            body: decode_body(&bytes, &content_type),
            content_type,
            last_modified,
            expires,
            fetched_at: Utc::now(),
        })
    }

    /// Fetches all URLs concurrently within the policy limits. Results are
    /// returned in input order.
    pub async fn fetch_all(&self, urls: &[String]) -> Vec<Result<PageDocument, FetchError>> {
        futures::future::join_all(urls.iter().map(|u| self.fetch(u))).await
    }
}

/// One-shot fetch with a fresh fetcher.
pub async fn fetch(url: &str, policy: &FetchPolicy) -> Result<PageDocument, FetchError> {
    Fetcher::new(policy.clone())?.fetch(url).await
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    fixed_timestamp: String,
    pages: Vec<ManifestPage>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestPage {
    url: String,
    file: PathBuf,
    #[serde(default)]
    last_modified: Option<String>,
    #[serde(default)]
    expires: Option<String>,
    #[serde(default)]
    content_type: Option<String>,
}

/// Pages loaded from a corpus manifest, all stamped with its fixed timestamp.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    pub fixed_timestamp: DateTime<Utc>,
    pub pages: BTreeMap<CanonicalUrl, PageDocument>,
}

impl Corpus {
    pub fn load(manifest: impl AsRef<Path>) -> Result<Self, FetchError> {
        let manifest = manifest.as_ref();
        let origin = manifest.display().to_string();
        let violation = |reason: String| FetchError::SchemaViolation {
            path: origin.clone(),
            reason,
        };
        let text = std::fs::read_to_string(manifest).map_err(|_| FetchError::MissingFile(manifest.to_path_buf()))?;
        let parsed: Manifest = serde_json::from_str(&text).map_err(|e| violation(e.to_string()))?;
        let fixed_timestamp = parse_timestamp(&parsed.fixed_timestamp)
            .ok_or_else(|| violation(format!("bad fixed_timestamp {:?}", parsed.fixed_timestamp)))?;
        let base = manifest.parent().unwrap_or(Path::new("."));

        let optional_date = |field: &str, value: &Option<String>| -> Result<Option<DateTime<Utc>>, FetchError> {
            value
                .as_deref()
                .map(|v| parse_timestamp(v).ok_or_else(|| violation(format!("bad {field} {v:?}"))))
                .transpose()
        };

        let mut pages = BTreeMap::new();
        for page in parsed.pages {
            let canonical = canonicalize(&page.url).map_err(|e| violation(e.to_string()))?;
            let path = base.join(&page.file);
            let bytes = std::fs::read(&path).map_err(|_| FetchError::MissingFile(path.clone()))?;
            let content_type = page.content_type.unwrap_or_else(|| "text/html".to_string());
            let doc = PageDocument {
                canonical_url: canonical.clone(),
                status: 200,
                body: decode_body(&bytes, &content_type),
                content_type,
                last_modified: optional_date("last_modified", &page.last_modified)?,
                expires: optional_date("expires", &page.expires)?,
                fetched_at: fixed_timestamp,
            };
            if pages.insert(canonical.clone(), doc).is_some() {
                return Err(violation(format!("duplicate page {canonical}")));
            }
        }
        Ok(Self { fixed_timestamp, pages })
    }

    pub fn get(&self, url: &CanonicalUrl) -> Option<&PageDocument> {
        self.pages.get(url)
    }
}

/// Loads every page named in a corpus manifest.
pub fn fetch_corpus(manifest: impl AsRef<Path>) -> Result<BTreeMap<CanonicalUrl, PageDocument>, FetchError> {
    Corpus::load(manifest).map(|c| c.pages)
}
