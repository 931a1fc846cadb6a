//! URL canonicalization, FNV-1a hashing, and duplicate-free fusion of
//! per-engine result lists.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;
use url::Url;

use crate::backends::SearchResultRecord;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MergeError {
    #[error("invalid url {url:?}: {reason}")]
    InvalidUrl { url: String, reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct QueryParam {
    pub key: String,
    pub value: Option<String>,
}

/// Normalized absolute http(s) URL. Equality and ordering follow the
/// serialized form.
#[derive(Debug, Clone)]
pub struct CanonicalUrl {
    scheme: String,
    host: String,
    port: Option<u16>,
    path: String,
    query: Vec<QueryParam>,
    serialized: String,
}

impl CanonicalUrl {
    pub fn scheme(&self) -> &str {
        &self.scheme
    }

    pub fn host(&self) -> &str {
        &self.host
    }

    pub fn port(&self) -> Option<u16> {
        self.port
    }

    pub fn path(&self) -> &str {
        &self.path
    }

    pub fn query(&self) -> &[QueryParam] {
        &self.query
    }

    pub fn as_str(&self) -> &str {
        &self.serialized
    }

    /// `scheme://host[:port]`
    pub fn origin(&self) -> String {
        match self.port {
            Some(p) => format!("{}://{}:{}", self.scheme, self.host, p),
            None => format!("{}://{}", self.scheme, self.host),
        }
    }

    /// Resolves a possibly relative reference against this URL and canonicalizes it.
    pub fn join(&self, reference: &str) -> Result<CanonicalUrl, MergeError> {
        let base = Url::parse(&self.serialized).map_err(|e| invalid(&self.serialized, e))?;
        let joined = base.join(reference.trim()).map_err(|e| invalid(reference, e))?;
        canonicalize(joined.as_str())
    }

    fn serialize(scheme: &str, host: &str, port: Option<u16>, path: &str, query: &[QueryParam]) -> String {
        let mut out = format!("{scheme}://{host}");
        if let Some(p) = port {
            out.push(':');
            out.push_str(&p.to_string());
        }
        out.push_str(path);
        if !query.is_empty() {
            out.push('?');
            let parts: Vec<String> = query
                .iter()
                .map(|p| match &p.value {
                    Some(v) => format!("{}={}", p.key, v),
                    None => p.key.clone(),
                })
                .collect();
            out.push_str(&parts.join("&"));
        }
        out
    }
}

impl PartialEq for CanonicalUrl {
    fn eq(&self, other: &Self) -> bool {
        self.serialized == other.serialized
    }
}

impl Eq for CanonicalUrl {}

impl std::hash::Hash for CanonicalUrl {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.serialized.hash(state);
    }
}

impl PartialOrd for CanonicalUrl {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for CanonicalUrl {
    fn cmp(&self, other: &Self) -> Ordering {
        self.serialized.cmp(&other.serialized)
    }
}

impl fmt::Display for CanonicalUrl {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.serialized)
    }
}

impl FromStr for CanonicalUrl {
    type Err = MergeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        canonicalize(s)
    }
}

impl Serialize for CanonicalUrl {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.serialized)
    }
}

impl<'de> Deserialize<'de> for CanonicalUrl {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(deserializer)?;
        canonicalize(&raw).map_err(serde::de::Error::custom)
    }
}

fn invalid(url: &str, reason: impl fmt::Display) -> MergeError {
    MergeError::InvalidUrl {
        url: url.to_string(),
        reason: reason.to_string(),
    }
}

/// Canonicalizes an absolute http(s) URL.
///
/// Scheme and host are lowercased, default ports dropped, dot segments
/// resolved, query parameters sorted by key then value, the fragment
/// removed, and a trailing slash removed from any non-root path.
pub fn canonicalize(raw: &str) -> Result<CanonicalUrl, MergeError> {
    let parsed = Url::parse(raw.trim()).map_err(|e| invalid(raw, e))?;
    let scheme = parsed.scheme().to_string();
    if scheme != "http" && scheme != "https" {
        return Err(invalid(raw, "scheme must be http or https"));
    }
    let host = match parsed.host_str() {
        Some(h) if !h.is_empty() => h.to_lowercase(),
        _ => return Err(invalid(raw, "missing host")),
    };
    // Url::port() is already None for the scheme's default port.
    let port = parsed.port();

    let mut path = parsed.path().to_string();
    while path.len() > 1 && path.ends_with('/') {
        path.pop();
    }
    if path.is_empty() {
        path.push('/');
    }

    let mut query: Vec<QueryParam> = parsed
        .query()
        .unwrap_or("")
        .split('&')
        .filter(|part| !part.is_empty())
        .map(|part| match part.split_once('=') {
            Some((k, v)) => QueryParam {
                key: k.to_string(),
                value: Some(v.to_string()),
            },
            None => QueryParam {
                key: part.to_string(),
                value: None,
            },
        })
        .collect();
    query.sort();

    let serialized = CanonicalUrl::serialize(&scheme, &host, port, &path, &query);
    Ok(CanonicalUrl {
        scheme,
        host,
        port,
        path,
        query,
        serialized,
    })
}

pub const FNV_OFFSET_BASIS: u64 = 0xcbf2_9ce4_8422_2325;
pub const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// FNV-1a, 64-bit.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET_BASIS, |hash, b| {
        (hash ^ u64::from(*b)).wrapping_mul(FNV_PRIME)
    })
}

pub fn url_hash(c: &CanonicalUrl) -> u64 {
    fnv1a64(c.as_str().as_bytes())
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Source {
    pub engine: String,
    pub rank: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergedRecord {
    pub canonical: CanonicalUrl,
    pub url_hash: u64,
    pub sources: Vec<Source>,
    pub title: String,
    pub snippet: String,
    pub domain: String,
}

impl MergedRecord {
    /// Number of distinct engines that returned this page.
    pub fn engine_count(&self) -> usize {
        let mut engines: Vec<&str> = self.sources.iter().map(|s| s.engine.as_str()).collect();
        engines.sort_unstable();
        engines.dedup();
        engines.len()
    }

    /// Smallest source rank across engines.
    pub fn best_rank(&self) -> u32 {
        self.sources.iter().map(|s| s.rank).min().unwrap_or(u32::MAX)
    }
}

/// Whether `candidate` should replace the current representative:
/// smaller rank wins, ties go to the lexicographically smaller engine id.
fn better_source(candidate: &Source, current: &Source) -> bool {
    (candidate.rank, &candidate.engine) < (current.rank, &current.engine)
}

/// Merges per-engine lists with the default FNV-1a table key.
pub fn merge(lists: &[Vec<SearchResultRecord>]) -> Vec<MergedRecord> {
    merge_with_hasher(lists, url_hash)
}

/// Merges per-engine lists into one record per distinct canonical URL.
///
/// The hash is only the bucket key: records are duplicates when their
/// canonical serializations are equal, so colliding distinct URLs are kept
/// apart. Every input (engine, rank) pair is kept, so an engine that listed
/// the same page twice contributes two sources. Output order is a
/// round-robin interleaving of the inputs (first occurrence wins). SRRs whose
/// URL fails to canonicalize are skipped.
pub fn merge_with_hasher<F>(lists: &[Vec<SearchResultRecord>], hasher: F) -> Vec<MergedRecord>
where
    F: Fn(&CanonicalUrl) -> u64,
{
    let mut out: Vec<MergedRecord> = Vec::new();
    let mut table: HashMap<u64, Vec<usize>> = HashMap::new();
    let mut representative: Vec<Source> = Vec::new();

    let longest = lists.iter().map(Vec::len).max().unwrap_or(0);
    for i in 0..longest {
        for list in lists {
            let Some(srr) = list.get(i) else { continue };
            let Ok(canonical) = canonicalize(&srr.url) else {
                tracing::debug!(url = %srr.url, "skipping uncanonicalizable result");
                continue;
            };
            let source = Source {
                engine: srr.engine_id.clone(),
                rank: srr.source_rank,
            };
            let key = hasher(&canonical);
            let bucket = table.entry(key).or_default();
            let existing = bucket.iter().copied().find(|&idx| out[idx].canonical == canonical);
            match existing {
                Some(idx) => {
                    let record = &mut out[idx];
                    record.sources.push(source.clone());
                    if better_source(&source, &representative[idx]) {
                        record.title = srr.title.clone();
                        record.snippet = srr.snippet.clone();
                        record.domain = srr.domain.clone();
                        representative[idx] = source;
                    }
                }
                None => {
                    bucket.push(out.len());
                    out.push(MergedRecord {
                        url_hash: url_hash(&canonical),
                        canonical,
                        sources: vec![source.clone()],
                        title: srr.title.clone(),
                        snippet: srr.snippet.clone(),
                        domain: srr.domain.clone(),
                    });
                    representative.push(source);
                }
            }
        }
    }
    out
}
