//! Query processing: normalization, head/tail classification and
//! single-term synonym expansion against a thesaurus.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum QueryError {
    #[error("query is empty after normalization")]
    EmptyQuery,
    #[error("thesaurus unavailable: {0}")]
    ThesaurusUnavailable(String),
    #[error("invalid thesaurus file {path}: {reason}")]
    InvalidThesaurus { path: String, reason: String },
}

/// Keyword class by length: one or two words is a head term, three or more a tail term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QueryKind {
    Head,
    Tail,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Query {
    pub raw: String,
    pub terms: Vec<String>,
    pub kind: QueryKind,
    pub expansions: BTreeMap<String, Vec<String>>,
}

impl Query {
    /// Terms joined by single spaces. Used as the fixture lookup key.
    pub fn key(&self) -> String {
        self.terms.join(" ")
    }

    /// All synonyms across all expanded terms, in term order.
    pub fn synonyms(&self) -> impl Iterator<Item = &str> {
        self.expansions.values().flatten().map(String::as_str)
    }
}

/// Lowercases a single whitespace-delimited token and strips every
/// character that is not alphanumeric, except hyphens that end up internal.
pub fn normalize_token(token: &str) -> String {
    let kept: String = token
        .to_lowercase()
        .chars()
        .filter(|c| c.is_alphanumeric() || *c == '-')
        .collect();
    kept.trim_matches('-').to_string()
}

/// Splits free text into normalized tokens. Shared with feature extraction
/// so that page text and queries are compared under the same rules.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(normalize_token)
        .filter(|t| !t.is_empty())
        .collect()
}

pub fn normalize(raw: &str) -> Result<Query, QueryError> {
    let terms = tokenize(raw);
    if terms.is_empty() {
        return Err(QueryError::EmptyQuery);
    }
    let kind = classify(&terms);
    Ok(Query {
        raw: raw.to_string(),
        terms,
        kind,
        expansions: BTreeMap::new(),
    })
}

pub fn classify<S: AsRef<str>>(terms: &[S]) -> QueryKind {
    if terms.len() <= 2 {
        QueryKind::Head
    } else {
        QueryKind::Tail
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ThesaurusSource {
    File,
    Remote,
}

/// Immutable term → synonyms map.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Thesaurus {
    entries: BTreeMap<String, Vec<String>>,
    source: ThesaurusSource,
}

impl Thesaurus {
    pub fn empty() -> Self {
        Self {
            entries: BTreeMap::new(),
            source: ThesaurusSource::File,
        }
    }

    /// Builds a thesaurus, dropping duplicate synonyms and self-mappings.
    pub fn from_entries<I, K, V>(entries: I, source: ThesaurusSource) -> Self
    where
        I: IntoIterator<Item = (K, Vec<V>)>,
        K: AsRef<str>,
        V: AsRef<str>,
    {
        let mut map = BTreeMap::new();
        for (term, synonyms) in entries {
            let term = normalize_token(term.as_ref());
            if term.is_empty() {
                continue;
            }
            let mut clean: Vec<String> = Vec::new();
            for syn in synonyms {
                let syn = syn.as_ref().trim().to_lowercase();
                if syn.is_empty() || syn == term || clean.contains(&syn) {
                    continue;
                }
                clean.push(syn);
            }
            map.insert(term, clean);
        }
        Self {
            entries: map,
            source,
        }
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        let raw: BTreeMap<String, Vec<String>> = serde_json::from_str(text)?;
        Ok(Self::from_entries(raw, ThesaurusSource::File))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, QueryError> {
        let path = path.as_ref();
        let invalid = |reason: String| QueryError::InvalidThesaurus {
            path: path.display().to_string(),
            reason,
        };
        let text = std::fs::read_to_string(path).map_err(|e| invalid(e.to_string()))?;
        Self::from_json(&text).map_err(|e| invalid(e.to_string()))
    }

    pub fn lookup(&self, term: &str) -> Option<&[String]> {
        self.entries.get(term).map(Vec::as_slice)
    }

    pub fn source(&self) -> ThesaurusSource {
        self.source
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Populates `expansions` for single-term queries. Terms and kind are never touched.
pub fn expand(mut q: Query, thesaurus: &Thesaurus) -> Query {
    if q.terms.len() != 1 {
        return q;
    }
    let term = &q.terms[0];
    if let Some(synonyms) = thesaurus.lookup(term) {
        if !synonyms.is_empty() {
            q.expansions.insert(term.clone(), synonyms.to_vec());
        }
    }
    q
}

/// Remote dictionary lookup with the same contract as the file thesaurus.
///
/// `GET {endpoint}/{term}` is expected to answer with a JSON array of
/// synonym strings. A failed lookup yields `ThesaurusUnavailable`, which
/// callers treat as "no expansions".
#[derive(Debug, Clone)]
pub struct RemoteThesaurus {
    endpoint: String,
    client: reqwest::Client,
}

impl RemoteThesaurus {
    pub fn new(endpoint: impl Into<String>, timeout: Duration) -> Result<Self, QueryError> {
        let client = reqwest::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| QueryError::ThesaurusUnavailable(e.to_string()))?;
        Ok(Self {
            endpoint: endpoint.into().trim_end_matches('/').to_string(),
            client,
        })
    }

    /// Returns a one-entry remote thesaurus for `term`.
    pub async fn lookup(&self, term: &str) -> Result<Thesaurus, QueryError> {
        let unavailable = |e: reqwest::Error| QueryError::ThesaurusUnavailable(e.to_string());
        let url = format!("{}/{}", self.endpoint, term);
        let synonyms: Vec<String> = self
            .client
            .get(url)
            .send()
            .await
            .and_then(reqwest::Response::error_for_status)
            .map_err(unavailable)?
            .json()
            .await
            .map_err(unavailable)?;
        Ok(Thesaurus::from_entries(
            [(term.to_string(), synonyms)],
            ThesaurusSource::Remote,
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fixture_thesaurus() -> Thesaurus {
        Thesaurus::from_json(r#"{"alcoholism": ["dipsomania"], "computer": ["pc", "laptop"]}"#)
            .unwrap()
    }

    #[test]
    fn normalizes_whitespace_and_case() {
        let q = normalize("  Local   Computer Shop ").unwrap();
        assert_eq!(q.terms, vec!["local", "computer", "shop"]);
        assert_eq!(q.kind, QueryKind::Tail);
        assert!(q.expansions.is_empty());
    }

    #[test]
    fn single_word_is_head() {
        let q = normalize("Alcoholism").unwrap();
        assert_eq!(q.terms, vec!["alcoholism"]);
        assert_eq!(q.kind, QueryKind::Head);
    }

    #[test]
    fn punctuation_only_is_empty() {
        assert!(matches!(normalize("   !!!  "), Err(QueryError::EmptyQuery)));
        assert!(matches!(normalize(""), Err(QueryError::EmptyQuery)));
    }

    #[test]
    fn keeps_internal_hyphens_only() {
        let q = normalize("-well-known- \"e-mail,\" (x)").unwrap();
        assert_eq!(q.terms, vec!["well-known", "e-mail", "x"]);
        assert!(matches!(normalize("- -- ---"), Err(QueryError::EmptyQuery)));
    }

    #[test]
    fn classification_boundaries() {
        assert_eq!(classify(&["computer"]), QueryKind::Head);
        assert_eq!(classify(&["local", "computer"]), QueryKind::Head);
        assert_eq!(
            classify(&["cheap", "computer", "for", "student"]),
            QueryKind::Tail
        );
    }

    #[test]
    fn expands_single_term() {
        let q = expand(normalize("alcoholism").unwrap(), &fixture_thesaurus());
        assert_eq!(q.expansions["alcoholism"], vec!["dipsomania"]);
    }

    #[test]
    fn multi_term_is_never_expanded() {
        let q = normalize("local computer").unwrap();
        assert_eq!(expand(q.clone(), &fixture_thesaurus()), q);
    }

    #[test]
    fn absent_term_not_expanded() {
        let q = expand(normalize("zzzq").unwrap(), &fixture_thesaurus());
        assert!(q.expansions.is_empty());
    }

    #[test]
    fn thesaurus_drops_duplicates_and_self() {
        let t = Thesaurus::from_json(r#"{"Car": ["auto", "car", "Auto", "automobile"]}"#).unwrap();
        assert_eq!(t.lookup("car").unwrap(), ["auto", "automobile"]);
        assert_eq!(t.source(), ThesaurusSource::File);
    }

    #[test]
    fn thesaurus_rejects_bad_json() {
        assert!(Thesaurus::from_json(r#"{"a": "b"}"#).is_err());
    }

    #[tokio::test]
    async fn remote_unreachable_is_unavailable() {
        let remote = RemoteThesaurus::new("http://127.0.0.1:9", Duration::from_millis(500)).unwrap();
        let err = remote.lookup("alcoholism").await.unwrap_err();
        assert!(matches!(err, QueryError::ThesaurusUnavailable(_)));
    }

    proptest! {
        #[test]
        fn normalize_is_idempotent(raw in "\\PC{0,40}") {
            if let Ok(q) = normalize(&raw) {
                let again = normalize(&q.key()).unwrap();
                prop_assert_eq!(again.terms, q.terms);
            }
        }

        #[test]
        fn terms_are_clean(raw in "\\PC{0,40}") {
            if let Ok(q) = normalize(&raw) {
                for t in &q.terms {
                    prop_assert!(!t.is_empty());
                    prop_assert!(!t.chars().any(char::is_whitespace));
                    prop_assert_eq!(t.to_lowercase(), t.clone());
                }
                prop_assert_eq!(q.kind == QueryKind::Head, q.terms.len() <= 2);
            }
        }

        #[test]
        fn expand_preserves_terms_and_kind(raw in "[a-z ]{1,30}") {
            if let Ok(q) = normalize(&raw) {
                let t = Thesaurus::from_entries(
                    q.terms.iter().map(|t| (t.clone(), vec!["zz".to_string()])),
                    ThesaurusSource::File,
                );
                let e = expand(q.clone(), &t);
                prop_assert_eq!(&e.terms, &q.terms);
                prop_assert_eq!(e.kind, q.kind);
                prop_assert_eq!(!e.expansions.is_empty(), q.terms.len() == 1 && q.terms[0] != "zz");
            }
        }
    }
}
