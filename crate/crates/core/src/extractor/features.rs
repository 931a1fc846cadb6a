use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::PageMeta;
use crate::query::{tokenize, Query};

/// Occurrence count at which the snippet component saturates.
pub const SNIPPET_CAP: f64 = 5.0;
pub const FRESHNESS_HALF_LIFE_DAYS: f64 = 180.0;
/// Weight of a synonym hit relative to an exact query-term hit.
pub const SYNONYM_DISCOUNT: f64 = 0.5;

/// The nine ranking parameters, in scoring order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Parameter {
    Title,
    Description,
    Keyword,
    Snippet,
    Freshness,
    Charset,
    ImageAlt,
    Sitemap,
    Links,
}

impl Parameter {
    pub const ALL: [Parameter; 9] = [
        Parameter::Title,
        Parameter::Description,
        Parameter::Keyword,
        Parameter::Snippet,
        Parameter::Freshness,
        Parameter::Charset,
        Parameter::ImageAlt,
        Parameter::Sitemap,
        Parameter::Links,
    ];

    pub fn key(self) -> &'static str {
        match self {
            Parameter::Title => "title",
            Parameter::Description => "description",
            Parameter::Keyword => "keyword",
            Parameter::Snippet => "snippet",
            Parameter::Freshness => "freshness",
            Parameter::Charset => "charset",
            Parameter::ImageAlt => "image_alt",
            Parameter::Sitemap => "sitemap",
            Parameter::Links => "links",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Parameter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for Parameter {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Parameter::ALL
            .into_iter()
            .find(|p| p.key() == s)
            .ok_or_else(|| format!("unknown ranking parameter {s:?}"))
    }
}

/// Per-page values for the nine ranking parameters, each in [0, 1].
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SeoFeatureVector {
    pub title_match: f64,
    pub desc_match: f64,
    pub keyword_match: f64,
    pub snippet_freq: f64,
    pub freshness: f64,
    pub charset_declared: f64,
    pub image_alt: f64,
    pub sitemap: f64,
    pub inlinks: f64,
}

impl SeoFeatureVector {
    pub fn from_array(v: [f64; 9]) -> Self {
        Self {
            title_match: v[0],
            desc_match: v[1],
            keyword_match: v[2],
            snippet_freq: v[3],
            freshness: v[4],
            charset_declared: v[5],
            image_alt: v[6],
            sitemap: v[7],
            inlinks: v[8],
        }
    }

    pub fn to_array(&self) -> [f64; 9] {
        [
            self.title_match,
            self.desc_match,
            self.keyword_match,
            self.snippet_freq,
            self.freshness,
            self.charset_declared,
            self.image_alt,
            self.sitemap,
            self.inlinks,
        ]
    }

    pub fn get(&self, p: Parameter) -> f64 {
        self.to_array()[p.index()]
    }

    pub fn is_valid(&self) -> bool {
        self.to_array().iter().all(|v| (0.0..=1.0).contains(v))
    }
}

/// Occurrences of `needle` (a token sequence) inside `haystack`.
fn count_phrase(haystack: &[String], needle: &[String]) -> usize {
    if needle.is_empty() || needle.len() > haystack.len() {
        return 0;
    }
    haystack.windows(needle.len()).filter(|w| *w == needle).count()
}

struct Matcher {
    terms: Vec<Vec<String>>,
    synonyms: Vec<Vec<String>>,
}

impl Matcher {
    fn new(q: &Query) -> Self {
        Self {
            terms: q.terms.iter().map(|t| vec![t.clone()]).collect(),
            synonyms: q
                .synonyms()
                .map(tokenize)
                .filter(|s| !s.is_empty())
                .collect(),
        }
    }

    /// 1 for an exact term hit, the synonym discount for a synonym-only hit, else 0.
    fn presence(&self, text: &str) -> f64 {
        let tokens = tokenize(text);
        if self.terms.iter().any(|t| count_phrase(&tokens, t) > 0) {
            1.0
        } else if self.synonyms.iter().any(|s| count_phrase(&tokens, s) > 0) {
            SYNONYM_DISCOUNT
        } else {
            0.0
        }
    }

    fn weighted_count(&self, text: &str) -> f64 {
        let tokens = tokenize(text);
        let exact: usize = self.terms.iter().map(|t| count_phrase(&tokens, t)).sum();
        let synonym: usize = self.synonyms.iter().map(|s| count_phrase(&tokens, s)).sum();
        exact as f64 + SYNONYM_DISCOUNT * synonym as f64
    }
}

/// Exponential decay with a 180-day half-life of the age of the freshest
/// known date. Future dates count as age zero; no date scores 0.
pub fn freshness(meta: &PageMeta, now: DateTime<Utc>) -> f64 {
    let newest = [meta.meta_expires, meta.last_modified, meta.header_expires]
        .into_iter()
        .flatten()
        .max();
    match newest {
        None => 0.0,
        Some(date) => {
            let age_days = ((now - date).num_milliseconds() as f64 / 86_400_000.0).max(0.0);
            0.5f64.powf(age_days / FRESHNESS_HALF_LIFE_DAYS)
        }
    }
}

/// Computes the nine-parameter vector for one (query, page) pair.
pub fn compute_features(q: &Query, snippet: &str, meta: &PageMeta, inlink_norm: f64, now: DateTime<Utc>) -> SeoFeatureVector {
    let matcher = Matcher::new(q);
    let presence = |text: Option<&str>| text.map_or(0.0, |t| matcher.presence(t));

    let keyword_match = meta
        .meta_keywords
        .iter()
        .map(|k| matcher.presence(k))
        .fold(0.0, f64::max);

    let images = meta.image_alt_stats;
    let image_alt = if images.images_total == 0 {
        1.0
    } else {
        f64::from(images.images_with_alt.min(images.images_total)) / f64::from(images.images_total)
    };

    SeoFeatureVector {
        title_match: presence(meta.title.as_deref()),
        desc_match: presence(meta.meta_description.as_deref()),
        keyword_match,
        snippet_freq: matcher.weighted_count(snippet).min(SNIPPET_CAP) / SNIPPET_CAP,
        freshness: freshness(meta, now),
        charset_declared: if meta.charset.is_some() { 1.0 } else { 0.0 },
        image_alt,
        sitemap: if meta.has_sitemap { 1.0 } else { 0.0 },
        inlinks: inlink_norm.clamp(0.0, 1.0),
    }
}
