//! Weighted SEO scoring, link-graph PageRank, and the final ordering of
//! merged results.

mod graph;
mod pagerank;

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::extractor::{Parameter, SeoFeatureVector};
use crate::merger::MergedRecord;

pub use graph::{build_link_graph, LinkGraph};
pub use pagerank::{pagerank, PageRankError, PageRankParams, PageRankScores};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RankError {
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
    #[error("weights file {path}: {reason}")]
    WeightsFile { path: String, reason: String },
}

/// One non-negative weight per ranking parameter. Defaults to 1.0 each.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightVector([f64; 9]);

impl Default for WeightVector {
    fn default() -> Self {
        Self([1.0; 9])
    }
}

impl WeightVector {
    pub fn new(weights: [f64; 9]) -> Result<Self, RankError> {
        if let Some(p) = Parameter::ALL
            .into_iter()
            .find(|p| !(weights[p.index()].is_finite() && weights[p.index()] >= 0.0))
        {
            return Err(RankError::InvalidWeights(format!(
                "{} must be a finite non-negative number, got {}",
                p,
                weights[p.index()]
            )));
        }
        if weights.iter().all(|w| *w == 0.0) {
            return Err(RankError::InvalidWeights("at least one weight must be positive".into()));
        }
        Ok(Self(weights))
    }

    pub fn get(&self, p: Parameter) -> f64 {
        self.0[p.index()]
    }

    pub fn as_array(&self) -> [f64; 9] {
        self.0
    }

    /// Exactly the nine parameter keys must be present.
    pub fn from_map(map: &BTreeMap<String, f64>) -> Result<Self, RankError> {
        let mut weights = [0.0; 9];
        let mut seen = [false; 9];
        for (key, value) in map {
            let p: Parameter = key.parse().map_err(RankError::InvalidWeights)?;
            weights[p.index()] = *value;
            seen[p.index()] = true;
        }
        if let Some(p) = Parameter::ALL.into_iter().find(|p| !seen[p.index()]) {
            return Err(RankError::InvalidWeights(format!("missing weight for {p}")));
        }
        Self::new(weights)
    }

    /// Replaces the listed weights, keeping the rest. Unknown keys are errors.
    pub fn with_overrides(&self, overrides: &BTreeMap<String, f64>) -> Result<Self, RankError> {
        let mut weights = self.0;
        for (key, value) in overrides {
            let p: Parameter = key.parse().map_err(RankError::InvalidWeights)?;
            weights[p.index()] = *value;
        }
        Self::new(weights)
    }

    pub fn scaled(&self, factor: f64) -> Result<Self, RankError> {
        Self::new(self.0.map(|w| w * factor))
    }

    pub fn to_map(&self) -> BTreeMap<String, f64> {
        Parameter::ALL
            .into_iter()
            .map(|p| (p.key().to_string(), self.get(p)))
            .collect()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, RankError> {
        let path = path.as_ref();
        let fail = |reason: String| RankError::WeightsFile {
            path: path.display().to_string(),
            reason,
        };
        let text = std::fs::read_to_string(path).map_err(|e| fail(e.to_string()))?;
        let map: BTreeMap<String, f64> = serde_json::from_str(&text).map_err(|e| fail(e.to_string()))?;
        Self::from_map(&map).map_err(|e| fail(e.to_string()))
    }
}

impl Serialize for WeightVector {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.to_map().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for WeightVector {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let map = BTreeMap::<String, f64>::deserialize(deserializer)?;
        Self::from_map(&map).map_err(serde::de::Error::custom)
    }
}

/// Weighted sum of the nine feature values, accumulated in parameter order.
pub fn score(v: &SeoFeatureVector, w: &WeightVector) -> f64 {
    Parameter::ALL
        .into_iter()
        .map(|p| v.get(p) * w.get(p))
        .sum()
}

/// A merged record with everything needed to place it.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub record: MergedRecord,
    pub features: SeoFeatureVector,
    pub pagerank: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedResult {
    pub record: MergedRecord,
    pub features: SeoFeatureVector,
    pub score: f64,
    pub pagerank: f64,
    pub position: usize,
}

/// Descending score; ties go to the page found by more engines, then the
/// better best source rank, then the smaller canonical URL.
fn placement(a: &(f64, Candidate), b: &(f64, Candidate)) -> Ordering {
    b.0.total_cmp(&a.0)
        .then_with(|| b.1.record.engine_count().cmp(&a.1.record.engine_count()))
        .then_with(|| a.1.record.best_rank().cmp(&b.1.record.best_rank()))
        .then_with(|| a.1.record.canonical.cmp(&b.1.record.canonical))
}

pub fn rank(candidates: Vec<Candidate>, w: &WeightVector) -> Vec<RankedResult> {
    let mut scored: Vec<(f64, Candidate)> = candidates
        .into_iter()
        .map(|c| (score(&c.features, w), c))
        .collect();
    scored.sort_by(placement);
    scored
        .into_iter()
        .enumerate()
        .map(|(i, (score, c))| RankedResult {
            record: c.record,
            features: c.features,
            score,
            pagerank: c.pagerank,
            position: i + 1,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::merger::{canonicalize, url_hash, Source};

    fn record(url: &str, sources: &[(&str, u32)]) -> MergedRecord {
        let canonical = canonicalize(url).unwrap();
        MergedRecord {
            url_hash: url_hash(&canonical),
            canonical,
            sources: sources
                .iter()
                .map(|(e, r)| Source {
                    engine: e.to_string(),
                    rank: *r,
                })
                .collect(),
            title: String::new(),
            snippet: String::new(),
            domain: String::new(),
        }
    }

    fn with_title_score(r: MergedRecord, title: f64) -> Candidate {
        Candidate {
            record: r,
            features: SeoFeatureVector {
                title_match: title,
                ..SeoFeatureVector::default()
            },
            pagerank: 0.15,
        }
    }

    #[test]
    fn score_examples() {
        let uniform = WeightVector::default();
        assert_eq!(score(&SeoFeatureVector::default(), &uniform), 0.0);
        assert_eq!(score(&SeoFeatureVector::from_array([1.0; 9]), &uniform), 9.0);
        let v = SeoFeatureVector::from_array([1.0, 1.0, 0.0, 0.4, 0.5, 1.0, 1.0, 0.0, 0.2]);
        assert!((score(&v, &uniform) - 5.1).abs() < 1e-12);
    }

    #[test]
    fn orders_by_score() {
        let ranked = rank(
            vec![
                with_title_score(record("http://low.example/", &[("google", 1)]), 0.2),
                with_title_score(record("http://high.example/", &[("google", 2)]), 1.0),
            ],
            &WeightVector::new([3.2, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]).unwrap(),
        );
        assert_eq!(ranked[0].record.canonical.as_str(), "http://high.example/");
        assert!((ranked[0].score - 3.2).abs() < 1e-12);
        assert_eq!(ranked.iter().map(|r| r.position).collect::<Vec<_>>(), vec![1, 2]);
    }

    #[test]
    fn tie_breaks() {
        let ranked = rank(
            vec![
                with_title_score(record("http://a.example/", &[("google", 1)]), 1.0),
                with_title_score(record("http://b.example/", &[("google", 3), ("bing", 2)]), 1.0),
                with_title_score(record("http://c.example/", &[("bing", 1)]), 1.0),
                with_title_score(record("http://0.example/", &[("google", 1)]), 1.0),
            ],
            &WeightVector::default(),
        );
        let order: Vec<&str> = ranked.iter().map(|r| r.record.canonical.as_str()).collect();
        assert_eq!(
            order,
            vec!["http://b.example/", "http://0.example/", "http://a.example/", "http://c.example/"]
        );
    }

    #[test]
    fn same_engine_twice_is_not_multi_source() {
        let ranked = rank(
            vec![
                with_title_score(record("http://a.example/", &[("google", 1), ("google", 5)]), 1.0),
                with_title_score(record("http://b.example/", &[("google", 2), ("bing", 2)]), 1.0),
            ],
            &WeightVector::default(),
        );
        assert_eq!(ranked[0].record.canonical.as_str(), "http://b.example/");
    }

    #[test]
    fn empty_input() {
        assert!(rank(vec![], &WeightVector::default()).is_empty());
    }

    #[test]
    fn weight_validation() {
        assert!(WeightVector::new([0.0; 9]).is_err());
        assert!(WeightVector::new([1.0, -1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0]).is_err());
        assert!(WeightVector::new([f64::NAN, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0]).is_err());
    }

    #[test]
    fn weights_file_needs_all_nine_keys() {
        let full: BTreeMap<String, f64> = WeightVector::default().to_map();
        assert!(WeightVector::from_map(&full).is_ok());
        let mut missing = full.clone();
        missing.remove("links");
        assert!(WeightVector::from_map(&missing).is_err());
        let mut extra = full;
        extra.insert("speed".into(), 1.0);
        assert!(WeightVector::from_map(&extra).is_err());
    }

    #[test]
    fn overrides_are_partial() {
        let w = WeightVector::default()
            .with_overrides(&BTreeMap::from([("title".to_string(), 2.0)]))
            .unwrap();
        assert_eq!(w.get(Parameter::Title), 2.0);
        assert_eq!(w.get(Parameter::Links), 1.0);
        assert!(WeightVector::default()
            .with_overrides(&BTreeMap::from([("nope".to_string(), 2.0)]))
            .is_err());
    }

    #[test]
    fn weights_serde_round_trip() {
        let w = WeightVector::new([1.0, 2.0, 0.0, 0.5, 1.0, 1.0, 1.0, 1.0, 0.25]).unwrap();
        let json = serde_json::to_string(&w).unwrap();
        assert_eq!(serde_json::from_str::<WeightVector>(&json).unwrap(), w);
    }
}
