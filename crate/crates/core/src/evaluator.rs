//! Precision@k over binary relevance judgments, and the append-only store
//! for 1–5 user ratings.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::fs::OpenOptions;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::merger::CanonicalUrl;

pub const DEFAULT_K: usize = 10;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no queries to evaluate")]
    EmptyEvaluation,
    #[error("invalid rating: {0}")]
    InvalidRating(String),
    #[error("judgments file {path}: {reason}")]
    InvalidJudgments { path: String, reason: String },
    #[error("rating store {path}: {reason}")]
    Store { path: String, reason: String },
}

/// `|top-k ∩ relevant| / k`. Missing slots in a short list count as
/// irrelevant, so the denominator is always `k`.
pub fn precision_at_k<T: Eq + std::hash::Hash>(ranked: &[T], relevant: &HashSet<T>, k: usize) -> f64 {
    if k == 0 {
        return 0.0;
    }
    let hits = ranked.iter().take(k).filter(|u| relevant.contains(u)).count();
    hits as f64 / k as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrecisionReport {
    pub system_id: String,
    pub k: usize,
    pub per_query: BTreeMap<String, f64>,
    pub mean: f64,
}

/// Unweighted mean of per-query precision values.
pub fn mean_precision(system_id: &str, k: usize, per_query: BTreeMap<String, f64>) -> Result<PrecisionReport, EvalError> {
    if per_query.is_empty() {
        return Err(EvalError::EmptyEvaluation);
    }
    let mean = per_query.values().sum::<f64>() / per_query.len() as f64;
    Ok(PrecisionReport {
        system_id: system_id.to_string(),
        k,
        per_query,
        mean,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Judgment {
    pub query: String,
    pub relevant: BTreeSet<CanonicalUrl>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Judgments {
    pub k: usize,
    pub queries: Vec<Judgment>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct JudgmentsFile {
    k: usize,
    queries: Vec<JudgmentEntry>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct JudgmentEntry {
    query: String,
    relevant: Vec<String>,
}

impl Judgments {
    pub fn parse(text: &str, origin: &str) -> Result<Self, EvalError> {
        let invalid = |reason: String| EvalError::InvalidJudgments {
            path: origin.to_string(),
            reason,
        };
        let file: JudgmentsFile = serde_json::from_str(text).map_err(|e| invalid(e.to_string()))?;
        if file.k == 0 {
            return Err(invalid("k must be at least 1".into()));
        }
        let mut queries = Vec::with_capacity(file.queries.len());
        for entry in file.queries {
            let query = crate::query::normalize(&entry.query)
                .map_err(|e| invalid(format!("{:?}: {e}", entry.query)))?
                .key();
            let mut relevant = BTreeSet::new();
            for raw in entry.relevant {
                let canonical = crate::merger::canonicalize(&raw).map_err(|e| invalid(e.to_string()))?;
                if canonical.as_str() != raw {
                    return Err(invalid(format!("{raw:?} is not canonical (expected {canonical})")));
                }
                relevant.insert(canonical);
            }
            queries.push(Judgment { query, relevant });
        }
        Ok(Self { k: file.k, queries })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, EvalError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| EvalError::InvalidJudgments {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        Self::parse(&text, &path.display().to_string())
    }
}

/// Scores one system's ranked lists against the judgments. `ranked_for`
/// returns the system's canonical result list for a judged query.
pub fn evaluate_system<F>(system_id: &str, judgments: &Judgments, k: usize, mut ranked_for: F) -> Result<PrecisionReport, EvalError>
where
    F: FnMut(&str) -> Vec<CanonicalUrl>,
{
    let per_query = judgments
        .queries
        .iter()
        .map(|j| {
            let relevant: HashSet<CanonicalUrl> = j.relevant.iter().cloned().collect();
            let ranked = ranked_for(&j.query);
            (j.query.clone(), precision_at_k(&ranked, &relevant, k))
        })
        .collect();
    mean_precision(system_id, k, per_query)
}

/// Systems side by side, one row per system: the comparison-table shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrecisionTable {
    pub k: usize,
    pub rows: Vec<PrecisionReport>,
}

impl fmt::Display for PrecisionTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let width = self.rows.iter().map(|r| r.system_id.len()).max().unwrap_or(0).max("Search Engine".len());
        writeln!(f, "{:<width$}  Mean Precision", "Search Engine")?;
        for row in &self.rows {
            writeln!(f, "{:<width$}  {:.4}", row.system_id, row.mean)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rating {
    pub query: String,
    pub system_id: String,
    pub score: u8,
    pub timestamp: DateTime<Utc>,
}

impl Rating {
    pub fn validate(&self) -> Result<(), EvalError> {
        if !(1..=5).contains(&self.score) {
            return Err(EvalError::InvalidRating(format!("score {} outside 1..5", self.score)));
        }
        if self.system_id.trim().is_empty() {
            return Err(EvalError::InvalidRating("system_id is empty".into()));
        }
        Ok(())
    }
}

/// Newline-delimited JSON file of ratings. Appends are serialized through
/// a lock; reads parse the whole file.
#[derive(Debug)]
pub struct RatingStore {
    path: PathBuf,
    write_lock: Mutex<()>,
}

impl RatingStore {
    pub fn open(path: impl Into<PathBuf>) -> Self {
        Self {
            path: path.into(),
            write_lock: Mutex::new(()),
        }
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    fn store_error(&self, reason: impl ToString) -> EvalError {
        EvalError::Store {
            path: self.path.display().to_string(),
            reason: reason.to_string(),
        }
    }

    /// Appends the rating and returns its 1-based line number.
    pub fn record_rating(&self, rating: &Rating) -> Result<u64, EvalError> {
        rating.validate()?;
        let mut line = serde_json::to_string(rating).map_err(|e| self.store_error(e))?;
        line.push('\n');
        let _guard = self.write_lock.lock().unwrap_or_else(|p| p.into_inner());
        let existing = self.count_lines()?;
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.path)
            .map_err(|e| self.store_error(e))?;
        file.write_all(line.as_bytes()).map_err(|e| self.store_error(e))?;
        file.sync_data().map_err(|e| self.store_error(e))?;
        Ok(existing + 1)
    }

    fn count_lines(&self) -> Result<u64, EvalError> {
        match std::fs::File::open(&self.path) {
            Ok(f) => Ok(BufReader::new(f).lines().count() as u64),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(0),
            Err(e) => Err(self.store_error(e)),
        }
    }

    pub fn read_all(&self) -> Result<Vec<Rating>, EvalError> {
        let file = match std::fs::File::open(&self.path) {
            Ok(f) => f,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(self.store_error(e)),
        };
        BufReader::new(file)
            .lines()
            .enumerate()
            .filter(|(_, line)| line.as_ref().map_or(true, |l| !l.trim().is_empty()))
            .map(|(i, line)| {
                let line = line.map_err(|e| self.store_error(e))?;
                serde_json::from_str(&line).map_err(|e| self.store_error(format!("line {}: {e}", i + 1)))
            })
            .collect()
    }

    /// Mean score for `system_id`, or `None` when it has no ratings.
    pub fn aggregate_ratings(&self, system_id: &str) -> Result<Option<f64>, EvalError> {
        let scores: Vec<f64> = self
            .read_all()?
            .into_iter()
            .filter(|r| r.system_id == system_id)
            .map(|r| f64::from(r.score))
            .collect();
        Ok((!scores.is_empty()).then(|| scores.iter().sum::<f64>() / scores.len() as f64))
    }
}
