//! Application configuration loaded from TOML. Relative paths resolve
//! against the directory holding the config file.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backends::{EngineConfig, EngineMode};
use crate::ranker::{PageRankParams, WeightVector};
use crate::retriever::FetchPolicy;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {reason}")]
    Read { path: String, reason: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunMode {
    #[default]
    Offline,
    Live,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AppConfig {
    #[serde(default)]
    pub mode: RunMode,
    pub engines: Vec<EngineConfig>,
    #[serde(default)]
    pub weights: WeightVector,
    #[serde(default)]
    pub fetch_policy: FetchPolicy,
    #[serde(default)]
    pub pagerank: PageRankParams,
    /// Use normalized PageRank instead of normalized in-degree for the links parameter.
    #[serde(default)]
    pub use_pagerank_for_links: bool,
    pub fixture_dir: Option<PathBuf>,
    pub corpus_manifest: Option<PathBuf>,
    pub thesaurus_path: Option<PathBuf>,
    /// Base URL of a remote thesaurus service, used when no file is given.
    pub thesaurus_endpoint: Option<String>,
    pub ratings_path: PathBuf,
    pub judgments_path: Option<PathBuf>,
    #[serde(default = "default_listen")]
    pub listen_address: SocketAddr,
    #[serde(default = "default_k")]
    pub default_k: usize,
}

fn default_listen() -> SocketAddr {
    SocketAddr::from(([127, 0, 0, 1], 8080))
}

fn default_k() -> usize {
    crate::evaluator::DEFAULT_K
}

impl AppConfig {
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self, ConfigError> {
        let mut cfg: AppConfig = toml::from_str(text).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        cfg.resolve_paths(base_dir);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    fn resolve_paths(&mut self, base: &Path) {
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for p in [
            &mut self.fixture_dir,
            &mut self.corpus_manifest,
            &mut self.thesaurus_path,
            &mut self.judgments_path,
        ]
        .into_iter()
        .flatten()
        {
            resolve(p);
        }
        resolve(&mut self.ratings_path);
    }

    /// Directory that fixture engine paths are relative to.
    pub fn fixture_base(&self) -> PathBuf {
        self.fixture_dir.clone().unwrap_or_else(|| PathBuf::from("."))
    }

    /// Engines that take part in the current mode: fixture engines only when offline.
    pub fn active_engines(&self) -> Vec<&EngineConfig> {
        self.engines
            .iter()
            .filter(|e| self.mode == RunMode::Live || e.mode == EngineMode::Fixture)
            .collect()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: String| Err(ConfigError::Invalid(m));
        for engine in &self.engines {
            engine.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        }
        let mut ids: Vec<&str> = self.engines.iter().map(|e| e.engine_id.as_str()).collect();
        ids.sort_unstable();
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            return invalid(format!("duplicate engine_id {}", w[0]));
        }
        if ids.contains(&crate::pipeline::SYSTEM_ID) {
            return invalid(format!("engine_id {} is reserved", crate::pipeline::SYSTEM_ID));
        }
        match self.mode {
            RunMode::Offline => {
                if self.fixture_dir.is_none() {
                    return invalid("offline mode requires fixture_dir".into());
                }
                if self.corpus_manifest.is_none() {
                    return invalid("offline mode requires corpus_manifest".into());
                }
                if self.active_engines().is_empty() {
                    return invalid("offline mode requires at least one fixture engine".into());
                }
            }
            RunMode::Live => {
                if !self.engines.iter().any(|e| e.mode == EngineMode::Live) {
                    return invalid("live mode requires at least one live engine".into());
                }
            }
        }
        self.fetch_policy.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.pagerank
            .validate::<String>()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.default_k == 0 {
            return invalid("default_k must be at least 1".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const OFFLINE: &str = r#"
        mode = "offline"
        fixture_dir = "fx"
        corpus_manifest = "fx/corpus/manifest.json"
        ratings_path = "ratings.ndjson"

        [[engines]]
        engine_id = "google"
        mode = "fixture"
        fixture = "serp/google"
    "#;

    #[test]
    fn paths_resolve_against_config_dir() {
        let cfg = AppConfig::parse(OFFLINE, Path::new("/etc/iral")).unwrap();
        assert_eq!(cfg.fixture_dir.unwrap(), Path::new("/etc/iral/fx"));
        assert_eq!(cfg.ratings_path, Path::new("/etc/iral/ratings.ndjson"));
        assert_eq!(cfg.weights, WeightVector::default());
        assert_eq!(cfg.default_k, 10);
    }

    #[test]
    fn offline_needs_fixture_dir() {
        let text = OFFLINE.replace("fixture_dir = \"fx\"", "");
        assert!(AppConfig::parse(&text, Path::new(".")).is_err());
    }

    #[test]
    fn live_needs_a_live_engine() {
        let text = OFFLINE.replace("mode = \"offline\"", "mode = \"live\"");
        assert!(AppConfig::parse(&text, Path::new(".")).is_err());
    }

    #[test]
    fn reserved_and_duplicate_ids() {
        let dup = format!("{OFFLINE}\n[[engines]]\nengine_id = \"google\"\nmode = \"fixture\"\nfixture = \"x\"\n");
        assert!(AppConfig::parse(&dup, Path::new(".")).is_err());
        let reserved = OFFLINE.replace("\"google\"", "\"iral\"");
        assert!(AppConfig::parse(&reserved, Path::new(".")).is_err());
    }
}
