//! Meta-search fusion: fan a query out to several engines, merge their
//! result lists, and re-rank the union with on-page SEO signals and
//! link analysis.

pub mod backends;
pub mod config;
pub mod evaluator;
pub mod extractor;
pub mod merger;
pub mod pipeline;
pub mod query;
pub mod ranker;
pub mod retriever;

pub use backends::{SearchBackend, SearchResultRecord};
pub use config::{AppConfig, RunMode};
pub use evaluator::{precision_at_k, PrecisionReport, PrecisionTable, Rating, RatingStore};
pub use extractor::{PageMeta, Parameter, SeoFeatureVector};
pub use merger::{canonicalize, CanonicalUrl, MergedRecord};
pub use pipeline::{Pipeline, PipelineError, SYSTEM_ID};
pub use query::{Query, QueryKind, Thesaurus};
pub use ranker::{LinkGraph, PageRankParams, RankedResult, WeightVector};
pub use retriever::{FetchPolicy, PageDocument};
