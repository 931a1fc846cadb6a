//! On-page signal extraction and the nine-parameter feature vector.

mod features;
mod html;
mod sitemap;

pub use features::{
    compute_features, freshness, Parameter, SeoFeatureVector, FRESHNESS_HALF_LIFE_DAYS, SNIPPET_CAP,
    SYNONYM_DISCOUNT,
};
pub use html::{extract_meta, ImageAltStats, Outlink, PageMeta};
pub use sitemap::{parse_sitemap, to_xml as sitemap_to_xml, ChangeFreq, MalformedSitemap, SitemapEntry, DEFAULT_PRIORITY, SITEMAP_NS};
