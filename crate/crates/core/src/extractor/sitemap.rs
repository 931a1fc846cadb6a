//! Strict XML sitemap parsing. Any well-formedness error, and any violation
//! of the `urlset` grammar, rejects the whole document.

use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, NaiveDate, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const SITEMAP_NS: &str = "http://www.sitemaps.org/schemas/sitemap/0.9";
pub const DEFAULT_PRIORITY: f64 = 0.5;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("malformed sitemap: {0}")]
pub struct MalformedSitemap(pub String);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChangeFreq {
    Always,
    Hourly,
    Daily,
    Weekly,
    Monthly,
    Yearly,
    Never,
}

impl FromStr for ChangeFreq {
    type Err = MalformedSitemap;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "always" => Self::Always,
            "hourly" => Self::Hourly,
            "daily" => Self::Daily,
            "weekly" => Self::Weekly,
            "monthly" => Self::Monthly,
            "yearly" => Self::Yearly,
            "never" => Self::Never,
            other => return Err(MalformedSitemap(format!("unknown changefreq {other:?}"))),
        })
    }
}

impl fmt::Display for ChangeFreq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Always => "always",
            Self::Hourly => "hourly",
            Self::Daily => "daily",
            Self::Weekly => "weekly",
            Self::Monthly => "monthly",
            Self::Yearly => "yearly",
            Self::Never => "never",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SitemapEntry {
    pub loc: String,
    pub lastmod: Option<DateTime<Utc>>,
    pub changefreq: Option<ChangeFreq>,
    pub priority: f64,
}

fn malformed(msg: impl Into<String>) -> MalformedSitemap {
    MalformedSitemap(msg.into())
}

/// W3C datetime subset used by sitemaps: YYYY, YYYY-MM, YYYY-MM-DD, or a
/// full RFC 3339 timestamp.
fn parse_w3c_datetime(raw: &str) -> Option<DateTime<Utc>> {
    if let Ok(t) = DateTime::parse_from_rfc3339(raw) {
        return Some(t.with_timezone(&Utc));
    }
    let date = match raw.len() {
        4 => NaiveDate::parse_from_str(&format!("{raw}-01-01"), "%Y-%m-%d").ok(),
        7 => NaiveDate::parse_from_str(&format!("{raw}-01"), "%Y-%m-%d").ok(),
        10 => NaiveDate::parse_from_str(raw, "%Y-%m-%d").ok(),
        _ => None,
    }?;
    date.and_hms_opt(0, 0, 0).map(|dt| dt.and_utc())
}

fn parse_priority(raw: &str) -> Result<f64, MalformedSitemap> {
    let valid_shape = !raw.is_empty() && raw.chars().all(|c| c.is_ascii_digit() || c == '.') && raw.matches('.').count() <= 1;
    let value: f64 = if valid_shape { raw.parse().ok() } else { None }
        .ok_or_else(|| malformed(format!("priority {raw:?} is not a decimal")))?;
    if !(0.0..=1.0).contains(&value) {
        return Err(malformed(format!("priority {value} outside [0, 1]")));
    }
    Ok(value)
}

fn is_sitemap_element(node: &roxmltree::Node<'_, '_>) -> bool {
    node.is_element() && node.tag_name().namespace() == Some(SITEMAP_NS)
}

fn leaf_text(node: roxmltree::Node<'_, '_>) -> Result<String, MalformedSitemap> {
    if node.children().any(|c| c.is_element()) {
        return Err(malformed(format!("<{}> must not contain elements", node.tag_name().name())));
    }
    Ok(node.text().unwrap_or("").trim().to_string())
}

fn parse_url_entry(url: roxmltree::Node<'_, '_>) -> Result<SitemapEntry, MalformedSitemap> {
    let mut loc = None;
    let mut lastmod = None;
    let mut changefreq = None;
    let mut priority = None;

    for child in url.children().filter(is_sitemap_element) {
        let name = child.tag_name().name();
        let text = leaf_text(child)?;
        let duplicate = || malformed(format!("duplicate <{name}> in <url>"));
        match name {
            "loc" => {
                let parsed = url::Url::parse(&text).map_err(|e| malformed(format!("loc {text:?}: {e}")))?;
                if !matches!(parsed.scheme(), "http" | "https") || parsed.host_str().is_none() {
                    return Err(malformed(format!("loc {text:?} is not an absolute http(s) URL")));
                }
                if text.len() > 2048 {
                    return Err(malformed("loc longer than 2048 characters"));
                }
                if loc.replace(text).is_some() {
                    return Err(duplicate());
                }
            }
            "lastmod" => {
                let value = parse_w3c_datetime(&text).ok_or_else(|| malformed(format!("lastmod {text:?}")))?;
                if lastmod.replace(value).is_some() {
                    return Err(duplicate());
                }
            }
            "changefreq" => {
                if changefreq.replace(text.parse::<ChangeFreq>()?).is_some() {
                    return Err(duplicate());
                }
            }
            "priority" => {
                if priority.replace(parse_priority(&text)?).is_some() {
                    return Err(duplicate());
                }
            }
            other => return Err(malformed(format!("unexpected <{other}> in <url>"))),
        }
    }

    Ok(SitemapEntry {
        loc: loc.ok_or_else(|| malformed("<url> without <loc>"))?,
        lastmod,
        changefreq,
        priority: priority.unwrap_or(DEFAULT_PRIORITY),
    })
}

/// Parses a `urlset` sitemap. Elements from other namespaces (extensions)
/// and stray character data are ignored; everything else must conform.
pub fn parse_sitemap(xml: &str) -> Result<Vec<SitemapEntry>, MalformedSitemap> {
    let doc = roxmltree::Document::parse(xml).map_err(|e| malformed(e.to_string()))?;
    let root = doc.root_element();
    if root.tag_name().name() != "urlset" || root.tag_name().namespace() != Some(SITEMAP_NS) {
        return Err(malformed(format!(
            "root must be <urlset xmlns=\"{SITEMAP_NS}\">, found <{}>",
            root.tag_name().name()
        )));
    }
    root.children()
        .filter(is_sitemap_element)
        .map(|child| match child.tag_name().name() {
            "url" => parse_url_entry(child),
            other => Err(malformed(format!("unexpected <{other}> in <urlset>"))),
        })
        .collect()
}

fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

/// Serializes entries as a conforming `urlset` document.
pub fn to_xml(entries: &[SitemapEntry]) -> String {
    let mut out = String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    out.push_str(&format!("<urlset xmlns=\"{SITEMAP_NS}\">\n"));
    for e in entries {
        out.push_str("  <url>\n");
        out.push_str(&format!("    <loc>{}</loc>\n", escape(&e.loc)));
        if let Some(lastmod) = e.lastmod {
            out.push_str(&format!("    <lastmod>{}</lastmod>\n", lastmod.to_rfc3339()));
        }
        if let Some(cf) = e.changefreq {
            out.push_str(&format!("    <changefreq>{cf}</changefreq>\n"));
        }
        out.push_str(&format!("    <priority>{}</priority>\n", format_priority(e.priority)));
        out.push_str("  </url>\n");
    }
    out.push_str("</urlset>\n");
    out
}

fn format_priority(p: f64) -> String {
    // shortest decimal that round-trips, never exponent notation
    let s = format!("{p}");
    if s.contains('.') {
        s
    } else {
        format!("{s}.0")
    }
}
