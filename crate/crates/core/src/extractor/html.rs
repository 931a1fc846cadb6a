use chrono::{DateTime, Utc};
use scraper::{ElementRef, Html, Selector};
use serde::{Deserialize, Serialize};

use crate::merger::CanonicalUrl;
use crate::retriever::{parse_timestamp, PageDocument};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Outlink {
    pub url: CanonicalUrl,
    pub anchor_text: String,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageAltStats {
    pub images_total: u32,
    pub images_with_alt: u32,
}

/// On-page signals pulled out of one HTML document.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PageMeta {
    pub title: Option<String>,
    pub meta_description: Option<String>,
    pub meta_keywords: Vec<String>,
    pub charset: Option<String>,
    pub meta_expires: Option<DateTime<Utc>>,
    pub meta_robots: Option<String>,
    pub meta_author: Option<String>,
    pub meta_language: Option<String>,
    pub image_alt_stats: ImageAltStats,
    pub breadcrumb_present: bool,
    pub outlinks: Vec<Outlink>,
    pub has_sitemap: bool,
    /// `Last-Modified` of the page itself (HTTP header or corpus manifest).
    pub last_modified: Option<DateTime<Utc>>,
    /// `Expires` HTTP header (or corpus manifest).
    pub header_expires: Option<DateTime<Utc>>,
}

fn selector(css: &str) -> Selector {
    Selector::parse(css).expect("static selector")
}

fn collapse(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn non_empty(text: String) -> Option<String> {
    (!text.is_empty()).then_some(text)
}

fn element_text(el: ElementRef<'_>) -> String {
    collapse(&el.text().collect::<String>())
}

const BREADCRUMB_SEPARATORS: [char; 5] = ['>', '»', '›', '/', '|'];

fn looks_like_breadcrumb(el: ElementRef<'_>, links: &Selector) -> bool {
    let marker = ["class", "id", "aria-label"].iter().any(|attr| {
        el.value()
            .attr(attr)
            .is_some_and(|v| v.to_ascii_lowercase().contains("breadcrumb"))
    }) || el
        .value()
        .attr("itemtype")
        .is_some_and(|v| v.contains("BreadcrumbList"));
    if marker {
        return true;
    }
    // A nav holding a link trail: at least two links joined by at least two separators.
    if el.value().name() != "nav" || el.select(links).count() < 2 {
        return false;
    }
    let separators: usize = el
        .children()
        .filter_map(|child| child.value().as_text())
        .map(|t| t.chars().filter(|c| BREADCRUMB_SEPARATORS.contains(c)).count())
        .sum();
    separators >= 2
}

/// Tolerant extraction of title, meta tags, image alt coverage, breadcrumb
/// presence and absolute outlinks. Tag and attribute names are matched
/// case-insensitively; attribute values such as `name="KEYWORDS"` too.
///
/// `has_sitemap` is always false here; it is decided by probing the site.
pub fn extract_meta(doc: &PageDocument) -> PageMeta {
    let html = Html::parse_document(&doc.body);
    let mut meta = PageMeta {
        last_modified: doc.last_modified,
        header_expires: doc.expires,
        ..PageMeta::default()
    };

    meta.title = html
        .select(&selector("title"))
        .next()
        .and_then(|t| non_empty(element_text(t)));

    for el in html.select(&selector("meta")) {
        let attrs = el.value();
        let content = attrs.attr("content").map(collapse);
        if let Some(cs) = attrs.attr("charset") {
            meta.charset.get_or_insert_with(|| cs.trim().to_ascii_lowercase());
        }
        let name = attrs.attr("name").map(|n| n.trim().to_ascii_lowercase());
        let http_equiv = attrs.attr("http-equiv").map(|n| n.trim().to_ascii_lowercase());
        match (name.as_deref(), http_equiv.as_deref(), content) {
            (Some("description"), _, Some(c)) => {
                if meta.meta_description.is_none() {
                    meta.meta_description = non_empty(c);
                }
            }
            (Some("keywords"), _, Some(c)) => {
                meta.meta_keywords.extend(
                    c.split(',')
                        .map(|k| k.trim().to_string())
                        .filter(|k| !k.is_empty()),
                );
            }
            (Some("robots"), _, Some(c)) => meta.meta_robots = non_empty(c),
            (Some("author"), _, Some(c)) => meta.meta_author = non_empty(c),
            (Some("language"), _, Some(c)) => meta.meta_language = non_empty(c),
            (_, Some("content-language"), Some(c)) => {
                meta.meta_language.get_or_insert(c);
            }
            (_, Some("content-type"), Some(c)) => {
                let lower = c.to_ascii_lowercase();
                if let Some((_, cs)) = lower.split_once("charset=") {
                    let cs = cs.split(';').next().unwrap_or("").trim();
                    if !cs.is_empty() {
                        meta.charset.get_or_insert_with(|| cs.to_string());
                    }
                }
            }
            (Some("expires"), _, Some(c)) | (_, Some("expires"), Some(c)) => {
                meta.meta_expires = parse_timestamp(&c);
            }
            _ => {}
        }
    }

    for img in html.select(&selector("img")) {
        meta.image_alt_stats.images_total += 1;
        if img.value().attr("alt").is_some_and(|alt| !alt.trim().is_empty()) {
            meta.image_alt_stats.images_with_alt += 1;
        }
    }

    let links = selector("a[href]");
    meta.breadcrumb_present = html
        .select(&selector("nav, ol, ul, div, p, span"))
        .any(|el| looks_like_breadcrumb(el, &links));

    let page_url = url::Url::parse(doc.canonical_url.as_str()).ok();
    let base = html
        .select(&selector("base[href]"))
        .next()
        .and_then(|b| b.value().attr("href"))
        .and_then(|href| url::Url::options().base_url(page_url.as_ref()).parse(href.trim()).ok())
        .or(page_url);
    for a in html.select(&links) {
        let href = a.value().attr("href").unwrap_or("").trim();
        if href.is_empty() || href.starts_with('#') {
            continue;
        }
        let resolved = url::Url::options().base_url(base.as_ref()).parse(href);
        if let Some(url) = resolved.ok().and_then(|u| crate::merger::canonicalize(u.as_str()).ok()) {
            meta.outlinks.push(Outlink {
                url,
                anchor_text: element_text(a),
            });
        }
    }

    meta
}
