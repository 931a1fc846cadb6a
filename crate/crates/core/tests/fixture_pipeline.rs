use std::path::PathBuf;

use iral_core::evaluator::Judgments;
use iral_core::{AppConfig, Pipeline};

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn pipeline() -> Pipeline {
    let cfg = AppConfig::load(fixtures().join("config.toml")).unwrap();
    Pipeline::from_config(&cfg).unwrap()
}

const ALCOHOLISM: [(&str, [f64; 9]); 6] = [
    ("https://health-facts.org/alcoholism", [1.0, 1.0, 1.0, 0.4, 1.0, 1.0, 1.0, 1.0, 1.0]),
    ("https://news.example.com/2012/drinking-study", [0.0, 0.5, 1.0, 0.2, 1.0, 1.0, 1.0, 0.0, 0.0]),
    ("https://wiki-med.org/wiki/Alcoholism", [1.0, 0.0, 0.0, 0.6, 0.0, 0.0, 1.0, 1.0, 2.0 / 3.0]),
    ("https://support-groups.org/meetings", [0.0, 1.0, 0.5, 0.2, 0.5, 1.0, 0.25, 0.0, 0.0]),
    ("https://recovery.example.net/alcoholism-treatment", [0.5, 0.0, 0.0, 0.0, 0.25, 1.0, 0.0, 1.0, 0.0]),
    ("https://dipsomania.example.org/", [0.5, 0.0, 0.0, 0.1, 0.0, 0.0, 1.0, 0.0, 0.0]),
];
const ALCOHOLISM_SCORES: [f64; 6] = [8.4, 4.7, 4.266666666666667, 3.45, 2.75, 1.6];

const SHOP: [(&str, [f64; 9]); 4] = [
    ("https://localpcshop.co.uk/", [1.0, 1.0, 1.0, 0.6, 0.5, 1.0, 1.0, 1.0, 1.0]),
    ("https://bigbox-electronics.com/computers", [0.0, 1.0, 0.0, 0.6, 1.0, 1.0, 0.5, 0.0, 0.0]),
    ("https://cheap-laptops.example.com/deals", [0.0, 0.0, 0.0, 0.2, 0.25, 1.0, 1.0, 1.0, 0.0]),
    ("https://computer-repairs.example.com/shop", [1.0, 0.0, 0.0, 0.2, 0.0, 0.0, 1.0, 0.0, 0.5]),
];
const SHOP_SCORES: [f64; 4] = [8.1, 4.1, 3.45, 2.7];

async fn check(query: &str, table: &[(&str, [f64; 9])], scores: &[f64]) {
    let outcome = pipeline().search(query, 10, None).await.unwrap();
    assert!(!outcome.degraded);
    let got: Vec<&str> = outcome.results.iter().map(|r| r.record.canonical.as_str()).collect();
    let want: Vec<&str> = table.iter().map(|(u, _)| *u).collect();
    assert_eq!(got, want);
    for ((r, (url, features)), score) in outcome.results.iter().zip(table).zip(scores) {
        for (a, b) in r.features.to_array().iter().zip(features) {
            assert!((a - b).abs() < 1e-12, "{url}: features {:?} != {features:?}", r.features.to_array());
        }
        assert!((r.score - score).abs() < 1e-12, "{url}: score {} != {score}", r.score);
    }
}

#[tokio::test]
async fn alcoholism_matches_hand_table() {
    check("alcoholism", &ALCOHOLISM, &ALCOHOLISM_SCORES).await;
}

#[tokio::test]
async fn local_computer_shop_matches_hand_table() {
    check("Local  Computer SHOP", &SHOP, &SHOP_SCORES).await;
}

#[tokio::test]
async fn tied_rank_one_takes_bing_snippet() {
    let outcome = pipeline().search("local computer shop", 10, None).await.unwrap();
    let top = &outcome.results[0].record;
    assert_eq!(top.snippet, "Local computer shop offering repairs.");
    assert_eq!(top.sources.len(), 2);
}

#[tokio::test]
async fn precision_matches_hand_counts() {
    let p = pipeline();
    let judgments = Judgments::load(fixtures().join("judgments.json")).unwrap();
    for (k, expected) in [(None, [0.2, 0.25, 0.3]), (Some(3), [2.0 / 3.0, 5.0 / 6.0, 2.0 / 3.0])] {
        let table = p.evaluate(&judgments, k).await.unwrap();
        let ids: Vec<&str> = table.rows.iter().map(|r| r.system_id.as_str()).collect();
        assert_eq!(ids, ["google", "bing", "iral"]);
        for (row, want) in table.rows.iter().zip(expected) {
            assert!((row.mean - want).abs() <= 1e-9, "{}: {} != {want}", row.system_id, row.mean);
        }
    }
}

#[tokio::test]
async fn unknown_query_is_empty_not_an_error() {
    let outcome = pipeline().search("zebra husbandry", 10, None).await.unwrap();
    assert!(outcome.results.is_empty());
    assert!(!outcome.degraded);
}

#[tokio::test]
async fn empty_query_is_rejected() {
    assert!(pipeline().search("  !! ", 10, None).await.is_err());
}
