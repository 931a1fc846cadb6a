use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use axum::extract::{Path, State};
use axum::http::header;
use axum::response::{IntoResponse, Redirect};
use axum::routing::get;
use axum::Router;
use iral_core::retriever::{FetchError, FetchPolicy, Fetcher};

const LIMIT: usize = 1024;

#[derive(Default)]
struct Counters {
    in_flight: AtomicUsize,
    peak: AtomicUsize,
}

async fn counted(State(c): State<Arc<Counters>>) -> &'static str {
    let now = c.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
    c.peak.fetch_max(now, Ordering::SeqCst);
    tokio::time::sleep(Duration::from_millis(60)).await;
    c.in_flight.fetch_sub(1, Ordering::SeqCst);
    "<title>counted</title>"
}

async fn serve() -> (String, Arc<Counters>) {
    let counters = Arc::new(Counters::default());
    let app = Router::new()
        .route("/robots.txt", get(|| async { "User-agent: *\nDisallow: /private\n" }))
        .route(
            "/page",
            get(|| async {
                (
                    [
                        (header::CONTENT_TYPE, "text/html; charset=utf-8"),
                        (header::LAST_MODIFIED, "Wed, 05 Jul 2023 00:00:00 GMT"),
                    ],
                    "<title>Hello</title>",
                )
            }),
        )
        .route(
            "/latin1",
            get(|| async { ([(header::CONTENT_TYPE, "text/html; charset=iso-8859-1")], vec![b'c', b'a', b'f', 0xE9]) }),
        )
        .route("/private", get(|| async { "secret" }))
        .route(
            "/slow",
            get(|| async {
                tokio::time::sleep(Duration::from_secs(3)).await;
                "late"
            }),
        )
        .route("/exact", get(|| async { vec![b'x'; LIMIT] }))
        .route("/big", get(|| async { vec![b'x'; LIMIT + 1] }))
        .route(
            "/hop/{n}",
            get(|n: Path<usize>| async move {
                if n.0 == 0 {
                    Redirect::temporary("/page").into_response()
                } else {
                    Redirect::temporary(&format!("/hop/{}", n.0 - 1)).into_response()
                }
            }),
        )
        .route("/count/{i}", get(counted))
        .with_state(counters.clone());
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move { axum::serve(listener, app).await.unwrap() });
    (format!("http://{addr}"), counters)
}

fn policy() -> FetchPolicy {
    FetchPolicy {
        timeout: Duration::from_millis(500),
        max_bytes: LIMIT,
        ..FetchPolicy::default()
    }
}

#[tokio::test]
async fn fetches_page_with_headers() {
    let (base, _) = serve().await;
    let doc = Fetcher::new(policy()).unwrap().fetch(&format!("{base}/page")).await.unwrap();
    assert_eq!(doc.status, 200);
    assert_eq!(doc.body, "<title>Hello</title>");
    assert_eq!(doc.last_modified.unwrap().to_rfc3339(), "2023-07-05T00:00:00+00:00");
    assert_eq!(doc.canonical_url.as_str(), format!("{base}/page"));
}

#[tokio::test]
async fn decodes_declared_charset() {
    let (base, _) = serve().await;
    let doc = Fetcher::new(policy()).unwrap().fetch(&format!("{base}/latin1")).await.unwrap();
    assert_eq!(doc.body, "café");
}

#[tokio::test]
async fn timeout() {
    let (base, _) = serve().await;
    let err = Fetcher::new(policy()).unwrap().fetch(&format!("{base}/slow")).await.unwrap_err();
    assert!(matches!(err, FetchError::Timeout(_)), "{err:?}");
}

#[tokio::test]
async fn size_limit_is_inclusive() {
    let (base, _) = serve().await;
    let fetcher = Fetcher::new(policy()).unwrap();
    assert_eq!(fetcher.fetch(&format!("{base}/exact")).await.unwrap().body.len(), LIMIT);
    let err = fetcher.fetch(&format!("{base}/big")).await.unwrap_err();
    assert!(matches!(err, FetchError::TooLarge { max_bytes: LIMIT, .. }), "{err:?}");
}

#[tokio::test]
async fn redirect_limit() {
    let (base, _) = serve().await;
    let fetcher = Fetcher::new(policy()).unwrap();
    // hop/4 is five redirects away from /page.
    let doc = fetcher.fetch(&format!("{base}/hop/4")).await.unwrap();
    assert_eq!(doc.canonical_url.as_str(), format!("{base}/page"));
    let err = fetcher.fetch(&format!("{base}/hop/5")).await.unwrap_err();
    assert!(matches!(err, FetchError::TooManyRedirects(_)), "{err:?}");
}

#[tokio::test]
async fn robots_disallow() {
    let (base, _) = serve().await;
    let err = Fetcher::new(policy()).unwrap().fetch(&format!("{base}/private")).await.unwrap_err();
    assert!(matches!(err, FetchError::RobotsDisallowed(_)), "{err:?}");
    let ignoring = FetchPolicy {
        obey_robots: false,
        ..policy()
    };
    assert_eq!(Fetcher::new(ignoring).unwrap().fetch(&format!("{base}/private")).await.unwrap().body, "secret");
}

#[tokio::test]
async fn per_host_parallelism_is_bounded() {
    let (base, counters) = serve().await;
    let fetcher = Fetcher::new(policy()).unwrap();
    let urls: Vec<String> = (0..8).map(|i| format!("{base}/count/{i}")).collect();
    let results = fetcher.fetch_all(&urls).await;
    assert!(results.iter().all(Result::is_ok));
    assert_eq!(counters.peak.load(Ordering::SeqCst), 2);
}

#[tokio::test]
async fn invalid_url() {
    let err = Fetcher::new(policy()).unwrap().fetch("not a url").await.unwrap_err();
    assert!(matches!(err, FetchError::InvalidUrl(_)));
}

#[tokio::test]
async fn unreachable_host_is_a_network_error() {
    let err = Fetcher::new(FetchPolicy {
        obey_robots: false,
        ..policy()
    })
    .unwrap()
    .fetch("http://127.0.0.1:9/")
    .await
    .unwrap_err();
    assert!(matches!(err, FetchError::NetworkError { .. }), "{err:?}");
}
