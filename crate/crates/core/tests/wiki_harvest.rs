mod common;

use std::sync::Arc;

use common::{png, serve, MockServer};
use vlcorpus::http::RetryPolicy;
use vlcorpus::wiki_harvest::{harvest, HarvestError, WikiClient, WikiConfig};

/// Fixture encyclopedia: search results per keyword, three articles, four images.
fn fixture_site() -> MockServer {
    serve(Arc::new(|path: &str, _| {
        if path.starts_with("/w/api.php") {
            let url = url::Url::parse(&format!("http://x{path}")).unwrap();
            let q: std::collections::HashMap<_, _> = url.query_pairs().into_owned().collect();
            assert_eq!(q["action"], "query");
            assert_eq!(q["list"], "search");
            assert_eq!(q["format"], "json");
            let titles: Vec<&str> = match q["srsearch"].as_str() {
                "Biomimicry" => vec!["Spider web", "Nacre", "Missing page", "Lotus effect", "Gecko"],
                "Bone" => vec!["Nacre"],
                "Silk" => vec!["Spider web"],
                _ => vec![],
            };
            let search: Vec<_> = titles.iter().map(|t| serde_json::json!({"ns": 0, "title": t})).collect();
            return (200, serde_json::json!({"batchcomplete": "", "query": {"search": search}}).to_string().into_bytes(), "application/json");
        }
        let page = |figs: &[(&str, &str)]| {
            let body: String = figs
                .iter()
                .map(|(src, cap)| format!(r#"<figure><img src="{src}" width="200" height="150"><figcaption>{cap}</figcaption></figure>"#))
                .collect();
            (200, format!("<html><body><img src=\"/icon.png\" width=\"16\" height=\"16\">{body}</body></html>").into_bytes(), "text/html")
        };
        match path {
            "/wiki/Spider_web" => page(&[("/img/web.png", "An orb web"), ("/img/shared.png", "Shared figure")]),
            "/wiki/Nacre" => page(&[("/img/nacre.png", "Nacre layers"), ("/img/shared.png", "Shared figure again")]),
            "/wiki/Lotus_effect" => page(&[("/img/small.png", "Undersized after download"), ("/img/broken.png", "Broken")]),
            "/img/web.png" => (200, (png(300, 200, 1)), "image/png"),
            "/img/nacre.png" => (200, (png(256, 256, 2)), "image/png"),
            "/img/shared.png" => (200, (png(200, 400, 3)), "image/png"),
            "/img/small.png" => (200, (png(64, 300, 4)), "image/png"),
            "/img/broken.png" => (200, "not an image".into(), "image/png"),
            _ => (404, "missing".into(), "text/plain"),
        }
    }))
}

fn client(site: &str) -> WikiClient {
    WikiClient::new(WikiConfig {
        site: site.to_string(),
        host_spacing_ms: 0,
        retry: RetryPolicy::immediate(2),
        timeout_secs: 10.0,
        ..Default::default()
    })
    .unwrap()
}

#[test]
fn search_truncates_and_handles_no_hits() {
    let site = fixture_site();
    let c = client(&site.base);
    let hits = c.search_articles("Biomimicry", 3).unwrap();
    let titles: Vec<&str> = hits.iter().map(|h| h.title.as_str()).collect();
    assert_eq!(titles, ["Spider web", "Nacre", "Missing page"]);
    assert_eq!(hits.iter().map(|h| h.rank).collect::<Vec<_>>(), [1, 2, 3]);
    assert!(c.search_articles("Nothing", 100).unwrap().is_empty());
    assert!(site.seen.lock().unwrap()[0].path.contains("srlimit=3"));
    assert!(matches!(c.search_articles(" ", 3), Err(HarvestError::EmptyKeyword)));
}

#[test]
fn harvest_dedupes_skips_failures_and_resumes() {
    let site = fixture_site();
    let c = client(&site.base);
    let dir = tempfile::tempdir().unwrap();
    let kws: Vec<String> = ["Biomimicry", "Bone", "Silk"].map(String::from).to_vec();
    let rep = harvest(&c, &kws, 100, dir.path()).unwrap();

    let urls: Vec<&str> = rep.records.iter().map(|r| r.image_url.as_str()).collect();
    let base = &site.base;
    assert_eq!(urls, [format!("{base}/img/web.png"), format!("{base}/img/shared.png"), format!("{base}/img/nacre.png")]);
    let shared = &rep.records[1];
    assert_eq!((shared.keyword.as_str(), shared.article_title.as_str()), ("Biomimicry", "Spider web"));
    assert_eq!((shared.intrinsic_width_px, shared.intrinsic_height_px), (200, 400));
    assert_eq!(shared.article_url, format!("{base}/wiki/Spider_web"));
    for r in &rep.records {
        assert!(url::Url::parse(&r.image_url).is_ok() && url::Url::parse(&r.article_url).is_ok());
        assert!(dir.path().join(&r.image_ref).is_file());
    }
    let stages: Vec<&str> = rep.issues.iter().map(|i| i.stage.as_str()).collect();
    assert!(stages.contains(&"article"), "{stages:?}");
    assert!(rep.issues.iter().any(|i| i.subject.ends_with("/img/broken.png")));
    assert!(!rep.issues.iter().any(|i| i.subject.ends_with("/img/small.png")));

    let first = std::fs::read(dir.path().join("wiki_records.jsonl")).unwrap();
    let image_gets = |s: &MockServer| s.seen.lock().unwrap().iter().filter(|r| r.path.ends_with("web.png") || r.path.ends_with("nacre.png")).count();
    let before = image_gets(&site);
    let again = harvest(&c, &kws, 100, dir.path()).unwrap();
    assert_eq!(again.added, 0);
    assert_eq!(again.records, rep.records);
    assert_eq!(image_gets(&site), before);
    assert_eq!(std::fs::read(dir.path().join("wiki_records.jsonl")).unwrap(), first);
}

#[test]
fn empty_keyword_list_is_an_error() {
    let c = client("http://127.0.0.1:9");
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(harvest(&c, &[], 10, dir.path()), Err(HarvestError::NoKeywords)));
}
