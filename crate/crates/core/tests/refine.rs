mod common;

use std::sync::Arc;
use std::thread;
use std::time::Duration;

use common::{chat_reply, png, serve};
use vlcorpus::http::RetryPolicy;
use vlcorpus::refine::{refine_batch, refine_caption, EndpointConfig, RefineClient, RefineItem, TemplateFile, TemplateId, Validation};

fn client(base: &str, max_in_flight: usize) -> RefineClient {
    RefineClient::new(EndpointConfig {
        base_url: base.to_string(),
        model_name: "mock-vlm".into(),
        max_in_flight,
        timeout_secs: 10.0,
        retry: RetryPolicy::immediate(2),
        ..Default::default()
    })
    .unwrap()
}

fn items(dir: &std::path::Path, n: usize) -> Vec<RefineItem> {
    (0..n)
        .map(|i| {
            let p = dir.join(format!("{i}.png"));
            std::fs::write(&p, png(8, 8, i as u8)).unwrap();
            RefineItem {
                record_id: format!("rec{i:02}"),
                image_path: p,
                caption: format!("Figure {i}: a `sample`"),
            }
        })
        .collect()
}

#[test]
fn single_call_wire_format_and_validation() {
    let server = serve(Arc::new(|_, body: &str| {
        let v: serde_json::Value = serde_json::from_str(body).unwrap();
        let caption_text = v["messages"][1]["content"][0]["text"].as_str().unwrap().to_string();
        let reply = if caption_text.contains("flake") { "The image shows a graphene flake." } else { "A flake is shown." };
        (200, chat_reply(reply), "application/json")
    }));
    let c = client(&server.base, 1);
    let templates = TemplateFile::shipped();
    let t = templates.get(TemplateId::Wiki).unwrap();
    let r = refine_caption(&c, "r1", t, &png(4, 4, 1), "Rewrite this description: ```flake```").unwrap();
    assert_eq!(r.refined_text, "The image shows a graphene flake.");
    assert_eq!(r.validation, Validation::Pass);
    let w = refine_caption(&c, "r2", t, &png(4, 4, 1), "other").unwrap();
    assert_eq!(w.validation, Validation::Warn("opener".into()));

    let seen = server.seen.lock().unwrap();
    assert_eq!(seen[0].path, "/v1/chat/completions");
    let v: serde_json::Value = serde_json::from_str(&seen[0].body).unwrap();
    assert_eq!(v["model"], "mock-vlm");
    assert_eq!(v["temperature"], 0.2);
    assert_eq!(v["max_tokens"], 1024);
    assert_eq!(v["messages"][0]["role"], "system");
    assert_eq!(v["messages"][0]["content"], t.system_text.as_str());
    assert!(v["messages"][1]["content"][1]["image_url"]["url"].as_str().unwrap().starts_with("data:image/png;base64,"));
}

#[test]
fn empty_reply_and_http_errors_fail() {
    let server = serve(Arc::new(|_, body: &str| {
        if body.contains("empty") {
            (200, chat_reply(""), "application/json")
        } else {
            (503, "busy".into(), "text/plain")
        }
    }));
    let c = client(&server.base, 1);
    let templates = TemplateFile::shipped();
    let t = templates.get(TemplateId::Wiki).unwrap();
    let e = refine_caption(&c, "r9", t, &png(4, 4, 1), "empty").unwrap_err();
    assert_eq!(e.record_id, "r9");
    let e = refine_caption(&c, "r10", t, &png(4, 4, 1), "x").unwrap_err();
    assert!(e.message.contains("503"));
    // One call for the empty reply, two attempts for the 503.
    assert_eq!(server.seen.lock().unwrap().len(), 3);
}

#[test]
fn batch_failures_resume_and_order() {
    let server = serve(Arc::new(|_, body: &str| {
        for bad in ["Figure 2:", "Figure 5:", "Figure 7:"] {
            if body.contains(bad) {
                return (500, "scripted failure".into(), "text/plain");
            }
        }
        thread::sleep(Duration::from_millis(5));
        (200, chat_reply("The image shows a sample."), "application/json")
    }));
    let dir = tempfile::tempdir().unwrap();
    let its = items(dir.path(), 10);
    let templates = TemplateFile::shipped();
    let t = templates.get(TemplateId::PaperConcise).unwrap();
    let out = dir.path().join("out");
    let c = client(&server.base, 4);

    let rep = refine_batch(&c, &its, t, &out).unwrap();
    assert_eq!(rep.refined().count(), 7);
    assert_eq!(rep.failures().count(), 3);
    let ids: Vec<&str> = rep.outcomes.iter().map(|o| o.record_id()).collect();
    let expected: Vec<String> = its.iter().map(|i| i.record_id.clone()).collect();
    assert_eq!(ids, expected);
    let manifest = std::fs::read_to_string(out.join("manifest.jsonl")).unwrap();
    let manifest_ids: Vec<String> = manifest
        .lines()
        .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap()["record_id"].as_str().unwrap().to_string())
        .collect();
    assert_eq!(manifest_ids, expected);
    assert_eq!(manifest.matches("\"failed\"").count(), 3);

    // Only the three failures are retried (two attempts each).
    let before = server.seen.lock().unwrap().len();
    let again = refine_batch(&c, &its, t, &out).unwrap();
    assert_eq!(again.calls, 3);
    assert_eq!(again.reused, 7);
    assert_eq!(server.seen.lock().unwrap().len() - before, 6);

    // With everything completed, a rerun makes no calls.
    let only_ok: Vec<RefineItem> = its.iter().filter(|i| !["rec02", "rec05", "rec07"].contains(&i.record_id.as_str())).cloned().collect();
    let before = server.seen.lock().unwrap().len();
    let third = refine_batch(&c, &only_ok, t, &out).unwrap();
    assert_eq!(third.calls, 0);
    assert_eq!(server.seen.lock().unwrap().len(), before);
}

#[test]
fn max_in_flight_one_is_sequential() {
    let server = serve(Arc::new(|_, _: &str| {
        thread::sleep(Duration::from_millis(20));
        (200, chat_reply("The image shows x."), "application/json")
    }));
    let dir = tempfile::tempdir().unwrap();
    let its = items(dir.path(), 5);
    let templates = TemplateFile::shipped();
    let t = templates.get(TemplateId::Wiki).unwrap();
    refine_batch(&client(&server.base, 1), &its, t, &dir.path().join("out")).unwrap();
    let mut seen = server.seen.lock().unwrap().clone();
    seen.sort_by_key(|s| s.started);
    assert!(seen.windows(2).all(|w| w[0].finished <= w[1].started));
    assert_eq!(server.max_concurrent.load(std::sync::atomic::Ordering::SeqCst), 1);

    let server = serve(Arc::new(|_, _: &str| {
        thread::sleep(Duration::from_millis(50));
        (200, chat_reply("The image shows x."), "application/json")
    }));
    refine_batch(&client(&server.base, 3), &its, t, &dir.path().join("out3")).unwrap();
    let peak = server.max_concurrent.load(std::sync::atomic::Ordering::SeqCst);
    assert!((1..=3).contains(&peak));
}
