#![allow(dead_code)]

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Instant;

/// Request seen by a mock server.
#[derive(Debug, Clone)]
pub struct Seen {
    pub path: String,
    pub body: String,
    pub started: Instant,
    pub finished: Instant,
}

pub struct MockServer {
    pub base: String,
    pub seen: Arc<Mutex<Vec<Seen>>>,
    pub max_concurrent: Arc<AtomicUsize>,
}

pub type Handler = Arc<dyn Fn(&str, &str) -> (u16, Vec<u8>, &'static str) + Send + Sync>;

/// Serve `handler(path_and_query, body) -> (status, body, content_type)` on a random port,
/// handling each request on its own thread.
pub fn serve(handler: Handler) -> MockServer {
    let server = Arc::new(tiny_http::Server::http("127.0.0.1:0").unwrap());
    let base = format!("http://{}", server.server_addr().to_ip().unwrap());
    let seen = Arc::new(Mutex::new(Vec::new()));
    let active = Arc::new(AtomicUsize::new(0));
    let max_concurrent = Arc::new(AtomicUsize::new(0));
    {
        let (seen, max_concurrent) = (seen.clone(), max_concurrent.clone());
        thread::spawn(move || {
            for mut req in server.incoming_requests() {
                let (handler, seen, active, max_concurrent) = (handler.clone(), seen.clone(), active.clone(), max_concurrent.clone());
                thread::spawn(move || {
                    let started = Instant::now();
                    let now = active.fetch_add(1, Ordering::SeqCst) + 1;
                    max_concurrent.fetch_max(now, Ordering::SeqCst);
                    let mut body = String::new();
                    req.as_reader().read_to_string(&mut body).ok();
                    let path = req.url().to_string();
                    let (status, out, ctype) = handler(&path, &body);
                    active.fetch_sub(1, Ordering::SeqCst);
                    seen.lock().unwrap().push(Seen {
                        path,
                        body,
                        started,
                        finished: Instant::now(),
                    });
                    let header = tiny_http::Header::from_bytes("Content-Type", ctype).unwrap();
                    let _ = req.respond(tiny_http::Response::from_data(out).with_status_code(status).with_header(header));
                });
            }
        });
    }
    MockServer { base, seen, max_concurrent }
}

pub fn chat_reply(text: &str) -> Vec<u8> {
    serde_json::json!({"choices": [{"message": {"role": "assistant", "content": text}}]}).to_string().into_bytes()
}

pub fn png(w: u32, h: u32, seed: u8) -> Vec<u8> {
    let img = image::RgbImage::from_fn(w, h, |x, y| image::Rgb([seed, (x % 256) as u8, (y % 256) as u8]));
    let mut out = Vec::new();
    img.write_to(&mut std::io::Cursor::new(&mut out), image::ImageFormat::Png).unwrap();
    out
}

/// Encyclopedia fixture: two keywords, two articles, three captioned images plus an icon.
pub fn fixture_wiki() -> MockServer {
    serve(Arc::new(|path: &str, _| {
        if let Some(query) = path.strip_prefix("/w/api.php?") {
            let url = url::Url::parse(&format!("http://x/?{query}")).unwrap();
            let q: std::collections::HashMap<_, _> = url.query_pairs().into_owned().collect();
            let titles: Vec<&str> = match q.get("srsearch").map(String::as_str) {
                Some("Spider silk") => vec!["Spider web", "Nacre"],
                Some("Nacre") => vec!["Nacre"],
                _ => vec![],
            };
            let search: Vec<_> = titles.iter().map(|t| serde_json::json!({"ns": 0, "title": t})).collect();
            let body = serde_json::json!({"batchcomplete": "", "query": {"search": search}});
            return (200, body.to_string().into_bytes(), "application/json");
        }
        let page = |figs: &[(&str, &str)]| {
            let body: String = figs
                .iter()
                .map(|(src, cap)| format!(r#"<figure><img src="{src}" width="200" height="150"><figcaption>{cap}</figcaption></figure>"#))
                .collect();
            let html = format!("<html><body><img src=\"/icon.png\" width=\"16\" height=\"16\">{body}</body></html>");
            (200, html.into_bytes(), "text/html")
        };
        match path {
            "/wiki/Spider_web" => page(&[("/img/web.png", "An orb web spun by a garden spider"), ("/img/dragline.png", "Dragline silk fibres")]),
            "/wiki/Nacre" => page(&[("/img/nacre.png", "Brick-and-mortar layers of nacre")]),
            "/img/web.png" => (200, png(300, 200, 1), "image/png"),
            "/img/dragline.png" => (200, png(240, 180, 2), "image/png"),
            "/img/nacre.png" => (200, png(256, 256, 3), "image/png"),
            _ => (404, b"missing".to_vec(), "text/plain"),
        }
    }))
}

/// Chat-completions mock that describes whatever caption it is sent.
pub fn fixture_chat() -> MockServer {
    serve(Arc::new(|path: &str, body: &str| {
        if path != "/v1/chat/completions" {
            return (404, b"no such route".to_vec(), "text/plain");
        }
        let req: serde_json::Value = serde_json::from_str(body).unwrap_or_default();
        let prompt = req.pointer("/messages/1/content/0/text").and_then(|v| v.as_str()).unwrap_or("");
        let gist: String = prompt.lines().rev().find(|l| !l.trim().is_empty()).unwrap_or("").chars().take(80).collect();
        (200, chat_reply(&format!("The image shows a specimen. Source caption: {gist}")), "application/json")
    }))
}

/// A one-page PDF with two captioned figures.
pub fn fixture_pdf() -> Vec<u8> {
    use vlcorpus::pdf_figures::synth::{build_pdf, SynthImage, SynthPage, SynthText};
    build_pdf(&[SynthPage {
        images: vec![SynthImage::new(80, 120, 200, 180, 11), SynthImage::new(330, 120, 200, 180, 12)],
        texts: vec![
            SynthText::new(80, 328, "Figure 1. Stress field around a crack tip."),
            SynthText::new(330, 328, "Figure 2. Hierarchical fibre bundle."),
            SynthText::new(80, 500, "Body text that is not a caption."),
        ],
        ..Default::default()
    }])
}

/// Pipeline config pointing at local mocks, with politeness delays off.
pub fn fixture_config(dir: &std::path::Path, wiki: &str, chat: &str) -> std::path::PathBuf {
    let path = dir.join("pipeline.toml");
    let text = format!(
        "seed = 7\n\n[wiki]\nsite = \"{wiki}\"\nhost_spacing_ms = 0\n\n[wiki.retry]\nmax_attempts = 1\n\n\
         [endpoint]\nbase_url = \"{chat}\"\nmodel_name = \"mock-vlm\"\n\n[endpoint.retry]\nmax_attempts = 2\ninitial_backoff = 0\nmax_backoff = 0\n"
    );
    std::fs::write(&path, text).unwrap();
    path
}

pub struct Run {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

pub fn vlcorpus<I, S>(args: I) -> Run
where
    I: IntoIterator<Item = S>,
    S: AsRef<std::ffi::OsStr>,
{
    let out = std::process::Command::new(env!("CARGO_BIN_EXE_vlcorpus")).args(args).output().expect("spawn vlcorpus");
    Run {
        code: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8_lossy(&out.stdout).into_owned(),
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    }
}

/// Runs extract-pdf, harvest, refine, corpus add/split/export under `root`.
/// Returns the export directory.
pub fn run_pipeline(root: &std::path::Path) -> Result<std::path::PathBuf, String> {
    let (wiki, chat) = (fixture_wiki(), fixture_chat());
    run_pipeline_on(root, &wiki.base, &chat.base)
}

/// [`run_pipeline`] against already running mocks.
pub fn run_pipeline_on(root: &std::path::Path, wiki: &str, chat: &str) -> Result<std::path::PathBuf, String> {
    let cfg = fixture_config(root, wiki, chat);
    std::fs::create_dir_all(root.join("docs")).unwrap();
    std::fs::write(root.join("docs/paper.pdf"), fixture_pdf()).unwrap();
    std::fs::write(root.join("keywords.txt"), "Spider silk\nNacre\n").unwrap();
    let p = |s: &str| root.join(s).to_string_lossy().into_owned();
    let c = cfg.to_string_lossy().into_owned();
    let steps: Vec<Vec<String>> = vec![
        vec!["extract-pdf".into(), "--in".into(), p("docs"), "--out".into(), p("pdf")],
        vec!["harvest".into(), "--keywords".into(), p("keywords.txt"), "--limit".into(), "5".into(), "--out".into(), p("wiki")],
        vec![
            "refine".into(), "--endpoint".into(), chat.to_string(), "--model".into(), "mock-vlm".into(), "--template".into(),
            "wiki".into(), "--in".into(), p("wiki"), "--in".into(), p("pdf"), "--out".into(), p("refined"),
        ],
        vec!["corpus".into(), "add".into(), "--store".into(), p("store"), "--from".into(), p("refined")],
        vec!["corpus".into(), "split".into(), "--store".into(), p("store"), "--ratio".into(), "0.6".into(), "--seed".into(), "7".into()],
        vec!["corpus".into(), "export".into(), "--store".into(), p("store"), "--out".into(), p("export"), "--name".into(), "smoke".into()],
    ];
    for mut step in steps {
        step.extend(["--config".to_string(), c.clone()]);
        let run = vlcorpus(&step);
        if run.code != 0 {
            return Err(format!("`{}` exited {}: {}", step.join(" "), run.code, run.stderr.trim()));
        }
    }
    Ok(root.join("export"))
}
