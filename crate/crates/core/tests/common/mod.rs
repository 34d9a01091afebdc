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
