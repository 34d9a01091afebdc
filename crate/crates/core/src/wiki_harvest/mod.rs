//! Encyclopedia harvesting: keyword search, article fetch, captioned-image extraction
//! and content-addressed image download.

mod markup;

pub use markup::{extract_article_images, ArticleImage};

use std::collections::{HashMap, HashSet};
use std::io;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use url::Url;

use crate::corpus::{CorpusRecord, Source};
use crate::http::{HostGate, HttpError, RetryPolicy};
use crate::util::{read_jsonl, sha256_hex, write_jsonl, JsonlAppender};

/// The shipped keyword list, one per line.
pub const DEFAULT_KEYWORDS: &str = include_str!("../../assets/keywords.txt");

pub fn default_keywords() -> Vec<String> {
    parse_keywords(DEFAULT_KEYWORDS)
}

/// One keyword per non-empty line; `#` starts a comment line.
pub fn parse_keywords(text: &str) -> Vec<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(String::from)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WikiConfig {
    /// Site root, e.g. `https://en.wikipedia.org`.
    pub site: String,
    pub api_path: String,
    /// Article URL pattern; `{title}` is replaced by the underscored, escaped title.
    pub article_path: String,
    pub limit: usize,
    pub min_side_px: u32,
    pub workers: usize,
    pub host_spacing_ms: u64,
    pub timeout_secs: f64,
    pub retry: RetryPolicy,
    pub user_agent: String,
}

impl Default for WikiConfig {
    fn default() -> Self {
        Self {
            site: "https://en.wikipedia.org".into(),
            api_path: "/w/api.php".into(),
            article_path: "/wiki/{title}".into(),
            limit: 100,
            min_side_px: 128,
            workers: 4,
            host_spacing_ms: 500,
            timeout_secs: 30.0,
            retry: RetryPolicy::default(),
            user_agent: format!("vlcorpus/{} (image-caption dataset builder)", crate::TOOL_VERSION),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchHit {
    pub keyword: String,
    pub title: String,
    /// 1-based position in the API's result order.
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WikiImageRecord {
    pub image_url: String,
    pub original_caption: String,
    pub article_url: String,
    pub article_title: String,
    pub keyword: String,
    pub intrinsic_width_px: u32,
    pub intrinsic_height_px: u32,
    pub content_hash: String,
    /// `images/<hash>.<ext>` under the harvest directory.
    pub image_ref: String,
}

impl WikiImageRecord {
    pub fn corpus_record(&self, query: &str, answer: &str) -> CorpusRecord {
        let ext = self.image_ref.rsplit('.').next().unwrap_or("png");
        let mut r = CorpusRecord::with_image(Source::Wikipedia, &self.content_hash, ext, query, answer);
        r.image_url = Some(self.image_url.clone());
        r.article_url = Some(self.article_url.clone());
        r.original_caption = Some(self.original_caption.clone());
        r
    }
}

#[derive(Debug, Error)]
pub enum HarvestError {
    #[error("keyword list is empty")]
    NoKeywords,
    #[error("keyword is empty")]
    EmptyKeyword,
    #[error("limit must be at least 1")]
    ZeroLimit,
    #[error(transparent)]
    Http(#[from] HttpError),
    #[error("unexpected API response: {0}")]
    Api(String),
    #[error("io: {0}")]
    Io(#[from] io::Error),
}

/// Blocking client with retry and per-host politeness.
pub struct WikiClient {
    cfg: WikiConfig,
    http: reqwest::blocking::Client,
    gate: HostGate,
}

impl WikiClient {
    pub fn new(cfg: WikiConfig) -> Result<Self, HarvestError> {
        let http = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs_f64(cfg.timeout_secs))
            .user_agent(cfg.user_agent.clone())
            .build()
            .map_err(|e| HttpError::transport(&cfg.site, e))?;
        let gate = HostGate::new(Duration::from_millis(cfg.host_spacing_ms));
        Ok(Self { cfg, http, gate })
    }

    pub fn config(&self) -> &WikiConfig {
        &self.cfg
    }

    pub fn get(&self, url: &str) -> Result<Vec<u8>, HttpError> {
        let parsed = Url::parse(url).map_err(|_| HttpError::InvalidUrl(url.to_string()))?;
        let host = parsed.host_str().unwrap_or("").to_string() + &parsed.port().map(|p| format!(":{p}")).unwrap_or_default();
        self.cfg.retry.run(|_| {
            self.gate.run(&host, || {
                let resp = self.http.get(parsed.clone()).send().map_err(|e| HttpError::transport(url, e))?;
                let status = resp.status();
                if !status.is_success() {
                    return Err(HttpError::Status {
                        status: status.as_u16(),
                        url: url.to_string(),
                    });
                }
                resp.bytes().map(|b| b.to_vec()).map_err(|e| HttpError::transport(url, e))
            })
        })
    }

    pub fn article_url(&self, title: &str) -> String {
        let encoded: String = url::form_urlencoded::byte_serialize(title.replace(' ', "_").as_bytes()).collect();
        // Keep path-safe characters readable.
        let encoded = encoded.replace("%2F", "/").replace("%3A", ":").replace("%28", "(").replace("%29", ")").replace("%2C", ",");
        format!("{}{}", self.cfg.site.trim_end_matches('/'), self.cfg.article_path.replace("{title}", &encoded))
    }

    /// Top `limit` search hits for `keyword`, in API rank order.
    pub fn search_articles(&self, keyword: &str, limit: usize) -> Result<Vec<SearchHit>, HarvestError> {
        if keyword.trim().is_empty() {
            return Err(HarvestError::EmptyKeyword);
        }
        if limit == 0 {
            return Err(HarvestError::ZeroLimit);
        }
        let mut url = Url::parse(&format!("{}{}", self.cfg.site.trim_end_matches('/'), self.cfg.api_path))
            .map_err(|_| HttpError::InvalidUrl(self.cfg.site.clone()))?;
        url.query_pairs_mut()
            .append_pair("action", "query")
            .append_pair("list", "search")
            .append_pair("srsearch", keyword)
            .append_pair("srlimit", &limit.to_string())
            .append_pair("format", "json");
        let body = self.get(url.as_str())?;
        let v: serde_json::Value = serde_json::from_slice(&body).map_err(|e| HarvestError::Api(e.to_string()))?;
        let results = v
            .pointer("/query/search")
            .and_then(|s| s.as_array())
            .ok_or_else(|| HarvestError::Api("missing query.search".into()))?;
        Ok(results
            .iter()
            .filter_map(|r| r.get("title").and_then(|t| t.as_str()))
            .filter(|t| !t.trim().is_empty())
            .take(limit)
            .enumerate()
            .map(|(i, t)| SearchHit {
                keyword: keyword.to_string(),
                title: t.to_string(),
                rank: i + 1,
            })
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HarvestIssue {
    pub stage: String,
    pub subject: String,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct HarvestReport {
    /// Everything in the store after this run, existing records first.
    pub records: Vec<WikiImageRecord>,
    pub added: usize,
    pub issues: Vec<HarvestIssue>,
    pub out_dir: PathBuf,
}

pub const RECORDS_FILE: &str = "wiki_records.jsonl";

struct Candidate {
    keyword: String,
    title: String,
    article_url: String,
    image: ArticleImage,
}

/// Run `f` over `items` on `workers` threads, returning results in input order.
fn pool<T: Sync, R: Send>(items: &[T], workers: usize, f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel();
    std::thread::scope(|s| {
        for _ in 0..workers.max(1).min(items.len().max(1)) {
            let (tx, next, f) = (tx.clone(), &next, &f);
            s.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(item) = items.get(i) else { break };
                if tx.send((i, f(item))).is_err() {
                    break;
                }
            });
        }
    });
    drop(tx);
    let mut out: Vec<(usize, R)> = rx.into_iter().collect();
    out.sort_by_key(|(i, _)| *i);
    out.into_iter().map(|(_, r)| r).collect()
}

fn image_ext(format: image::ImageFormat) -> &'static str {
    format.extensions_str().first().copied().unwrap_or("bin")
}

/// Search each keyword, fetch hit articles, extract captioned images and download them
/// into `out_dir/images/`. Images are de-duplicated by URL across keywords; records
/// already in `out_dir/wiki_records.jsonl` are kept and not re-downloaded.
pub fn harvest(client: &WikiClient, keywords: &[String], limit: usize, out_dir: &Path) -> Result<HarvestReport, HarvestError> {
    if keywords.is_empty() {
        return Err(HarvestError::NoKeywords);
    }
    std::fs::create_dir_all(out_dir.join("images"))?;
    let store_path = out_dir.join(RECORDS_FILE);
    let existing: Vec<WikiImageRecord> = read_jsonl(&store_path)?;
    let mut known: HashSet<String> = existing.iter().map(|r| r.image_url.clone()).collect();
    let mut issues = Vec::new();

    let mut hits: Vec<SearchHit> = Vec::new();
    let mut titles = HashSet::new();
    for kw in keywords {
        match client.search_articles(kw, limit) {
            Ok(found) => hits.extend(found.into_iter().filter(|h| titles.insert(h.title.clone()))),
            Err(e) => issues.push(HarvestIssue {
                stage: "search".into(),
                subject: kw.clone(),
                message: e.to_string(),
            }),
        }
    }
    log::info!("{} unique articles from {} keywords", hits.len(), keywords.len());

    let workers = client.config().workers;
    let min_side = client.config().min_side_px;
    let pages = pool(&hits, workers, |hit| {
        let url = client.article_url(&hit.title);
        client.get(&url).map(|body| (url, body))
    });
    let mut candidates = Vec::new();
    for (hit, page) in hits.iter().zip(pages) {
        match page {
            Ok((article_url, body)) => {
                let markup = String::from_utf8_lossy(&body);
                for image in extract_article_images(&markup, &article_url, min_side) {
                    if known.insert(image.image_url.clone()) {
                        candidates.push(Candidate {
                            keyword: hit.keyword.clone(),
                            title: hit.title.clone(),
                            article_url: article_url.clone(),
                            image,
                        });
                    }
                }
            }
            Err(e) => issues.push(HarvestIssue {
                stage: "article".into(),
                subject: hit.title.clone(),
                message: e.to_string(),
            }),
        }
    }

    let mut log = JsonlAppender::open(&store_path)?;
    let downloads = pool(&candidates, workers, |c| -> Result<Option<WikiImageRecord>, String> {
        let bytes = client.get(&c.image.image_url).map_err(|e| e.to_string())?;
        let format = image::guess_format(&bytes).map_err(|e| format!("unrecognized image: {e}"))?;
        let (w, h) = image::load_from_memory_with_format(&bytes, format)
            .map(|img| (img.width(), img.height()))
            .map_err(|e| format!("undecodable image: {e}"))?;
        if w.min(h) < min_side {
            return Ok(None);
        }
        let hash = sha256_hex(&bytes);
        let image_ref = crate::corpus::image_ref_for(&hash, image_ext(format));
        let path = out_dir.join(&image_ref);
        if !path.exists() {
            std::fs::write(&path, &bytes).map_err(|e| e.to_string())?;
        }
        Ok(Some(WikiImageRecord {
            image_url: c.image.image_url.clone(),
            original_caption: c.image.caption.clone(),
            article_url: c.article_url.clone(),
            article_title: c.title.clone(),
            keyword: c.keyword.clone(),
            intrinsic_width_px: w,
            intrinsic_height_px: h,
            content_hash: hash,
            image_ref,
        }))
    });
    let mut records = existing;
    let mut added = 0;
    for (c, d) in candidates.iter().zip(downloads) {
        match d {
            Ok(Some(r)) => {
                log.append(&r)?;
                records.push(r);
                added += 1;
            }
            Ok(None) => log::debug!("{} below minimum resolution", c.image.image_url),
            Err(message) => issues.push(HarvestIssue {
                stage: "image".into(),
                subject: c.image.image_url.clone(),
                message,
            }),
        }
    }
    drop(log);
    write_jsonl(&out_dir.join("harvest_issues.jsonl"), &issues)?;
    Ok(HarvestReport {
        records,
        added,
        issues,
        out_dir: out_dir.to_path_buf(),
    })
}

/// Records keyed by image URL, for joining with refinement output.
pub fn index_by_url(records: &[WikiImageRecord]) -> HashMap<&str, &WikiImageRecord> {
    records.iter().map(|r| (r.image_url.as_str(), r)).collect()
}
