//! Revision-history client for the MediaWiki query API.
//!
//! Pages through `action=query&prop=revisions` following the server's
//! `continue` parameters. Requests go through a shared rate limiter,
//! transient failures (HTTP 429, 5xx, transport errors) are retried with
//! exponential backoff, and progress can be checkpointed to disk so an
//! interrupted crawl resumes where it stopped.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use super::RevisionMeta;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct FetchConfig {
    /// API entry point, e.g. `https://en.wikipedia.org/w/api.php`.
    pub endpoint: String,
    pub user_agent: String,
    pub requests_per_second: f64,
    pub max_retries: u32,
    pub initial_backoff: Duration,
    pub timeout: Duration,
    /// Revisions requested per page (`rvlimit`).
    pub page_size: u32,
    /// Stop after this many revisions.
    pub max_revisions: Option<usize>,
    /// JSON file recording the continuation state after every page.
    pub checkpoint: Option<PathBuf>,
    /// Directory of cached response bodies, keyed by request.
    pub cache_dir: Option<PathBuf>,
}

impl FetchConfig {
    pub fn new(endpoint: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            user_agent: concat!("biasrank/", env!("CARGO_PKG_VERSION"), " (revision history research)").into(),
            requests_per_second: 1.0,
            max_retries: 3,
            initial_backoff: Duration::from_millis(500),
            timeout: Duration::from_secs(60),
            page_size: 50,
            max_revisions: None,
            checkpoint: None,
            cache_dir: None,
        }
    }
}

/// Minimum spacing between requests, shareable across threads.
#[derive(Debug)]
pub struct RateLimiter {
    interval: Duration,
    next: Mutex<Option<Instant>>,
}

impl RateLimiter {
    pub fn per_second(rate: f64) -> Self {
        let interval = if rate > 0.0 && rate.is_finite() {
            Duration::from_secs_f64(1.0 / rate)
        } else {
            Duration::ZERO
        };
        Self {
            interval,
            next: Mutex::new(None),
        }
    }

    /// Blocks until the next request slot.
    pub fn acquire(&self) {
        let wait = {
            let mut next = self.next.lock().unwrap_or_else(|e| e.into_inner());
            let now = Instant::now();
            let slot = next.map_or(now, |n| n.max(now));
            *next = Some(slot + self.interval);
            slot - now
        };
        if !wait.is_zero() {
            std::thread::sleep(wait);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Checkpoint {
    title: String,
    /// Parameters of the next request; `None` once the history is complete.
    #[serde(rename = "continue")]
    continuation: Option<BTreeMap<String, String>>,
    revisions: Vec<RevisionMeta>,
}

pub struct MediaWikiClient {
    agent: ureq::Agent,
    config: FetchConfig,
    limiter: Arc<RateLimiter>,
}

enum Attempt {
    Done(String),
    Fail(Error),
    Retry(Error, Option<Duration>),
}

impl MediaWikiClient {
    pub fn new(config: FetchConfig) -> Self {
        let limiter = Arc::new(RateLimiter::per_second(config.requests_per_second));
        Self::with_rate_limiter(config, limiter)
    }

    /// A client sharing `limiter` with others, for concurrent crawls under
    /// one global request budget.
    pub fn with_rate_limiter(config: FetchConfig, limiter: Arc<RateLimiter>) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(config.timeout))
            .build()
            .into();
        Self { agent, config, limiter }
    }

    /// Full revision history of `title` (oldest first) with contents.
    pub fn fetch_revisions(&self, title: &str) -> Result<Vec<RevisionMeta>> {
        let mut state = self.load_checkpoint(title)?.unwrap_or_else(|| Checkpoint {
            title: title.to_string(),
            continuation: Some(BTreeMap::new()),
            revisions: Vec::new(),
        });

        while let Some(cont) = state.continuation.clone() {
            if self
                .config
                .max_revisions
                .is_some_and(|max| state.revisions.len() >= max)
            {
                break;
            }
            let (body, cache_to) = self.get(&self.query_params(title, &cont))?;
            let page = parse_page(title, &body)?;
            if let Some(path) = cache_to {
                write_atomic(&path, body.as_bytes())?;
            }
            state.revisions.extend(page.revisions);
            state.continuation = page.continuation;
            self.save_checkpoint(&state)?;
        }

        let mut revisions = state.revisions;
        if let Some(max) = self.config.max_revisions {
            revisions.truncate(max);
        }
        revisions.sort_by(|a, b| a.timestamp.cmp(&b.timestamp).then(a.revision_id.cmp(&b.revision_id)));
        Ok(revisions)
    }

    fn query_params(&self, title: &str, cont: &BTreeMap<String, String>) -> Vec<(String, String)> {
        let mut params: Vec<(String, String)> = [
            ("action", "query"),
            ("format", "json"),
            ("formatversion", "2"),
            ("prop", "revisions"),
            ("rvprop", "ids|timestamp|comment|content"),
            ("rvslots", "main"),
            ("rvdir", "newer"),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect();
        params.push(("titles".into(), title.into()));
        params.push(("rvlimit".into(), self.config.page_size.to_string()));
        params.extend(cont.iter().map(|(k, v)| (k.clone(), v.clone())));
        params
    }

    /// Response body, plus the cache file it should be stored under once
    /// it has parsed cleanly.
    fn get(&self, params: &[(String, String)]) -> Result<(String, Option<PathBuf>)> {
        let cache_path = self.config.cache_dir.as_ref().map(|dir| {
            let mut h = Sha256::new();
            h.update(self.config.endpoint.as_bytes());
            for (k, v) in params {
                h.update([0]);
                h.update(k.as_bytes());
                h.update([1]);
                h.update(v.as_bytes());
            }
            let digest: String = h.finalize().iter().map(|b| format!("{b:02x}")).collect();
            dir.join(format!("{digest}.json"))
        });
        if let Some(path) = &cache_path {
            if let Ok(body) = std::fs::read_to_string(path) {
                return Ok((body, None));
            }
        }

        let mut backoff = self.config.initial_backoff;
        let mut attempt = 0;
        let body = loop {
            match self.attempt(params) {
                Attempt::Done(body) => break body,
                Attempt::Fail(err) => return Err(err),
                Attempt::Retry(err, retry_after) => {
                    if attempt >= self.config.max_retries {
                        return Err(err);
                    }
                    attempt += 1;
                    let wait = retry_after.unwrap_or(backoff);
                    log::warn!("{err}; retry {attempt}/{} in {wait:?}", self.config.max_retries);
                    std::thread::sleep(wait);
                    backoff = backoff.saturating_mul(2);
                }
            }
        };

        Ok((body, cache_path))
    }

    fn attempt(&self, params: &[(String, String)]) -> Attempt {
        self.limiter.acquire();
        let request = self
            .agent
            .get(&self.config.endpoint)
            .header("User-Agent", &self.config.user_agent)
            .query_pairs(params.iter().map(|(k, v)| (k.as_str(), v.as_str())));
        let mut response = match request.call() {
            Ok(r) => r,
            Err(e) => return Attempt::Retry(Error::Network(e.to_string()), None),
        };
        let status = response.status().as_u16();
        if status == 429 || status >= 500 {
            let retry_after = response
                .headers()
                .get("retry-after")
                .and_then(|v| v.to_str().ok())
                .and_then(|v| v.trim().parse::<u64>().ok())
                .map(|s| Duration::from_secs(s.min(300)));
            return Attempt::Retry(Error::HttpError(status), retry_after);
        }
        if status >= 400 {
            return Attempt::Fail(Error::HttpError(status));
        }
        match response.body_mut().with_config().limit(u64::MAX).read_to_string() {
            Ok(body) => Attempt::Done(body),
            Err(e) => Attempt::Retry(Error::Network(e.to_string()), None),
        }
    }

    fn load_checkpoint(&self, title: &str) -> Result<Option<Checkpoint>> {
        let Some(path) = &self.config.checkpoint else {
            return Ok(None);
        };
        let text = match std::fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(Error::io(path, e)),
        };
        let state: Checkpoint = serde_json::from_str(&text).map_err(|e| Error::MalformedRecord {
            line_no: 1,
            line: path.display().to_string(),
            reason: format!("bad checkpoint: {e}"),
        })?;
        Ok((state.title == title).then_some(state))
    }

    fn save_checkpoint(&self, state: &Checkpoint) -> Result<()> {
        let Some(path) = &self.config.checkpoint else {
            return Ok(());
        };
        let json = serde_json::to_vec(state).expect("checkpoint serializes");
        write_atomic(path, &json)
    }
}

/// Convenience wrapper: one client, one title.
pub fn fetch_revisions(title: &str, config: FetchConfig) -> Result<Vec<RevisionMeta>> {
    MediaWikiClient::new(config).fetch_revisions(title)
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

#[derive(Debug)]
struct Page {
    revisions: Vec<RevisionMeta>,
    continuation: Option<BTreeMap<String, String>>,
}

fn api_error(code: &str, info: impl Into<String>) -> Error {
    Error::ApiError {
        code: code.into(),
        info: info.into(),
    }
}

fn parse_page(title: &str, body: &str) -> Result<Page> {
    let json: Value = serde_json::from_str(body).map_err(|e| api_error("badjson", e.to_string()))?;
    if let Some(err) = json.get("error") {
        let field = |k: &str| err.get(k).and_then(Value::as_str).unwrap_or("").to_string();
        return Err(api_error(&field("code"), field("info")));
    }

    let continuation = match json.get("continue") {
        None => None,
        Some(Value::Object(map)) => {
            let mut params = BTreeMap::new();
            for (k, v) in map {
                let v = v
                    .as_str()
                    .ok_or_else(|| api_error("badcontinue", format!("continuation value for {k:?} is not a string")))?;
                params.insert(k.clone(), v.to_string());
            }
            if !params.contains_key("rvcontinue") {
                return Err(api_error("badcontinue", "continuation lacks rvcontinue"));
            }
            Some(params)
        }
        Some(other) => return Err(api_error("badcontinue", format!("unexpected continuation {other}"))),
    };

    let pages = json
        .pointer("/query/pages")
        .ok_or_else(|| api_error("badresponse", "response has no query.pages"))?;
    let pages: Vec<&Value> = match pages {
        Value::Array(a) => a.iter().collect(),
        Value::Object(m) => m.values().collect(),
        _ => return Err(api_error("badresponse", "query.pages is not a list")),
    };
    let mut revisions = Vec::new();
    for page in pages {
        if page.get("missing").is_some_and(|m| m != &Value::Bool(false)) {
            return Err(api_error("missingtitle", format!("page {title:?} does not exist")));
        }
        let article_id = page.get("title").and_then(Value::as_str).unwrap_or(title).to_string();
        for rev in page.get("revisions").and_then(Value::as_array).into_iter().flatten() {
            revisions.push(parse_revision(&article_id, rev)?);
        }
    }
    Ok(Page {
        revisions,
        continuation,
    })
}

fn parse_revision(article_id: &str, rev: &Value) -> Result<RevisionMeta> {
    let revision_id = rev
        .get("revid")
        .and_then(Value::as_u64)
        .ok_or_else(|| api_error("badresponse", "revision without revid"))?;
    let parent_revision_id = rev.get("parentid").and_then(Value::as_u64).filter(|&p| p != 0);
    let timestamp = rev
        .get("timestamp")
        .and_then(Value::as_str)
        .ok_or_else(|| api_error("badresponse", format!("revision {revision_id} without timestamp")))?;
    let timestamp = super::records::parse_timestamp(timestamp).map_err(|e| api_error("badresponse", e))?;
    let comment = rev.get("comment").and_then(Value::as_str).unwrap_or("").to_string();
    // formatversion=2 puts content under slots.main.content; older
    // responses use slots.main["*"] or a top-level "*".
    let text = ["/slots/main/content", "/slots/main/*", "/content", "/*"]
        .iter()
        .find_map(|p| rev.pointer(p).and_then(Value::as_str))
        .unwrap_or("")
        .to_string();
    Ok(RevisionMeta {
        article_id: article_id.to_string(),
        revision_id,
        parent_revision_id,
        timestamp,
        comment,
        text,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_formatversion_2_page() {
        let body = r#"{"continue":{"rvcontinue":"20200101|5","continue":"||"},
            "query":{"pages":[{"pageid":1,"title":"Foo","revisions":[
              {"revid":4,"parentid":0,"timestamp":"2020-01-01T00:00:00Z","comment":"new","slots":{"main":{"content":"a"}}},
              {"revid":5,"parentid":4,"timestamp":"2020-01-02T00:00:00Z","slots":{"main":{"content":"b"}}}]}]}}"#;
        let page = parse_page("Foo", body).unwrap();
        assert_eq!(page.revisions.len(), 2);
        assert_eq!(page.revisions[0].parent_revision_id, None);
        assert_eq!(page.revisions[1].parent_revision_id, Some(4));
        assert_eq!(page.revisions[1].comment, "");
        assert_eq!(page.continuation.unwrap()["rvcontinue"], "20200101|5");
    }

    #[test]
    fn api_errors() {
        let err = parse_page("Foo", r#"{"error":{"code":"badtitle","info":"Bad title"}}"#).unwrap_err();
        assert!(matches!(err, Error::ApiError { ref code, .. } if code == "badtitle"));
        let err = parse_page("Foo", r#"{"continue":{"rvcontinue":7},"query":{"pages":[]}}"#).unwrap_err();
        assert!(matches!(err, Error::ApiError { ref code, .. } if code == "badcontinue"));
        let err = parse_page("Foo", r#"{"query":{"pages":[{"title":"Foo","missing":true}]}}"#).unwrap_err();
        assert!(matches!(err, Error::ApiError { ref code, .. } if code == "missingtitle"));
    }

    #[test]
    fn rate_limiter_spaces_requests() {
        let limiter = RateLimiter::per_second(50.0);
        let start = Instant::now();
        for _ in 0..4 {
            limiter.acquire();
        }
        assert!(start.elapsed() >= Duration::from_millis(55));
    }
}
