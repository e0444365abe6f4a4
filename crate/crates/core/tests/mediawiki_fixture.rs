//! Offline tests of the revision-history client against a local fixture
//! server that replays canned API responses.
#![cfg(feature = "mediawiki")]

use std::collections::VecDeque;
use std::io::{BufRead, BufReader, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use biasrank::error::Error;
use biasrank::ingest::mediawiki::{FetchConfig, MediaWikiClient};
use biasrank::ingest::RevisionMeta;

struct FixtureServer {
    url: String,
    requests: Arc<Mutex<Vec<String>>>,
}

impl FixtureServer {
    fn start(responses: Vec<(u16, String)>) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}/w/api.php", listener.local_addr().unwrap());
        let queue = Arc::new(Mutex::new(VecDeque::from(responses)));
        let requests = Arc::new(Mutex::new(Vec::new()));
        let seen = Arc::clone(&requests);
        thread::spawn(move || {
            for stream in listener.incoming() {
                let Ok(mut stream) = stream else { break };
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut request_line = String::new();
                reader.read_line(&mut request_line).unwrap();
                loop {
                    let mut header = String::new();
                    if reader.read_line(&mut header).unwrap() == 0 || header == "\r\n" {
                        break;
                    }
                }
                seen.lock().unwrap().push(request_line.trim().to_string());
                let (status, body) = queue
                    .lock()
                    .unwrap()
                    .pop_front()
                    .unwrap_or((500, "exhausted".to_string()));
                let reply = format!(
                    "HTTP/1.1 {status} Fixture\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                    body.len()
                );
                stream.write_all(reply.as_bytes()).unwrap();
            }
        });
        Self { url, requests }
    }

    fn requests(&self) -> Vec<String> {
        self.requests.lock().unwrap().clone()
    }
}

fn page(first_id: u64, count: u64, next: Option<&str>) -> String {
    let revisions: Vec<String> = (first_id..first_id + count)
        .map(|id| {
            format!(
                r#"{{"revid":{id},"parentid":{},"timestamp":"2021-01-{:02}T12:00:00Z","comment":"edit {id}","slots":{{"main":{{"contentmodel":"wikitext","content":"text of {id}"}}}}}}"#,
                id - 1,
                id
            )
        })
        .collect();
    let cont = next
        .map(|c| format!(r#""continue":{{"rvcontinue":"{c}","continue":"||"}},"#))
        .unwrap_or_default();
    format!(
        r#"{{"batchcomplete":true,{cont}"query":{{"pages":[{{"pageid":7,"ns":0,"title":"Fixture","revisions":[{}]}}]}}}}"#,
        revisions.join(",")
    )
}

fn config(url: &str) -> FetchConfig {
    FetchConfig {
        requests_per_second: 1000.0,
        initial_backoff: Duration::from_millis(5),
        page_size: 5,
        ..FetchConfig::new(url)
    }
}

fn ids(revs: &[RevisionMeta]) -> Vec<u64> {
    revs.iter().map(|r| r.revision_id).collect()
}

#[test]
fn two_pages_of_five() {
    let server = FixtureServer::start(vec![(200, page(1, 5, Some("20210106|6"))), (200, page(6, 5, None))]);
    let revs = MediaWikiClient::new(config(&server.url)).fetch_revisions("Fixture").unwrap();
    assert_eq!(ids(&revs), (1..=10).collect::<Vec<_>>());
    assert!(revs.windows(2).all(|w| w[0].timestamp <= w[1].timestamp));
    assert_eq!(revs[0].parent_revision_id, None);
    assert_eq!(revs[4].parent_revision_id, Some(4));
    assert_eq!(revs[9].text, "text of 10");
    assert_eq!(revs[0].article_id, "Fixture");

    let requests = server.requests();
    assert_eq!(requests.len(), 2);
    assert!(requests[0].contains("prop=revisions") && requests[0].contains("titles=Fixture"));
    assert!(!requests[0].contains("rvcontinue"));
    assert!(requests[1].contains("rvcontinue=20210106%7C6"), "{}", requests[1]);
}

#[test]
fn retries_after_429() {
    let clean = FixtureServer::start(vec![(200, page(1, 5, None))]);
    let expected = MediaWikiClient::new(config(&clean.url)).fetch_revisions("Fixture").unwrap();

    let flaky = FixtureServer::start(vec![(429, "slow down".into()), (200, page(1, 5, None))]);
    let revs = MediaWikiClient::new(config(&flaky.url)).fetch_revisions("Fixture").unwrap();
    assert_eq!(revs, expected);
    assert_eq!(flaky.requests().len(), 2);
}

#[test]
fn gives_up_after_max_retries() {
    let server = FixtureServer::start(vec![(503, String::new()); 3]);
    let cfg = FetchConfig {
        max_retries: 2,
        ..config(&server.url)
    };
    let err = MediaWikiClient::new(cfg).fetch_revisions("Fixture").unwrap_err();
    assert!(matches!(err, Error::HttpError(503)), "{err}");
    assert_eq!(server.requests().len(), 3);
}

#[test]
fn client_errors_are_not_retried() {
    let server = FixtureServer::start(vec![(403, String::new()), (200, page(1, 5, None))]);
    let err = MediaWikiClient::new(config(&server.url)).fetch_revisions("Fixture").unwrap_err();
    assert!(matches!(err, Error::HttpError(403)));
    assert_eq!(server.requests().len(), 1);
}

#[test]
fn bad_continuation_leaves_checkpoint_and_resume_works() {
    let dir = tempfile::tempdir().unwrap();
    let checkpoint = dir.path().join("fixture.checkpoint.json");
    let bad = page(6, 5, None).replacen(
        r#""batchcomplete":true,"#,
        r#""batchcomplete":true,"continue":{"rvcontinue":42},"#,
        1,
    );
    let server = FixtureServer::start(vec![(200, page(1, 5, Some("20210106|6"))), (200, bad)]);
    let cfg = FetchConfig {
        checkpoint: Some(checkpoint.clone()),
        ..config(&server.url)
    };
    let err = MediaWikiClient::new(cfg.clone()).fetch_revisions("Fixture").unwrap_err();
    assert!(matches!(err, Error::ApiError { ref code, .. } if code == "badcontinue"), "{err}");

    let saved: serde_json::Value = serde_json::from_slice(&std::fs::read(&checkpoint).unwrap()).unwrap();
    assert_eq!(saved["revisions"].as_array().unwrap().len(), 5);
    assert_eq!(saved["continue"]["rvcontinue"], "20210106|6");

    let resumed_server = FixtureServer::start(vec![(200, page(6, 5, None))]);
    let cfg = FetchConfig {
        endpoint: resumed_server.url.clone(),
        ..cfg
    };
    let revs = MediaWikiClient::new(cfg).fetch_revisions("Fixture").unwrap();
    assert_eq!(ids(&revs), (1..=10).collect::<Vec<_>>());
    let requests = resumed_server.requests();
    assert_eq!(requests.len(), 1);
    assert!(requests[0].contains("rvcontinue=20210106%7C6"));
}

#[test]
fn api_error_is_surfaced() {
    let server = FixtureServer::start(vec![(
        200,
        r#"{"error":{"code":"ratelimited","info":"You've exceeded your rate limit."}}"#.into(),
    )]);
    let err = MediaWikiClient::new(config(&server.url)).fetch_revisions("Fixture").unwrap_err();
    assert!(matches!(err, Error::ApiError { ref code, .. } if code == "ratelimited"));
}

#[test]
fn cached_responses_avoid_the_network() {
    let dir = tempfile::tempdir().unwrap();
    let server = FixtureServer::start(vec![(200, page(1, 5, Some("x|6"))), (200, page(6, 5, None))]);
    let cfg = FetchConfig {
        cache_dir: Some(dir.path().to_path_buf()),
        ..config(&server.url)
    };
    let first = MediaWikiClient::new(cfg.clone()).fetch_revisions("Fixture").unwrap();
    let second = MediaWikiClient::new(cfg).fetch_revisions("Fixture").unwrap();
    assert_eq!(first, second);
    assert_eq!(server.requests().len(), 2);
}

#[test]
fn max_revisions_stops_early() {
    let server = FixtureServer::start(vec![(200, page(1, 5, Some("x|6"))), (200, page(6, 5, None))]);
    let cfg = FetchConfig {
        max_revisions: Some(3),
        ..config(&server.url)
    };
    let revs = MediaWikiClient::new(cfg).fetch_revisions("Fixture").unwrap();
    assert_eq!(ids(&revs), [1, 2, 3]);
    assert_eq!(server.requests().len(), 1);
}
