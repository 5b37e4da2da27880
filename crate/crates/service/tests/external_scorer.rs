use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use newsbias_core::bias::{train_regressor, RegressorOptions, Scorer};
use newsbias_core::corpus::{synth_corpus, ArticleSet, SynthSpec};
use newsbias_service::{external_score, ExternalScorer, ExternalScorerConfig, FallbackPolicy, ServiceError};

/// Minimal HTTP server answering the n-th request with `respond(n, body)`.
struct Stub {
    url: String,
    hits: Arc<AtomicUsize>,
}

fn stub<F>(respond: F) -> Stub
where
    F: Fn(usize, &str) -> (u16, String) + Send + 'static,
{
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/score", listener.local_addr().unwrap());
    let hits = Arc::new(AtomicUsize::new(0));
    let counter = hits.clone();
    thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { break };
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut len = 0;
            loop {
                let mut line = String::new();
                if reader.read_line(&mut line).unwrap_or(0) == 0 || line == "\r\n" {
                    break;
                }
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    len = v.trim().parse().unwrap();
                }
            }
            let mut body = vec![0; len];
            reader.read_exact(&mut body).unwrap();
            let n = counter.fetch_add(1, Ordering::SeqCst);
            let (status, payload) = respond(n, &String::from_utf8_lossy(&body));
            let _ = write!(
                stream,
                "HTTP/1.1 {status} X\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{payload}",
                payload.len()
            );
        }
    });
    Stub { url, hits }
}

fn config(url: &str, retries: u32) -> ExternalScorerConfig {
    ExternalScorerConfig { retries, retry_delay: Duration::from_millis(5), ..ExternalScorerConfig::new(url) }
}

#[test]
fn passes_score_through() {
    let s = stub(|_, body| {
        let v: serde_json::Value = serde_json::from_str(body).unwrap();
        assert_eq!(v["text"], "some article");
        (200, r#"{"score": -13.0}"#.into())
    });
    let out = external_score(&config(&s.url, 0), "some article").unwrap();
    assert_eq!(out.score.value(), -13.0);
    assert!(!out.clamped);
}

#[test]
fn clamps_out_of_scale_scores() {
    let s = stub(|_, _| (200, r#"{"score": 99}"#.into()));
    let out = external_score(&config(&s.url, 0), "x").unwrap();
    assert_eq!(out.score.value(), 42.0);
    assert!(out.clamped);
}

#[test]
fn retries_transient_failures() {
    let flaky = |n: usize, _: &str| if n < 2 { (503, "{}".into()) } else { (200, r#"{"score": 5.5}"#.into()) };
    let s = stub(flaky);
    let out = external_score(&config(&s.url, 3), "x").unwrap();
    assert_eq!(out.score.value(), 5.5);
    assert_eq!(s.hits.load(Ordering::SeqCst), 3);

    let s = stub(flaky);
    assert!(matches!(external_score(&config(&s.url, 1), "x"), Err(ServiceError::ScorerUnavailable(_))));
    assert_eq!(s.hits.load(Ordering::SeqCst), 2);
}

#[test]
fn client_errors_are_not_retried() {
    let s = stub(|_, _| (400, r#"{"error": "bad"}"#.into()));
    assert!(matches!(external_score(&config(&s.url, 3), "x"), Err(ServiceError::ScorerResponse(_))));
    assert_eq!(s.hits.load(Ordering::SeqCst), 1);
    let s = stub(|_, _| (200, r#"{"other": 1}"#.into()));
    assert!(matches!(external_score(&config(&s.url, 3), "x"), Err(ServiceError::ScorerResponse(_))));
}

#[test]
fn custom_field_mapping() {
    let s = stub(|_, body| {
        let v: serde_json::Value = serde_json::from_str(body).unwrap();
        assert_eq!(v["content"], "x");
        (200, r#"{"result": {"bias": -7.25}}"#.into())
    });
    let cfg =
        ExternalScorerConfig { text_field: "content".into(), score_field: "result.bias".into(), ..config(&s.url, 0) };
    assert_eq!(external_score(&cfg, "x").unwrap().score.value(), -7.25);
}

#[test]
fn fallback_policy() {
    // nothing listens on this port once the listener is dropped
    let dead = {
        let l = TcpListener::bind("127.0.0.1:0").unwrap();
        format!("http://{}/score", l.local_addr().unwrap())
    };
    let strict = ExternalScorer { config: config(&dead, 1), fallback: FallbackPolicy::Fail };
    assert!(matches!(strict.score_text("x"), Err(newsbias_core::Error::Unavailable(_))));

    let (left, right) = synth_corpus(&SynthSpec::standard(20, 5, 0.3, 1)).unwrap();
    let all = ArticleSet::concat(&[&left, &right], None).unwrap();
    let (reg, _) = train_regressor(&all, &RegressorOptions::default()).unwrap();
    let text = &all.articles()[0].body;
    let lenient = ExternalScorer { config: config(&dead, 1), fallback: FallbackPolicy::Builtin(reg.clone()) };
    assert_eq!(lenient.score_text(text).unwrap(), reg.score(text));
}
