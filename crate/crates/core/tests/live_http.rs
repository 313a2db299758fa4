//! Live-generator path against a scripted local HTTP server.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use chance_infer::certify::{certify_and_respond, CertifyConfig};
use chance_infer::generators::{ChatClient, EndpointConfig, GeneratorError, LlmSource, SampleSource, VerifierSpec};
use chance_infer::Error;

const TOKEN_ENV: &str = "CHANCE_INFER_LIVE_HTTP_TEST_TOKEN";

/// Serves `responses` in order (the last one repeats) and counts requests.
fn serve(responses: Vec<(u16, String)>) -> (String, Arc<AtomicUsize>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1/chat/completions", listener.local_addr().unwrap());
    let hits = Arc::new(AtomicUsize::new(0));
    let counter = hits.clone();
    std::thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { continue };
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut length = 0usize;
            let mut auth_ok = false;
            loop {
                let mut line = String::new();
                if reader.read_line(&mut line).unwrap_or(0) == 0 || line == "\r\n" {
                    break;
                }
                let lower = line.to_ascii_lowercase();
                if let Some(v) = lower.strip_prefix("content-length:") {
                    length = v.trim().parse().unwrap_or(0);
                }
                if lower.starts_with("authorization:") && line.contains("Bearer secret-token") {
                    auth_ok = true;
                }
            }
            let mut body = vec![0; length];
            let _ = reader.read_exact(&mut body);
            let i = counter.fetch_add(1, Ordering::SeqCst);
            let (status, text) = if auth_ok {
                responses[i.min(responses.len() - 1)].clone()
            } else {
                (401, "missing token".to_owned())
            };
            let reply = format!(
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{text}",
                text.len()
            );
            let _ = stream.write_all(reply.as_bytes());
        }
    });
    (url, hits)
}

fn answer(text: &str) -> (u16, String) {
    (
        200,
        serde_json::json!({"choices": [{"message": {"role": "assistant", "content": text}}]}).to_string(),
    )
}

fn client(url: String, retries: u32) -> ChatClient {
    std::env::set_var(TOKEN_ENV, "secret-token");
    let mut config = EndpointConfig::new(url, "test-model", 0.7);
    config.api_key_env = TOKEN_ENV.into();
    config.retries = retries;
    config.backoff_base_ms = 1;
    config.timeout_ms = 5_000;
    ChatClient::new(config).unwrap()
}

fn paris_source(url: String, retries: u32) -> LlmSource {
    let verifier = VerifierSpec::exact_match(["Paris"]).compile().unwrap();
    LlmSource::new(client(url, retries), "Capital of France?", verifier)
}

#[test]
fn matching_answer_is_not_a_violation() {
    let (url, _) = serve(vec![answer("paris")]);
    let s = paris_source(url, 0).next_sample().unwrap();
    assert_eq!(s.payload, "paris");
    assert!(!s.violated());
}

#[test]
fn wrong_answer_is_a_violation() {
    let (url, _) = serve(vec![answer("london")]);
    assert!(paris_source(url, 0).next_sample().unwrap().violated());
}

#[test]
fn server_errors_are_retried_then_surfaced() {
    let (url, hits) = serve(vec![(500, "boom".into())]);
    let err = paris_source(url, 2).next_sample().unwrap_err();
    assert!(
        matches!(
            err,
            GeneratorError::Http {
                status: 500,
                attempts: 3,
                ..
            }
        ),
        "{err:?}"
    );
    assert_eq!(hits.load(Ordering::SeqCst), 3);
}

#[test]
fn transient_error_recovers() {
    let (url, hits) = serve(vec![(429, "slow down".into()), answer("Paris")]);
    assert!(!paris_source(url, 2).next_sample().unwrap().violated());
    assert_eq!(hits.load(Ordering::SeqCst), 2);
}

#[test]
fn client_errors_are_not_retried() {
    let (url, hits) = serve(vec![(400, "bad request".into())]);
    let err = paris_source(url, 3).next_sample().unwrap_err();
    assert!(matches!(
        err,
        GeneratorError::Http {
            status: 400,
            attempts: 1,
            ..
        }
    ));
    assert_eq!(hits.load(Ordering::SeqCst), 1);
}

#[test]
fn malformed_body_is_a_decode_error() {
    let (url, _) = serve(vec![(200, "{not json".into())]);
    assert!(matches!(
        paris_source(url, 0).next_sample(),
        Err(GeneratorError::Decode(_))
    ));
}

#[test]
fn certification_over_http() {
    let (url, hits) = serve(vec![answer("Paris.")]);
    let config = CertifyConfig::new(0.4, 0.05, 100).unwrap();
    let d = certify_and_respond(&mut paris_source(url, 0), &config).unwrap();
    assert_eq!(d.stopping_time, 17);
    assert_eq!(d.returned_sample.unwrap().payload, "Paris.");
    assert_eq!(hits.load(Ordering::SeqCst), 18);
}

#[test]
fn mid_run_failure_reports_partial_state() {
    let mut responses = vec![answer("Paris"); 5];
    responses.push((503, "gone".into()));
    let (url, _) = serve(responses);
    let config = CertifyConfig::new(0.4, 0.05, 100).unwrap();
    match certify_and_respond(&mut paris_source(url, 0), &config) {
        Err(Error::InferenceAborted { state, .. }) => assert_eq!(state.n(), 5),
        other => panic!("expected abort, got {other:?}"),
    }
}
