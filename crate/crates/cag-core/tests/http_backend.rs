//! Wire-level tests for the HTTP backend against a local socket server
//! that speaks just enough HTTP/1.1 to serve canned responses.

use std::io::{Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::Duration;

use cag_core::backend::HttpBackend;
use cag_core::{Backend, BackendError};

/// Serves one canned response per connection, in order, then exits.
/// Records (method, body) of every request it saw.
struct TestServer {
    url: String,
    log: Arc<Mutex<Vec<(String, String)>>>,
    handle: Option<JoinHandle<()>>,
}

impl TestServer {
    fn start(responses: Vec<String>) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}/", listener.local_addr().unwrap());
        let log = Arc::new(Mutex::new(Vec::new()));
        let thread_log = Arc::clone(&log);
        let handle = std::thread::spawn(move || {
            for response in responses {
                let (mut stream, _) = listener.accept().unwrap();
                let request = read_request(&mut stream);
                thread_log.lock().unwrap().push(request);
                stream.write_all(response.as_bytes()).unwrap();
                stream.flush().unwrap();
            }
        });
        Self {
            url,
            log,
            handle: Some(handle),
        }
    }

    /// Waits for every canned response to be consumed and returns the
    /// request log.
    fn finish(mut self) -> Vec<(String, String)> {
        self.handle.take().unwrap().join().unwrap();
        let log = self.log.lock().unwrap();
        log.clone()
    }
}

fn read_request(stream: &mut TcpStream) -> (String, String) {
    let mut buf = Vec::new();
    let mut tmp = [0u8; 1024];
    let header_end = loop {
        let n = stream.read(&mut tmp).unwrap();
        buf.extend_from_slice(&tmp[..n]);
        if let Some(pos) = buf.windows(4).position(|w| w == b"\r\n\r\n") {
            break pos + 4;
        }
        assert!(n > 0, "connection closed before headers were complete");
    };
    let head = String::from_utf8_lossy(&buf[..header_end]).to_string();
    let method = head.split_whitespace().next().unwrap().to_string();
    let content_length = head
        .lines()
        .find_map(|line| {
            let (name, value) = line.split_once(':')?;
            if name.eq_ignore_ascii_case("content-length") {
                value.trim().parse::<usize>().ok()
            } else {
                None
            }
        })
        .unwrap_or(0);
    while buf.len() < header_end + content_length {
        let n = stream.read(&mut tmp).unwrap();
        assert!(n > 0, "connection closed mid-body");
        buf.extend_from_slice(&tmp[..n]);
    }
    let body = String::from_utf8_lossy(&buf[header_end..header_end + content_length]).to_string();
    (method, body)
}

fn response(status: u16, reason: &str, body: &str) -> String {
    format!(
        "HTTP/1.1 {status} {reason}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
        body.len()
    )
}

fn ok_head() -> String {
    response(200, "OK", "")
}

fn backend(url: &str) -> HttpBackend {
    HttpBackend::with_timeout(url, Duration::from_secs(5)).unwrap()
}

#[test]
fn generate_round_trip_posts_prompt_and_budget() {
    let server = TestServer::start(vec![
        ok_head(),
        response(200, "OK", r#"{"text": "a short summary."}"#),
    ]);
    let b = backend(&server.url);
    let mut session = b.open_session(b.limits()).unwrap();
    let text = session.generate("hello world").unwrap();
    assert_eq!(text, "a short summary.");

    // Char-estimate accounting: 11-char prompt → 3 tokens, 16-char
    // response → 4; nothing else charged.
    assert_eq!(session.limits().tokens_so_far, 7);
    assert_eq!(session.limits().tokens_left, 6144 - 7);

    let log = server.finish();
    assert_eq!(log.len(), 2);
    assert_eq!(log[0].0, "HEAD");
    assert_eq!(log[1].0, "POST");
    let sent: serde_json::Value = serde_json::from_str(&log[1].1).unwrap();
    assert_eq!(sent["prompt"], "hello world");
    // max_tokens is what's left of the window after the prompt estimate.
    assert_eq!(sent["max_tokens"], 6144 - 3);
}

#[test]
fn server_reported_token_counts_override_estimates() {
    let server = TestServer::start(vec![
        ok_head(),
        response(
            200,
            "OK",
            r#"{"text": "ok", "prompt_tokens": 100, "response_tokens": 23}"#,
        ),
    ]);
    let b = backend(&server.url);
    let mut session = b.open_session(b.limits()).unwrap();
    session.generate("hello world").unwrap();
    assert_eq!(session.limits().tokens_so_far, 123);
    server.finish();
}

#[test]
fn non_2xx_status_is_a_generation_failure_with_status_and_body() {
    let server = TestServer::start(vec![
        ok_head(),
        response(500, "Internal Server Error", "model overloaded"),
    ]);
    let b = backend(&server.url);
    let mut session = b.open_session(b.limits()).unwrap();
    let err = session.generate("hello world").unwrap_err();
    match err {
        BackendError::GenerationFailed { message } => {
            assert!(message.contains("HTTP 500"), "{message}");
            assert!(message.contains("model overloaded"), "{message}");
        }
        other => panic!("unexpected error: {other}"),
    }
    // Failed calls charge nothing.
    assert_eq!(session.limits().tokens_so_far, 0);
    server.finish();
}

#[test]
fn malformed_response_body_is_a_generation_failure() {
    let server = TestServer::start(vec![ok_head(), response(200, "OK", "definitely not json")]);
    let b = backend(&server.url);
    let mut session = b.open_session(b.limits()).unwrap();
    let err = session.generate("hello world").unwrap_err();
    match err {
        BackendError::GenerationFailed { message } => {
            assert!(message.contains("malformed response body"), "{message}");
        }
        other => panic!("unexpected error: {other}"),
    }
    server.finish();
}

#[test]
fn unreachable_endpoint_fails_at_session_open() {
    // Bind and immediately drop to get a port with nothing listening.
    let port = {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        listener.local_addr().unwrap().port()
    };
    let b = backend(&format!("http://127.0.0.1:{port}/"));
    let err = match b.open_session(b.limits()) {
        Ok(_) => panic!("expected open_session to fail"),
        Err(e) => e,
    };
    assert!(
        matches!(err, BackendError::BackendUnavailable { .. }),
        "unexpected error: {err}"
    );
}

#[test]
fn any_http_status_counts_as_reachable_at_open() {
    // A 404 on the probe still proves a server is listening; failures
    // should only surface per-request.
    let server = TestServer::start(vec![response(404, "Not Found", "")]);
    let b = backend(&server.url);
    let session = b.open_session(b.limits());
    assert!(session.is_ok());
    server.finish();
}
