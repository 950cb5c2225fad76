//! Scripted HTTP endpoint exercising the live client's retry and timeout
//! behaviour without leaving the machine.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use proptest::prelude::*;
use retro_core::{Completion, CompletionError};
use retro_gateway::{ApiKey, GatewayConfig, HttpCompletion};

/// Header lines and body of every request received.
type RequestLog = Arc<Mutex<Vec<(Vec<String>, String)>>>;

#[derive(Clone)]
enum Reply {
    Status(u16, &'static str),
    Hang,
}

struct FakeServer {
    url: String,
    attempts: Arc<AtomicUsize>,
    requests: RequestLog,
}

impl FakeServer {
    /// Serves `script` in order; the last entry repeats once exhausted.
    fn start(script: Vec<Reply>) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}", listener.local_addr().unwrap());
        let attempts = Arc::new(AtomicUsize::new(0));
        let requests = Arc::new(Mutex::new(Vec::new()));
        let (a, r) = (attempts.clone(), requests.clone());
        thread::spawn(move || {
            for stream in listener.incoming() {
                let Ok(stream) = stream else { break };
                let n = a.fetch_add(1, Ordering::SeqCst);
                let reply = script[n.min(script.len() - 1)].clone();
                let r = r.clone();
                thread::spawn(move || serve(stream, reply, r));
            }
        });
        Self { url, attempts, requests }
    }

    fn attempts(&self) -> usize {
        self.attempts.load(Ordering::SeqCst)
    }
}

fn serve(stream: TcpStream, reply: Reply, log: RequestLog) {
    let mut reader = BufReader::new(stream.try_clone().unwrap());
    let mut headers = Vec::new();
    let mut len = 0usize;
    loop {
        let mut line = String::new();
        if reader.read_line(&mut line).unwrap_or(0) == 0 {
            return;
        }
        let line = line.trim_end().to_string();
        if line.is_empty() {
            break;
        }
        if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
            len = v.trim().parse().unwrap_or(0);
        }
        headers.push(line);
    }
    let mut body = vec![0; len];
    let _ = reader.read_exact(&mut body);
    log.lock().unwrap().push((headers, String::from_utf8_lossy(&body).into_owned()));
    let mut stream = stream;
    match reply {
        Reply::Hang => thread::sleep(Duration::from_secs(5)),
        Reply::Status(code, body) => {
            let _ = write!(
                stream,
                "HTTP/1.1 {code} X\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
                body.len()
            );
        }
    }
}

const OK_BODY: &str = r#"{"choices":[{"message":{"role":"assistant","content":"What went well?\n- Demo went well\n"}}]}"#;

fn client(url: &str, key: &str, timeout: Duration) -> HttpCompletion {
    let mut cfg = GatewayConfig::new(url, ApiKey::new(key));
    cfg.request_timeout = timeout;
    cfg.retry_backoff = Duration::from_millis(10);
    HttpCompletion::new(cfg).unwrap()
}

#[test]
fn rate_limited_twice_then_success() {
    let server = FakeServer::start(vec![
        Reply::Status(429, "{}"),
        Reply::Status(429, "{}"),
        Reply::Status(200, OK_BODY),
    ]);
    let c = client(&server.url, "sk-test", Duration::from_secs(5));
    assert_eq!(c.complete("classify").unwrap(), "What went well?\n- Demo went well\n");
    assert_eq!(server.attempts(), 3);

    let reqs = server.requests.lock().unwrap();
    let (headers, body) = &reqs[2];
    assert!(headers.iter().any(|h| h == "authorization: Bearer sk-test" || h == "Authorization: Bearer sk-test"));
    let json: serde_json::Value = serde_json::from_str(body).unwrap();
    assert_eq!(json["messages"][0]["content"], "classify");
    assert_eq!(json["temperature"], 0.0);
}

#[test]
fn rate_limit_exhausts_retries() {
    let server = FakeServer::start(vec![Reply::Status(429, "{}")]);
    let c = client(&server.url, "k", Duration::from_secs(5));
    assert_eq!(c.complete("p"), Err(CompletionError::RateLimited { attempts: 3 }));
    assert_eq!(server.attempts(), 3);
}

#[test]
fn hanging_endpoint_times_out_after_all_attempts() {
    let server = FakeServer::start(vec![Reply::Hang]);
    let timeout = Duration::from_millis(300);
    let c = client(&server.url, "k", timeout);
    let started = Instant::now();
    let err = c.complete("p").unwrap_err();
    let elapsed = started.elapsed();
    assert_eq!(err, CompletionError::Timeout { attempts: 3 });
    assert_eq!(server.attempts(), 3);
    // Budget is (max_retries + 1) * request_timeout, plus scheduling slack.
    assert!(elapsed <= timeout * 3 + Duration::from_millis(250), "{elapsed:?}");
}

#[test]
fn unreachable_endpoint_is_retried() {
    // Bind then drop to get a port nobody listens on.
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let c = client(&format!("http://127.0.0.1:{port}"), "k", Duration::from_millis(300));
    assert!(matches!(
        c.complete("p"),
        Err(CompletionError::Unavailable(_) | CompletionError::Timeout { .. })
    ));
}

#[test]
fn auth_failure_is_not_retried() {
    let server = FakeServer::start(vec![Reply::Status(401, r#"{"error":"bad key"}"#)]);
    let c = client(&server.url, "k", Duration::from_secs(5));
    assert_eq!(c.complete("p"), Err(CompletionError::AuthFailed));
    assert_eq!(server.attempts(), 1);
}

#[test]
fn server_errors_are_retried_then_succeed() {
    let server = FakeServer::start(vec![Reply::Status(503, ""), Reply::Status(200, OK_BODY)]);
    let c = client(&server.url, "k", Duration::from_secs(5));
    assert!(c.complete("p").is_ok());
    assert_eq!(server.attempts(), 2);
}

#[test]
fn malformed_success_body() {
    let server = FakeServer::start(vec![Reply::Status(200, "<html>")]);
    let c = client(&server.url, "k", Duration::from_secs(5));
    assert!(matches!(c.complete("p"), Err(CompletionError::MalformedResponse(_))));
    assert_eq!(server.attempts(), 1);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn api_key_never_in_errors(key in "sk-[A-Za-z0-9]{20,40}", which in 0usize..4) {
        let script = match which {
            0 => vec![Reply::Status(401, "{}")],
            1 => vec![Reply::Status(500, "{}")],
            2 => vec![Reply::Status(200, "not json")],
            _ => vec![Reply::Status(418, "{}")],
        };
        let server = FakeServer::start(script);
        let mut cfg = GatewayConfig::new(&server.url, ApiKey::new(key.clone()));
        cfg.request_timeout = Duration::from_secs(2);
        cfg.retry_backoff = Duration::from_millis(1);
        let c = HttpCompletion::new(cfg.clone()).unwrap();
        let err = c.complete("prompt").unwrap_err();
        let rendered = [err.to_string(), format!("{:?}", err), format!("{:?}", cfg)];
        for text in rendered {
            prop_assert!(!text.contains(&key), "key leaked: {}", text);
        }
    }
}
