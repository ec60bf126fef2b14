use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use decor_core::llm::{ChatClient, ChatMessage, ChatRequest, HttpChatClient, LlmError, RetryPolicy};

/// Serves one canned response per connection and records request bodies.
fn serve(responses: Vec<(u16, String)>) -> (String, Arc<Mutex<Vec<String>>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let seen = Arc::new(Mutex::new(Vec::new()));
    let log = seen.clone();
    thread::spawn(move || {
        for (status, body) in responses {
            let (stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut len = 0;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                if line == "\r\n" || line.is_empty() {
                    break;
                }
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    len = v.trim().parse().unwrap();
                }
            }
            let mut buf = vec![0; len];
            reader.read_exact(&mut buf).unwrap();
            log.lock().unwrap().push(String::from_utf8(buf).unwrap());
            let mut stream = stream;
            let reply = format!(
                "HTTP/1.1 {status} X\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
                body.len()
            );
            stream.write_all(reply.as_bytes()).unwrap();
        }
    });
    (format!("http://{addr}/v1"), seen)
}

fn request() -> ChatRequest {
    ChatRequest {
        model: "m".into(),
        messages: vec![ChatMessage::user("hi")],
        response_schema: r#"{"title": "asset_proposal", "type": "object"}"#.into(),
        temperature: 0.0,
        seed: Some(5),
        timeout_s: 5.0,
    }
}

fn fast() -> RetryPolicy {
    RetryPolicy { max_retries: 3, base_backoff: Duration::from_millis(5) }
}

const OK: &str = r#"{"choices": [{"message": {"role": "assistant", "content": "{\"assets\": []}"}, "finish_reason": "stop"}], "usage": {"prompt_tokens": 3, "completion_tokens": 4}}"#;

#[test]
fn rate_limits_are_retried_until_success() {
    let (url, seen) = serve(vec![(429, "{}".into()), (429, "{}".into()), (200, OK.into())]);
    let client = HttpChatClient::new(url, Some("k".into())).with_retry(fast());
    let r = client.complete(&request()).unwrap();
    assert_eq!(r.content, r#"{"assets": []}"#);
    assert_eq!(r.usage.completion_tokens, 4);
    let bodies = seen.lock().unwrap();
    assert_eq!(bodies.len(), 3);
    let body: serde_json::Value = serde_json::from_str(&bodies[0]).unwrap();
    assert_eq!(body["seed"], 5);
    assert_eq!(body["response_format"]["json_schema"]["name"], "asset_proposal");
}

#[test]
fn authentication_failures_are_not_retried() {
    let (url, seen) = serve(vec![(401, "{}".into())]);
    let err = HttpChatClient::new(url, None).with_retry(fast()).complete(&request()).unwrap_err();
    assert_eq!(err, LlmError::Authentication { status: 401 });
    assert_eq!(seen.lock().unwrap().len(), 1);
}

#[test]
fn persistent_server_errors_give_up() {
    let (url, seen) = serve(vec![(503, "busy".into()); 4]);
    let err = HttpChatClient::new(url, None).with_retry(fast()).complete(&request()).unwrap_err();
    assert!(matches!(err, LlmError::Transport { attempts: 4, .. }), "{err}");
    assert_eq!(seen.lock().unwrap().len(), 4);
}
