mod common;

use std::time::{Duration, Instant};

use common::{chat_client as client, dead_endpoint, MockServer, Reply};
use ewra_pipeline::llm::LlmError;

#[tokio::test]
async fn echoes_content_and_sends_wire_format() {
    let mock = MockServer::start(|r| Reply::chat(&format!("echo: {}", r.prompt())));
    let c = client(&mock.url("/v1"), Duration::from_secs(5), Duration::from_millis(10));
    let out = c.complete("hello").await.unwrap();
    assert_eq!(out.text, "echo: hello");
    assert_eq!(out.attempts, 1);
    assert_eq!(out.prompt_tokens, Some(100));
    assert_eq!(out.completion_tokens, Some(50));

    let log = mock.requests_to("/v1/chat/completions");
    assert_eq!(log.len(), 1);
    let body = log[0].json();
    assert_eq!(body["model"], "mock-model");
    assert_eq!(body["temperature"], 0.7);
    assert_eq!(body["max_tokens"], 1024);
    assert_eq!(body["messages"][0]["role"], "system");
    assert_eq!(body["messages"][1]["role"], "user");
    assert_eq!(body["messages"][1]["content"], "hello");
    assert_eq!(log[0].headers.get("authorization").map(String::as_str), Some("Bearer sk-mock"));
}

#[tokio::test]
async fn rate_limit_then_success_backs_off_once() {
    let mock = MockServer::start(|r| if r.repeat == 1 { Reply::status(429) } else { Reply::chat("ok") });
    let base = Duration::from_millis(150);
    let c = client(&mock.url("/v1"), Duration::from_secs(5), base);
    let t = Instant::now();
    let out = c.complete("p").await.unwrap();
    assert_eq!(out.text, "ok");
    assert_eq!(out.attempts, 2);
    assert!(t.elapsed() >= base);
    assert_eq!(mock.log().len(), 2);
}

#[tokio::test]
async fn retry_after_header_is_honored() {
    let mock =
        MockServer::start(|r| if r.repeat == 1 { Reply::status(429).header("retry-after", "1") } else { Reply::chat("ok") });
    let c = client(&mock.url("/v1"), Duration::from_secs(5), Duration::from_millis(10));
    let t = Instant::now();
    c.complete("p").await.unwrap();
    assert!(t.elapsed() >= Duration::from_millis(900));
}

#[tokio::test]
async fn three_timeouts_surface_as_retryable_after_max_attempts() {
    let mock = MockServer::start(|_| Reply::chat("late").after(Duration::from_millis(600)));
    let c = client(&mock.url("/v1"), Duration::from_millis(150), Duration::from_millis(10));
    let err = c.complete("p").await.unwrap_err();
    match &err {
        LlmError::Exhausted { attempts, last } => {
            assert_eq!(*attempts, 3);
            assert_eq!(**last, LlmError::Timeout);
            assert!(last.is_retryable());
        }
        other => panic!("{other:?}"),
    }
    assert_eq!(mock.log().len(), 3);
}

#[tokio::test]
async fn server_errors_retry_but_client_errors_do_not() {
    let mock = MockServer::start(|r| match r.prompt().as_str() {
        "flaky" if r.repeat < 3 => Reply::text(503, "text/plain", "busy"),
        "flaky" => Reply::chat("recovered"),
        _ => Reply::text(400, "application/json", "{\"error\":\"bad request\"}"),
    });
    let c = client(&mock.url("/v1/chat/completions"), Duration::from_secs(5), Duration::from_millis(5));
    assert_eq!(c.complete("flaky").await.unwrap().attempts, 3);
    match c.complete("bad").await {
        Err(LlmError::Endpoint { status: 400, body }) => assert!(body.contains("bad request")),
        other => panic!("{other:?}"),
    }
    assert_eq!(mock.log().iter().filter(|r| r.prompt() == "bad").count(), 1);
}

#[tokio::test]
async fn malformed_json_and_unreachable_endpoint() {
    let mock = MockServer::start(|_| Reply::text(200, "application/json", "{\"choices\": []}"));
    let c = client(&mock.url("/v1"), Duration::from_secs(5), Duration::from_millis(5));
    assert!(matches!(c.complete("p").await, Err(LlmError::Decode(_))));

    let c = client(&dead_endpoint(), Duration::from_secs(2), Duration::from_millis(5));
    match c.complete("p").await {
        Err(LlmError::Exhausted { attempts: 3, last }) => assert!(matches!(*last, LlmError::Transport(_))),
        other => panic!("{other:?}"),
    }
}
