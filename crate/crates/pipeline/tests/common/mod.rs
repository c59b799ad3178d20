//! Scripted HTTP mock used by the integration tests: chat completions,
//! embeddings, RSS feeds and article pages, with a request log.
#![allow(dead_code)]

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::{HeaderMap, Method, StatusCode, Uri};
use axum::response::{IntoResponse, Response};
use ewra_core::curate::{GazetteerHit, Sentence};
use ewra_core::prompt::one_shot_response;
use ewra_core::TaskKind;
use ewra_pipeline::llm::{ChatClient, ChatConfig, RetryPolicy};

#[derive(Debug, Clone)]
pub struct Request {
    pub method: String,
    pub path: String,
    pub query: String,
    pub headers: HashMap<String, String>,
    pub body: String,
    /// 1-based count of requests seen with this exact (path, query, body).
    pub repeat: usize,
}

impl Request {
    pub fn json(&self) -> serde_json::Value {
        serde_json::from_str(&self.body).unwrap_or_default()
    }

    /// User message of a chat-completions request.
    pub fn prompt(&self) -> String {
        self.json()["messages"][1]["content"].as_str().unwrap_or_default().to_string()
    }

    pub fn query_param(&self, key: &str) -> Option<String> {
        url::form_urlencoded::parse(self.query.as_bytes()).find(|(k, _)| k == key).map(|(_, v)| v.into_owned())
    }
}

#[derive(Debug, Clone)]
pub struct Reply {
    pub status: u16,
    pub headers: Vec<(String, String)>,
    pub body: String,
    pub delay: Option<Duration>,
}

impl Reply {
    pub fn status(status: u16) -> Self {
        Reply { status, headers: Vec::new(), body: String::new(), delay: None }
    }

    pub fn text(status: u16, content_type: &str, body: impl Into<String>) -> Self {
        Reply { status, headers: vec![("content-type".into(), content_type.into())], body: body.into(), delay: None }
    }

    /// A chat-completions response carrying `content`.
    pub fn chat(content: &str) -> Self {
        let body = serde_json::json!({
            "id": "mock",
            "object": "chat.completion",
            "choices": [{"index": 0, "message": {"role": "assistant", "content": content}, "finish_reason": "stop"}],
            "usage": {"prompt_tokens": 100, "completion_tokens": 50, "total_tokens": 150},
        });
        Reply::text(200, "application/json", body.to_string())
    }

    pub fn embeddings(vectors: &[Vec<f64>]) -> Self {
        let data: Vec<_> = vectors
            .iter()
            .enumerate()
            .map(|(i, v)| serde_json::json!({"object": "embedding", "index": i, "embedding": v}))
            .collect();
        Reply::text(200, "application/json", serde_json::json!({"object": "list", "data": data}).to_string())
    }

    pub fn redirect(location: &str) -> Self {
        Reply { status: 302, headers: vec![("location".into(), location.into())], body: String::new(), delay: None }
    }

    pub fn after(mut self, d: Duration) -> Self {
        self.delay = Some(d);
        self
    }

    pub fn header(mut self, k: &str, v: &str) -> Self {
        self.headers.push((k.into(), v.into()));
        self
    }
}

pub type Script = dyn Fn(&Request) -> Reply + Send + Sync;

struct Shared {
    script: Box<Script>,
    log: Mutex<Vec<Request>>,
    seen: Mutex<HashMap<(String, String, String), usize>>,
    in_flight: AtomicUsize,
    max_in_flight: AtomicUsize,
}

/// Runs on its own thread and runtime, so both sync and async tests can use it.
pub struct MockServer {
    pub addr: SocketAddr,
    shared: Arc<Shared>,
    shutdown: Option<tokio::sync::oneshot::Sender<()>>,
    thread: Option<std::thread::JoinHandle<()>>,
}

async fn handle(State(s): State<Arc<Shared>>, method: Method, uri: Uri, headers: HeaderMap, body: Bytes) -> Response {
    let now = s.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
    s.max_in_flight.fetch_max(now, Ordering::SeqCst);
    let path = uri.path().to_string();
    let query = uri.query().unwrap_or_default().to_string();
    let body = String::from_utf8_lossy(&body).into_owned();
    let repeat = {
        let mut seen = s.seen.lock().unwrap();
        let n = seen.entry((path.clone(), query.clone(), body.clone())).or_default();
        *n += 1;
        *n
    };
    let req = Request {
        method: method.to_string(),
        path,
        query,
        headers: headers.iter().map(|(k, v)| (k.to_string(), v.to_str().unwrap_or_default().to_string())).collect(),
        body,
        repeat,
    };
    s.log.lock().unwrap().push(req.clone());
    let reply = (s.script)(&req);
    if let Some(d) = reply.delay {
        tokio::time::sleep(d).await;
    }
    s.in_flight.fetch_sub(1, Ordering::SeqCst);
    let mut resp = (StatusCode::from_u16(reply.status).unwrap(), reply.body).into_response();
    for (k, v) in reply.headers {
        resp.headers_mut().insert(
            axum::http::HeaderName::from_bytes(k.as_bytes()).unwrap(),
            axum::http::HeaderValue::from_str(&v).unwrap(),
        );
    }
    resp
}

impl MockServer {
    pub fn start(script: impl Fn(&Request) -> Reply + Send + Sync + 'static) -> Self {
        let shared = Arc::new(Shared {
            script: Box::new(script),
            log: Mutex::new(Vec::new()),
            seen: Mutex::new(HashMap::new()),
            in_flight: AtomicUsize::new(0),
            max_in_flight: AtomicUsize::new(0),
        });
        let (addr_tx, addr_rx) = std::sync::mpsc::channel();
        let (stop_tx, stop_rx) = tokio::sync::oneshot::channel::<()>();
        let app_state = shared.clone();
        let thread = std::thread::spawn(move || {
            let rt = tokio::runtime::Builder::new_multi_thread().worker_threads(4).enable_all().build().unwrap();
            rt.block_on(async move {
                let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
                addr_tx.send(listener.local_addr().unwrap()).unwrap();
                let app = axum::Router::new().fallback(handle).with_state(app_state);
                axum::serve(listener, app)
                    .with_graceful_shutdown(async {
                        let _ = stop_rx.await;
                    })
                    .await
                    .unwrap();
            });
        });
        let addr = addr_rx.recv().unwrap();
        MockServer { addr, shared, shutdown: Some(stop_tx), thread: Some(thread) }
    }

    pub fn url(&self, path: &str) -> String {
        format!("http://{}{}", self.addr, path)
    }

    pub fn log(&self) -> Vec<Request> {
        self.shared.log.lock().unwrap().clone()
    }

    pub fn requests_to(&self, path: &str) -> Vec<Request> {
        self.log().into_iter().filter(|r| r.path == path).collect()
    }

    pub fn max_in_flight(&self) -> usize {
        self.shared.max_in_flight.load(Ordering::SeqCst)
    }
}

impl Drop for MockServer {
    fn drop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

/// A local address with nothing listening.
pub fn dead_endpoint() -> String {
    let l = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = l.local_addr().unwrap();
    drop(l);
    format!("http://{addr}/v1")
}

pub fn task_of_prompt(prompt: &str) -> TaskKind {
    if prompt.contains("determine which emotions") {
        TaskKind::Emotion
    } else if prompt.contains("most relevant topic") {
        TaskKind::TopicLabel
    } else {
        TaskKind::Vie
    }
}

pub fn sentence_of_prompt(prompt: &str) -> String {
    let start = prompt.find("Given the sentence: \"").map(|i| i + "Given the sentence: \"".len()).unwrap_or(0);
    let end = prompt[start..].find("\", determine").map(|i| start + i).unwrap_or(prompt.len());
    prompt[start..end].to_string()
}

/// The example answer of each task; always validates.
pub fn valid_answer(task: TaskKind) -> String {
    one_shot_response(task).to_string()
}

pub const PROSE: &str = "I think this sentence is mostly about flooding and its consequences.";

pub fn fixture_sentences(n: usize) -> Vec<Sentence> {
    (0..n)
        .map(|i| Sentence {
            text: format!("Floodwaters reached district {i} of Hanoi overnight as rescue boats were deployed."),
            source_url: format!("https://news.example.com/yagi/{i}"),
            event_ref: "typhoon-yagi".into(),
            matched_locations: vec![GazetteerHit {
                surface: "Hanoi".into(),
                name: "Hanoi".into(),
                country_code: "VN".into(),
                admin1_code: "01".into(),
                admin2_code: String::new(),
            }],
        })
        .collect()
}

/// Index embedded in a fixture sentence.
pub fn sentence_index(sentence: &str) -> Option<usize> {
    sentence.split("district ").nth(1)?.split(' ').next()?.parse().ok()
}

pub fn core_fixture(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures").join(name)
}

pub fn chat_client(endpoint: &str, timeout: Duration, base: Duration) -> ChatClient {
    ChatClient::new(
        reqwest::Client::new(),
        ChatConfig {
            endpoint: endpoint.to_string(),
            api_key: Some("sk-mock".into()),
            model: "mock-model".into(),
            system_prompt: "You are a helpful assistant.".into(),
            temperature: 0.7,
            max_tokens: 1024,
            timeout,
            retry: RetryPolicy { max_attempts: 3, base, max_delay: Duration::from_secs(5) },
            requests_per_second: None,
        },
    )
}


/// An RSS 2.0 document; `pub_date` is an RFC 2822 string.
pub fn rss(items: &[(&str, &str, Option<&str>)]) -> String {
    let mut s = String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<rss version=\"2.0\"><channel><title>mock</title>\n");
    for (title, link, date) in items {
        s.push_str(&format!("<item><title>{title}</title><link>{link}</link>"));
        if let Some(d) = date {
            s.push_str(&format!("<pubDate>{d}</pubDate>"));
        }
        s.push_str("</item>\n");
    }
    s.push_str("</channel></rss>\n");
    s
}

pub fn article_html(title: &str, paragraphs: &[&str]) -> String {
    let body: String = paragraphs.iter().map(|p| format!("<p>{p}</p>")).collect();
    format!("<html><head><title>{title}</title></head><body><nav>Home | World</nav><article><h1>{title}</h1>{body}</article><footer>Copyright Example</footer></body></html>")
}

/// A gold record whose reference is the task's example answer.
pub fn gold_from_answer(id: &str, sentence: &str, task: TaskKind) -> ewra_core::metrics::GoldRecord {
    let out = ewra_core::response::parse_output(&valid_answer(task), task, &ewra_core::Taxonomy::default()).unwrap();
    ewra_core::metrics::GoldRecord {
        id: id.into(),
        sentence: sentence.into(),
        task,
        distributions: ewra_core::sample::distributions_to_map(&out.distributions),
        keywords: out.keywords,
        explanation: out.think_text,
    }
}

/// Sentence `n` of the mock news corpus; each names Hanoi.
pub fn corpus_sentence(n: usize) -> String {
    format!("Floodwaters reached district {n} of Hanoi overnight as rescue boats were deployed.")
}

/// How the mock model treats a sentence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Behavior {
    Valid,
    /// Prose on the first attempt, valid afterwards.
    FlakyOnce,
    /// Always prose.
    Malformed,
}

/// A news site plus chat endpoint: every feed lists `articles` pages dated on
/// the Yagi landfall, page `k` holds sentences `k*per_article ..`, and chat
/// answers follow `behavior(sentence index)`.
pub fn pipeline_site(
    articles: usize,
    per_article: usize,
    behavior: impl Fn(usize) -> Behavior + Send + Sync + 'static,
) -> impl Fn(&Request) -> Reply + Send + Sync + 'static {
    move |r: &Request| {
        let host = format!("http://{}", r.headers.get("host").cloned().unwrap_or_default());
        match r.path.as_str() {
            "/rss/search" => {
                let items: Vec<(String, String)> =
                    (0..articles).map(|k| (format!("Yagi report {k}"), format!("{host}/a/{k}"))).collect();
                let refs: Vec<(&str, &str, Option<&str>)> = items
                    .iter()
                    .map(|(t, l)| (t.as_str(), l.as_str(), Some("Sun, 08 Sep 2024 10:00:00 GMT")))
                    .collect();
                Reply::text(200, "application/rss+xml", rss(&refs))
            }
            "/v1/chat/completions" => {
                let prompt = r.prompt();
                let task = task_of_prompt(&prompt);
                let i = sentence_index(&sentence_of_prompt(&prompt)).unwrap_or(0);
                match (behavior(i), r.repeat) {
                    (Behavior::Valid, _) | (Behavior::FlakyOnce, 2..) => Reply::chat(&valid_answer(task)),
                    _ => Reply::chat(PROSE),
                }
            }
            p => match p.strip_prefix("/a/").and_then(|k| k.parse::<usize>().ok()) {
                Some(k) if k < articles => {
                    let sents: Vec<String> = (0..per_article).map(|j| corpus_sentence(k * per_article + j)).collect();
                    let refs: Vec<&str> = sents.iter().map(String::as_str).collect();
                    Reply::text(200, "text/html", article_html(&format!("Yagi report {k}"), &refs))
                }
                _ => Reply::status(404),
            },
        }
    }
}
