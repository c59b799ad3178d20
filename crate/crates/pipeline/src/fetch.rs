//! Feed retrieval and article download for one event.

use std::collections::{HashMap, HashSet};
use std::time::Duration;

use ewra_core::event::Event;
use ewra_core::ingest::{
    build_queries, dedupe, extract_page, feed_url, parse_feed, within_window, Article, FeedItem, FeedParse,
    IngestError, KeywordBank,
};
use futures::stream::{self, StreamExt};
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tokio::sync::Mutex;
use tokio::time::Instant;

#[derive(Debug, Error)]
pub enum FetchError {
    #[error("{url}: {message}")]
    Transport { url: String, message: String },
    #[error("{url}: HTTP {status}")]
    Status { url: String, status: u16 },
    #[error("{url}: {source}")]
    Format {
        url: String,
        #[source]
        source: IngestError,
    },
}

impl FetchError {
    pub fn is_retryable(&self) -> bool {
        match self {
            FetchError::Transport { .. } => true,
            FetchError::Status { status, .. } => *status == 429 || *status >= 500,
            FetchError::Format { .. } => false,
        }
    }
}

/// Spaces out requests to the same host.
pub struct Politeness {
    delay: Duration,
    next: Mutex<HashMap<String, Instant>>,
}

impl Politeness {
    pub fn new(delay: Duration) -> Self {
        Politeness { delay, next: Mutex::new(HashMap::new()) }
    }

    pub async fn wait(&self, url: &str) {
        if self.delay.is_zero() {
            return;
        }
        let host = url::Url::parse(url).ok().and_then(|u| u.host_str().map(str::to_string)).unwrap_or_default();
        let slot = {
            let mut next = self.next.lock().await;
            let now = Instant::now();
            let slot = next.get(&host).copied().filter(|t| *t > now).unwrap_or(now);
            next.insert(host, slot + self.delay);
            slot
        };
        tokio::time::sleep_until(slot).await;
    }
}

#[derive(Debug, Clone)]
pub struct IngestOptions {
    pub feed_base: String,
    pub locale: String,
    pub window_days: i64,
    pub workers: usize,
    pub politeness: Duration,
    pub attempts: u32,
    pub retry_backoff: Duration,
}

impl Default for IngestOptions {
    fn default() -> Self {
        IngestOptions {
            feed_base: ewra_core::ingest::DEFAULT_FEED_BASE.into(),
            locale: "en-US".into(),
            window_days: ewra_core::ingest::DEFAULT_WINDOW_DAYS,
            workers: 8,
            politeness: Duration::from_secs(1),
            attempts: 3,
            retry_backoff: Duration::from_millis(500),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestStats {
    pub queries: usize,
    pub feeds_ok: usize,
    pub feeds_failed: usize,
    pub items_seen: usize,
    pub items_malformed: usize,
    pub out_of_window: usize,
    /// Items kept without a publication timestamp.
    pub undated: usize,
    pub extract_failed: usize,
    pub duplicates: usize,
    pub articles: usize,
}

#[derive(Debug)]
pub struct IngestOutcome {
    pub articles: Vec<Article>,
    pub stats: IngestStats,
    pub failures: Vec<String>,
}

impl IngestOutcome {
    /// Every feed request failed.
    pub fn total_failure(&self) -> bool {
        self.stats.queries > 0 && self.stats.feeds_ok == 0
    }
}

async fn get_with_retry(
    client: &reqwest::Client,
    url: &str,
    gate: &Politeness,
    opts: &IngestOptions,
) -> Result<(String, Vec<u8>), FetchError> {
    let mut attempt = 0;
    loop {
        attempt += 1;
        gate.wait(url).await;
        let result = async {
            let resp = client
                .get(url)
                .send()
                .await
                .map_err(|e| FetchError::Transport { url: url.into(), message: e.to_string() })?;
            let status = resp.status();
            if !status.is_success() {
                return Err(FetchError::Status { url: url.into(), status: status.as_u16() });
            }
            let final_url = resp.url().to_string();
            let body = resp
                .bytes()
                .await
                .map_err(|e| FetchError::Transport { url: url.into(), message: e.to_string() })?;
            Ok((final_url, body.to_vec()))
        }
        .await;
        match result {
            Err(e) if e.is_retryable() && attempt < opts.attempts.max(1) => {
                tracing::debug!(url, attempt, error = %e, "retrying fetch");
                tokio::time::sleep(opts.retry_backoff * 2u32.pow(attempt - 1)).await;
            }
            other => return other,
        }
    }
}

pub async fn fetch_feed(
    client: &reqwest::Client,
    url: &str,
    gate: &Politeness,
    opts: &IngestOptions,
) -> Result<FeedParse, FetchError> {
    let (_, body) = get_with_retry(client, url, gate, opts).await?;
    parse_feed(&body).map_err(|source| FetchError::Format { url: url.into(), source })
}

/// Downloads the item's page; `Article.url` is the post-redirect URL.
pub async fn extract_article(
    client: &reqwest::Client,
    item: &FeedItem,
    event: &Event,
    query: &str,
    gate: &Politeness,
    opts: &IngestOptions,
) -> Result<Article, FetchError> {
    let (final_url, body) = get_with_retry(client, &item.link, gate, opts).await?;
    let page = extract_page(&String::from_utf8_lossy(&body));
    if page.body.trim().is_empty() {
        return Err(FetchError::Format { url: final_url.clone(), source: IngestError::EmptyBody(final_url) });
    }
    let title = if item.title.trim().is_empty() { page.title.unwrap_or_default() } else { item.title.clone() };
    Ok(Article {
        url: final_url,
        title,
        body: page.body,
        published: item.published,
        event: event.id.clone(),
        query: query.to_string(),
    })
}

/// Queries every keyword feed of `event`, keeps items inside the date window
/// (plus undated ones, counted), downloads them and removes duplicates.
/// Output order follows (query index, item index).
pub async fn ingest_event(
    client: &reqwest::Client,
    event: &Event,
    bank: &KeywordBank,
    opts: &IngestOptions,
) -> Result<IngestOutcome, IngestError> {
    let queries = build_queries(event, bank)?;
    let urls = queries.iter().map(|q| feed_url(&opts.feed_base, q, &opts.locale)).collect::<Result<Vec<_>, _>>()?;
    let gate = Politeness::new(opts.politeness);
    let workers = opts.workers.max(1);
    let mut stats = IngestStats { queries: queries.len(), ..Default::default() };
    let mut failures = Vec::new();

    let mut feeds: Vec<(usize, Result<FeedParse, FetchError>)> = stream::iter(urls.iter().enumerate())
        .map(|(qi, url)| {
            let gate = &gate;
            async move { (qi, fetch_feed(client, url, gate, opts).await) }
        })
        .buffer_unordered(workers)
        .collect()
        .await;
    feeds.sort_by_key(|(qi, _)| *qi);

    let mut pending = Vec::new();
    let mut seen_links = HashSet::new();
    for (qi, feed) in feeds {
        match feed {
            Ok(parsed) => {
                stats.feeds_ok += 1;
                stats.items_malformed += parsed.skipped;
                for (ii, item) in parsed.items.into_iter().enumerate() {
                    stats.items_seen += 1;
                    if item.published.is_none() {
                        stats.undated += 1;
                    } else if !within_window(item.published, event.event_date, opts.window_days) {
                        stats.out_of_window += 1;
                        continue;
                    }
                    if !seen_links.insert(item.link.clone()) {
                        stats.duplicates += 1;
                        continue;
                    }
                    pending.push((qi, ii, item));
                }
            }
            Err(e) => {
                tracing::warn!(event = %event.id, error = %e, "feed failed");
                stats.feeds_failed += 1;
                failures.push(e.to_string());
            }
        }
    }

    let mut extracted: Vec<((usize, usize), Result<Article, FetchError>)> = stream::iter(pending.iter())
        .map(|(qi, ii, item)| {
            let gate = &gate;
            let query = &queries[*qi];
            async move { ((*qi, *ii), extract_article(client, item, event, query, gate, opts).await) }
        })
        .buffer_unordered(workers)
        .collect()
        .await;
    extracted.sort_by_key(|(k, _)| *k);

    let mut articles = Vec::new();
    for (_, r) in extracted {
        match r {
            Ok(a) => articles.push(a),
            Err(e) => {
                tracing::warn!(event = %event.id, error = %e, "article extraction failed");
                stats.extract_failed += 1;
                failures.push(e.to_string());
            }
        }
    }
    let before = articles.len();
    let articles = dedupe(articles);
    stats.duplicates += before - articles.len();
    stats.articles = articles.len();
    Ok(IngestOutcome { articles, stats, failures })
}
