//! Whole-text embedding similarity, used as a substitute for BERTScore.

use std::collections::HashMap;
use std::time::Duration;

use futures::stream::{self, StreamExt, TryStreamExt};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("embedding request failed: {0}")]
    Transport(String),
    #[error("embedding endpoint returned HTTP {status}")]
    Status { status: u16 },
    #[error("undecodable embedding response: {0}")]
    Decode(String),
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    model: &'a str,
    input: &'a [String],
}

#[derive(Deserialize)]
struct EmbedResponse {
    data: Vec<EmbedItem>,
}

#[derive(Deserialize)]
struct EmbedItem {
    #[serde(default)]
    index: Option<usize>,
    embedding: Vec<f64>,
}

pub fn embeddings_url(endpoint: &str) -> String {
    let trimmed = endpoint.trim_end_matches('/');
    if trimmed.ends_with("/embeddings") {
        trimmed.to_string()
    } else {
        format!("{trimmed}/embeddings")
    }
}

/// Cosine similarity mapped from [−1, 1] onto [0, 1]; zero vectors score 0.5.
pub fn unit_cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.5;
    }
    ((dot / (na * nb)).clamp(-1.0, 1.0) + 1.0) / 2.0
}

#[derive(Debug, Clone)]
pub struct EmbeddingClient {
    http: reqwest::Client,
    url: String,
    model: String,
    api_key: Option<String>,
    pub batch_size: usize,
    pub in_flight: usize,
    pub timeout: Duration,
}

impl EmbeddingClient {
    pub fn new(http: reqwest::Client, endpoint: &str, model: &str, api_key: Option<String>) -> Self {
        EmbeddingClient {
            http,
            url: embeddings_url(endpoint),
            model: model.to_string(),
            api_key,
            batch_size: 32,
            in_flight: 4,
            timeout: Duration::from_secs(60),
        }
    }

    async fn embed_batch(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, EmbedError> {
        let mut req = self.http.post(&self.url).timeout(self.timeout).json(&EmbedRequest { model: &self.model, input: texts });
        if let Some(k) = &self.api_key {
            req = req.bearer_auth(k);
        }
        let resp = req.send().await.map_err(|e| EmbedError::Transport(e.to_string()))?;
        if !resp.status().is_success() {
            return Err(EmbedError::Status { status: resp.status().as_u16() });
        }
        let mut parsed: EmbedResponse = resp.json().await.map_err(|e| EmbedError::Decode(e.to_string()))?;
        if parsed.data.len() != texts.len() {
            return Err(EmbedError::Decode(format!("{} embeddings for {} inputs", parsed.data.len(), texts.len())));
        }
        if parsed.data.iter().all(|d| d.index.is_some()) {
            parsed.data.sort_by_key(|d| d.index);
        }
        Ok(parsed.data.into_iter().map(|d| d.embedding).collect())
    }

    pub async fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, EmbedError> {
        let batches: Vec<Vec<Vec<f64>>> = stream::iter(texts.chunks(self.batch_size.max(1)))
            .map(|chunk| self.embed_batch(chunk))
            .buffered(self.in_flight.max(1))
            .try_collect()
            .await?;
        Ok(batches.into_iter().flatten().collect())
    }

    /// Similarity of each (id, candidate, reference) triple.
    pub async fn similarities(&self, pairs: &[(String, String, String)]) -> Result<HashMap<String, f64>, EmbedError> {
        let texts: Vec<String> = pairs.iter().flat_map(|(_, c, r)| [c.clone(), r.clone()]).collect();
        let vecs = self.embed(&texts).await?;
        Ok(pairs
            .iter()
            .zip(vecs.chunks(2))
            .map(|((id, _, _), v)| (id.clone(), unit_cosine(&v[0], &v[1])))
            .collect())
    }
}
