mod common;

use common::{dead_endpoint, MockServer, Reply};
use ewra_pipeline::embed::{unit_cosine, EmbedError, EmbeddingClient};

fn compass(word: &str) -> Vec<f64> {
    match word {
        "north" => vec![1.0, 0.0],
        "east" => vec![0.0, 1.0],
        "south" => vec![-1.0, 0.0],
        _ => vec![0.6, 0.8],
    }
}

fn compass_server() -> MockServer {
    MockServer::start(|r| {
        let inputs = r.json()["input"].as_array().cloned().unwrap_or_default();
        let vecs: Vec<Vec<f64>> = inputs.iter().map(|v| compass(v.as_str().unwrap_or_default())).collect();
        Reply::embeddings(&vecs)
    })
}

fn pair(id: &str, a: &str, b: &str) -> (String, String, String) {
    (id.into(), a.into(), b.into())
}

#[tokio::test]
async fn similarities_map_cosine_to_unit_interval() {
    let mock = compass_server();
    let c = EmbeddingClient::new(reqwest::Client::new(), &mock.url("/v1"), "embed-mock", None);
    let pairs = vec![pair("same", "north", "north"), pair("orth", "north", "east"), pair("opp", "north", "south")];
    let sims = c.similarities(&pairs).await.unwrap();
    assert!((sims["same"] - 1.0).abs() < 1e-12);
    assert!((sims["orth"] - 0.5).abs() < 1e-12);
    assert!(sims["opp"].abs() < 1e-12);
    let req = &mock.requests_to("/v1/embeddings")[0];
    assert_eq!(req.json()["model"], "embed-mock");
}

#[tokio::test]
async fn batches_preserve_order() {
    let mock = compass_server();
    let mut c = EmbeddingClient::new(reqwest::Client::new(), &mock.url("/v1"), "embed-mock", None);
    c.batch_size = 3;
    let words = ["north", "east", "south", "other", "east", "north", "south"];
    let texts: Vec<String> = words.iter().map(|w| w.to_string()).collect();
    let vecs = c.embed(&texts).await.unwrap();
    assert_eq!(vecs.len(), words.len());
    for (v, w) in vecs.iter().zip(words) {
        assert_eq!(*v, compass(w));
    }
    assert_eq!(mock.log().len(), 3);
}

#[tokio::test]
async fn wrong_vector_count_and_dead_endpoint_are_errors() {
    let mock = MockServer::start(|_| Reply::embeddings(&[vec![1.0, 0.0]]));
    let c = EmbeddingClient::new(reqwest::Client::new(), &mock.url("/v1"), "m", None);
    assert!(c.embed(&["a".into(), "b".into()]).await.is_err());

    let c = EmbeddingClient::new(reqwest::Client::new(), &dead_endpoint(), "m", None);
    let err: EmbedError = c.embed(&["a".into()]).await.unwrap_err();
    assert!(!err.to_string().is_empty());
}

#[test]
fn zero_vector_is_neutral() {
    assert_eq!(unit_cosine(&[0.0, 0.0], &[1.0, 0.0]), 0.5);
}
