use std::time::Duration;

use thiserror::Error;

#[derive(Debug, Error)]
#[error("building HTTP client: {0}")]
pub struct ClientBuildError(String);

/// A client with an overall request timeout and optional proxy.
pub fn build_client(proxy: Option<&str>, timeout: Duration, user_agent: &str) -> Result<reqwest::Client, ClientBuildError> {
    let mut b = reqwest::Client::builder()
        .timeout(timeout)
        .connect_timeout(timeout.min(Duration::from_secs(10)))
        .user_agent(user_agent)
        .redirect(reqwest::redirect::Policy::limited(10));
    if let Some(p) = proxy {
        b = b.proxy(reqwest::Proxy::all(p).map_err(|e| ClientBuildError(e.to_string()))?);
    }
    b.build().map_err(|e| ClientBuildError(e.to_string()))
}
