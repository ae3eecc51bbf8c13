//! Blocking JSON-over-HTTP client shared by the remote providers.

use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct JsonClient {
    base_url: String,
    agent: ureq::Agent,
}

impl JsonClient {
    pub fn new(base_url: impl Into<String>, timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder().timeout_global(Some(timeout)).build().into();
        JsonClient { base_url: base_url.into().trim_end_matches('/').to_string(), agent }
    }

    pub fn base_url(&self) -> &str {
        &self.base_url
    }

    pub fn post<Req: Serialize, Resp: DeserializeOwned>(&self, path: &str, body: &Req) -> Result<Resp> {
        let url = format!("{}{}", self.base_url, path);
        let mut resp = self
            .agent
            .post(&url)
            .send_json(body)
            .map_err(|e| Error::Provider(format!("POST {url}: {e}")))?;
        resp.body_mut()
            .read_json::<Resp>()
            .map_err(|e| Error::Provider(format!("POST {url}: bad response body: {e}")))
    }
}
