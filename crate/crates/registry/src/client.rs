use std::time::Duration;

use cube_conformance::ComplianceReport;
use serde::de::DeserializeOwned;
use serde_json::Value;

use crate::{Registration, RegistryEntry, RegistryError, RegistryFilter};

/// Blocking client for a registry's HTTP API.
pub struct RegistryClient {
    base: String,
    agent: ureq::Agent,
}

fn encode_segment(s: &str) -> String {
    form_urlencoded::byte_serialize(s.as_bytes()).collect()
}

impl RegistryClient {
    /// `base` is the server root, e.g. `http://127.0.0.1:8700`.
    pub fn new(base: impl Into<String>) -> Self {
        let agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .max_idle_connections(0)
            .max_idle_connections_per_host(0)
            // registration waits for the whole conformance run
            .timeout_global(Some(Duration::from_secs(600)))
            .timeout_connect(Some(Duration::from_secs(5)))
            .build()
            .into();
        Self { base: base.into().trim_end_matches('/').to_owned(), agent }
    }

    fn finish<T: DeserializeOwned>(
        result: Result<ureq::http::Response<ureq::Body>, ureq::Error>,
    ) -> Result<T, RegistryError> {
        let mut resp = result.map_err(|e| RegistryError::Transport(e.to_string()))?;
        let status = resp.status().as_u16();
        let bytes = resp.body_mut().read_to_vec().map_err(|e| RegistryError::Transport(e.to_string()))?;
        let value: Value = serde_json::from_slice(&bytes)
            .map_err(|e| RegistryError::Transport(format!("HTTP {status}: unreadable body: {e}")))?;
        if (200..300).contains(&status) {
            serde_json::from_value(value).map_err(|e| RegistryError::Transport(format!("unexpected body: {e}")))
        } else {
            Err(RegistryError::from_json(&value))
        }
    }

    fn get_json<T: DeserializeOwned>(&self, path: &str) -> Result<T, RegistryError> {
        Self::finish(self.agent.get(format!("{}{path}", self.base)).call())
    }

    pub fn register(&self, registration: &Registration) -> Result<RegistryEntry, RegistryError> {
        let body = cube_core::canonical::to_vec(registration).map_err(|e| RegistryError::Transport(e.to_string()))?;
        Self::finish(
            self.agent
                .post(format!("{}/v1/entries", self.base))
                .header("Content-Type", "application/json")
                .send(&body[..]),
        )
    }

    pub fn query(&self, filter: &RegistryFilter) -> Result<Vec<RegistryEntry>, RegistryError> {
        let q = filter.to_query();
        self.get_json(&if q.is_empty() { "/v1/entries".into() } else { format!("/v1/entries?{q}") })
    }

    pub fn get(&self, id: &str, version: Option<&str>, include_pending: bool) -> Result<RegistryEntry, RegistryError> {
        let mut path = format!("/v1/entries/{}", encode_segment(id));
        if let Some(v) = version {
            path.push('/');
            path.push_str(&encode_segment(v));
        }
        if include_pending {
            path.push_str("?include_pending=true");
        }
        self.get_json(&path)
    }

    pub fn report(&self, id: &str, version: &str) -> Result<ComplianceReport, RegistryError> {
        self.get_json(&format!("/v1/entries/{}/{}/report", encode_segment(id), encode_segment(version)))
    }
}
