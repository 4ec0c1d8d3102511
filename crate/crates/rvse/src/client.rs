//! Minimal blocking client for the repository HTTP API.

use std::time::Duration;

use reqwest::blocking::Client;
use reqwest::Method;

/// Status code and body of one API call.
pub struct Response {
    pub status: u16,
    pub body: Vec<u8>,
}

impl Response {
    pub fn is_success(&self) -> bool {
        (200..300).contains(&self.status)
    }

    pub fn json(&self) -> serde_json::Value {
        serde_json::from_slice(&self.body).unwrap_or_else(|_| String::from_utf8_lossy(&self.body).into())
    }
}

pub struct ApiClient {
    base: String,
    token: Option<String>,
    http: Client,
}

impl ApiClient {
    /// `server` is the origin, e.g. `http://127.0.0.1:8080`.
    pub fn new(server: &str, token: Option<String>) -> Self {
        let http = Client::builder().timeout(Duration::from_secs(60)).build().expect("TLS-free client builds");
        Self { base: format!("{}/api/v1", server.trim_end_matches('/')), token, http }
    }

    pub fn send(&self, method: Method, path: &str, body: Vec<u8>) -> Result<Response, reqwest::Error> {
        let mut req = self.http.request(method, format!("{}{path}", self.base)).body(body);
        if let Some(t) = &self.token {
            req = req.bearer_auth(t);
        }
        let resp = req.send()?;
        let status = resp.status().as_u16();
        Ok(Response { status, body: resp.bytes()?.to_vec() })
    }

    pub fn get(&self, path: &str) -> Result<Response, reqwest::Error> {
        self.send(Method::GET, path, Vec::new())
    }

    pub fn post(&self, path: &str, body: Vec<u8>) -> Result<Response, reqwest::Error> {
        self.send(Method::POST, path, body)
    }
}
