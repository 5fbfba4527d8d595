//! Blocking JSON-over-HTTP transport shared by the LM and embedding clients.

use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("transport error after {attempts} attempt(s): {message}")]
pub struct TransportError {
    pub attempts: u32,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    /// Extra attempts after the first one.
    pub retries: u32,
    pub initial_backoff: Duration,
    pub timeout: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self { retries: 2, initial_backoff: Duration::from_millis(250), timeout: Duration::from_secs(120) }
    }
}

/// Counting semaphore bounding in-flight requests.
#[derive(Debug)]
pub struct Limiter {
    permits: Mutex<usize>,
    freed: Condvar,
}

impl Limiter {
    pub fn new(permits: usize) -> Arc<Self> {
        Arc::new(Self { permits: Mutex::new(permits.max(1)), freed: Condvar::new() })
    }

    fn acquire(&self) -> Permit<'_> {
        let mut n = self.permits.lock().unwrap_or_else(|e| e.into_inner());
        while *n == 0 {
            n = self.freed.wait(n).unwrap_or_else(|e| e.into_inner());
        }
        *n -= 1;
        Permit(self)
    }
}

struct Permit<'a>(&'a Limiter);

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.permits.lock().unwrap_or_else(|e| e.into_inner()) += 1;
        self.0.freed.notify_one();
    }
}

#[derive(Debug, Clone)]
pub struct HttpTransport {
    client: reqwest::blocking::Client,
    url: String,
    api_key: Option<String>,
    retry: RetryPolicy,
    limiter: Arc<Limiter>,
}

enum Failure {
    Retryable(String),
    Fatal(String),
}

impl HttpTransport {
    pub fn new(url: impl Into<String>, api_key: Option<String>, retry: RetryPolicy, limiter: Arc<Limiter>) -> Self {
        let client = reqwest::blocking::Client::builder()
            .timeout(retry.timeout)
            .build()
            .expect("reqwest client without TLS configuration always builds");
        Self { client, url: url.into(), api_key, retry, limiter }
    }

    pub fn url(&self) -> &str {
        &self.url
    }

    /// POSTs `body` and decodes the JSON reply. Connection failures, 429 and
    /// 5xx responses are retried with exponential backoff; other statuses and
    /// undecodable bodies fail immediately.
    pub fn post_json<Req, Resp>(&self, body: &Req) -> Result<Resp, TransportError>
    where
        Req: Serialize + ?Sized,
        Resp: DeserializeOwned,
    {
        let total = self.retry.retries + 1;
        let mut backoff = self.retry.initial_backoff;
        let mut last = String::new();
        for attempt in 1..=total {
            match self.try_once(body) {
                Ok(resp) => return Ok(resp),
                Err(Failure::Fatal(message)) => return Err(TransportError { attempts: attempt, message }),
                Err(Failure::Retryable(message)) => {
                    log::warn!("POST {} failed (attempt {attempt}/{total}): {message}", self.url);
                    last = message;
                    if attempt < total {
                        std::thread::sleep(backoff);
                        backoff = backoff.saturating_mul(2);
                    }
                }
            }
        }
        Err(TransportError { attempts: total, message: last })
    }

    fn try_once<Req, Resp>(&self, body: &Req) -> Result<Resp, Failure>
    where
        Req: Serialize + ?Sized,
        Resp: DeserializeOwned,
    {
        let _permit = self.limiter.acquire();
        let mut req = self.client.post(&self.url).json(body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| Failure::Retryable(e.to_string()))?;
        let status = resp.status();
        if status.is_server_error() || status.as_u16() == 429 {
            return Err(Failure::Retryable(format!("HTTP {status}")));
        }
        if !status.is_success() {
            let text = resp.text().unwrap_or_default();
            return Err(Failure::Fatal(format!("HTTP {status}: {text}")));
        }
        let bytes = resp.bytes().map_err(|e| Failure::Retryable(e.to_string()))?;
        serde_json::from_slice(&bytes).map_err(|e| Failure::Fatal(format!("undecodable response: {e}")))
    }
}
