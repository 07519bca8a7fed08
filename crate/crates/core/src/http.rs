//! JSON-over-HTTP calls shared by the endpoint scorer, predictor and
//! generator.

use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;

/// Environment variable whose value is sent as a bearer token.
pub const TOKEN_ENV: &str = "SQLHARD_ENDPOINT_TOKEN";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct EndpointConfig {
    /// Base address, e.g. `http://127.0.0.1:8000`.
    pub url: String,
    pub timeout_ms: u64,
    /// Total attempts per request, at least 1.
    pub max_attempts: u32,
    /// Delay before the second attempt; doubles after each failure.
    pub backoff_ms: u64,
    pub max_in_flight: usize,
}

impl Default for EndpointConfig {
    fn default() -> Self {
        EndpointConfig {
            url: String::new(),
            timeout_ms: 30_000,
            max_attempts: 3,
            backoff_ms: 200,
            max_in_flight: 8,
        }
    }
}

impl EndpointConfig {
    pub fn new(url: impl Into<String>) -> EndpointConfig {
        EndpointConfig {
            url: url.into(),
            ..EndpointConfig::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum CallError {
    /// Unreachable, timed out or non-200 after every attempt.
    Unavailable(String),
    /// A 200 reply that is not JSON.
    Protocol(String),
}

/// Counting semaphore bounding concurrent requests.
struct Gate {
    free: Mutex<usize>,
    cv: Condvar,
}

impl Gate {
    fn acquire(&self) -> GateGuard<'_> {
        let mut free = self.free.lock().unwrap_or_else(|e| e.into_inner());
        while *free == 0 {
            free = self.cv.wait(free).unwrap_or_else(|e| e.into_inner());
        }
        *free -= 1;
        GateGuard(self)
    }
}

struct GateGuard<'a>(&'a Gate);

impl Drop for GateGuard<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap_or_else(|e| e.into_inner()) += 1;
        self.0.cv.notify_one();
    }
}

pub(crate) struct Endpoint {
    config: EndpointConfig,
    agent: ureq::Agent,
    token: Option<String>,
    gate: Gate,
}

impl Endpoint {
    pub(crate) fn new(config: EndpointConfig) -> Endpoint {
        let agent = ureq::AgentBuilder::new()
            .timeout(Duration::from_millis(config.timeout_ms))
            .build();
        let token = std::env::var(TOKEN_ENV).ok().filter(|t| !t.is_empty());
        let gate = Gate {
            free: Mutex::new(config.max_in_flight.max(1)),
            cv: Condvar::new(),
        };
        Endpoint {
            config,
            agent,
            token,
            gate,
        }
    }

    pub(crate) fn url(&self, path: &str) -> String {
        format!("{}{}", self.config.url.trim_end_matches('/'), path)
    }

    pub(crate) fn post(&self, path: &str, body: &Value) -> Result<Value, CallError> {
        let url = self.url(path);
        let _slot = self.gate.acquire();
        let attempts = self.config.max_attempts.max(1);
        let mut delay = Duration::from_millis(self.config.backoff_ms);
        let mut last = String::new();
        for attempt in 1..=attempts {
            let mut req = self.agent.post(&url);
            if let Some(t) = &self.token {
                req = req.set("Authorization", &format!("Bearer {t}"));
            }
            match req.send_json(body) {
                Ok(resp) => {
                    return resp.into_json::<Value>().map_err(|e| {
                        CallError::Protocol(format!("{url}: reply is not JSON: {e}"))
                    });
                }
                Err(ureq::Error::Status(code, _)) if (400..500).contains(&code) => {
                    return Err(CallError::Unavailable(format!("{url}: status {code}")));
                }
                Err(ureq::Error::Status(code, _)) => last = format!("{url}: status {code}"),
                Err(e) => last = format!("{url}: {e}"),
            }
            log::debug!("attempt {attempt}/{attempts} failed: {last}");
            if attempt < attempts {
                std::thread::sleep(delay);
                delay *= 2;
            }
        }
        Err(CallError::Unavailable(format!(
            "{last} (after {attempts} attempts)"
        )))
    }
}
