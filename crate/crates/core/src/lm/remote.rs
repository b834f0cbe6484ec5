//! Client for a remote next-token log-probability server.
//!
//! Protocol (JSON over HTTP POST to the endpoint URL):
//!
//! ```text
//! request:  {"context": ["tok", ...], "top_k": 0}
//! response: {"logprobs": {"tok": -1.23, ...}, "deterministic": true}
//! ```
//!
//! Tokens travel as strings, never ids. `top_k = 0` asks for the full
//! vocabulary. All values are natural logs. Non-2xx replies (the server's
//! way of rejecting a request, e.g. `top_k` larger than its vocabulary) are
//! reported as malformed responses.

use std::collections::hash_map::DefaultHasher;
use std::collections::HashMap;
use std::hash::{Hash, Hasher};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::model::{Distribution, TokenModel};
use super::LmError;
use crate::tokenize::{Tokenizer, WordTokenizer};

#[derive(Debug, Serialize, Deserialize)]
pub struct LogprobRequest {
    pub context: Vec<String>,
    pub top_k: usize,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct LogprobResponse {
    pub logprobs: HashMap<String, f64>,
    #[serde(default)]
    pub deterministic: bool,
}

type CacheKey = (String, u64);

pub struct RemoteModel {
    endpoint: String,
    top_k: usize,
    agent: ureq::Agent,
    cache: Mutex<HashMap<CacheKey, (Vec<String>, Distribution)>>,
    requests: AtomicUsize,
    deterministic: AtomicBool,
}

impl std::fmt::Debug for RemoteModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RemoteModel")
            .field("endpoint", &self.endpoint)
            .field("top_k", &self.top_k)
            .field("requests", &self.request_count())
            .finish()
    }
}

impl RemoteModel {
    pub fn new(endpoint: impl Into<String>, top_k: usize) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(60)))
            .build()
            .into();
        RemoteModel {
            endpoint: endpoint.into(),
            top_k,
            agent,
            cache: Mutex::new(HashMap::new()),
            requests: AtomicUsize::new(0),
            deterministic: AtomicBool::new(false),
        }
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    /// Network requests issued so far (cache hits are not counted).
    pub fn request_count(&self) -> usize {
        self.requests.load(Ordering::SeqCst)
    }

    fn key(&self, context: &[&str]) -> CacheKey {
        let mut h = DefaultHasher::new();
        context.hash(&mut h);
        (self.endpoint.clone(), h.finish())
    }

    /// One uncached round trip.
    pub fn remote_next_logprobs(&self, context: &[&str]) -> Result<Distribution, LmError> {
        self.requests.fetch_add(1, Ordering::SeqCst);
        let req = LogprobRequest {
            context: context.iter().map(|s| s.to_string()).collect(),
            top_k: self.top_k,
        };
        let mut resp = self
            .agent
            .post(&self.endpoint)
            .send_json(&req)
            .map_err(|e| match e {
                ureq::Error::StatusCode(code) => {
                    LmError::MalformedResponse(format!("server rejected request with status {code}"))
                }
                other => LmError::Transport(other.to_string()),
            })?;
        let body = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| LmError::Transport(e.to_string()))?;
        let parsed: LogprobResponse =
            serde_json::from_str(&body).map_err(|e| LmError::MalformedResponse(e.to_string()))?;
        if parsed.logprobs.is_empty() {
            return Err(LmError::MalformedResponse("empty distribution".into()));
        }
        if self.top_k > 0 && parsed.logprobs.len() > self.top_k {
            return Err(LmError::MalformedResponse(format!(
                "asked for {} tokens, got {}",
                self.top_k,
                parsed.logprobs.len()
            )));
        }
        for (tok, lp) in &parsed.logprobs {
            if lp.is_nan() || *lp > 1e-9 {
                return Err(LmError::MalformedResponse(format!(
                    "invalid log-probability {lp} for `{tok}`"
                )));
            }
            if WordTokenizer.encode(tok).as_slice() != std::slice::from_ref(tok) {
                return Err(LmError::ServerVocabMismatch(format!(
                    "server token `{tok}` is not a single local token"
                )));
            }
        }
        self.deterministic.store(parsed.deterministic, Ordering::SeqCst);
        Ok(Distribution::from_map(parsed.logprobs))
    }
}

impl TokenModel for RemoteModel {
    fn tokenizer(&self) -> &dyn Tokenizer {
        &WordTokenizer
    }

    fn next_logprobs(&self, context: &[&str]) -> Result<Distribution, LmError> {
        let key = self.key(context);
        {
            let cache = self.cache.lock().expect("cache lock");
            if let Some((ctx, dist)) = cache.get(&key) {
                if ctx.iter().map(String::as_str).eq(context.iter().copied()) {
                    return Ok(dist.clone());
                }
            }
        }
        let dist = self.remote_next_logprobs(context)?;
        self.cache.lock().expect("cache lock").insert(
            key,
            (context.iter().map(|s| s.to_string()).collect(), dist.clone()),
        );
        Ok(dist)
    }

    /// As last reported by the server.
    fn is_deterministic(&self) -> bool {
        self.deterministic.load(Ordering::SeqCst)
    }
}
