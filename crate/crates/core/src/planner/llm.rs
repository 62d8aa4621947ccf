use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use super::{fallback_stop, Decision, Exchange, PlannerError, PlannerPolicy};
use crate::prompting::{parse_and_validate, PromptContext, SYSTEM_PROMPT};

/// Chat-completions endpoint settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LlmClientConfig {
    /// e.g. `https://api.openai.com/v1`; `/chat/completions` is appended.
    pub base_url: String,
    pub model: String,
    /// Name of the environment variable holding the API key.
    pub api_key_env: String,
    pub timeout_secs: u64,
    pub max_retries: u32,
    pub temperature: f64,
    /// First backoff delay; doubles on each retry.
    pub backoff_ms: u64,
    /// Minimum spacing between requests across all users of one client.
    pub min_interval_ms: u64,
    /// JSONL response cache keyed by prompt hash.
    pub cache_path: Option<PathBuf>,
}

impl Default for LlmClientConfig {
    fn default() -> Self {
        Self {
            base_url: "https://api.openai.com/v1".into(),
            model: "gpt-5-mini".into(),
            api_key_env: "OPENAI_API_KEY".into(),
            timeout_secs: 60,
            max_retries: 4,
            temperature: 0.0,
            backoff_ms: 500,
            min_interval_ms: 0,
            cache_path: None,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct CacheLine {
    key: String,
    reply: String,
}

/// Blocking client; share it between episodes behind an `Arc`.
pub struct LlmClient {
    cfg: LlmClientConfig,
    agent: ureq::Agent,
    api_key: Option<String>,
    cache: Mutex<HashMap<String, String>>,
    cache_file: Option<Mutex<File>>,
    last_request: Mutex<Option<Instant>>,
}

impl std::fmt::Debug for LlmClient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LlmClient")
            .field("base_url", &self.cfg.base_url)
            .field("model", &self.cfg.model)
            .field("api_key", &self.api_key.as_ref().map(|_| "<redacted>"))
            .finish()
    }
}

fn load_cache(path: &Path) -> Result<HashMap<String, String>, PlannerError> {
    let mut map = HashMap::new();
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(map),
        Err(e) => return Err(PlannerError::Cache(e.to_string())),
    };
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| PlannerError::Cache(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        // A torn final line from an interrupted run is skipped.
        if let Ok(entry) = serde_json::from_str::<CacheLine>(&line) {
            map.insert(entry.key, entry.reply);
        }
    }
    Ok(map)
}

impl LlmClient {
    /// Reads the API key from the configured environment variable. A missing
    /// key is only an error once a request actually has to be sent.
    pub fn new(cfg: LlmClientConfig) -> Result<Self, PlannerError> {
        let api_key = std::env::var(&cfg.api_key_env).ok().filter(|k| !k.is_empty());
        Self::with_api_key(cfg, api_key)
    }

    pub fn with_api_key(cfg: LlmClientConfig, api_key: Option<String>) -> Result<Self, PlannerError> {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(cfg.timeout_secs.max(1))))
            .http_status_as_error(false)
            .build()
            .into();
        let (cache, cache_file) = match &cfg.cache_path {
            Some(p) => {
                let map = load_cache(p)?;
                if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                    std::fs::create_dir_all(dir).map_err(|e| PlannerError::Cache(e.to_string()))?;
                }
                let f = OpenOptions::new()
                    .create(true)
                    .append(true)
                    .open(p)
                    .map_err(|e| PlannerError::Cache(e.to_string()))?;
                (map, Some(Mutex::new(f)))
            }
            None => (HashMap::new(), None),
        };
        Ok(Self {
            cfg,
            agent,
            api_key,
            cache: Mutex::new(cache),
            cache_file,
            last_request: Mutex::new(None),
        })
    }

    pub fn config(&self) -> &LlmClientConfig {
        &self.cfg
    }

    /// Cache key: SHA-256 over model, temperature, system and user text.
    pub fn cache_key(&self, system: &str, prompt: &str) -> String {
        let mut h = Sha256::new();
        for part in [self.cfg.model.as_str(), &self.cfg.temperature.to_string(), system, prompt] {
            h.update((part.len() as u64).to_le_bytes());
            h.update(part.as_bytes());
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    fn throttle(&self) {
        if self.cfg.min_interval_ms == 0 {
            return;
        }
        let gap = Duration::from_millis(self.cfg.min_interval_ms);
        let mut last = self.last_request.lock().expect("rate limiter lock");
        if let Some(t) = *last {
            let since = t.elapsed();
            if since < gap {
                std::thread::sleep(gap - since);
            }
        }
        *last = Some(Instant::now());
    }

    fn send_once(&self, body: &Value, key: &str) -> Result<String, (bool, PlannerError)> {
        self.throttle();
        let url = format!("{}/chat/completions", self.cfg.base_url.trim_end_matches('/'));
        let result = self
            .agent
            .post(&url)
            .header("Authorization", &format!("Bearer {key}"))
            .send_json(body);
        let mut resp = match result {
            Ok(r) => r,
            Err(e) => return Err((true, PlannerError::Transport(e.to_string()))),
        };
        let status = resp.status().as_u16();
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| (true, PlannerError::Transport(e.to_string())))?;
        if status == 429 || status >= 500 {
            return Err((true, PlannerError::Http { status, body: text }));
        }
        if status >= 400 {
            return Err((false, PlannerError::Http { status, body: text }));
        }
        let v: Value = serde_json::from_str(&text).map_err(|e| (false, PlannerError::Completion(e.to_string())))?;
        v["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| (false, PlannerError::Completion("no choices[0].message.content".into())))
    }

    /// One chat turn. Returns the reply and whether it came from the cache.
    /// 429, 5xx and transport errors are retried with exponential backoff.
    pub fn complete(&self, system: &str, prompt: &str) -> Result<(String, bool), PlannerError> {
        let ckey = self.cache_key(system, prompt);
        if let Some(hit) = self.cache.lock().expect("cache lock").get(&ckey) {
            return Ok((hit.clone(), true));
        }
        let key = self
            .api_key
            .as_deref()
            .ok_or_else(|| PlannerError::MissingApiKey(self.cfg.api_key_env.clone()))?;
        let body = json!({
            "model": self.cfg.model,
            "messages": [
                {"role": "system", "content": system},
                {"role": "user", "content": prompt},
            ],
            "temperature": self.cfg.temperature,
        });
        let mut attempt = 0;
        let reply = loop {
            match self.send_once(&body, key) {
                Ok(r) => break r,
                Err((retry, e)) => {
                    if !retry || attempt >= self.cfg.max_retries {
                        return Err(e);
                    }
                    let delay = self.cfg.backoff_ms.saturating_mul(1u64 << attempt.min(16));
                    log::warn!("chat request failed ({e}); retrying in {delay} ms");
                    std::thread::sleep(Duration::from_millis(delay));
                    attempt += 1;
                }
            }
        };
        self.cache
            .lock()
            .expect("cache lock")
            .insert(ckey.clone(), reply.clone());
        if let Some(f) = &self.cache_file {
            let line = serde_json::to_string(&CacheLine {
                key: ckey,
                reply: reply.clone(),
            })
            .expect("cache line serializes");
            let mut f = f.lock().expect("cache file lock");
            writeln!(f, "{line}").map_err(|e| PlannerError::Cache(e.to_string()))?;
        }
        Ok((reply, false))
    }
}

pub const FORMAT_REMINDER: &str = "Your previous reply could not be used. Answer again with exactly two lines:\n\
Thought: <your reasoning>\n\
Action: <a place number from the graph, or stop>";

/// Planner backed by a chat model. A reply that cannot be parsed (or names
/// an unknown place) is retried once with a format reminder; a second
/// failure stops the episode and flags it.
#[derive(Debug, Clone)]
pub struct LlmPlanner {
    client: Arc<LlmClient>,
}

impl LlmPlanner {
    pub fn new(client: Arc<LlmClient>) -> Self {
        Self { client }
    }
}

impl PlannerPolicy for LlmPlanner {
    fn name(&self) -> &str {
        "llm"
    }

    fn decide(&mut self, ctx: &PromptContext, prompt: &str) -> Result<Decision, PlannerError> {
        let mut exchanges = Vec::new();
        let (reply, cached) = self.client.complete(SYSTEM_PROMPT, prompt)?;
        exchanges.push(Exchange {
            prompt: prompt.to_string(),
            reply: reply.clone(),
            cached,
        });
        let err = match parse_and_validate(&reply, &ctx.graph) {
            Ok(response) => {
                return Ok(Decision {
                    response,
                    flagged: false,
                    exchanges,
                })
            }
            Err(e) => e,
        };
        let retry_prompt = format!("{prompt}\n{FORMAT_REMINDER}\n(Problem: {err}.)");
        let (reply, cached) = self.client.complete(SYSTEM_PROMPT, &retry_prompt)?;
        exchanges.push(Exchange {
            prompt: retry_prompt,
            reply: reply.clone(),
            cached,
        });
        match parse_and_validate(&reply, &ctx.graph) {
            Ok(response) => Ok(Decision {
                response,
                flagged: false,
                exchanges,
            }),
            Err(e) => Ok(fallback_stop(&e.to_string(), exchanges)),
        }
    }
}
