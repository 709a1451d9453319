//! HTTP adapter for a remote policy model.
//!
//! Protocol: `POST <endpoint>/propose` with `{"prompt": .., "images": [..]}`
//! (images as base64 PNG), answered by `{"text": ..}`. Unparseable answers
//! are retried with the parse error appended to the prompt.

use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{build_prompt, PolicyBackend, PolicyError, ProposalRequest};
use crate::codec::parse_trajectory_text;
use crate::Trajectory;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RemoteConfig {
    pub endpoint: String,
    pub max_retries: u32,
    pub timeout_s: f64,
    pub max_concurrency: usize,
    /// Name of the environment variable holding a bearer token. The token
    /// itself is never stored in the config or logged.
    pub auth_token_env: Option<String>,
}

impl Default for RemoteConfig {
    fn default() -> Self {
        Self {
            endpoint: "http://127.0.0.1:8080".into(),
            max_retries: 2,
            timeout_s: 120.0,
            max_concurrency: 3,
            auth_token_env: None,
        }
    }
}

#[derive(Serialize)]
struct ProposeBody<'a> {
    prompt: &'a str,
    images: Vec<String>,
}

#[derive(Deserialize)]
struct ProposeReply {
    text: String,
}

pub struct RemotePolicy {
    config: RemoteConfig,
    client: reqwest::blocking::Client,
    in_flight: Mutex<usize>,
    slot_freed: Condvar,
}

impl std::fmt::Debug for RemotePolicy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RemotePolicy").field("config", &self.config).finish()
    }
}

struct Slot<'a>(&'a RemotePolicy);

impl Drop for Slot<'_> {
    fn drop(&mut self) {
        *self.0.in_flight.lock().expect("slot lock") -= 1;
        self.0.slot_freed.notify_one();
    }
}

impl RemotePolicy {
    pub fn new(config: RemoteConfig) -> Result<Self, PolicyError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs_f64(config.timeout_s))
            .build()
            .map_err(|e| PolicyError::Transport(e.to_string()))?;
        Ok(Self {
            config,
            client,
            in_flight: Mutex::new(0),
            slot_freed: Condvar::new(),
        })
    }

    pub fn config(&self) -> &RemoteConfig {
        &self.config
    }

    fn acquire(&self) -> Slot<'_> {
        let limit = self.config.max_concurrency.max(1);
        let mut n = self.in_flight.lock().expect("slot lock");
        while *n >= limit {
            n = self.slot_freed.wait(n).expect("slot lock");
        }
        *n += 1;
        Slot(self)
    }

    fn token(&self) -> Result<Option<String>, PolicyError> {
        match &self.config.auth_token_env {
            None => Ok(None),
            Some(var) => std::env::var(var)
                .map(Some)
                .map_err(|_| PolicyError::MissingCredential(var.clone())),
        }
    }

    fn call(&self, prompt: &str, images: &[String], token: Option<&str>) -> Result<String, PolicyError> {
        let _slot = self.acquire();
        let url = format!("{}/propose", self.config.endpoint.trim_end_matches('/'));
        let mut request = self.client.post(&url).json(&ProposeBody {
            prompt,
            images: images.to_vec(),
        });
        if let Some(t) = token {
            request = request.bearer_auth(t);
        }
        let transport = |e: reqwest::Error| {
            if e.is_timeout() {
                PolicyError::Timeout
            } else {
                PolicyError::Transport(e.without_url().to_string())
            }
        };
        let response = request.send().map_err(transport)?;
        let status = response.status();
        if !status.is_success() {
            return Err(PolicyError::Transport(format!("status {status}")));
        }
        Ok(response.json::<ProposeReply>().map_err(transport)?.text)
    }

    /// Proposes a trajectory and reports how many retries it took.
    pub fn propose_counted(&self, req: &ProposalRequest) -> Result<(Trajectory, u32), PolicyError> {
        let token = self.token()?;
        let (base, images) = build_prompt(req);
        let images = images
            .iter()
            .map(|i| i.to_base64_png())
            .collect::<Result<Vec<_>, _>>()?;
        let mut prompt = base.clone();
        let mut attempt = 0;
        loop {
            log::debug!(
                "remote proposal: endpoint={} attempt={} prompt_bytes={}",
                self.config.endpoint,
                attempt,
                prompt.len()
            );
            let text = self.call(&prompt, &images, token.as_deref())?;
            match parse_trajectory_text(&text) {
                Ok(traj) => return Ok((traj, attempt)),
                Err(e) if attempt < self.config.max_retries => {
                    log::warn!("unparseable proposal on attempt {attempt}: {e}");
                    attempt += 1;
                    prompt = format!(
                        "{base}\nYour previous answer could not be parsed ({e}). \
                         Answer again using only the waypoint format.\n"
                    );
                }
                Err(e) => {
                    return Err(PolicyError::ParseExhausted {
                        attempts: attempt + 1,
                        last_error: e,
                    })
                }
            }
        }
    }
}

impl PolicyBackend for RemotePolicy {
    fn propose(&self, req: &ProposalRequest) -> Result<Trajectory, PolicyError> {
        self.propose_counted(req).map(|(t, _)| t)
    }
}
