//! Annotation backends: a chat-completion HTTP endpoint, or a stub corpus of
//! canned responses keyed by the SHA-256 of the rendered prompt.

use std::fs;
use std::path::PathBuf;
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use super::prompt::PromptInstance;
use crate::label::Label;

pub const ENV_MODE: &str = "ANNOTATOR_MODE";
pub const ENV_ENDPOINT: &str = "ANNOTATOR_ENDPOINT";
pub const ENV_MODEL: &str = "ANNOTATOR_MODEL";
pub const ENV_API_KEY: &str = "ANNOTATOR_API_KEY";

pub const DEFAULT_MODEL: &str = "llama-2-7b-chat";
pub const STUB_MODEL_ID: &str = "stub";

#[derive(Debug, Error)]
pub enum AnnotateError {
    #[error("annotation endpoint unreachable after {attempts} attempt(s): {last_error}")]
    EndpointUnreachable { attempts: u32, last_error: String },
    #[error("malformed annotation response: {0}")]
    MalformedResponse(String),
    #[error("no stub response for prompt digest {digest} in {}", dir.display())]
    StubMiss { digest: String, dir: PathBuf },
    #[error("annotator configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    LiveEndpoint,
    Stub,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Annotation {
    pub text: String,
    pub label_hypothesis: Label,
    pub provenance: Provenance,
    pub model_id: String,
}

pub trait Annotator: Send + Sync {
    fn annotate(&self, prompt: &PromptInstance) -> Result<Annotation, AnnotateError>;
}

/// Serves `<digest>.txt` from a directory.
#[derive(Debug, Clone)]
pub struct StubAnnotator {
    corpus_dir: PathBuf,
}

impl StubAnnotator {
    pub fn new(corpus_dir: impl Into<PathBuf>) -> Self {
        Self {
            corpus_dir: corpus_dir.into(),
        }
    }

    pub fn path_for(&self, prompt: &PromptInstance) -> PathBuf {
        self.corpus_dir.join(format!("{}.txt", prompt.digest()))
    }
}

impl Annotator for StubAnnotator {
    fn annotate(&self, prompt: &PromptInstance) -> Result<Annotation, AnnotateError> {
        let path = self.path_for(prompt);
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(AnnotateError::StubMiss {
                    digest: prompt.digest(),
                    dir: self.corpus_dir.clone(),
                })
            }
            Err(e) => return Err(e.into()),
        };
        let text = text.trim_end().to_string();
        if text.trim().is_empty() {
            return Err(AnnotateError::MalformedResponse(format!("{} is empty", path.display())));
        }
        Ok(Annotation {
            text,
            label_hypothesis: prompt.label_hypothesis,
            provenance: Provenance::Stub,
            model_id: STUB_MODEL_ID.to_string(),
        })
    }
}

/// Sampling knobs passed through to the endpoint; `None` leaves the server default.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GenerationParams {
    pub temperature: Option<f64>,
    pub top_p: Option<f64>,
    pub max_tokens: Option<u32>,
}

/// OpenAI-style `POST {endpoint}` chat completion client.
#[derive(Debug, Clone)]
pub struct LiveAnnotator {
    pub endpoint: String,
    pub model: String,
    pub api_key: Option<String>,
    pub params: GenerationParams,
    pub timeout: Duration,
    pub max_attempts: u32,
    pub backoff_base: Duration,
}

impl LiveAnnotator {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            model: model.into(),
            api_key: None,
            params: GenerationParams::default(),
            timeout: Duration::from_secs(60),
            max_attempts: 3,
            backoff_base: Duration::from_millis(500),
        }
    }

    fn request_body(&self, prompt: &PromptInstance) -> Value {
        let mut body = json!({
            "model": self.model,
            "messages": [{"role": "user", "content": prompt.render()}],
        });
        if let Some(t) = self.params.temperature {
            body["temperature"] = json!(t);
        }
        if let Some(p) = self.params.top_p {
            body["top_p"] = json!(p);
        }
        if let Some(m) = self.params.max_tokens {
            body["max_tokens"] = json!(m);
        }
        body
    }

    fn attempt(&self, agent: &ureq::Agent, body: &Value) -> Result<String, Attempt> {
        let mut req = agent.post(&self.endpoint).header("Content-Type", "application/json");
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = req.send_json(body).map_err(|e| Attempt::Transient(e.to_string()))?;
        let status = resp.status().as_u16();
        if status == 429 || status >= 500 {
            return Err(Attempt::Transient(format!("HTTP {status}")));
        }
        if status >= 400 {
            return Err(Attempt::Fatal(AnnotateError::EndpointUnreachable {
                attempts: 1,
                last_error: format!("HTTP {status}"),
            }));
        }
        let json: Value = resp
            .body_mut()
            .read_json()
            .map_err(|e| Attempt::Fatal(AnnotateError::MalformedResponse(e.to_string())))?;
        extract_completion(&json).map_err(Attempt::Fatal)
    }
}

enum Attempt {
    Transient(String),
    Fatal(AnnotateError),
}

/// `choices[0].message.content`, or `choices[0].text` for plain completion servers.
fn extract_completion(json: &Value) -> Result<String, AnnotateError> {
    let choice = &json["choices"][0];
    let text = choice["message"]["content"]
        .as_str()
        .or_else(|| choice["text"].as_str())
        .ok_or_else(|| AnnotateError::MalformedResponse(format!("no completion text in {json}")))?;
    let text = text.trim();
    if text.is_empty() {
        return Err(AnnotateError::MalformedResponse("empty completion".into()));
    }
    Ok(text.to_string())
}

impl Annotator for LiveAnnotator {
    fn annotate(&self, prompt: &PromptInstance) -> Result<Annotation, AnnotateError> {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(self.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        let body = self.request_body(prompt);
        let attempts = self.max_attempts.max(1);
        let mut last_error = String::new();
        for attempt in 0..attempts {
            if attempt > 0 {
                thread::sleep(self.backoff_base * 2u32.pow(attempt - 1));
            }
            match self.attempt(&agent, &body) {
                Ok(text) => {
                    return Ok(Annotation {
                        text,
                        label_hypothesis: prompt.label_hypothesis,
                        provenance: Provenance::LiveEndpoint,
                        model_id: self.model.clone(),
                    })
                }
                Err(Attempt::Fatal(e)) => return Err(e),
                Err(Attempt::Transient(e)) => {
                    log::warn!("annotation attempt {} of {attempts} failed: {e}", attempt + 1);
                    last_error = e;
                }
            }
        }
        Err(AnnotateError::EndpointUnreachable { attempts, last_error })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnnotatorMode {
    Live,
    Stub,
}

impl std::str::FromStr for AnnotatorMode {
    type Err = AnnotateError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "live" => Ok(Self::Live),
            "stub" => Ok(Self::Stub),
            other => Err(AnnotateError::Config(format!(
                "{ENV_MODE} must be live or stub, got {other:?}"
            ))),
        }
    }
}

/// Everything needed to construct an annotator; `mode: None` disables annotation.
#[derive(Debug, Clone, Default)]
pub struct AnnotatorConfig {
    pub mode: Option<AnnotatorMode>,
    pub endpoint: Option<String>,
    pub model: Option<String>,
    pub api_key: Option<String>,
    pub stub_dir: Option<PathBuf>,
    pub params: GenerationParams,
}

impl AnnotatorConfig {
    /// Reads `ANNOTATOR_*` through `lookup` (normally `std::env::var`).
    pub fn from_lookup(lookup: impl Fn(&str) -> Option<String>) -> Result<Self, AnnotateError> {
        let non_empty = |k: &str| lookup(k).filter(|v| !v.trim().is_empty());
        Ok(Self {
            mode: non_empty(ENV_MODE).map(|m| m.parse()).transpose()?,
            endpoint: non_empty(ENV_ENDPOINT),
            model: non_empty(ENV_MODEL),
            api_key: non_empty(ENV_API_KEY),
            ..Default::default()
        })
    }

    pub fn from_env() -> Result<Self, AnnotateError> {
        Self::from_lookup(|k| std::env::var(k).ok())
    }

    /// Validates the configuration before any work starts.
    pub fn build(&self) -> Result<Option<Box<dyn Annotator>>, AnnotateError> {
        match self.mode {
            None => Ok(None),
            Some(AnnotatorMode::Stub) => {
                let dir = self
                    .stub_dir
                    .clone()
                    .ok_or_else(|| AnnotateError::Config("stub mode needs a stub corpus directory".into()))?;
                if !dir.is_dir() {
                    return Err(AnnotateError::Config(format!(
                        "stub corpus {} is not a directory",
                        dir.display()
                    )));
                }
                Ok(Some(Box::new(StubAnnotator::new(dir))))
            }
            Some(AnnotatorMode::Live) => {
                let endpoint = self
                    .endpoint
                    .clone()
                    .ok_or_else(|| AnnotateError::Config(format!("live mode needs {ENV_ENDPOINT}")))?;
                let mut live = LiveAnnotator::new(endpoint, self.model.clone().unwrap_or_else(|| DEFAULT_MODEL.into()));
                live.api_key = self.api_key.clone();
                live.params = self.params.clone();
                Ok(Some(Box::new(live)))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::{build_prompt, TextEvidence};
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Arc;

    fn prompt() -> PromptInstance {
        let ev = TextEvidence {
            permissions: vec!["android.permission.SEND_SMS".into()],
            dangerous_permission_hits: vec!["android.permission.SEND_SMS".into()],
            ..Default::default()
        };
        build_prompt(&ev, Label::Malware, 3500)
    }

    /// Serves `responses` in order (repeating the last), one per connection.
    fn serve(responses: Vec<(u16, String)>) -> (String, Arc<AtomicUsize>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}/v1/chat/completions", listener.local_addr().unwrap());
        let hits = Arc::new(AtomicUsize::new(0));
        let counter = hits.clone();
        thread::spawn(move || {
            for stream in listener.incoming() {
                let Ok(mut stream) = stream else { break };
                let i = counter.fetch_add(1, Ordering::SeqCst);
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut len = 0usize;
                loop {
                    let mut line = String::new();
                    if reader.read_line(&mut line).unwrap_or(0) == 0 || line == "\r\n" {
                        break;
                    }
                    if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                        len = v.trim().parse().unwrap_or(0);
                    }
                }
                let mut body = vec![0; len];
                let _ = reader.read_exact(&mut body);
                let (status, payload) = responses[i.min(responses.len() - 1)].clone();
                let _ = write!(
                    stream,
                    "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{payload}",
                    payload.len()
                );
            }
        });
        (url, hits)
    }

    fn fast(url: &str) -> LiveAnnotator {
        let mut a = LiveAnnotator::new(url, "test-model");
        a.backoff_base = Duration::from_millis(1);
        a.timeout = Duration::from_secs(5);
        a
    }

    #[test]
    fn stub_returns_canned_paragraph() {
        let dir = tempfile::tempdir().unwrap();
        let p = prompt();
        fs::write(dir.path().join(format!("{}.txt", p.digest())), "It sends SMS.\n").unwrap();
        let a = StubAnnotator::new(dir.path()).annotate(&p).unwrap();
        assert_eq!(a.text, "It sends SMS.");
        assert_eq!(a.provenance, Provenance::Stub);
        assert_eq!(a.label_hypothesis, Label::Malware);
        // deterministic
        assert_eq!(a, StubAnnotator::new(dir.path()).annotate(&p).unwrap());
    }

    #[test]
    fn stub_miss() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            StubAnnotator::new(dir.path()).annotate(&prompt()),
            Err(AnnotateError::StubMiss { .. })
        ));
    }

    #[test]
    fn live_success() {
        let (url, hits) = serve(vec![(
            200,
            r#"{"choices":[{"message":{"role":"assistant","content":"  A summary.  "}}]}"#.into(),
        )]);
        let a = fast(&url).annotate(&prompt()).unwrap();
        assert_eq!(a.text, "A summary.");
        assert_eq!(a.provenance, Provenance::LiveEndpoint);
        assert_eq!(a.model_id, "test-model");
        assert_eq!(hits.load(Ordering::SeqCst), 1);
    }

    #[test]
    fn server_errors_exhaust_retries() {
        let (url, hits) = serve(vec![(500, "{}".into())]);
        let err = fast(&url).annotate(&prompt()).unwrap_err();
        assert!(
            matches!(err, AnnotateError::EndpointUnreachable { attempts: 3, .. }),
            "{err}"
        );
        assert_eq!(hits.load(Ordering::SeqCst), 3);
    }

    #[test]
    fn transient_failure_then_success() {
        let (url, hits) = serve(vec![(503, "{}".into()), (200, r#"{"choices":[{"text":"ok"}]}"#.into())]);
        assert_eq!(fast(&url).annotate(&prompt()).unwrap().text, "ok");
        assert_eq!(hits.load(Ordering::SeqCst), 2);
    }

    #[test]
    fn malformed_body() {
        let (url, _) = serve(vec![(200, r#"{"unexpected":true}"#.into())]);
        assert!(matches!(
            fast(&url).annotate(&prompt()),
            Err(AnnotateError::MalformedResponse(_))
        ));
    }

    #[test]
    fn refused_connection_is_unreachable() {
        let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
        let err = fast(&format!("http://127.0.0.1:{port}/"))
            .annotate(&prompt())
            .unwrap_err();
        assert!(matches!(err, AnnotateError::EndpointUnreachable { attempts: 3, .. }));
    }

    #[test]
    fn config_from_lookup() {
        let env = |k: &str| match k {
            ENV_MODE => Some("live".to_string()),
            _ => None,
        };
        let cfg = AnnotatorConfig::from_lookup(env).unwrap();
        assert!(matches!(cfg.build(), Err(AnnotateError::Config(_))));
        let none = AnnotatorConfig::from_lookup(|_| None).unwrap();
        assert!(none.build().unwrap().is_none());
        assert!(AnnotatorConfig::from_lookup(|k| (k == ENV_MODE).then(|| "dream".into())).is_err());
    }
}
