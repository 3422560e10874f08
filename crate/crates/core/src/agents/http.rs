//! OpenAI-style `/chat/completions` client.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::backend::{BackendError, ChatBackend, ChatMessage};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HttpBackendConfig {
    /// Full URL of the chat-completions endpoint.
    pub endpoint: String,
    pub model: String,
    /// Name of the environment variable holding the API key.
    pub api_key_env: String,
    pub temperature: Option<f64>,
    pub timeout_secs: u64,
}

impl Default for HttpBackendConfig {
    fn default() -> Self {
        Self {
            endpoint: "https://api.deepseek.com/chat/completions".into(),
            model: "deepseek-reasoner".into(),
            api_key_env: "ASSERTFORGE_API_KEY".into(),
            temperature: None,
            timeout_secs: 300,
        }
    }
}

pub struct HttpBackend {
    client: reqwest::blocking::Client,
    endpoint: String,
    model: String,
    api_key: Option<String>,
    temperature: Option<f64>,
}

#[derive(Deserialize)]
struct Completion {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: AssistantMessage,
}

#[derive(Deserialize)]
struct AssistantMessage {
    #[serde(default)]
    content: Option<String>,
}

impl HttpBackend {
    /// Reads the key from the configured environment variable; a missing
    /// variable means unauthenticated requests.
    pub fn from_config(config: &HttpBackendConfig) -> Result<Self, BackendError> {
        let key = std::env::var(&config.api_key_env).ok().filter(|k| !k.is_empty());
        Self::new(config, key)
    }

    pub fn new(config: &HttpBackendConfig, api_key: Option<String>) -> Result<Self, BackendError> {
        if config.endpoint.is_empty() || config.model.is_empty() {
            return Err(BackendError::Config("endpoint and model are required".into()));
        }
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs.max(1)))
            .build()
            .map_err(|e| BackendError::Config(e.to_string()))?;
        Ok(Self {
            client,
            endpoint: config.endpoint.clone(),
            model: config.model.clone(),
            api_key,
            temperature: config.temperature,
        })
    }
}

impl ChatBackend for HttpBackend {
    fn complete(&self, messages: &[ChatMessage]) -> Result<String, BackendError> {
        let mut body = json!({ "model": self.model, "messages": messages, "stream": false });
        if let Some(t) = self.temperature {
            body["temperature"] = json!(t);
        }
        let mut req = self.client.post(&self.endpoint).json(&body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| BackendError::Transport(e.to_string()))?;
        let status = resp.status();
        let text = resp.text().map_err(|e| BackendError::Transport(e.to_string()))?;
        if !status.is_success() {
            return Err(BackendError::Status { status: status.as_u16(), body: text });
        }
        let parsed: Completion =
            serde_json::from_str(&text).map_err(|e| BackendError::Malformed(e.to_string()))?;
        let content = parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| BackendError::Malformed("no choices[0].message.content".into()))?;
        if content.trim().is_empty() {
            return Err(BackendError::EmptyResponse);
        }
        Ok(content)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;

    /// Serves one request with `status`/`body` and returns what it received.
    fn serve_once(status: &str, body: &str) -> (String, std::thread::JoinHandle<String>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}/v1/chat/completions", listener.local_addr().unwrap());
        let (status, body) = (status.to_string(), body.to_string());
        let handle = std::thread::spawn(move || {
            let (stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut head = String::new();
            let mut len = 0;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    len = v.trim().parse().unwrap();
                }
                head.push_str(&line);
                if line == "\r\n" {
                    break;
                }
            }
            let mut payload = vec![0; len];
            reader.read_exact(&mut payload).unwrap();
            let mut stream = stream;
            write!(
                stream,
                "HTTP/1.1 {status}\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
                body.len()
            )
            .unwrap();
            head + &String::from_utf8(payload).unwrap()
        });
        (url, handle)
    }

    fn config(url: String) -> HttpBackendConfig {
        HttpBackendConfig { endpoint: url, model: "m1".into(), timeout_secs: 10, ..Default::default() }
    }

    #[test]
    fn round_trip_with_bearer_key() {
        let (url, h) = serve_once("200 OK", r#"{"choices":[{"message":{"role":"assistant","content":"hi [SCORE: 5]"}}]}"#);
        let b = HttpBackend::new(&config(url), Some("k-123".into())).unwrap();
        let out = b.complete(&[ChatMessage::system("s"), ChatMessage::user("u")]).unwrap();
        assert_eq!(out, "hi [SCORE: 5]");
        let req = h.join().unwrap();
        assert!(req.to_ascii_lowercase().contains("authorization: bearer k-123"));
        let body: serde_json::Value = serde_json::from_str(req.split("\r\n\r\n").nth(1).unwrap()).unwrap();
        assert_eq!(body["model"], "m1");
        assert_eq!(body["messages"][0], json!({"role": "system", "content": "s"}));
        assert_eq!(body["messages"][1]["role"], "user");
    }

    #[test]
    fn http_error_status() {
        let (url, h) = serve_once("429 Too Many Requests", r#"{"error":"slow down"}"#);
        let err = HttpBackend::new(&config(url), None).unwrap().complete(&[ChatMessage::user("u")]).unwrap_err();
        h.join().unwrap();
        assert!(matches!(err, BackendError::Status { status: 429, .. }), "{err:?}");
    }

    #[test]
    fn empty_content_is_an_error() {
        let (url, h) = serve_once("200 OK", r#"{"choices":[{"message":{"content":""}}]}"#);
        let err = HttpBackend::new(&config(url), None).unwrap().complete(&[ChatMessage::user("u")]).unwrap_err();
        h.join().unwrap();
        assert_eq!(err, BackendError::EmptyResponse);
    }

    #[test]
    fn malformed_body() {
        let (url, h) = serve_once("200 OK", r#"{"choices":[]}"#);
        let err = HttpBackend::new(&config(url), None).unwrap().complete(&[ChatMessage::user("u")]).unwrap_err();
        h.join().unwrap();
        assert!(matches!(err, BackendError::Malformed(_)));
    }

    #[test]
    fn unreachable_is_transport_error() {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}/x", listener.local_addr().unwrap());
        drop(listener);
        let err = HttpBackend::new(&config(url), None).unwrap().complete(&[ChatMessage::user("u")]).unwrap_err();
        assert!(matches!(err, BackendError::Transport(_)));
    }
}
