//! HTTP/JSON clients for model servers.

use std::io;
use std::net::{TcpStream, ToSocketAddrs};
use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::Serialize;
use tracing::warn;

use super::{
    BackendError, CaptionReply, CaptionRequest, Captioner, DiscriminateWireRequest, Reasoner,
    ReasonerResponse, RemoteSpec, SummarizeReply, SummarizeRequest, Summarizer,
};
use crate::agents::DiscriminationRequest;
use crate::model::FrameRef;

/// Blocking JSON-over-HTTP POST client with timeout and retries.
#[derive(Clone)]
pub struct JsonClient {
    agent: ureq::Agent,
    base: String,
    retries: u32,
}

impl JsonClient {
    pub fn new(spec: &RemoteSpec) -> Self {
        let agent = ureq::AgentBuilder::new()
            .timeout(spec.timeout.to_std())
            .build();
        JsonClient {
            agent,
            base: spec.endpoint.trim_end_matches('/').to_string(),
            retries: spec.retries,
        }
    }

    pub fn post<Req, Resp>(&self, path: &str, body: &Req) -> Result<Resp, BackendError>
    where
        Req: Serialize,
        Resp: DeserializeOwned,
    {
        let url = format!("{}{}", self.base, path);
        let mut attempt = 0;
        loop {
            match self.post_once(&url, body) {
                Ok(resp) => return Ok(resp),
                Err(e @ BackendError::Protocol(_)) if !is_status_error(&e) => return Err(e),
                Err(e) if attempt < self.retries => {
                    warn!(%url, attempt, error = %e, "retrying backend call");
                    attempt += 1;
                }
                Err(e) => return Err(e),
            }
        }
    }

    fn post_once<Req, Resp>(&self, url: &str, body: &Req) -> Result<Resp, BackendError>
    where
        Req: Serialize,
        Resp: DeserializeOwned,
    {
        let response = self
            .agent
            .post(url)
            .set("Content-Type", "application/json")
            .send_json(body)
            .map_err(map_ureq_error)?;
        let text = response
            .into_string()
            .map_err(|e| classify_io(&e).unwrap_or_else(|| BackendError::Protocol(e.to_string())))?;
        serde_json::from_str(&text)
            .map_err(|e| BackendError::Protocol(format!("invalid JSON from {url}: {e}")))
    }
}

const STATUS_PREFIX: &str = "HTTP status ";

fn is_status_error(e: &BackendError) -> bool {
    matches!(e, BackendError::Protocol(m) if m.starts_with(STATUS_PREFIX))
}

fn classify_io(e: &io::Error) -> Option<BackendError> {
    matches!(e.kind(), io::ErrorKind::TimedOut | io::ErrorKind::WouldBlock)
        .then_some(BackendError::Timeout)
}

fn map_ureq_error(e: ureq::Error) -> BackendError {
    match e {
        ureq::Error::Status(code, _) => BackendError::Protocol(format!("{STATUS_PREFIX}{code}")),
        ureq::Error::Transport(t) => {
            let timed_out = std::error::Error::source(&t)
                .and_then(|s| s.downcast_ref::<io::Error>())
                .and_then(classify_io)
                .is_some();
            if timed_out {
                BackendError::Timeout
            } else {
                BackendError::Unavailable(t.to_string())
            }
        }
    }
}

/// Checks that the endpoint's host accepts TCP connections.
pub fn probe_endpoint(endpoint: &str, timeout: Duration) -> Result<(), BackendError> {
    let rest = endpoint
        .strip_prefix("http://")
        .or_else(|| endpoint.strip_prefix("https://"))
        .unwrap_or(endpoint);
    let authority = rest.split('/').next().unwrap_or_default();
    let with_port = if authority.contains(':') {
        authority.to_string()
    } else if endpoint.starts_with("https://") {
        format!("{authority}:443")
    } else {
        format!("{authority}:80")
    };
    let addrs = with_port
        .to_socket_addrs()
        .map_err(|e| BackendError::Unavailable(format!("{endpoint}: {e}")))?;
    let mut last = None;
    for addr in addrs {
        match TcpStream::connect_timeout(&addr, timeout) {
            Ok(_) => return Ok(()),
            Err(e) => last = Some(e),
        }
    }
    Err(BackendError::Unavailable(format!(
        "{endpoint}: {}",
        last.map(|e| e.to_string())
            .unwrap_or_else(|| "no address".into())
    )))
}

fn non_empty(text: String, what: &str) -> Result<String, BackendError> {
    if text.trim().is_empty() {
        Err(BackendError::Protocol(format!("empty {what}")))
    } else {
        Ok(text)
    }
}

pub struct RemoteCaptioner {
    client: JsonClient,
}

impl RemoteCaptioner {
    pub fn new(spec: &RemoteSpec) -> Self {
        RemoteCaptioner {
            client: JsonClient::new(spec),
        }
    }
}

impl Captioner for RemoteCaptioner {
    fn caption(&mut self, frame: &FrameRef) -> Result<String, BackendError> {
        let reply: CaptionReply = self.client.post(
            "/caption",
            &CaptionRequest {
                frame_id: frame.frame_id,
                payload: frame.payload.clone(),
            },
        )?;
        non_empty(reply.text, "caption")
    }
}

pub struct RemoteSummarizer {
    client: JsonClient,
}

impl RemoteSummarizer {
    pub fn new(spec: &RemoteSpec) -> Self {
        RemoteSummarizer {
            client: JsonClient::new(spec),
        }
    }
}

impl Summarizer for RemoteSummarizer {
    fn summarize(&mut self, request: &SummarizeRequest) -> Result<String, BackendError> {
        let reply: SummarizeReply = self.client.post("/summarize", request)?;
        non_empty(reply.summary, "summary")
    }
}

pub struct RemoteReasoner {
    client: JsonClient,
}

impl RemoteReasoner {
    pub fn new(spec: &RemoteSpec) -> Self {
        RemoteReasoner {
            client: JsonClient::new(spec),
        }
    }
}

impl Reasoner for RemoteReasoner {
    fn discriminate(
        &mut self,
        request: &DiscriminationRequest,
    ) -> Result<ReasonerResponse, BackendError> {
        let wire = DiscriminateWireRequest::from(request);
        self.client.post("/discriminate", &wire)
    }
}
