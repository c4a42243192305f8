//! Bundled transports: a fixture transport serving corpora from disk and a
//! plain HTTP proxy transport for a local forwarding endpoint.

use super::{FetchFailure, FetchTransport, RawResponse};
use crate::corpus::normalize_url;
use crate::synth::ScheduleToken;
use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::net::{TcpStream, ToSocketAddrs};
use std::path::PathBuf;
use std::sync::Mutex;
use std::time::Duration;

/// Serves `<root>/<host>/index.html`, following an optional per-host
/// schedule at `<root>/<host>.schedule`: whitespace-separated outcome
/// tokens consumed one per attempt, the last repeating forever.
pub struct FixtureTransport {
    root: PathBuf,
    served: Mutex<BTreeMap<String, usize>>,
}

impl FixtureTransport {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        FixtureTransport {
            root: root.into(),
            served: Mutex::new(BTreeMap::new()),
        }
    }

    fn attempt_number(&self, host: &str) -> usize {
        let mut served = self.served.lock().unwrap();
        let counter = served.entry(host.to_string()).or_insert(0);
        let current = *counter;
        *counter += 1;
        current
    }

    fn scheduled_token(&self, host: &str, attempt: usize) -> Result<ScheduleToken, FetchFailure> {
        let path = self.root.join(format!("{host}.schedule"));
        let text = match std::fs::read_to_string(&path) {
            Ok(text) => text,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(ScheduleToken::Success),
            Err(e) => return Err(FetchFailure::Fatal(format!("{}: {e}", path.display()))),
        };
        let tokens: Result<Vec<ScheduleToken>, _> =
            text.split_whitespace().map(str::parse).collect();
        let tokens =
            tokens.map_err(|e| FetchFailure::Fatal(format!("{}: {e}", path.display())))?;
        if tokens.is_empty() {
            return Err(FetchFailure::Fatal(format!(
                "{}: empty schedule",
                path.display()
            )));
        }
        Ok(tokens[attempt.min(tokens.len() - 1)])
    }
}

impl FetchTransport for FixtureTransport {
    fn fetch(&self, url: &str, _timeout: Duration) -> Result<RawResponse, FetchFailure> {
        let host = normalize_url(url)
            .map_err(|e| FetchFailure::Transport(e.to_string()))?
            .host()
            .to_string();
        let attempt = self.attempt_number(&host);
        match self.scheduled_token(&host, attempt)? {
            ScheduleToken::Timeout => Err(FetchFailure::Timeout),
            ScheduleToken::ServerError => Ok(RawResponse {
                status: 503,
                content_type: "text/html".to_string(),
                body: Vec::new(),
            }),
            ScheduleToken::Success => {
                let path = self.root.join(&host).join("index.html");
                match std::fs::read(&path) {
                    Ok(body) => Ok(RawResponse {
                        status: 200,
                        content_type: "text/html".to_string(),
                        body,
                    }),
                    Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(RawResponse {
                        status: 404,
                        content_type: "text/html".to_string(),
                        body: Vec::new(),
                    }),
                    Err(e) => Err(FetchFailure::Fatal(format!("{}: {e}", path.display()))),
                }
            }
        }
    }
}

/// Forwards plain HTTP/1.0 GETs through a local proxy endpoint
/// (`host:port`), e.g. a SOCKS-to-HTTP bridge listening on localhost.
pub struct ProxyTransport {
    endpoint: String,
}

impl ProxyTransport {
    pub fn new(endpoint: impl Into<String>) -> Self {
        ProxyTransport {
            endpoint: endpoint.into(),
        }
    }
}

impl FetchTransport for ProxyTransport {
    fn fetch(&self, url: &str, timeout: Duration) -> Result<RawResponse, FetchFailure> {
        let host = normalize_url(url)
            .map_err(|e| FetchFailure::Transport(e.to_string()))?
            .host()
            .to_string();
        let address = self
            .endpoint
            .to_socket_addrs()
            .map_err(|e| FetchFailure::Transport(format!("{}: {e}", self.endpoint)))?
            .next()
            .ok_or_else(|| {
                FetchFailure::Transport(format!("{}: no address", self.endpoint))
            })?;
        let mut stream = TcpStream::connect_timeout(&address, timeout)
            .map_err(|e| classify_io(&e))?;
        stream
            .set_read_timeout(Some(timeout))
            .map_err(|e| FetchFailure::Transport(e.to_string()))?;
        stream
            .set_write_timeout(Some(timeout))
            .map_err(|e| FetchFailure::Transport(e.to_string()))?;
        let request = format!(
            "GET http://{host}/ HTTP/1.0\r\nHost: {host}\r\nConnection: close\r\n\r\n"
        );
        stream
            .write_all(request.as_bytes())
            .map_err(|e| classify_io(&e))?;
        let mut raw = Vec::new();
        stream.read_to_end(&mut raw).map_err(|e| classify_io(&e))?;
        parse_http_response(&raw)
    }
}

fn classify_io(e: &std::io::Error) -> FetchFailure {
    use std::io::ErrorKind;
    match e.kind() {
        ErrorKind::WouldBlock | ErrorKind::TimedOut => FetchFailure::Timeout,
        _ => FetchFailure::Transport(e.to_string()),
    }
}

fn parse_http_response(raw: &[u8]) -> Result<RawResponse, FetchFailure> {
    let split = raw
        .windows(4)
        .position(|w| w == b"\r\n\r\n")
        .ok_or_else(|| FetchFailure::Transport("malformed response: no header end".into()))?;
    let head = String::from_utf8_lossy(&raw[..split]);
    let body = raw[split + 4..].to_vec();
    let mut lines = head.lines();
    let status_line = lines
        .next()
        .ok_or_else(|| FetchFailure::Transport("empty response".into()))?;
    // "HTTP/1.0 200 OK"
    let status: u16 = status_line
        .split_whitespace()
        .nth(1)
        .and_then(|code| code.parse().ok())
        .ok_or_else(|| {
            FetchFailure::Transport(format!("malformed status line: {status_line}"))
        })?;
    let mut content_type = String::from("application/octet-stream");
    for line in lines {
        if let Some((name, value)) = line.split_once(':') {
            if name.eq_ignore_ascii_case("content-type") {
                content_type = value.trim().to_string();
            }
        }
    }
    Ok(RawResponse {
        status,
        content_type,
        body,
    })
}
