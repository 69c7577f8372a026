use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::{Duration, Instant};

use super::protocol::{Hello, ScoreRequest, ScoreResponse, PROTOCOL_VERSION};
use super::{check_probability, ChainScorer, Representation};
use crate::error::{Error, Result};

/// Matches responses to requests by id and validates every score.
fn collect_scores(batch: &[ScoreRequest], responses: Vec<ScoreResponse>) -> Result<Vec<f64>> {
    let mut by_id: HashMap<String, ScoreResponse> = HashMap::with_capacity(responses.len());
    for r in responses {
        by_id.insert(r.id.clone(), r);
    }
    batch
        .iter()
        .map(|req| {
            let resp = by_id.get(&req.id).ok_or_else(|| Error::Protocol {
                chain_id: req.id.clone(),
                message: "no response".into(),
            })?;
            if let Some(e) = &resp.error {
                return Err(Error::Protocol {
                    chain_id: req.id.clone(),
                    message: format!("scorer error: {e}"),
                });
            }
            let score = resp.score.ok_or_else(|| Error::Protocol {
                chain_id: req.id.clone(),
                message: "response without score".into(),
            })?;
            check_probability(&req.id, score)?;
            Ok(score)
        })
        .collect()
}

/// Runs a batch, retrying the whole batch once on failure.
fn with_retry<T>(mut attempt: impl FnMut(bool) -> Result<T>) -> Result<T> {
    match attempt(false) {
        Ok(v) => Ok(v),
        Err(first) => {
            log::warn!("scorer batch failed ({first}); retrying once");
            attempt(true)
        }
    }
}

struct Running {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<std::io::Result<String>>,
}

impl Running {
    fn recv(&self, deadline: Instant, timeout: Duration) -> Result<String> {
        let left = deadline.saturating_duration_since(Instant::now());
        match self.lines.recv_timeout(left) {
            Ok(Ok(line)) => Ok(line),
            Ok(Err(e)) => Err(Error::Transport(format!("reading scorer output: {e}"))),
            Err(RecvTimeoutError::Timeout) => Err(Error::Timeout(timeout.as_millis() as u64)),
            Err(RecvTimeoutError::Disconnected) => {
                Err(Error::Transport("scorer closed its output".into()))
            }
        }
    }
}

impl Drop for Running {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// Scorer process speaking the line protocol over stdin/stdout. The process
/// is started on first use and restarted after a failed batch.
pub struct SubprocessScorer {
    argv: Vec<String>,
    timeout: Duration,
    representation: Representation,
    running: Option<Running>,
}

impl SubprocessScorer {
    pub fn new(argv: Vec<String>, timeout: Duration, representation: Representation) -> Self {
        Self {
            argv,
            timeout,
            representation,
            running: None,
        }
    }

    fn start(&self) -> Result<Running> {
        let (program, args) = self
            .argv
            .split_first()
            .ok_or_else(|| Error::InvalidArgument("empty scorer command".into()))?;
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| Error::Transport(format!("spawning {program:?}: {e}")))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        let mut running = Running {
            child,
            stdin,
            lines: rx,
        };
        let hello = Hello {
            protocol: PROTOCOL_VERSION,
            representation: Some(self.representation),
        };
        write_line(&mut running.stdin, &hello)?;
        let reply = running.recv(Instant::now() + self.timeout, self.timeout)?;
        let reply: Hello = serde_json::from_str(&reply).map_err(|e| Error::Protocol {
            chain_id: String::new(),
            message: format!("bad hello reply {reply:?}: {e}"),
        })?;
        if reply.protocol != PROTOCOL_VERSION {
            return Err(Error::Protocol {
                chain_id: String::new(),
                message: format!("scorer speaks protocol {}", reply.protocol),
            });
        }
        Ok(running)
    }

    fn run_batch(&mut self, batch: &[ScoreRequest]) -> Result<Vec<f64>> {
        if self.running.is_none() {
            self.running = Some(self.start()?);
        }
        let running = self.running.as_mut().expect("started");
        for req in batch {
            write_line(&mut running.stdin, req)?;
        }
        let deadline = Instant::now() + self.timeout;
        let mut responses = Vec::with_capacity(batch.len());
        for _ in batch {
            let line = running.recv(deadline, self.timeout)?;
            let resp: ScoreResponse = serde_json::from_str(&line).map_err(|e| Error::Protocol {
                chain_id: batch[responses.len()].id.clone(),
                message: format!("malformed response {line:?}: {e}"),
            })?;
            responses.push(resp);
        }
        collect_scores(batch, responses)
    }
}

fn write_line<T: serde::Serialize>(stdin: &mut ChildStdin, value: &T) -> Result<()> {
    let mut line = serde_json::to_vec(value)
        .map_err(|e| Error::Transport(format!("encoding request: {e}")))?;
    line.push(b'\n');
    stdin
        .write_all(&line)
        .and_then(|_| stdin.flush())
        .map_err(|e| Error::Transport(format!("writing to scorer: {e}")))
}

impl ChainScorer for SubprocessScorer {
    fn name(&self) -> String {
        format!("{}/cmd:{}", self.representation, self.argv.join(" "))
    }

    fn score_batch(&mut self, batch: &[ScoreRequest]) -> Result<Vec<f64>> {
        with_retry(|retry| {
            if retry {
                // a failed batch leaves the stream in an unknown state
                self.running = None;
            }
            let result = self.run_batch(batch);
            if result.is_err() {
                self.running = None;
            }
            result
        })
    }
}

/// Scorer behind an HTTP endpoint: `POST <url>/hello` once, then
/// `POST <url>/score` per batch.
pub struct HttpScorer {
    base: String,
    timeout: Duration,
    representation: Representation,
    agent: ureq::Agent,
    greeted: bool,
}

impl HttpScorer {
    pub fn new(url: &str, timeout: Duration, representation: Representation) -> Self {
        let base = url
            .trim_end_matches('/')
            .trim_end_matches("/score")
            .to_string();
        Self {
            base,
            timeout,
            representation,
            agent: ureq::AgentBuilder::new().timeout(timeout).build(),
            greeted: false,
        }
    }

    fn post<T: serde::Serialize>(&self, path: &str, body: &T) -> Result<ureq::Response> {
        let url = format!("{}/{path}", self.base);
        self.agent.post(&url).send_json(body).map_err(|e| match e {
            ureq::Error::Transport(t) if t.kind() == ureq::ErrorKind::Io => {
                let text = t.to_string();
                if text.contains("timed out") || text.contains("Timeout") {
                    Error::Timeout(self.timeout.as_millis() as u64)
                } else {
                    Error::Transport(format!("{url}: {text}"))
                }
            }
            other => Error::Transport(format!("{url}: {other}")),
        })
    }

    fn hello(&mut self) -> Result<()> {
        let hello = Hello {
            protocol: PROTOCOL_VERSION,
            representation: Some(self.representation),
        };
        let reply: Hello = self
            .post("hello", &hello)?
            .into_json()
            .map_err(|e| Error::Protocol {
                chain_id: String::new(),
                message: format!("bad hello reply: {e}"),
            })?;
        if reply.protocol != PROTOCOL_VERSION {
            return Err(Error::Protocol {
                chain_id: String::new(),
                message: format!("scorer speaks protocol {}", reply.protocol),
            });
        }
        self.greeted = true;
        Ok(())
    }

    fn run_batch(&mut self, batch: &[ScoreRequest]) -> Result<Vec<f64>> {
        if !self.greeted {
            self.hello()?;
        }
        let responses: Vec<ScoreResponse> =
            self.post("score", &batch)?
                .into_json()
                .map_err(|e| Error::Protocol {
                    chain_id: batch.first().map(|r| r.id.clone()).unwrap_or_default(),
                    message: format!("malformed response: {e}"),
                })?;
        collect_scores(batch, responses)
    }
}

impl ChainScorer for HttpScorer {
    fn name(&self) -> String {
        format!("{}/{}", self.representation, self.base)
    }

    fn score_batch(&mut self, batch: &[ScoreRequest]) -> Result<Vec<f64>> {
        with_retry(|_| self.run_batch(batch))
    }
}
