//! Wire protocol spoken by external scorers, version 1.
//!
//! Over stdio the client first writes a hello line and the server answers
//! with its protocol number:
//!
//! ```text
//! > {"protocol": 1, "representation": "surface"}
//! < {"protocol": 1}
//! > {"id": "q1#0", "f1": "...", "f2": "...", "h": "..."}
//! < {"id": "q1#0", "score": 0.87}
//! ```
//!
//! Over HTTP the hello body goes to `POST /hello` and batches (JSON arrays of
//! requests) to `POST /score`, which answers with an array of responses. A
//! server that cannot score a request answers `{"id": ..., "error": "..."}`.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::Representation;

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hello {
    pub protocol: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub representation: Option<Representation>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreRequest {
    pub id: String,
    pub f1: String,
    pub f2: String,
    pub h: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreResponse {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Answers one request line. Malformed input produces an error response
/// rather than ending the stream.
pub fn handle_line<F>(line: &str, score: &mut F) -> ScoreResponse
where
    F: FnMut(&ScoreRequest) -> Result<f64, String>,
{
    match serde_json::from_str::<ScoreRequest>(line) {
        Ok(req) => match score(&req) {
            Ok(s) => ScoreResponse {
                id: req.id,
                score: Some(s),
                error: None,
            },
            Err(e) => ScoreResponse {
                id: req.id,
                score: None,
                error: Some(e),
            },
        },
        Err(e) => {
            let id = serde_json::from_str::<serde_json::Value>(line)
                .ok()
                .and_then(|v| v.get("id").and_then(|i| i.as_str()).map(String::from))
                .unwrap_or_default();
            ScoreResponse {
                id,
                score: None,
                error: Some(format!("malformed request: {e}")),
            }
        }
    }
}

/// Runs the stdio side of the protocol until the input closes. Used by
/// test doubles and simple scorers written in Rust.
pub fn serve<R, W, F>(input: R, mut output: W, mut score: F) -> std::io::Result<()>
where
    R: BufRead,
    W: Write,
    F: FnMut(&ScoreRequest) -> Result<f64, String>,
{
    for line in input.lines() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Ok(hello) = serde_json::from_str::<Hello>(trimmed) {
            let reply = Hello {
                protocol: PROTOCOL_VERSION,
                representation: hello.representation,
            };
            serde_json::to_writer(&mut output, &reply)?;
        } else {
            serde_json::to_writer(&mut output, &handle_line(trimmed, &mut score))?;
        }
        output.write_all(b"\n")?;
        output.flush()?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    #[test]
    fn serve_answers_hello_and_requests() {
        let input = "{\"protocol\":1,\"representation\":\"grc\"}\n{\"id\":\"a\",\"f1\":\"x\",\"f2\":\"y\",\"h\":\"z\"}\nnot json\n";
        let mut out = Vec::new();
        serve(Cursor::new(input), &mut out, |_| Ok(0.5)).unwrap();
        let lines: Vec<&str> = std::str::from_utf8(&out).unwrap().lines().collect();
        assert_eq!(lines[0], "{\"protocol\":1,\"representation\":\"grc\"}");
        assert_eq!(lines[1], "{\"id\":\"a\",\"score\":0.5}");
        assert!(lines[2].contains("malformed request"));
    }
}
