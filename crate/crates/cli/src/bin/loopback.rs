//! Loopback scorer for tests: speaks the scorer protocol over stdio, or over
//! HTTP with `--http <addr>`.
//!
//! Modes:
//! - `hash` (default): a fixed hash of f1, f2 and h mapped into [0, 1)
//! - `constant:<x>`: always `x`, even when it is not a probability
//! - `error`: an error response for every request

use std::io::{self, BufReader};
use std::path::PathBuf;
use std::time::Duration;

use chainlab::scoring::protocol::{self, Hello, ScoreRequest, ScoreResponse, PROTOCOL_VERSION};
use clap::Parser;

#[derive(Debug, Parser)]
#[command(name = "chainlab-loopback")]
struct Args {
    #[arg(long, default_value = "hash")]
    mode: String,
    /// Delay before every answer.
    #[arg(long, default_value_t = 0)]
    sleep_ms: u64,
    /// Exit without answering the first request when this file is missing,
    /// creating it first so the next run behaves.
    #[arg(long)]
    fail_once: Option<PathBuf>,
    /// Serve HTTP on this address instead of stdio.
    #[arg(long)]
    http: Option<String>,
}

#[derive(Debug, Clone, Copy)]
enum Mode {
    Hash,
    Constant(f64),
    Error,
}

impl Mode {
    fn parse(s: &str) -> Result<Self, String> {
        match s {
            "hash" => Ok(Mode::Hash),
            "error" => Ok(Mode::Error),
            _ => s
                .strip_prefix("constant:")
                .and_then(|x| x.parse().ok())
                .map(Mode::Constant)
                .ok_or_else(|| format!("unknown mode {s:?}")),
        }
    }

    fn score(self, req: &ScoreRequest) -> Result<f64, String> {
        match self {
            Mode::Hash => Ok(hash_score(req)),
            Mode::Constant(x) => Ok(x),
            Mode::Error => Err("loopback error mode".into()),
        }
    }
}

fn hash_score(req: &ScoreRequest) -> f64 {
    // FNV-1a
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for part in [&req.f1, &req.f2, &req.h] {
        for b in part.bytes().chain([0x1f]) {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    (h >> 11) as f64 / (1u64 << 53) as f64
}

fn main() {
    let args = Args::parse();
    let mode = match Mode::parse(&args.mode) {
        Ok(m) => m,
        Err(e) => {
            eprintln!("chainlab-loopback: {e}");
            std::process::exit(1);
        }
    };
    let sleep = Duration::from_millis(args.sleep_ms);
    let fail_once = args.fail_once.clone();
    let mut score = move |req: &ScoreRequest| {
        if let Some(marker) = &fail_once {
            if !marker.exists() {
                std::fs::write(marker, b"").expect("write marker");
                std::process::exit(3);
            }
        }
        std::thread::sleep(sleep);
        mode.score(req)
    };
    let result = match &args.http {
        Some(addr) => serve_http(addr, &mut score),
        None => {
            let stdin = io::stdin();
            protocol::serve(BufReader::new(stdin.lock()), io::stdout().lock(), score)
        }
    };
    if let Err(e) = result {
        eprintln!("chainlab-loopback: {e}");
        std::process::exit(2);
    }
}

fn serve_http<F>(addr: &str, score: &mut F) -> io::Result<()>
where
    F: FnMut(&ScoreRequest) -> Result<f64, String>,
{
    let server = tiny_http::Server::http(addr).map_err(io::Error::other)?;
    // tests read the bound address from stdout
    println!("{}", server.server_addr());
    for mut request in server.incoming_requests() {
        let mut body = String::new();
        request.as_reader().read_to_string(&mut body)?;
        let reply = match request.url() {
            "/hello" => serde_json::to_string(&Hello {
                protocol: PROTOCOL_VERSION,
                representation: serde_json::from_str::<Hello>(&body)
                    .ok()
                    .and_then(|h| h.representation),
            }),
            "/score" => match serde_json::from_str::<Vec<serde_json::Value>>(&body) {
                Ok(items) => {
                    let responses: Vec<ScoreResponse> = items
                        .iter()
                        .map(|v| protocol::handle_line(&v.to_string(), score))
                        .collect();
                    serde_json::to_string(&responses)
                }
                Err(e) => {
                    request.respond(tiny_http::Response::from_string(e.to_string()).with_status_code(400))?;
                    continue;
                }
            },
            _ => {
                request.respond(tiny_http::Response::empty(404))?;
                continue;
            }
        }
        .map_err(io::Error::other)?;
        request.respond(tiny_http::Response::from_string(reply))?;
    }
    Ok(())
}
