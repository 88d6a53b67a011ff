//! Client side of the line-delimited JSON adapter protocol.
//!
//! One JSON object per `\n`-terminated line on the adapter's stdin/stdout.
//! Requests are strictly serial: one request line, then one response line.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use serde_json::{json, Value};

use crate::error::{Error, Result};

use super::{digest, Predictor};

pub const PROTOCOL_VERSION: u64 = 1;
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);
/// Environment variable overriding the adapter response timeout, in seconds.
pub const TIMEOUT_ENV: &str = "CIU_EXPLAIN_TIMEOUT_SECS";

struct Connection {
    child: Child,
    stdin: Option<ChildStdin>,
    lines: Receiver<std::io::Result<String>>,
    broken: Option<String>,
}

impl Connection {
    fn send(&mut self, message: &Value) -> Result<()> {
        let stdin = self
            .stdin
            .as_mut()
            .ok_or_else(|| Error::Transport("adapter input stream is closed".into()))?;
        let mut line = message.to_string();
        line.push('\n');
        stdin
            .write_all(line.as_bytes())
            .and_then(|_| stdin.flush())
            .map_err(|e| Error::Transport(format!("writing request: {e}")))
    }

    fn receive(&mut self, timeout: Duration) -> Result<Value> {
        match self.lines.recv_timeout(timeout) {
            Ok(Ok(line)) => parse_line(&line),
            Ok(Err(e)) => Err(Error::Transport(format!("reading response: {e}"))),
            Err(RecvTimeoutError::Timeout) => Err(Error::Timeout(timeout)),
            Err(RecvTimeoutError::Disconnected) => Err(Error::Transport(
                "adapter closed its output stream".into(),
            )),
        }
    }

    fn round_trip(&mut self, message: &Value, timeout: Duration) -> Result<Value> {
        if let Some(reason) = &self.broken {
            return Err(Error::Transport(format!("connection unusable after earlier failure: {reason}")));
        }
        let result = self.send(message).and_then(|_| self.receive(timeout));
        if let Err(e) = &result {
            // A late or partial reply would desynchronize the stream.
            if !matches!(e, Error::Adapter(_)) {
                self.broken = Some(e.to_string());
            }
        }
        result
    }
}

/// A model served by an external adapter process.
pub struct ExternalModel {
    command: Vec<String>,
    n_inputs: usize,
    n_outputs: usize,
    timeout: Duration,
    conn: Mutex<Connection>,
}

impl std::fmt::Debug for ExternalModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ExternalModel")
            .field("command", &self.command)
            .field("n_inputs", &self.n_inputs)
            .field("n_outputs", &self.n_outputs)
            .field("timeout", &self.timeout)
            .finish()
    }
}

impl ExternalModel {
    /// Starts the adapter and performs the `hello` handshake.
    pub fn launch(command: &[String], timeout: Duration) -> Result<Self> {
        let (program, args) = command
            .split_first()
            .filter(|(p, _)| !p.is_empty())
            .ok_or_else(|| Error::ModelSpec("external model command is empty".into()))?;
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| Error::Transport(format!("cannot start adapter '{program}': {e}")))?;
        let stdin = child.stdin.take();
        let stdout = child.stdout.take().expect("stdout is piped");
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            let mut reader = BufReader::new(stdout);
            loop {
                let mut line = String::new();
                match reader.read_line(&mut line) {
                    Ok(0) => break,
                    Ok(_) => {
                        if tx.send(Ok(line)).is_err() {
                            break;
                        }
                    }
                    Err(e) => {
                        let _ = tx.send(Err(e));
                        break;
                    }
                }
            }
        });
        let mut conn = Connection {
            child,
            stdin,
            lines: rx,
            broken: None,
        };
        let (n_inputs, n_outputs) = handshake(&mut conn, timeout).map_err(|e| match e {
            Error::Adapter(msg) => Error::Protocol(format!("handshake rejected: {msg}")),
            Error::Protocol(msg) => Error::Protocol(format!("handshake: {msg}")),
            other => other,
        })?;
        Ok(Self {
            command: command.to_vec(),
            n_inputs,
            n_outputs,
            timeout,
            conn: Mutex::new(conn),
        })
    }

    pub fn timeout(&self) -> Duration {
        self.timeout
    }

    /// Sends one batch and reads one reply. Shapes are checked here;
    /// finiteness is checked by [`super::batch_predict`].
    pub fn call(&self, inputs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        let mut conn = self.conn.lock().unwrap_or_else(|p| p.into_inner());
        let reply = conn.round_trip(&json!({"op": "predict", "inputs": inputs}), self.timeout)?;
        match op(&reply)? {
            "result" => {}
            other => return Err(Error::Protocol(format!("expected 'result', got '{other}'"))),
        }
        let rows = reply
            .get("outputs")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::Protocol("'outputs' missing or not an array".into()))?;
        if rows.len() != inputs.len() {
            return Err(Error::OutputShape {
                what: "output vectors",
                expected: inputs.len(),
                actual: rows.len(),
            });
        }
        rows.iter()
            .enumerate()
            .map(|(position, row)| {
                let row = row.as_array().ok_or_else(|| {
                    Error::Protocol(format!("output {position} is not an array"))
                })?;
                row.iter()
                    .map(|v| {
                        number(v).ok_or_else(|| {
                            Error::Protocol(format!("output {position} has non-numeric entry {v}"))
                        })
                    })
                    .collect()
            })
            .collect()
    }
}

impl Predictor for ExternalModel {
    fn n_inputs(&self) -> usize {
        self.n_inputs
    }

    fn n_outputs(&self) -> usize {
        self.n_outputs
    }

    fn predict_batch(&self, inputs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        self.call(inputs)
    }

    fn fingerprint(&self) -> String {
        let refs: Vec<&str> = self.command.iter().map(String::as_str).collect();
        format!("external-{}x{}-{}", self.n_outputs, self.n_inputs, digest(&refs))
    }

    fn supports_parallel(&self) -> bool {
        false
    }
}

impl Drop for ExternalModel {
    fn drop(&mut self) {
        let conn = self.conn.get_mut().unwrap_or_else(|p| p.into_inner());
        if conn.broken.is_none() {
            let _ = conn.send(&json!({"op": "bye"}));
        }
        conn.stdin.take();
        let deadline = Instant::now() + Duration::from_secs(2);
        loop {
            match conn.child.try_wait() {
                Ok(Some(_)) => return,
                Ok(None) if Instant::now() < deadline => thread::sleep(Duration::from_millis(10)),
                _ => break,
            }
        }
        let _ = conn.child.kill();
        let _ = conn.child.wait();
    }
}

fn handshake(conn: &mut Connection, timeout: Duration) -> Result<(usize, usize)> {
    let reply = conn.round_trip(&json!({"op": "hello", "version": PROTOCOL_VERSION}), timeout)?;
    match op(&reply)? {
        "hello" => {}
        other => return Err(Error::Protocol(format!("expected 'hello', got '{other}'"))),
    }
    let version = reply.get("version").and_then(Value::as_u64);
    if version != Some(PROTOCOL_VERSION) {
        return Err(Error::Protocol(format!(
            "unsupported protocol version {:?}",
            reply.get("version")
        )));
    }
    let arity = |key: &str| {
        reply
            .get(key)
            .and_then(Value::as_u64)
            .filter(|n| *n > 0)
            .map(|n| n as usize)
            .ok_or_else(|| Error::Protocol(format!("'{key}' missing or not a positive integer")))
    };
    Ok((arity("n_inputs")?, arity("n_outputs")?))
}

/// Extracts `op`, surfacing adapter error messages verbatim.
fn op(reply: &Value) -> Result<&str> {
    let op = reply
        .get("op")
        .and_then(Value::as_str)
        .ok_or_else(|| Error::Protocol("reply has no 'op' field".into()))?;
    if op == "error" {
        let message = reply
            .get("message")
            .and_then(Value::as_str)
            .unwrap_or("<no message>");
        return Err(Error::Adapter(message.to_string()));
    }
    Ok(op)
}

fn number(v: &Value) -> Option<f64> {
    match v {
        Value::Number(n) => n.as_f64(),
        Value::Null => Some(f64::NAN),
        Value::String(s) => match s.as_str() {
            NAN_TOKEN => Some(f64::NAN),
            POS_INF_TOKEN => Some(f64::INFINITY),
            NEG_INF_TOKEN => Some(f64::NEG_INFINITY),
            _ => None,
        },
        _ => None,
    }
}

const NAN_TOKEN: &str = "\u{0}NaN";
const POS_INF_TOKEN: &str = "\u{0}Infinity";
const NEG_INF_TOKEN: &str = "\u{0}-Infinity";

fn parse_line(line: &str) -> Result<Value> {
    let line = line.trim_end_matches(['\n', '\r']);
    match serde_json::from_str(line) {
        Ok(v) => Ok(v),
        Err(first) => {
            // Many JSON emitters write bare NaN/Infinity. Accept them so the
            // finiteness check can name the offending position.
            let patched = quote_non_finite(line);
            if patched != line {
                if let Ok(v) = serde_json::from_str(&patched) {
                    return Ok(v);
                }
            }
            Err(Error::Protocol(format!("{first}: {}", truncate(line, 120))))
        }
    }
}

/// Rewrites bare `NaN`, `Infinity` and `-Infinity` tokens outside string
/// literals into sentinel strings.
fn quote_non_finite(line: &str) -> String {
    let mut out = String::with_capacity(line.len() + 16);
    let mut in_string = false;
    let mut escaped = false;
    let mut rest = line;
    while let Some(c) = rest.chars().next() {
        if in_string {
            out.push(c);
            if escaped {
                escaped = false;
            } else if c == '\\' {
                escaped = true;
            } else if c == '"' {
                in_string = false;
            }
            rest = &rest[c.len_utf8()..];
            continue;
        }
        let replaced = [
            ("-Infinity", NEG_INF_TOKEN),
            ("Infinity", POS_INF_TOKEN),
            ("NaN", NAN_TOKEN),
        ]
        .iter()
        .find(|(token, _)| rest.starts_with(token));
        if let Some((token, sentinel)) = replaced {
            out.push_str(&serde_json::to_string(sentinel).expect("string serializes"));
            rest = &rest[token.len()..];
            continue;
        }
        if c == '"' {
            in_string = true;
        }
        out.push(c);
        rest = &rest[c.len_utf8()..];
    }
    out
}

fn truncate(s: &str, max: usize) -> String {
    if s.chars().count() <= max {
        s.to_string()
    } else {
        format!("{}...", s.chars().take(max).collect::<String>())
    }
}
