//! Objectives evaluated by an outside program over its standard streams.
//!
//! Each request is one line of space-separated category indices; the
//! program answers with one line holding a single float. A reply that does
//! not parse, a closed stream or a reply slower than the timeout is an
//! error, after which the objective refuses further requests.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use bvo_core::optimizer::Objective;
use bvo_core::{HardAssignment, SearchSpace};
use serde::{Deserialize, Serialize};

use crate::{HarnessError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExternalConfig {
    /// Program and arguments.
    pub command: Vec<String>,
    pub cardinalities: Vec<usize>,
    #[serde(default = "default_timeout")]
    pub timeout_ms: u64,
}

fn default_timeout() -> u64 {
    30_000
}

struct Channel {
    child: Child,
    stdin: ChildStdin,
    replies: Receiver<std::io::Result<String>>,
    broken: Option<String>,
}

pub struct ExternalObjective {
    space: SearchSpace,
    timeout: Duration,
    channel: Mutex<Channel>,
}

impl std::fmt::Debug for ExternalObjective {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ExternalObjective").field("space", &self.space).field("timeout", &self.timeout).finish()
    }
}

impl ExternalObjective {
    pub fn spawn(config: &ExternalConfig) -> Result<Self> {
        let (program, args) = config
            .command
            .split_first()
            .ok_or_else(|| HarnessError::Config("external command is empty".into()))?;
        let space = SearchSpace::new(config.cardinalities.clone())?;
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| HarnessError::io(program, e))?;
        let stdin = child.stdin.take().expect("stdin piped");
        let stdout = child.stdout.take().expect("stdout piped");
        let (tx, replies) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        Ok(Self {
            space,
            timeout: Duration::from_millis(config.timeout_ms),
            channel: Mutex::new(Channel { child, stdin, replies, broken: None }),
        })
    }

    /// One request/response exchange.
    pub fn query(&self, x: &HardAssignment) -> Result<f64> {
        self.space.check(x)?;
        let mut ch = self.channel.lock().unwrap_or_else(|p| p.into_inner());
        if let Some(why) = &ch.broken {
            return Err(HarnessError::Protocol(format!("channel closed after earlier failure: {why}")));
        }
        let request = x.0.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(" ");
        let outcome = exchange(&mut ch, &request, self.timeout);
        if let Err(e) = &outcome {
            ch.broken = Some(e.to_string());
            let _ = ch.child.kill();
        }
        outcome
    }
}

fn exchange(ch: &mut Channel, request: &str, timeout: Duration) -> Result<f64> {
    writeln!(ch.stdin, "{request}")
        .and_then(|_| ch.stdin.flush())
        .map_err(|e| HarnessError::Protocol(format!("write failed: {e}")))?;
    let line = match ch.replies.recv_timeout(timeout) {
        Ok(Ok(line)) => line,
        Ok(Err(e)) => return Err(HarnessError::Protocol(format!("read failed: {e}"))),
        Err(RecvTimeoutError::Timeout) => return Err(HarnessError::Timeout(timeout.as_millis() as u64)),
        Err(RecvTimeoutError::Disconnected) => return Err(HarnessError::Protocol("program closed its output".into())),
    };
    line.trim()
        .parse::<f64>()
        .map_err(|_| HarnessError::Protocol(format!("non-numeric response {line:?} to {request:?}")))
}

impl Drop for ExternalObjective {
    fn drop(&mut self) {
        let ch = self.channel.get_mut().unwrap_or_else(|p| p.into_inner());
        let _ = ch.child.kill();
        let _ = ch.child.wait();
    }
}

impl Objective for ExternalObjective {
    fn space(&self) -> &SearchSpace {
        &self.space
    }

    fn evaluate(&self, x: &HardAssignment) -> bvo_core::Result<f64> {
        self.query(x).map_err(|e| bvo_core::Error::Evaluation(e.to_string()))
    }
}
