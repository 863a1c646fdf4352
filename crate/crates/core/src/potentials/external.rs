//! Client for potential energy surfaces that live in a separate program.
//!
//! The child process talks a line protocol on its standard streams:
//!
//! ```text
//! -> HELLO <fn>
//! <- OK
//! -> EVAL <n>
//! -> <fn space-separated coordinates>      (n lines, 17 significant digits)
//! <- OK
//! <- <energy in hartree>                    (n lines)
//! ```
//!
//! Any request may instead be answered with `ERR <message>`. Each process
//! serves one request at a time; [`ExternalPes`] keeps a pool so concurrent
//! walkers each get their own process.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use crate::error::{Error, Result};

/// Environment variable overriding the response timeout, in seconds.
pub const TIMEOUT_ENV: &str = "PINS_EXTERNAL_PES_TIMEOUT_S";
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

/// Timeout from [`TIMEOUT_ENV`], falling back to [`DEFAULT_TIMEOUT`].
pub fn timeout_from_env() -> Duration {
    std::env::var(TIMEOUT_ENV)
        .ok()
        .and_then(|s| s.trim().parse::<f64>().ok())
        .filter(|s| s.is_finite() && *s > 0.0)
        .map(Duration::from_secs_f64)
        .unwrap_or(DEFAULT_TIMEOUT)
}

fn pes_err(context: impl Into<String>, message: impl Into<String>) -> Error {
    Error::ExternalPes {
        context: context.into(),
        message: message.into(),
    }
}

/// One running external PES process.
pub struct ExternalEvaluator {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<std::io::Result<String>>,
    dim: usize,
    timeout: Duration,
    broken: bool,
}

impl ExternalEvaluator {
    /// Starts `command` and performs the `HELLO` handshake.
    pub fn spawn(command: &[String], dim: usize, timeout: Duration) -> Result<Self> {
        let (program, args) = command
            .split_first()
            .ok_or_else(|| pes_err("spawn", "empty command"))?;
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| pes_err(format!("spawn {program}"), e.to_string()))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");

        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                let stop = line.is_err();
                if tx.send(line).is_err() || stop {
                    break;
                }
            }
        });

        let mut ev = Self {
            child,
            stdin,
            lines: rx,
            dim,
            timeout,
            broken: false,
        };
        ev.send(&format!("HELLO {dim}\n"), "handshake")?;
        ev.expect_ok("handshake")?;
        Ok(ev)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_broken(&self) -> bool {
        self.broken
    }

    /// Evaluates a batch of points, preserving order.
    pub fn eval(&mut self, batch: &[&[f64]]) -> Result<Vec<f64>> {
        if batch.is_empty() {
            return Ok(Vec::new());
        }
        if self.broken {
            return Err(pes_err("eval", "evaluator is in a failed state"));
        }
        let mut req = format!("EVAL {}\n", batch.len());
        for x in batch {
            if x.len() != self.dim {
                return Err(Error::DimensionMismatch {
                    expected: self.dim,
                    got: x.len(),
                });
            }
            let line: Vec<String> = x.iter().map(|v| format!("{v:.16e}")).collect();
            req.push_str(&line.join(" "));
            req.push('\n');
        }
        let ctx = format!("EVAL {}", batch.len());
        self.send(&req, &ctx)?;
        self.expect_ok(&ctx)?;
        let mut out = Vec::with_capacity(batch.len());
        for i in 0..batch.len() {
            let line = self.read_line(&ctx)?;
            let v: f64 = line.trim().parse().map_err(|_| {
                self.broken = true;
                pes_err(&ctx, format!("malformed energy on line {}: {line:?}", i + 1))
            })?;
            out.push(v);
        }
        Ok(out)
    }

    fn send(&mut self, text: &str, ctx: &str) -> Result<()> {
        let res = self
            .stdin
            .write_all(text.as_bytes())
            .and_then(|_| self.stdin.flush());
        res.map_err(|e| {
            self.broken = true;
            pes_err(ctx, format!("write failed: {e}"))
        })
    }

    fn read_line(&mut self, ctx: &str) -> Result<String> {
        match self.lines.recv_timeout(self.timeout) {
            Ok(Ok(line)) => Ok(line),
            Ok(Err(e)) => {
                self.broken = true;
                Err(pes_err(ctx, format!("read failed: {e}")))
            }
            Err(RecvTimeoutError::Timeout) => {
                self.broken = true;
                Err(pes_err(
                    ctx,
                    format!("no response within {:.1} s", self.timeout.as_secs_f64()),
                ))
            }
            Err(RecvTimeoutError::Disconnected) => {
                self.broken = true;
                let status = self
                    .child
                    .try_wait()
                    .ok()
                    .flatten()
                    .map(|s| s.to_string())
                    .unwrap_or_else(|| "stream closed".into());
                Err(pes_err(ctx, format!("process exited ({status})")))
            }
        }
    }

    fn expect_ok(&mut self, ctx: &str) -> Result<()> {
        let line = self.read_line(ctx)?;
        let line = line.trim();
        if line == "OK" {
            Ok(())
        } else if let Some(msg) = line.strip_prefix("ERR") {
            Err(pes_err(ctx, msg.trim().to_string()))
        } else {
            self.broken = true;
            Err(pes_err(ctx, format!("expected OK, got {line:?}")))
        }
    }
}

impl Drop for ExternalEvaluator {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

impl std::fmt::Debug for ExternalEvaluator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ExternalEvaluator")
            .field("pid", &self.child.id())
            .field("dim", &self.dim)
            .field("broken", &self.broken)
            .finish()
    }
}

/// An external PES backed by a pool of child processes, spawned on demand.
pub struct ExternalPes {
    command: Vec<String>,
    dim: usize,
    timeout: Duration,
    idle: Mutex<Vec<ExternalEvaluator>>,
}

impl ExternalPes {
    /// Uses the timeout from the environment (see [`timeout_from_env`]).
    pub fn new(command: Vec<String>, dim: usize) -> Result<Self> {
        Self::with_timeout(command, dim, timeout_from_env())
    }

    /// Spawns one process eagerly so configuration errors surface here.
    pub fn with_timeout(command: Vec<String>, dim: usize, timeout: Duration) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("external PES dimension must be positive"));
        }
        let first = ExternalEvaluator::spawn(&command, dim, timeout)?;
        Ok(Self {
            command,
            dim,
            timeout,
            idle: Mutex::new(vec![first]),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn command(&self) -> &[String] {
        &self.command
    }

    pub fn timeout(&self) -> Duration {
        self.timeout
    }

    pub fn evaluate_batch(&self, batch: &[&[f64]]) -> Result<Vec<f64>> {
        if batch.is_empty() {
            return Ok(Vec::new());
        }
        let taken = self.idle.lock().expect("pool lock").pop();
        let mut ev = match taken {
            Some(ev) => ev,
            None => ExternalEvaluator::spawn(&self.command, self.dim, self.timeout)?,
        };
        let res = ev.eval(batch);
        if !ev.is_broken() {
            self.idle.lock().expect("pool lock").push(ev);
        }
        res
    }
}

impl std::fmt::Debug for ExternalPes {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ExternalPes")
            .field("command", &self.command)
            .field("dim", &self.dim)
            .field("timeout", &self.timeout)
            .finish()
    }
}
