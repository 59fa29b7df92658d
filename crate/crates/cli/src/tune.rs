//! Hyperparameter tuning of an external program.
//!
//! Protocol: for each evaluation the program receives one UTF-8 line
//! `name=value name=value ...` on stdin and answers with one line holding a
//! single real number, the score to maximize. In one-shot mode the program is
//! spawned per evaluation and must exit with status 0; in persistent mode a
//! single process answers successive lines.

use std::fmt;
use std::io::{BufRead, BufReader, Read, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::str::FromStr;
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use dfotr::baselines::random_search;
use dfotr::{minimize, Objective, RunHistory, SolverConfig};
use thiserror::Error;

use crate::report::Table;

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(600);

#[derive(Debug, Error)]
pub enum TuneError {
    #[error("invalid parameter spec `{0}` (expected name:lo:hi or name:lo:hi:log)")]
    BadParam(String),
    #[error("failed to start `{command}`: {source}")]
    Spawn {
        command: String,
        source: std::io::Error,
    },
    #[error("`{command}` did not answer within {timeout:?}")]
    Timeout { command: String, timeout: Duration },
    #[error("`{command}` exited with {status} before answering; stderr: {stderr}")]
    Exited {
        command: String,
        status: String,
        stderr: String,
    },
    #[error("`{command}` answered `{line}`, expected a single real number")]
    Protocol { command: String, line: String },
    #[error("i/o error talking to `{command}`: {source}")]
    Io {
        command: String,
        source: std::io::Error,
    },
}

/// One tuned parameter: its box and whether the search runs in `log10` space.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSpec {
    pub name: String,
    pub lo: f64,
    pub hi: f64,
    pub log: bool,
}

impl ParamSpec {
    /// Box in the optimizer's coordinates.
    pub fn internal_bounds(&self) -> (f64, f64) {
        if self.log {
            (self.lo.log10(), self.hi.log10())
        } else {
            (self.lo, self.hi)
        }
    }

    /// Maps an optimizer coordinate to a parameter value, clamped to the box.
    pub fn decode(&self, x: f64) -> f64 {
        let (lo, hi) = self.internal_bounds();
        let x = x.clamp(lo, hi);
        if self.log {
            10f64.powf(x).clamp(self.lo, self.hi)
        } else {
            x
        }
    }

    /// Position in `[0, 1]` of a parameter value within the internal box.
    pub fn normalize(&self, value: f64) -> f64 {
        let (lo, hi) = self.internal_bounds();
        let x = if self.log { value.log10() } else { value };
        (x - lo) / (hi - lo)
    }
}

impl FromStr for ParamSpec {
    type Err = TuneError;

    fn from_str(s: &str) -> Result<Self, TuneError> {
        let bad = || TuneError::BadParam(s.to_string());
        let parts: Vec<&str> = s.split(':').collect();
        let (name, lo, hi, log) = match parts.as_slice() {
            [n, lo, hi] => (n, lo, hi, false),
            [n, lo, hi, "log"] => (n, lo, hi, true),
            _ => return Err(bad()),
        };
        let lo: f64 = lo.parse().map_err(|_| bad())?;
        let hi: f64 = hi.parse().map_err(|_| bad())?;
        let valid_name = !name.is_empty() && !name.contains(['=', ' ']);
        if !valid_name || !(lo.is_finite() && hi.is_finite() && lo < hi) || (log && lo <= 0.0) {
            return Err(bad());
        }
        Ok(ParamSpec {
            name: name.to_string(),
            lo,
            hi,
            log,
        })
    }
}

impl fmt::Display for ParamSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.name, self.lo, self.hi)?;
        if self.log {
            f.write_str(":log")?;
        }
        Ok(())
    }
}

/// The request line for a point in optimizer coordinates.
pub fn request_line(params: &[ParamSpec], x: &[f64]) -> String {
    params
        .iter()
        .zip(x)
        .map(|(p, &v)| format!("{}={}", p.name, p.decode(v)))
        .collect::<Vec<_>>()
        .join(" ")
}

struct Session {
    child: Child,
    stdin: Option<ChildStdin>,
    lines: Receiver<std::io::Result<String>>,
    stderr: Arc<Mutex<String>>,
}

impl Session {
    fn start(argv: &[String]) -> Result<Self, TuneError> {
        let command = argv.join(" ");
        let mut child = Command::new(&argv[0])
            .args(&argv[1..])
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|source| TuneError::Spawn { command, source })?;
        let stdout = child.stdout.take().expect("piped stdout");
        let mut err_pipe = child.stderr.take().expect("piped stderr");
        let (tx, lines) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        let stderr = Arc::new(Mutex::new(String::new()));
        let sink = Arc::clone(&stderr);
        thread::spawn(move || {
            let mut buf = String::new();
            let _ = err_pipe.read_to_string(&mut buf);
            sink.lock().expect("stderr buffer").push_str(&buf);
        });
        Ok(Session {
            stdin: child.stdin.take(),
            child,
            lines,
            stderr,
        })
    }

    fn stderr_text(&self) -> String {
        // Give the reader thread a moment to drain after the process exits.
        let deadline = Instant::now() + Duration::from_millis(200);
        loop {
            let text = self
                .stderr
                .lock()
                .expect("stderr buffer")
                .trim()
                .to_string();
            if !text.is_empty() || Instant::now() >= deadline {
                return text;
            }
            thread::sleep(Duration::from_millis(10));
        }
    }

    fn exited(&mut self, command: &str) -> TuneError {
        let status = match self.child.wait() {
            Ok(s) => s.to_string(),
            Err(e) => e.to_string(),
        };
        TuneError::Exited {
            command: command.to_string(),
            status,
            stderr: self.stderr_text(),
        }
    }

    fn ask(&mut self, command: &str, line: &str, timeout: Duration) -> Result<f64, TuneError> {
        let io = |source| TuneError::Io {
            command: command.to_string(),
            source,
        };
        match self.stdin.as_mut() {
            Some(stdin) => {
                if let Err(e) = writeln!(stdin, "{line}").and_then(|_| stdin.flush()) {
                    if e.kind() == std::io::ErrorKind::BrokenPipe {
                        return Err(self.exited(command));
                    }
                    return Err(io(e));
                }
            }
            None => return Err(self.exited(command)),
        }
        let reply = match self.lines.recv_timeout(timeout) {
            Ok(Ok(reply)) => reply,
            Ok(Err(e)) => return Err(io(e)),
            Err(RecvTimeoutError::Timeout) => {
                let _ = self.child.kill();
                let _ = self.child.wait();
                return Err(TuneError::Timeout {
                    command: command.to_string(),
                    timeout,
                });
            }
            Err(RecvTimeoutError::Disconnected) => return Err(self.exited(command)),
        };
        reply
            .trim()
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| TuneError::Protocol {
                command: command.to_string(),
                line: reply.clone(),
            })
    }

    /// Closes stdin and waits for a zero exit status.
    fn finish(mut self, command: &str, timeout: Duration) -> Result<(), TuneError> {
        drop(self.stdin.take());
        let deadline = Instant::now() + timeout;
        loop {
            match self.child.try_wait() {
                Ok(Some(status)) if status.success() => return Ok(()),
                Ok(Some(_)) => return Err(self.exited(command)),
                Ok(None) if Instant::now() >= deadline => {
                    let _ = self.child.kill();
                    let _ = self.child.wait();
                    return Err(TuneError::Timeout {
                        command: command.to_string(),
                        timeout,
                    });
                }
                Ok(None) => thread::sleep(Duration::from_millis(2)),
                Err(source) => {
                    return Err(TuneError::Io {
                        command: command.to_string(),
                        source,
                    })
                }
            }
        }
    }
}

impl Drop for Session {
    fn drop(&mut self) {
        drop(self.stdin.take());
        if let Ok(None) = self.child.try_wait() {
            let _ = self.child.kill();
        }
        let _ = self.child.wait();
    }
}

/// An external program as a minimization objective (the negated score).
pub struct ExternalObjective {
    argv: Vec<String>,
    params: Vec<ParamSpec>,
    timeout: Duration,
    persistent: Option<Session>,
    keep_alive: bool,
    pub calls: usize,
}

impl ExternalObjective {
    pub fn new(
        argv: Vec<String>,
        params: Vec<ParamSpec>,
        timeout: Duration,
        persistent: bool,
    ) -> Self {
        assert!(!argv.is_empty(), "external command must not be empty");
        ExternalObjective {
            argv,
            params,
            timeout,
            persistent: None,
            keep_alive: persistent,
            calls: 0,
        }
    }

    fn command(&self) -> String {
        self.argv.join(" ")
    }

    /// Sends one request and returns the program's score.
    pub fn score(&mut self, x: &[f64]) -> Result<f64, TuneError> {
        let line = request_line(&self.params, x);
        let command = self.command();
        self.calls += 1;
        if self.keep_alive {
            if self.persistent.is_none() {
                self.persistent = Some(Session::start(&self.argv)?);
            }
            let session = self.persistent.as_mut().expect("session started above");
            let r = session.ask(&command, &line, self.timeout);
            if r.is_err() {
                self.persistent = None;
            }
            r
        } else {
            let mut session = Session::start(&self.argv)?;
            let v = session.ask(&command, &line, self.timeout)?;
            session.finish(&command, self.timeout)?;
            Ok(v)
        }
    }
}

impl Objective for ExternalObjective {
    fn dim(&self) -> usize {
        self.params.len()
    }

    fn evaluate(&mut self, w: &[f64]) -> dfotr::Result<f64> {
        self.score(w)
            .map(|v| -v)
            .map_err(|e| dfotr::Error::Evaluation(e.to_string()))
    }
}

#[derive(Debug, Clone)]
pub struct TuneOptions {
    pub params: Vec<ParamSpec>,
    pub budget: usize,
    pub seed: u64,
    pub timeout: Duration,
    pub persistent: bool,
    /// Also run random search over the same box with the same budget.
    pub random_search: bool,
}

#[derive(Debug, Clone)]
pub struct TuneOutcome {
    pub method: &'static str,
    pub best_params: Vec<f64>,
    pub best_score: f64,
    pub history: RunHistory,
}

pub fn tune(argv: &[String], opts: &TuneOptions) -> anyhow::Result<Vec<TuneOutcome>> {
    let d = opts.params.len();
    anyhow::ensure!(d > 0, "at least one --param is required");
    anyhow::ensure!(!argv.is_empty(), "missing external command");
    let bounds: Vec<(f64, f64)> = opts.params.iter().map(ParamSpec::internal_bounds).collect();
    let w0: Vec<f64> = bounds.iter().map(|(lo, hi)| 0.5 * (lo + hi)).collect();
    let mut outcomes = Vec::new();

    let mut obj = ExternalObjective::new(
        argv.to_vec(),
        opts.params.clone(),
        opts.timeout,
        opts.persistent,
    );
    let config = SolverConfig::defaults(d)
        .with_budget(opts.budget)
        .with_seed(opts.seed);
    let h = minimize(&mut obj, &w0, &config)?;
    outcomes.push(outcome("dfo-tr", &opts.params, h));

    if opts.random_search {
        let mut obj = ExternalObjective::new(
            argv.to_vec(),
            opts.params.clone(),
            opts.timeout,
            opts.persistent,
        );
        let h = random_search(&mut obj, &bounds, opts.budget, opts.seed)?;
        outcomes.push(outcome("random-search", &opts.params, h));
    }
    Ok(outcomes)
}

fn outcome(method: &'static str, params: &[ParamSpec], history: RunHistory) -> TuneOutcome {
    TuneOutcome {
        method,
        best_params: params
            .iter()
            .zip(history.best.point.as_slice())
            .map(|(p, &x)| p.decode(x))
            .collect(),
        best_score: -history.best.value,
        history,
    }
}

pub fn outcome_table(outcomes: &[TuneOutcome], argv: &[String], opts: &TuneOptions) -> Table {
    let mut cols = vec![
        "method".to_string(),
        "best_score".to_string(),
        "evals".to_string(),
    ];
    cols.extend(opts.params.iter().map(|p| p.name.clone()));
    let col_refs: Vec<&str> = cols.iter().map(String::as_str).collect();
    let mut t = Table::new(&col_refs);
    t.meta("command", "tune")
        .meta("external", argv.join(" "))
        .meta(
            "params",
            opts.params
                .iter()
                .map(ToString::to_string)
                .collect::<Vec<_>>()
                .join(" "),
        )
        .meta("budget", opts.budget)
        .meta("seed", opts.seed)
        .meta("timeout_seconds", opts.timeout.as_secs_f64())
        .meta("persistent", opts.persistent);
    for o in outcomes {
        let mut row = vec![
            o.method.to_string(),
            format!("{}", o.best_score),
            o.history.evals_used().to_string(),
        ];
        row.extend(o.best_params.iter().map(|v| format!("{v}")));
        t.push(row);
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_param_specs() {
        let p: ParamSpec = "lambda:1e-6:1:log".parse().unwrap();
        assert!(p.log);
        let (lo, hi) = p.internal_bounds();
        assert!((lo + 6.0).abs() < 1e-12 && hi.abs() < 1e-12);
        assert_eq!(p.to_string(), "lambda:0.000001:1:log");
        let q: ParamSpec = "c:-1:2".parse().unwrap();
        assert_eq!(q.internal_bounds(), (-1.0, 2.0));
        for bad in ["x:1", "x:2:1", "x:0:1:log", "x:a:1", "=:0:1", "x:0:1:lin"] {
            assert!(bad.parse::<ParamSpec>().is_err(), "{bad}");
        }
    }

    #[test]
    fn decode_clamps_and_exponentiates() {
        let p: ParamSpec = "g:1:1000:log".parse().unwrap();
        assert!((p.decode(2.0) - 100.0).abs() < 1e-9);
        assert_eq!(p.decode(7.0), 1000.0);
        assert_eq!(p.decode(-3.0), 1.0);
        assert!((p.normalize(p.decode(1.5)) - 0.5).abs() < 1e-12);
        let params = vec![p, "c:0:1".parse().unwrap()];
        assert_eq!(request_line(&params, &[0.0, 0.25]), "g=1 c=0.25");
    }
}
