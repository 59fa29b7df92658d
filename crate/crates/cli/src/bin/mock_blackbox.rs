//! A stand-in for an external training program. Answers each request line
//! with `-sum (c_i - t_i)^2`, where `c_i` is parameter `i` normalized to
//! `[0, 1]` over its (log) box and `t_i` the target.

use std::io::{self, BufRead, Write};
use std::process::ExitCode;
use std::time::Duration;

use clap::Parser;
use dfotr_cli::tune::ParamSpec;

#[derive(Parser)]
struct Args {
    #[arg(long = "param", required = true)]
    params: Vec<ParamSpec>,
    /// Comma-separated normalized targets, one per parameter (default 0.5 each).
    #[arg(long, value_delimiter = ',')]
    target: Vec<f64>,
    /// Exit with status 3 instead of answering.
    #[arg(long)]
    fail: bool,
    /// Answer with text that is not a number.
    #[arg(long)]
    garbage: bool,
    /// Seconds to sleep before each answer.
    #[arg(long, default_value_t = 0.0)]
    sleep: f64,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let targets = if args.target.is_empty() {
        vec![0.5; args.params.len()]
    } else {
        args.target.clone()
    };
    if targets.len() != args.params.len() {
        eprintln!("expected {} targets", args.params.len());
        return ExitCode::from(2);
    }
    let stdout = io::stdout();
    let mut out = stdout.lock();
    for line in io::stdin().lock().lines() {
        let Ok(line) = line else { break };
        if args.fail {
            eprintln!("mock failure requested");
            return ExitCode::from(3);
        }
        let mut score = 0.0;
        for (p, t) in args.params.iter().zip(&targets) {
            let value = line
                .split_whitespace()
                .filter_map(|kv| kv.split_once('='))
                .find(|(k, _)| *k == p.name)
                .and_then(|(_, v)| v.parse::<f64>().ok());
            let Some(value) = value else {
                eprintln!("missing parameter `{}` in `{line}`", p.name);
                return ExitCode::from(2);
            };
            let c = p.normalize(value);
            score -= (c - t) * (c - t);
        }
        if args.sleep > 0.0 {
            std::thread::sleep(Duration::from_secs_f64(args.sleep));
        }
        let reply = if args.garbage {
            "accuracy: high".to_string()
        } else {
            format!("{score}")
        };
        if writeln!(out, "{reply}").and_then(|_| out.flush()).is_err() {
            break;
        }
    }
    ExitCode::SUCCESS
}
