mod commands;
mod config;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "sepinv", version, about = "Separation-logic loop invariant generation")]
pub struct Cli {
    /// Config file (defaults to $SEPINV_CONFIG).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// More log output; repeat for more.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub cmd: Cmd,
}

#[derive(Args, Debug, Clone, Default)]
pub struct BackendArg {
    /// `heuristic`, `remote URL` or `subprocess CMD`.
    #[arg(long, num_args = 1..=2, value_names = ["KIND", "TARGET"])]
    pub backend: Option<Vec<String>>,
    /// Seconds per remote call.
    #[arg(long)]
    pub timeout: Option<u64>,
}

#[derive(Subcommand, Debug)]
pub enum Cmd {
    /// Infer and check loop invariants for the functions of a program.
    Verify {
        file: PathBuf,
        /// Only these functions (repeatable).
        #[arg(long = "func")]
        funcs: Vec<String>,
        #[command(flatten)]
        backend: BackendArg,
        #[arg(long)]
        max_num: Option<usize>,
        #[arg(long)]
        max_attempts: Option<usize>,
        /// Cross-check invariants on models with at most N objects.
        #[arg(long, value_name = "N")]
        oracle: Option<usize>,
        /// Enter the outer iteration of a nested loop under the inner condition.
        #[arg(long)]
        paper_literal: bool,
        #[arg(long)]
        json: bool,
    },
    /// Print the loop-head states S0..Sk of a function's first loop.
    Exec {
        file: PathBuf,
        #[arg(long)]
        func: Option<String>,
        #[arg(long, default_value_t = 5)]
        steps: usize,
        #[arg(long)]
        json: bool,
    },
    /// Check `source |- target` lines.
    Entail {
        file: PathBuf,
        /// Predicate definitions (.invc); definitions in FILE itself also count.
        #[arg(long)]
        defs: Option<PathBuf>,
        /// Also run the bounded oracle with at most N objects.
        #[arg(long, value_name = "N")]
        oracle: Option<usize>,
        #[arg(long)]
        json: bool,
    },
    /// Write a synthetic training corpus as JSONL.
    GenData {
        #[arg(long, default_value_t = 100_000)]
        count: usize,
        #[arg(long)]
        seed: Option<u64>,
        /// Output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Restrict labels to these predicates (repeatable).
        #[arg(long = "pred")]
        preds: Vec<String>,
        #[arg(long)]
        p_noise: Option<f64>,
        /// Predicate definitions (.invc) instead of the bundled corpus ones.
        #[arg(long)]
        defs: Option<PathBuf>,
    },
    /// Run every bundled program and print a results table.
    Bench {
        #[command(flatten)]
        backend: BackendArg,
        /// Only instances whose name contains this text.
        #[arg(long)]
        filter: Option<String>,
        /// Worker threads (default: all cores).
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long)]
        json: bool,
    },
    /// Send random well-formed requests to an inference server and validate the replies.
    ServeCheck {
        #[command(flatten)]
        backend: BackendArg,
        #[arg(long, default_value_t = 100)]
        requests: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        json: bool,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match commands::run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) if is_broken_pipe(&e) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

/// The reader went away (`sepinv ... | head`); not worth an error.
fn is_broken_pipe(e: &anyhow::Error) -> bool {
    e.chain().any(|c| {
        c.downcast_ref::<std::io::Error>().is_some_and(|io| io.kind() == std::io::ErrorKind::BrokenPipe)
            || c.downcast_ref::<serde_json::Error>().is_some_and(|j| j.io_error_kind() == Some(std::io::ErrorKind::BrokenPipe))
    })
}
