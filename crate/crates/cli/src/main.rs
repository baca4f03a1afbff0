use std::fs;
use std::io::{self, Read, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use treematch_cli::bench::{bench, write_csv, BenchConfig, BenchOp};
use treematch_cli::fuzz::{run_fuzz, FuzzConfig};
use treematch_cli::script::run_script;
use treematch_cli::workload::WorkloadKind;

#[derive(Parser)]
#[command(name = "treematch", version, about = "Dynamic maximum matching on forests")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Execute a command script; `-` reads stdin.
    Run {
        file: String,
        /// Edge weights count (maximum-weight matching).
        #[arg(long)]
        weighted: bool,
    },
    /// Random link/cut churn checked against the oracles.
    Fuzz {
        #[arg(long, default_value_t = 512)]
        n: u32,
        #[arg(long, default_value_t = 100_000)]
        ops: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        weighted: bool,
        /// Value check every k ops; 0 disables.
        #[arg(long, default_value_t = 16)]
        audit_every: usize,
        /// Full structural audit every k ops; 0 disables.
        #[arg(long, default_value_t = 0)]
        validate_every: usize,
        /// Compare with a fresh build every k ops; 0 disables.
        #[arg(long, default_value_t = 0)]
        rebuild_every: usize,
    },
    /// Scaling benchmark, written as CSV.
    Bench {
        #[arg(long, value_delimiter = ',', default_values = ["path", "star", "random"])]
        kinds: Vec<WorkloadKind>,
        /// Sizes, each a number or `2^k`.
        #[arg(long, value_delimiter = ',', value_parser = parse_size)]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_delimiter = ',', default_values = ["link", "cut", "card"])]
        ops: Vec<BenchOp>,
        #[arg(long, default_value_t = 10_000)]
        updates: usize,
        #[arg(long, default_value_t = 100_000)]
        queries: usize,
        /// Output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_size(s: &str) -> Result<usize, String> {
    let parsed = match s.strip_prefix("2^") {
        Some(k) => k.parse::<u32>().ok().and_then(|k| 1usize.checked_shl(k)),
        None => s.parse().ok(),
    };
    parsed.filter(|&n| n >= 1).ok_or_else(|| format!("bad size `{s}`"))
}

fn main() -> ExitCode {
    match real_main() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("treematch: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn real_main() -> Result<bool> {
    let cli = Cli::parse();
    match cli.command {
        Cmd::Run { file, weighted } => {
            let text = if file == "-" {
                let mut s = String::new();
                io::stdin().read_to_string(&mut s).context("reading stdin")?;
                s
            } else {
                fs::read_to_string(&file).with_context(|| format!("reading {file}"))?
            };
            let out = run_script(&text, weighted);
            io::stdout().write_all(out.text.as_bytes())?;
            Ok(!out.failed)
        }
        Cmd::Fuzz { n, ops, seed, weighted, audit_every, validate_every, rebuild_every } => {
            anyhow::ensure!(n >= 2, "--n must be at least 2");
            let cfg = FuzzConfig { n, ops, seed, weighted, audit_every, validate_every, rebuild_every, ..FuzzConfig::default() };
            let r = run_fuzz(&cfg);
            println!(
                "ops {} links {} cuts {} value_checks {} validations {} rebuilds {} failures {}",
                r.links + r.cuts,
                r.links,
                r.cuts,
                r.value_checks,
                r.validations,
                r.rebuilds,
                r.failures.len()
            );
            for f in &r.failures {
                println!("failure {f}");
            }
            Ok(r.ok())
        }
        Cmd::Bench { kinds, sizes, seed, ops, updates, queries, out } => {
            anyhow::ensure!(sizes.windows(2).all(|w| w[0] <= w[1]), "--sizes must be ascending");
            let cfg = BenchConfig { ops, updates, queries, ..BenchConfig::default() };
            let records = bench(&kinds, &sizes, seed, &cfg);
            match out {
                Some(path) => {
                    let f = fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
                    write_csv(&records, f)?;
                }
                None => write_csv(&records, io::stdout().lock())?,
            }
            Ok(true)
        }
    }
}
