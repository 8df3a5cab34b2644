use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use serde::Serialize;

use lkh_rekey::bench::{
    brute_force_optimum, run_algorithm, run_benchmark, Algorithm, BenchConfig, SolverOverrides,
};
use lkh_rekey::costmodel::{default_lambda, Assignment, Target};
use lkh_rekey::dca::dcaep_plus;
use lkh_rekey::keytree::{generate_random_tree, KeyTree, RekeyInstance};

/// Batch rekeying of logical key hierarchy trees.
#[derive(Parser)]
#[command(name = "lkh-rekey", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a seeded random key tree and write it as JSON.
    GenTree {
        #[arg(long)]
        height: u32,
        #[arg(long, default_value_t = 0)]
        balance: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one algorithm on a tree and print its report as JSON.
    Solve {
        #[arg(long)]
        tree: PathBuf,
        /// Comma-separated heap indices of the departing leaves.
        #[arg(long, value_delimiter = ',', default_value = "")]
        departing: Vec<String>,
        #[arg(long)]
        joins: usize,
        #[arg(long, default_value = "dcaep+")]
        algo: String,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        t0: Option<f64>,
        #[arg(long)]
        theta: Option<f64>,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        starts: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Write the per-iteration trace of the best start as JSON lines (dcaep+ only).
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Run a benchmark suite described by a TOML config.
    Bench {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_csv: Option<PathBuf>,
        #[arg(long)]
        out_json: Option<PathBuf>,
    },
    /// Exhaustive global optimum of the placement objective (small instances).
    Oracle {
        #[arg(long)]
        tree: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "")]
        departing: Vec<String>,
        #[arg(long)]
        joins: usize,
        #[arg(long)]
        lambda: Option<f64>,
    },
}

fn read_tree(path: &Path) -> Result<KeyTree> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing tree {}", path.display()))
}

fn parse_indices(raw: &[String]) -> Result<Vec<u64>> {
    raw.iter()
        .map(|s| s.trim())
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<u64>()
                .with_context(|| format!("bad leaf index {s:?}"))
        })
        .collect()
}

fn write_or_print(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

#[derive(Serialize)]
struct Placement {
    /// Joiner j goes to `leaf` (a remaining member) or `slot` (a departing member).
    joiners: Vec<serde_json::Value>,
}

fn placement(instance: &RekeyInstance, a: &Assignment) -> Placement {
    let joiners = a
        .targets()
        .iter()
        .map(|t| match *t {
            Target::Leaf(i) => serde_json::json!({ "split": instance.remaining()[i] }),
            Target::Slot(k) => serde_json::json!({ "replace": instance.departing()[k] }),
        })
        .collect();
    Placement { joiners }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenTree {
            height,
            balance,
            seed,
            out,
        } => {
            let tree = generate_random_tree(height, balance, seed)?;
            write_or_print(out.as_deref(), &serde_json::to_string(&tree)?)
        }
        Command::Solve {
            tree,
            departing,
            joins,
            algo,
            lambda,
            t0,
            theta,
            eps,
            starts,
            seed,
            trace,
        } => {
            let algorithm: Algorithm = algo.parse()?;
            let instance =
                RekeyInstance::new(read_tree(&tree)?, parse_indices(&departing)?, joins)?;
            let overrides = SolverOverrides {
                lambda,
                t0,
                theta,
                epsilon: eps,
                seed,
                starts,
                ..Default::default()
            };
            let report = if let Some(path) = trace {
                if algorithm != Algorithm::DcaepPlus {
                    bail!("--trace is only available for dcaep+");
                }
                let (_, trace, report) = dcaep_plus(&instance, &overrides.config_for(&instance))?;
                fs::write(&path, trace.to_json_lines())
                    .with_context(|| format!("writing {}", path.display()))?;
                report
            } else {
                run_algorithm(&instance, algorithm, &overrides)?
            };
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(())
        }
        Command::Bench {
            config,
            out_csv,
            out_json,
        } => {
            let text = fs::read_to_string(&config)
                .with_context(|| format!("reading {}", config.display()))?;
            let config: BenchConfig =
                toml::from_str(&text).with_context(|| format!("parsing {}", config.display()))?;
            let table = run_benchmark(&config.suite());
            let csv = table.to_csv(config.timing)?;
            match &out_csv {
                Some(path) => {
                    fs::write(path, &csv).with_context(|| format!("writing {}", path.display()))?
                }
                None => print!("{csv}"),
            }
            if let Some(path) = &out_json {
                fs::write(path, table.to_json(config.timing))
                    .with_context(|| format!("writing {}", path.display()))?;
            }
            let failed = table.rows.iter().filter(|r| r.error.is_some()).count();
            if failed > 0 {
                eprintln!("{failed} of {} rows failed", table.rows.len());
            }
            Ok(())
        }
        Command::Oracle {
            tree,
            departing,
            joins,
            lambda,
        } => {
            let instance =
                RekeyInstance::new(read_tree(&tree)?, parse_indices(&departing)?, joins)?;
            let lambda = lambda.unwrap_or_else(|| default_lambda(instance.tree()));
            let (a, objective) = brute_force_optimum(&instance, lambda)?;
            let out = serde_json::json!({
                "lambda": lambda,
                "objective": objective,
                "row_counts": a.row_counts(),
                "placement": placement(&instance, &a),
            });
            println!("{}", serde_json::to_string_pretty(&out)?);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
