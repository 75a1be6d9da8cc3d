//! `hatcc` command-line front end.
//!
//! Exit codes: 0 when a run completes (UNSAT and non-convergence are
//! results), 1 on internal or I/O errors, 2 on usage errors.

mod args;
mod gen;
mod methods;
mod sweep;

use std::io::Write;
use std::path::Path;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::Parser;
use hatcc::holonomy::analyze_chords;
use hatcc::nerve::{backbone, build_factor_nerve, to_dot};
use hatcc::FactorGraphF64;
use serde_json::json;
use sha2::{Digest, Sha256};

use args::{Cli, Command};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e:#}");
        return ExitCode::from(2);
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => match e.downcast_ref::<args::UsageError>() {
            Some(u) => {
                eprintln!("error: {u}");
                ExitCode::from(2)
            }
            None => {
                eprintln!("error: {e:#}");
                ExitCode::from(1)
            }
        },
    }
}

fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var("HATCC_THREADS") {
        let n: usize = v.parse().with_context(|| format!("HATCC_THREADS must be a positive integer, got {v:?}"))?;
        anyhow::ensure!(n > 0, "HATCC_THREADS must be a positive integer, got 0");
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen(g) => gen::run(g),
        Command::Infer(a) => {
            let graph = load(&a.instance)?;
            let out = methods::run(&graph, a.method, &a.opts)?;
            if a.checksum {
                println!("{}", checksum(&out.structure));
            } else {
                print_json(&out.json(a.timings))?;
            }
            Ok(())
        }
        Command::Diagnose(a) => {
            let graph = load(&a.instance)?;
            let nerve = build_factor_nerve(&graph);
            let bb = backbone(&nerve, a.backbone.options());
            let chords = analyze_chords(&graph, &nerve, &bb, &a.holonomy.options())?;
            let reports: Vec<_> = chords.iter().map(|c| c.report(&nerve)).collect();
            if let Some(path) = &a.dot {
                std::fs::write(path, to_dot(&graph, &nerve, &bb))
                    .with_context(|| format!("writing {}", path.display()))?;
            }
            let structure = json!({ "chords": reports });
            if a.checksum {
                println!("{}", checksum(&structure));
            } else {
                print_json(&json!({
                    "num_factors": nerve.num_factors,
                    "nerve_edges": nerve.edges,
                    "tree_edges": bb.tree_edges,
                    "roots": bb.roots,
                    "chords": reports,
                    "nontrivial": reports.iter().filter(|r| !r.trivial).count(),
                }))?;
            }
            Ok(())
        }
        Command::Sweep(a) => sweep::run(a),
        Command::Compare(a) => {
            let graph = load(&a.instance)?;
            print_json(&methods::compare(&graph, &a.methods, &a.opts, a.timings)?)
        }
    }
}

pub(crate) fn load(path: &Path) -> Result<FactorGraphF64> {
    hatcc::io::load(path).with_context(|| format!("loading {}", path.display()))
}

/// Writes pretty JSON to stdout; a closed pipe is not an error.
pub(crate) fn print_json(v: &serde_json::Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(v)?;
    text.push('\n');
    match std::io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

/// SHA-256 of the compact JSON encoding.
pub(crate) fn checksum(v: &serde_json::Value) -> String {
    let bytes = serde_json::to_vec(v).expect("serializable");
    Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
}
