use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use hatcc::generators::{
    chain_with_chord, four_cycle, grid_mrf, permutation_graph, random_factor_tree, zk_sync, GenError, GroundTruth,
    Instance, ZkParams,
};
use hatcc::FactorGraphF64;
use serde_json::json;

use crate::args::{usage, Family, GenArgs, Parity};

fn plain(family: &str, seed: u64, graph: FactorGraphF64, params: serde_json::Value) -> Instance<f64> {
    Instance {
        graph,
        truth: GroundTruth {
            family: family.into(),
            seed,
            truth: None,
            edges: Vec::new(),
            corrupted_edges: Vec::new(),
            params,
        },
    }
}

fn invalid(e: GenError) -> anyhow::Error {
    usage(e.to_string())
}

pub fn build(family: &Family) -> Result<Instance<f64>> {
    Ok(match family {
        Family::FourCycle { parity } => {
            let odd = *parity == Parity::Odd;
            plain("four-cycle", 0, four_cycle(odd), json!({ "parity": if odd { "odd" } else { "even" } }))
        }
        Family::Zk { k, topo, eta, eps, seed } => {
            zk_sync(topo.topology()?, ZkParams { k: *k, eta: *eta, epsilon: *eps }, *seed).map_err(invalid)?
        }
        Family::Perm { domain, topo, noise, mode, seed } => {
            permutation_graph(topo.topology()?, *domain, *noise, (*mode).into(), *seed).map_err(invalid)?
        }
        Family::Grid { rows, cols, coupling, field, seed } => {
            if *rows == 0 || *cols == 0 {
                return Err(usage("grid needs positive --rows and --cols"));
            }
            let g = grid_mrf(*rows, *cols, *coupling, *field, *seed);
            plain("grid", *seed, g, json!({ "rows": rows, "cols": cols, "coupling": coupling, "field": field }))
        }
        Family::Tree { n, card, seed } => {
            if *n == 0 || *card == 0 {
                return Err(usage("tree needs positive --n and --card"));
            }
            plain("tree", *seed, random_factor_tree(*n, *card, *seed), json!({ "n": n, "card": card }))
        }
        Family::Chain { n, seed } => {
            if *n == 0 {
                return Err(usage("chain needs positive --n"));
            }
            plain("chain", *seed, chain_with_chord(*n, *seed), json!({ "n": n }))
        }
    })
}

fn sidecar_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{stem}.truth.json"))
}

pub fn run(args: GenArgs) -> Result<()> {
    let inst = build(&args.family)?;
    let text = hatcc::io::to_json_string(&inst.graph);
    let truth = serde_json::to_string_pretty(&inst.truth)? + "\n";
    match &args.out {
        Some(out) => {
            std::fs::write(out, text + "\n").with_context(|| format!("writing {}", out.display()))?;
            let side = args.truth.clone().unwrap_or_else(|| sidecar_path(out));
            std::fs::write(&side, truth).with_context(|| format!("writing {}", side.display()))?;
        }
        None => {
            println!("{text}");
            if let Some(side) = &args.truth {
                std::fs::write(side, truth).with_context(|| format!("writing {}", side.display()))?;
            }
        }
    }
    Ok(())
}
