use std::time::Instant;

use anyhow::{Context, Result};
use hatcc::generators::{permutation_graph, zk_sync, Instance, ZkParams};
use hatcc::metrics::{holonomy_signature, map_hamming, max_tv, mean_log_score, mean_tv, MetricsRow};
use hatcc::oracle::exact_marginals_capped;
use hatcc::sectors::{default_base, sector_infer};
use rayon::prelude::*;

use crate::args::{usage, SweepArgs, SweepFamily};
use crate::methods::{self, map_assignment};

struct Job {
    eps: f64,
    eta: f64,
    seed: u64,
}

fn instance(args: &SweepArgs, job: &Job) -> Result<Instance<f64>> {
    let topo = args.topo.topology()?;
    match args.family {
        SweepFamily::Zk => zk_sync(topo, ZkParams { k: args.k, eta: job.eta, epsilon: job.eps }, job.seed),
        SweepFamily::Perm => permutation_graph(topo, args.k, job.eps, args.perm_mode.into(), job.seed),
    }
    .map_err(|e| usage(e.to_string()))
}

fn rows_for(args: &SweepArgs, job: &Job) -> Result<Vec<MetricsRow>> {
    let inst = instance(args, job)?;
    let g = &inst.graph;
    let reference = exact_marginals_capped(g, args.opts.oracle_cap).ok().filter(|o| !o.unsat);
    let truth = inst.truth.truth.as_deref();
    // One signature per instance, shared by every method's row: sector
    // generators on pairwise models, chord holonomy otherwise.
    let base = args.opts.base.unwrap_or_else(|| default_base(g));
    let shared = sector_infer(g, base, &args.opts.sectors()).ok();
    let mut rows = Vec::new();
    for &m in &args.methods {
        let t = Instant::now();
        let run = methods::run(g, m, &args.opts).with_context(|| format!("{} on seed {}", m.name(), job.seed))?;
        let map = map_assignment(g, &run, &args.opts)?;
        let elapsed = t.elapsed().as_secs_f64() * 1e3;
        let ok = !run.unsat;
        let row = MetricsRow {
            family: format!("{:?}", args.family).to_lowercase(),
            topology: format!("{:?}", args.topo.topology).to_lowercase(),
            seed: job.seed,
            epsilon: job.eps,
            eta: job.eta,
            method: m.name().into(),
            num_variables: g.num_variables(),
            num_factors: g.num_factors(),
            status: run.status().into(),
            mean_tv: reference.as_ref().filter(|_| ok).and_then(|o| mean_tv(&run.marginals, &o.marginals).ok()),
            max_tv: reference.as_ref().filter(|_| ok).and_then(|o| max_tv(&run.marginals, &o.marginals).ok()),
            mean_log_score: truth
                .filter(|_| ok)
                .and_then(|x| mean_log_score(&run.marginals, x, args.opts.log_floor).ok()),
            map_hamming: truth.zip(map.as_deref()).and_then(|(x, a)| map_hamming(a, x).ok()),
            converged: run.converged,
            oscillating: run.oscillating,
            iterations: run.iterations,
            exact: run.exact,
            time_ms: if args.timings { elapsed } else { 0.0 },
            ..Default::default()
        };
        rows.push(row.with_signature(&holonomy_signature(&run.chords, run.sectors.as_ref().or(shared.as_ref()))));
    }
    Ok(rows)
}

pub fn run(args: SweepArgs) -> Result<()> {
    if args.methods.is_empty() {
        return Err(usage("--methods must name at least one method"));
    }
    let etas = match args.family {
        SweepFamily::Zk => args.eta.clone(),
        SweepFamily::Perm => vec![0.0],
    };
    let mut jobs = Vec::new();
    for &eps in &args.eps {
        for &eta in &etas {
            for seed in args.seed_start..args.seed_start + args.seeds {
                jobs.push(Job { eps, eta, seed });
            }
        }
    }
    let mut rows: Vec<MetricsRow> =
        jobs.par_iter().map(|j| rows_for(&args, j)).collect::<Result<Vec<_>>>()?.into_iter().flatten().collect();
    let order = |m: &str| args.methods.iter().position(|x| x.name() == m).unwrap_or(usize::MAX);
    rows.sort_by(|a, b| {
        a.epsilon
            .total_cmp(&b.epsilon)
            .then(a.eta.total_cmp(&b.eta))
            .then(a.seed.cmp(&b.seed))
            .then(order(&a.method).cmp(&order(&b.method)))
    });
    let sink: Box<dyn std::io::Write> = match &args.out {
        Some(p) => Box::new(std::fs::File::create(p).with_context(|| format!("creating {}", p.display()))?),
        None => Box::new(std::io::stdout().lock()),
    };
    let mut w = csv::Writer::from_writer(sink);
    for r in &rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
