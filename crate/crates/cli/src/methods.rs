use std::time::Instant;

use anyhow::Result;
use hatcc::bp;
use hatcc::compile::{hatcc_infer, HatccOptions, Status};
use hatcc::holonomy::{analyze_chords, ChordReport};
use hatcc::metrics::{max_tv, mean_tv, MetricError};
use hatcc::nerve::{backbone, build_factor_nerve};
use hatcc::oracle::{exact_map_capped, exact_marginals_capped};
use hatcc::sectors::{default_base, sector_infer, SectorResult};
use hatcc::{FactorGraphF64, Semiring};
use serde_json::{json, Value};

use crate::args::{usage, Method, MethodOpts};

/// Outcome of one method on one instance.
pub struct MethodRun {
    pub method: Method,
    pub unsat: bool,
    pub z: Option<f64>,
    pub log_z: Option<f64>,
    /// Empty when unsatisfiable.
    pub marginals: Vec<Vec<f64>>,
    pub converged: bool,
    pub oscillating: bool,
    pub iterations: usize,
    pub exact: bool,
    pub chords: Vec<ChordReport>,
    pub sectors: Option<SectorResult>,
    /// Method-specific fields merged into the JSON output.
    pub extra: serde_json::Map<String, Value>,
    pub timings: Value,
    pub time_ms: f64,
    /// Timing-free holonomy and orbit structure, hashed by `--checksum`.
    pub structure: Value,
}

impl MethodRun {
    pub fn status(&self) -> &'static str {
        if self.unsat {
            "unsat"
        } else {
            "ok"
        }
    }

    pub fn json(&self, timings: bool) -> Value {
        let mut m = serde_json::Map::new();
        m.insert("method".into(), json!(self.method.name()));
        m.insert("status".into(), json!(self.status()));
        m.insert("Z".into(), json!(self.z));
        m.insert("log_Z".into(), json!(self.log_z.filter(|x| x.is_finite())));
        m.insert("marginals".into(), json!(self.marginals));
        m.insert("exact".into(), json!(self.exact));
        m.insert("holonomy".into(), json!(self.chords));
        m.extend(self.extra.clone());
        if timings {
            m.insert("timings".into(), self.timings.clone());
        }
        Value::Object(m)
    }
}

fn chord_reports(graph: &FactorGraphF64, opts: &MethodOpts) -> Result<Vec<ChordReport>> {
    let nerve = build_factor_nerve(graph);
    let bb = backbone(&nerve, opts.backbone.options());
    let chords = analyze_chords(graph, &nerve, &bb, &opts.holonomy.options())?;
    Ok(chords.iter().map(|c| c.report(&nerve)).collect())
}

fn with_semiring(graph: &FactorGraphF64, r: Semiring) -> Result<FactorGraphF64> {
    let (_, vars, factors) = graph.clone().into_parts();
    Ok(FactorGraphF64::new(r, vars, factors)?)
}

pub fn argmax(p: &[f64]) -> usize {
    (0..p.len()).fold(0, |best, i| if p[i] > p[best] { i } else { best })
}

pub fn run(graph: &FactorGraphF64, method: Method, opts: &MethodOpts) -> Result<MethodRun> {
    let start = Instant::now();
    let mut extra = serde_json::Map::new();
    let mut sectors = None;
    let mut timings = Value::Null;
    let (unsat, z, log_z, marginals, converged, oscillating, iterations, exact, chords);
    match method {
        Method::Bp => {
            let res = bp::run(graph, &opts.bp())?;
            let lz = if res.degenerate.is_empty() { bp::bethe_log_z(graph, &res.messages) } else { f64::NEG_INFINITY };
            unsat = !res.degenerate.is_empty();
            log_z = Some(lz);
            z = Some(lz.exp());
            marginals = if unsat { Vec::new() } else { res.beliefs.clone() };
            converged = res.converged;
            oscillating = res.oscillating;
            iterations = res.iterations;
            exact = false;
            chords = chord_reports(graph, opts).unwrap_or_default();
            extra.insert("converged".into(), json!(converged));
            extra.insert("oscillating".into(), json!(oscillating));
            extra.insert("iterations".into(), json!(iterations));
            extra.insert("final_residual".into(), json!(res.residual_trace.last()));
            extra.insert("degenerate".into(), json!(res.degenerate));
        }
        Method::Hatcc => {
            let hopts = HatccOptions {
                backbone: opts.backbone.options(),
                holonomy: opts.holonomy.options(),
                force_cluster: false,
            };
            let out = hatcc_infer(graph, &hopts)?;
            unsat = out.status == Status::Unsat;
            z = Some(out.z);
            log_z = Some(out.z.ln());
            marginals = out.marginals.clone();
            converged = true;
            oscillating = false;
            iterations = 0;
            exact = out.diagnostics.exact;
            chords = out.chords.clone();
            extra.insert("diagnostics".into(), json!(out.diagnostics));
            extra.insert("certificate".into(), json!(out.certificate));
            timings = json!(out.timings);
        }
        Method::Sectors => {
            let base = match opts.base {
                Some(b) if b >= graph.num_variables() => return Err(usage(format!("--base {b} is not a variable"))),
                Some(b) => b,
                None => default_base(graph),
            };
            let res = sector_infer(graph, base, &opts.sectors())?;
            unsat = res.unsat;
            let top = res.sectors.iter().map(|s| s.log_z).fold(f64::NEG_INFINITY, f64::max);
            let lz = if unsat {
                f64::NEG_INFINITY
            } else {
                top + res.sectors.iter().map(|s| (s.log_z - top).exp()).sum::<f64>().ln()
            };
            log_z = Some(lz);
            z = Some(lz.exp());
            marginals = res.marginals.clone();
            converged = res.sectors.iter().all(|s| s.converged);
            oscillating = false;
            iterations = 0;
            exact = res.exact;
            chords = chord_reports(graph, opts).unwrap_or_default();
            extra.insert("sectors".into(), json!(res));
            sectors = Some(res);
        }
        Method::Oracle => {
            let o = exact_marginals_capped(graph, opts.oracle_cap)?;
            let map = exact_map_capped(&with_semiring(graph, Semiring::MaxProduct)?, opts.oracle_cap)?;
            unsat = o.unsat;
            z = Some(o.z);
            log_z = Some(o.z.ln());
            marginals = if unsat { Vec::new() } else { o.marginals };
            converged = true;
            oscillating = false;
            iterations = 0;
            exact = true;
            chords = chord_reports(graph, opts).unwrap_or_default();
            if !unsat {
                extra.insert("map".into(), json!({ "assignment": map.assignment, "weight": map.weight }));
            }
        }
    }
    let mut structure = serde_json::Map::new();
    structure.insert("status".into(), json!(if unsat { "unsat" } else { "ok" }));
    structure.insert("holonomy".into(), json!(chords));
    if let Some(s) = &sectors {
        structure.insert("generators".into(), json!(s.generators));
        structure.insert("orbits".into(), json!(s.orbits));
    }
    Ok(MethodRun {
        method,
        unsat,
        z,
        log_z,
        marginals,
        converged,
        oscillating,
        iterations,
        exact,
        chords,
        sectors,
        extra,
        timings,
        time_ms: start.elapsed().as_secs_f64() * 1e3,
        structure: Value::Object(structure),
    })
}

/// MAP estimate paired with each method: max-product BP or compilation for
/// `bp`/`hatcc`, exact enumeration for `oracle`, marginal argmax for `sectors`.
pub fn map_assignment(graph: &FactorGraphF64, run: &MethodRun, opts: &MethodOpts) -> Result<Option<Vec<usize>>> {
    if run.unsat {
        return Ok(None);
    }
    let decode = |m: &[Vec<f64>]| m.iter().map(|p| argmax(p)).collect::<Vec<_>>();
    Ok(match run.method {
        Method::Bp => {
            let res = bp::run(&with_semiring(graph, Semiring::MaxProduct)?, &opts.bp())?;
            res.degenerate.is_empty().then(|| decode(&res.beliefs))
        }
        Method::Hatcc => {
            let hopts = HatccOptions {
                backbone: opts.backbone.options(),
                holonomy: opts.holonomy.options(),
                force_cluster: false,
            };
            let out = hatcc_infer(&with_semiring(graph, Semiring::MaxProduct)?, &hopts)?;
            (out.status == Status::Ok).then(|| decode(&out.marginals))
        }
        Method::Oracle => run.extra.get("map").and_then(|m| serde_json::from_value(m["assignment"].clone()).ok()),
        Method::Sectors => Some(decode(&run.marginals)),
    })
}

type Score = fn(&[Vec<f64>], &[Vec<f64>]) -> Result<f64, MetricError>;

pub fn compare(graph: &FactorGraphF64, methods: &[Method], opts: &MethodOpts, timings: bool) -> Result<Value> {
    let reference = exact_marginals_capped(graph, opts.oracle_cap).ok().filter(|o| !o.unsat);
    let mut rows = Vec::new();
    for &m in methods {
        let r = match run(graph, m, opts) {
            Ok(r) => r,
            Err(e) => {
                rows.push(json!({ "method": m.name(), "status": "error", "error": format!("{e:#}") }));
                continue;
            }
        };
        let score = |f: Score| reference.as_ref().filter(|_| !r.unsat).and_then(|o| f(&r.marginals, &o.marginals).ok());
        let mut row = json!({
            "method": m.name(),
            "status": r.status(),
            "Z": r.z,
            "log_Z": r.log_z.filter(|x| x.is_finite()),
            "exact": r.exact,
            "converged": r.converged,
            "oscillating": r.oscillating,
            "mean_tv": score(mean_tv),
            "max_tv": score(max_tv),
            "nontrivial_chords": r.chords.iter().filter(|c| !c.trivial).count(),
        });
        if timings {
            row["time_ms"] = json!(r.time_ms);
        }
        rows.push(row);
    }
    Ok(json!({
        "reference": if reference.is_some() { "oracle" } else { "none" },
        "methods": rows,
    }))
}
