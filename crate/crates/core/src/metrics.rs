//! Accuracy metrics and holonomy summaries for evaluation sweeps.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::holonomy::ChordReport;
use crate::scalar::Scalar;
use crate::sectors::SectorResult;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricError {
    #[error("shape mismatch: {0}")]
    Shape(String),
}

fn check_shapes<T>(a: &[Vec<T>], b: &[Vec<T>]) -> Result<(), MetricError> {
    if a.len() != b.len() {
        return Err(MetricError::Shape(format!("{} vs {} variables", a.len(), b.len())));
    }
    for (v, (x, y)) in a.iter().zip(b).enumerate() {
        if x.len() != y.len() {
            return Err(MetricError::Shape(format!("variable {v}: {} vs {} states", x.len(), y.len())));
        }
    }
    Ok(())
}

/// Total variation between two distributions on one variable.
pub fn tv<T: Scalar>(p: &[T], q: &[T]) -> T {
    p.iter().zip(q).map(|(&a, &b)| (a - b).abs()).sum::<T>() * T::lit(0.5)
}

/// Mean over variables of the total variation distance. Zero for an empty model.
pub fn mean_tv<T: Scalar>(beliefs: &[Vec<T>], reference: &[Vec<T>]) -> Result<T, MetricError> {
    check_shapes(beliefs, reference)?;
    if beliefs.is_empty() {
        return Ok(T::zero());
    }
    let total: T = beliefs.iter().zip(reference).map(|(p, q)| tv(p, q)).sum();
    Ok(total / T::from_usize(beliefs.len()).unwrap())
}

/// Largest per-variable total variation.
pub fn max_tv<T: Scalar>(beliefs: &[Vec<T>], reference: &[Vec<T>]) -> Result<T, MetricError> {
    check_shapes(beliefs, reference)?;
    Ok(beliefs.iter().zip(reference).map(|(p, q)| tv(p, q)).fold(T::zero(), T::max))
}

/// Mean log-probability of the true states. Returns `-inf` as soon as any
/// true state has zero belief; `floor`, if given, clamps each term from below.
pub fn mean_log_score<T: Scalar>(beliefs: &[Vec<T>], truth: &[usize], floor: Option<f64>) -> Result<f64, MetricError> {
    if beliefs.len() != truth.len() {
        return Err(MetricError::Shape(format!("{} beliefs vs {} truth states", beliefs.len(), truth.len())));
    }
    if truth.is_empty() {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for (v, (b, &x)) in beliefs.iter().zip(truth).enumerate() {
        let p = b.get(x).ok_or_else(|| MetricError::Shape(format!("variable {v}: state {x} out of range")))?;
        let mut l = p.as_f64().ln();
        if let Some(f) = floor {
            l = l.max(f);
        }
        total += l;
    }
    Ok(total / truth.len() as f64)
}

pub fn map_hamming(assignment: &[usize], truth: &[usize]) -> Result<usize, MetricError> {
    if assignment.len() != truth.len() {
        return Err(MetricError::Shape(format!("{} vs {} entries", assignment.len(), truth.len())));
    }
    Ok(assignment.iter().zip(truth).filter(|(a, b)| a != b).count())
}

/// Average ranks (1-based), ties sharing the mean rank.
fn ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut r = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let mean = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            r[k] = mean;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation with tie correction. `None` when either
/// sample is constant or the lengths differ.
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    if vx == 0.0 || vy == 0.0 {
        return None;
    }
    Some(cov / (vx * vy).sqrt())
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct HolonomySignature {
    pub chords: usize,
    pub nontrivial: usize,
    /// Chord holonomies with exactly one mode.
    pub single_mode: usize,
    /// `(orbit size, count)`, ascending by size. Taken from the sector result
    /// when present, otherwise from the chord mode quotients.
    pub orbit_histogram: Vec<(usize, usize)>,
    pub num_orbits: usize,
    /// Sector weights, descending.
    pub weights: Vec<f64>,
}

pub fn holonomy_signature(reports: &[ChordReport], sectors: Option<&SectorResult>) -> HolonomySignature {
    let sizes: Vec<usize> = match sectors {
        Some(s) => s.orbits.iter().map(Vec::len).collect(),
        None => reports.iter().flat_map(|r| r.mode_sizes.iter().copied()).collect(),
    };
    let mut hist = std::collections::BTreeMap::new();
    for s in &sizes {
        *hist.entry(*s).or_insert(0) += 1;
    }
    let mut weights = sectors.map(|s| s.weights.clone()).unwrap_or_default();
    weights.sort_by(|a, b| b.total_cmp(a));
    HolonomySignature {
        chords: reports.len(),
        nontrivial: match sectors {
            Some(s) => s.nontrivial_generators,
            None => reports.iter().filter(|r| !r.trivial).count(),
        },
        single_mode: reports.iter().filter(|r| r.mode_sizes.len() == 1).count(),
        orbit_histogram: hist.into_iter().collect(),
        num_orbits: sizes.len(),
        weights,
    }
}

/// One CSV row per (instance, method).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub family: String,
    pub topology: String,
    pub seed: u64,
    pub epsilon: f64,
    pub eta: f64,
    pub method: String,
    pub num_variables: usize,
    pub num_factors: usize,
    pub status: String,
    pub mean_tv: Option<f64>,
    pub max_tv: Option<f64>,
    pub mean_log_score: Option<f64>,
    pub map_hamming: Option<usize>,
    pub converged: bool,
    pub oscillating: bool,
    pub iterations: usize,
    pub chords: usize,
    pub nontrivial_generators: usize,
    pub num_orbits: usize,
    pub max_orbit: usize,
    pub top_weight: Option<f64>,
    pub exact: bool,
    pub time_ms: f64,
}

impl MetricsRow {
    pub fn with_signature(mut self, sig: &HolonomySignature) -> Self {
        self.chords = sig.chords;
        self.nontrivial_generators = sig.nontrivial;
        self.num_orbits = sig.num_orbits;
        self.max_orbit = sig.orbit_histogram.last().map_or(0, |&(s, _)| s);
        self.top_weight = sig.weights.first().copied();
        self
    }
}
