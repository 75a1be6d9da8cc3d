//! JSON instance format.
//!
//! ```json
//! {"semiring": "sum_product",
//!  "variables": [{"id": 0, "cardinality": 2, "label": "A"}],
//!  "factors": [{"id": 0, "scope": [0], "table": [1.0, 2.0]}]}
//! ```
//!
//! Tables are row-major with the last scope variable fastest. Infinite
//! entries (min-sum zero) are written as the strings `"inf"` / `"-inf"`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::GraphError;
use crate::factor_graph::{FactorDecl, FactorGraph, VariableDecl};
use crate::scalar::Scalar;
use crate::semiring::Semiring;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error(transparent)]
    Invalid(#[from] GraphError),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum Entry {
    Num(f64),
    Special(Special),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
enum Special {
    #[serde(rename = "inf", alias = "Infinity", alias = "+inf")]
    Inf,
    #[serde(rename = "-inf", alias = "-Infinity")]
    NegInf,
    #[serde(rename = "nan", alias = "NaN")]
    Nan,
}

impl Entry {
    fn value(self) -> f64 {
        match self {
            Entry::Num(x) => x,
            Entry::Special(Special::Inf) => f64::INFINITY,
            Entry::Special(Special::NegInf) => f64::NEG_INFINITY,
            Entry::Special(Special::Nan) => f64::NAN,
        }
    }

    fn from_value(x: f64) -> Self {
        if x.is_nan() {
            Entry::Special(Special::Nan)
        } else if x == f64::INFINITY {
            Entry::Special(Special::Inf)
        } else if x == f64::NEG_INFINITY {
            Entry::Special(Special::NegInf)
        } else {
            Entry::Num(x)
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FactorRecord {
    id: usize,
    scope: Vec<usize>,
    table: Vec<Entry>,
}

#[derive(Serialize, Deserialize)]
struct InstanceRecord {
    semiring: Semiring,
    variables: Vec<VariableDecl>,
    factors: Vec<FactorRecord>,
}

/// Parses and validates an instance.
pub fn from_json_str<T: Scalar>(text: &str) -> Result<FactorGraph<T>, IoError> {
    let rec: InstanceRecord = serde_json::from_str(text).map_err(|e| IoError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let factors = rec
        .factors
        .into_iter()
        .map(|f| FactorDecl {
            id: f.id,
            scope: f.scope,
            table: f.table.into_iter().map(|x| T::lit(x.value())).collect(),
        })
        .collect();
    Ok(FactorGraph::new(rec.semiring, rec.variables, factors)?)
}

pub fn to_json_string<T: Scalar>(graph: &FactorGraph<T>) -> String {
    let rec = InstanceRecord {
        semiring: graph.semiring(),
        variables: graph.variables().to_vec(),
        factors: graph
            .factors()
            .iter()
            .map(|f| FactorRecord {
                id: f.id,
                scope: f.scope.clone(),
                table: f.table.iter().map(|x| Entry::from_value(x.as_f64())).collect(),
            })
            .collect(),
    };
    serde_json::to_string_pretty(&rec).expect("instance serializes")
}

pub fn load<T: Scalar>(path: impl AsRef<Path>) -> Result<FactorGraph<T>, IoError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| IoError::Io { path: path.display().to_string(), source })?;
    from_json_str(&text)
}

pub fn save<T: Scalar>(graph: &FactorGraph<T>, path: impl AsRef<Path>) -> Result<(), IoError> {
    let path = path.as_ref();
    fs::write(path, to_json_string(graph)).map_err(|source| IoError::Io { path: path.display().to_string(), source })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::four_cycle;

    #[test]
    fn round_trip_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("g.json");
        let g = four_cycle::<f64>(true);
        save(&g, &p).unwrap();
        let h: FactorGraph<f64> = load(&p).unwrap();
        assert_eq!(g, h);
    }

    #[test]
    fn infinities_round_trip() {
        let mut b = FactorGraph::<f64>::builder(Semiring::MinSum);
        let a = b.variable(2);
        b.factor(&[a], vec![f64::INFINITY, 0.5]);
        let g = b.build().unwrap();
        let text = to_json_string(&g);
        assert!(text.contains("\"inf\""));
        assert_eq!(from_json_str::<f64>(&text).unwrap(), g);
    }

    #[test]
    fn missing_cardinality_is_named() {
        let text = r#"{"semiring":"sum_product","variables":[{"id":0}],"factors":[]}"#;
        let err = from_json_str::<f64>(text).unwrap_err();
        assert!(matches!(err, IoError::Parse { .. }));
        assert!(err.to_string().contains("cardinality"), "{err}");
    }

    #[test]
    fn negative_entry_fails_validation() {
        let text = r#"{"semiring":"sum_product","variables":[{"id":0,"cardinality":2}],
            "factors":[{"id":0,"scope":[0],"table":[1.0,-0.5]}]}"#;
        let err = from_json_str::<f64>(text).unwrap_err();
        assert!(matches!(err, IoError::Invalid(GraphError::Invalid(_))));
        assert!(err.to_string().contains("factor 0"), "{err}");
    }
}
