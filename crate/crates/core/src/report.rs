//! Run reports and deterministic JSON output.

use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::Value;

use crate::error::{Error, Result};
use crate::oracles::OracleValue;
use crate::schemes::{LevelReport, SchemeOptions};

/// `x` rounded to 12 significant digits.
pub fn round12(x: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    if !x.is_finite() {
        return x;
    }
    format!("{x:.11e}").parse().unwrap_or(x)
}

/// Rounds every float in `v` to 12 significant digits.
pub fn round_value(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = round12(n.as_f64().unwrap_or(f64::NAN));
            serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
        }
        Value::Array(xs) => Value::Array(xs.into_iter().map(round_value).collect()),
        Value::Object(map) => {
            Value::Object(map.into_iter().map(|(k, v)| (k, round_value(v))).collect())
        }
        other => other,
    }
}

/// Pretty JSON with floats rounded; identical input gives identical bytes.
pub fn to_json_string<T: Serialize>(value: &T) -> Result<String> {
    let v = serde_json::to_value(value).map_err(|e| Error::Parse(e.to_string()))?;
    serde_json::to_string_pretty(&round_value(v)).map_err(|e| Error::Parse(e.to_string()))
}

/// Outcome of one named check.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Verdict {
    pub pass: bool,
    pub detail: Value,
}

impl Verdict {
    pub fn new<T: Serialize>(pass: bool, detail: &T) -> Self {
        Verdict {
            pass,
            detail: serde_json::to_value(detail).unwrap_or(Value::Null),
        }
    }

    pub fn failed(message: impl Into<String>) -> Self {
        Verdict {
            pass: false,
            detail: Value::String(message.into()),
        }
    }
}

/// Settings in force for a run, echoed into every report.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Defaults {
    pub options: SchemeOptions,
    pub tol: f64,
    pub oracle_grid: usize,
    pub lambda_grid: Vec<f64>,
}

/// Output of a pipeline run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunReport {
    pub group: String,
    pub scheme: String,
    pub k_bound: f64,
    pub defaults: Defaults,
    pub levels: Vec<LevelReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleValue>,
    pub verdicts: BTreeMap<String, Verdict>,
}

impl RunReport {
    pub fn pass(&self) -> bool {
        self.verdicts.values().all(|v| v.pass)
    }

    /// `F_i(0)` for every level.
    pub fn f0_column(&self) -> Vec<f64> {
        self.levels.iter().map(|r| r.f0).collect()
    }
}
