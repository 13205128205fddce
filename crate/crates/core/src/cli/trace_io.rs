//! Trace serialization.
//!
//! JSON layout:
//!
//! ```text
//! { "scheme", "theta", "tol", "max_iter", "guard_domain", "status",
//!   "iterates": [{"n", "x": [...], "y": [...]}],
//!   "residuals": [...], "distances": [...] | null,
//!   "operator_name", "seed": int | null, "stored_every" }
//! ```
//!
//! Every float is written with 17 significant digits, which is enough for
//! an exact round trip of `f64`.

use serde::{Deserialize, Serialize, Serializer};
use serde_json::value::RawValue;

use crate::error::{Error, Result};
use crate::iteration::{IterationTrace, Scheme, SchemeConfig, Status};
use crate::operators::CoupledPair;
use crate::space::Vector;

/// `f64` rendered with 17 significant digits.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

struct Sig17(f64);

impl Serialize for Sig17 {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if !self.0.is_finite() {
            return Err(serde::ser::Error::custom("non-finite value in trace"));
        }
        RawValue::from_string(format_f64(self.0))
            .map_err(serde::ser::Error::custom)?
            .serialize(s)
    }
}

fn sig17s(values: &[f64]) -> Vec<Sig17> {
    values.iter().copied().map(Sig17).collect()
}

#[derive(Serialize)]
struct IterateOut {
    n: usize,
    x: Vec<Sig17>,
    y: Vec<Sig17>,
}

#[derive(Serialize)]
struct TraceOut<'a> {
    scheme: Scheme,
    theta: Sig17,
    tol: Sig17,
    max_iter: usize,
    guard_domain: bool,
    status: Status,
    iterates: Vec<IterateOut>,
    residuals: Vec<Sig17>,
    distances: Option<Vec<Sig17>>,
    operator_name: &'a str,
    seed: Option<u64>,
    stored_every: usize,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct IterateIn {
    n: usize,
    x: Vector,
    y: Vector,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TraceIn {
    scheme: Scheme,
    theta: f64,
    tol: f64,
    max_iter: usize,
    guard_domain: bool,
    status: Status,
    iterates: Vec<IterateIn>,
    residuals: Vec<f64>,
    distances: Option<Vec<f64>>,
    operator_name: String,
    seed: Option<u64>,
    stored_every: usize,
}

pub fn trace_to_json(trace: &IterationTrace) -> Result<String> {
    let doc = TraceOut {
        scheme: trace.config.scheme,
        theta: Sig17(trace.config.theta),
        tol: Sig17(trace.config.tol),
        max_iter: trace.config.max_iter,
        guard_domain: trace.config.guard_domain,
        status: trace.status,
        iterates: trace
            .steps
            .iter()
            .zip(&trace.iterates)
            .map(|(&n, p)| IterateOut {
                n,
                x: sig17s(p.x.as_slice()),
                y: sig17s(p.y.as_slice()),
            })
            .collect(),
        residuals: sig17s(&trace.residuals),
        distances: trace.distances.as_deref().map(sig17s),
        operator_name: &trace.operator_name,
        seed: trace.seed,
        stored_every: trace.stored_every,
    };
    serde_json::to_string_pretty(&doc).map_err(|e| Error::config("trace", e.to_string()))
}

pub fn trace_from_json(text: &str) -> Result<IterationTrace> {
    let doc: TraceIn = serde_json::from_str(text).map_err(|e| Error::config("trace", e.to_string()))?;
    let n = doc.iterates.len();
    if doc.residuals.len() != n || doc.distances.as_ref().is_some_and(|d| d.len() != n) {
        return Err(Error::config("trace", "iterates, residuals and distances differ in length"));
    }
    let mut steps = Vec::with_capacity(n);
    let mut iterates = Vec::with_capacity(n);
    for it in doc.iterates {
        steps.push(it.n);
        iterates.push(CoupledPair::new(it.x, it.y).map_err(|e| Error::config("iterates", e.to_string()))?);
    }
    Ok(IterationTrace {
        operator_name: doc.operator_name,
        seed: doc.seed,
        config: SchemeConfig {
            scheme: doc.scheme,
            theta: doc.theta,
            tol: doc.tol,
            max_iter: doc.max_iter,
            guard_domain: doc.guard_domain,
        },
        stored_every: doc.stored_every,
        steps,
        iterates,
        residuals: doc.residuals,
        distances: doc.distances,
        status: doc.status,
    })
}

/// Columns `n, x_0.., y_0.., residual, distance_to_target`; the distance
/// column is empty when no reference point was given.
pub fn trace_to_csv(trace: &IterationTrace) -> Result<String> {
    let dim = trace.iterates.first().map_or(0, CoupledPair::dim);
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["n".to_string()];
    header.extend((0..dim).map(|i| format!("x_{i}")));
    header.extend((0..dim).map(|i| format!("y_{i}")));
    header.push("residual".into());
    header.push("distance_to_target".into());
    w.write_record(&header).map_err(csv_err)?;
    for (i, p) in trace.iterates.iter().enumerate() {
        let mut row = vec![trace.steps[i].to_string()];
        row.extend(p.x.as_slice().iter().map(|&v| format_f64(v)));
        row.extend(p.y.as_slice().iter().map(|&v| format_f64(v)));
        row.push(format_f64(trace.residuals[i]));
        row.push(trace.distances.as_ref().map_or(String::new(), |d| format_f64(d[i])));
        w.write_record(&row).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::config("csv", e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn csv_err(e: csv::Error) -> Error {
    Error::config("csv", e.to_string())
}

/// One row of a sweep summary.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub theta: f64,
    pub iterations: usize,
    pub final_residual: f64,
    pub status: Status,
}

pub fn sweep_to_csv(rows: &[SweepRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["theta", "iterations", "final_residual", "status"]).map_err(csv_err)?;
    for r in rows {
        w.write_record([
            format_f64(r.theta),
            r.iterations.to_string(),
            format_f64(r.final_residual),
            r.status.as_str().to_string(),
        ])
        .map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::config("csv", e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}
