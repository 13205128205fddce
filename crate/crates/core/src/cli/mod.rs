//! Command implementations behind the `coupledfix` binary.
//!
//! Exit codes: 0 converged, 1 invalid input, 2 no convergence within
//! `max_iter` (or a detected Picard cycle), 3 non-finite divergence or an
//! iterate leaving the domain.

pub mod problem;
pub mod trace_io;

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use crate::contractivity::{self, ContractivityReport};
use crate::error::{Error, Result};
use crate::iteration::{self, IterationTrace};
use crate::operators::REGISTRY_NAMES;

pub use problem::{AnalyzeSpec, Format, RawProblem, RunSpec};
pub use trace_io::{sweep_to_csv, trace_from_json, trace_to_csv, trace_to_json, SweepRow};

pub const EXIT_INVALID_INPUT: i32 = 1;

pub fn run(spec: &RunSpec) -> Result<IterationTrace> {
    let trace = iteration::iterate(&spec.operator, &spec.x0, &spec.y0, &spec.config, spec.reference.clone())?;
    Ok(trace.with_seed(spec.seed))
}

pub fn render_trace(trace: &IterationTrace, format: Format) -> Result<String> {
    match format {
        Format::Json => trace_to_json(trace),
        Format::Csv => trace_to_csv(trace),
    }
}

pub fn analyze(spec: &AnalyzeSpec) -> Result<ContractivityReport> {
    contractivity::analyze(&spec.operator, spec.samples, spec.seed)
}

pub fn render_report(report: &ContractivityReport) -> Result<String> {
    serde_json::to_string_pretty(report).map_err(|e| Error::config("report", e.to_string()))
}

/// Runs `spec` once per theta (concurrently); rows are ordered by theta.
pub fn sweep(spec: &RunSpec) -> Result<Vec<SweepRow>> {
    if spec.thetas.is_empty() {
        return Err(Error::config("thetas", "at least one theta is required"));
    }
    let mut rows = spec
        .thetas
        .par_iter()
        .map(|&theta| {
            let mut cfg = spec.config;
            cfg.theta = theta;
            let t = iteration::iterate(&spec.operator, &spec.x0, &spec.y0, &cfg, None)?;
            Ok(SweepRow {
                theta,
                iterations: t.iterations(),
                final_residual: t.final_residual(),
                status: t.status,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by(|a, b| a.theta.total_cmp(&b.theta));
    Ok(rows)
}

/// Largest per-row exit code.
pub fn sweep_exit_code(rows: &[SweepRow]) -> i32 {
    rows.iter().map(|r| r.status.exit_code()).max().unwrap_or(0)
}

pub fn list_operators() -> String {
    let describe = |name: &str| match name {
        "example_2_1" => "F(x,y) = (x - 2y)/3 on [-1,1]",
        "example_2_2" => "F(x,y) = 4 - x^2 - 2y on [-4,4] (not a self-map; iterates are projected)",
        "example_4_1" => "F(x,y) = -(x + y)/2 on [-1,1]",
        _ => "F(x,y) = A x + B y + c on a box (matrices from the problem file)",
    };
    REGISTRY_NAMES
        .iter()
        .map(|n| format!("{n:<12} {}\n", describe(n)))
        .collect()
}

/// Writes `text` to `path`, or to stdout when no path is given.
pub fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::config("out", format!("{}: {e}", p.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| if text.ends_with('\n') { Ok(()) } else { out.write_all(b"\n") })
                .map_err(|e| Error::config("out", e.to_string()))
        }
    }
}
