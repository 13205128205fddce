//! Problem files.
//!
//! A problem file is a flat TOML table. Every key is optional; command-line
//! flags are merged on top with [`RawProblem::merge`].
//!
//! ```toml
//! operator = "linear"          # example_2_1 | example_2_2 | example_4_1 | linear
//! scheme = "krasnoselskij_diagonal"
//! theta = 0.5
//! thetas = [0.25, 0.5, 0.75]   # sweep only
//! tol = 1e-10
//! max_iter = 2000
//! guard_domain = false
//! x0 = [1.0, 0.0]
//! y0 = [0.0, 1.0]              # double schemes; defaults to x0
//! reference = [2.0, 2.0]       # optional fixed point for distances
//! reference_y = [2.0, 2.0]     # defaults to reference
//! a = [[0.2, 0.0], [0.0, 0.1]] # linear only, row-major
//! b = [[0.3, 0.0], [0.0, 0.4]]
//! c = [1.0, 1.0]
//! lower = [-10.0, -10.0]
//! upper = [10.0, 10.0]
//! seed = 42
//! samples = 10000
//! out = "trace.json"
//! format = "json"              # json | csv
//! ```

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::iteration::{Scheme, SchemeConfig};
use crate::operators::{self, BivariateOperator, CoupledPair};
use crate::space::{BoxDomain, Matrix, Vector};

pub const DEFAULT_TOL: f64 = 1e-10;
pub const TOL_ENV: &str = "COUPLEDFIX_DEFAULT_TOL";
pub const DEFAULT_THETA: f64 = 0.5;
pub const DEFAULT_MAX_ITER: usize = 10_000;
pub const DEFAULT_SAMPLES: usize = 10_000;
pub const DEFAULT_SEED: u64 = 0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Json,
    Csv,
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            other => Err(Error::config("format", format!("expected json or csv, got `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawProblem {
    pub operator: Option<String>,
    pub scheme: Option<String>,
    pub theta: Option<f64>,
    pub thetas: Option<Vec<f64>>,
    pub tol: Option<f64>,
    pub max_iter: Option<i64>,
    pub guard_domain: Option<bool>,
    pub x0: Option<Vec<f64>>,
    pub y0: Option<Vec<f64>>,
    pub reference: Option<Vec<f64>>,
    pub reference_y: Option<Vec<f64>>,
    pub a: Option<Vec<Vec<f64>>>,
    pub b: Option<Vec<Vec<f64>>>,
    pub c: Option<Vec<f64>>,
    pub lower: Option<Vec<f64>>,
    pub upper: Option<Vec<f64>>,
    pub seed: Option<i64>,
    pub samples: Option<i64>,
    pub out: Option<PathBuf>,
    pub format: Option<String>,
}

/// Everything `run` and `sweep` need.
#[derive(Debug, Clone)]
pub struct RunSpec {
    pub operator: BivariateOperator,
    pub config: SchemeConfig,
    pub x0: Vector,
    pub y0: Vector,
    pub reference: Option<CoupledPair>,
    pub seed: Option<u64>,
    pub thetas: Vec<f64>,
    pub out: Option<PathBuf>,
    pub format: Format,
}

#[derive(Debug, Clone)]
pub struct AnalyzeSpec {
    pub operator: BivariateOperator,
    pub samples: usize,
    pub seed: u64,
    pub out: Option<PathBuf>,
}

/// Built-in default tolerance, overridable through `COUPLEDFIX_DEFAULT_TOL`.
pub fn default_tol() -> Result<f64> {
    match std::env::var(TOL_ENV) {
        Ok(v) => {
            let tol: f64 = v
                .trim()
                .parse()
                .map_err(|_| Error::config(TOL_ENV, format!("not a number: `{v}`")))?;
            if !(tol > 0.0) || !tol.is_finite() {
                return Err(Error::config(TOL_ENV, format!("must be positive, got {tol}")));
            }
            Ok(tol)
        }
        Err(_) => Ok(DEFAULT_TOL),
    }
}

fn vector(field: &str, coords: &[f64]) -> Result<Vector> {
    Vector::new(coords.to_vec()).map_err(|e| Error::config(field, e.to_string()))
}

fn matrix(field: &str, rows: &[Vec<f64>]) -> Result<Matrix> {
    Matrix::from_rows(rows.to_vec()).map_err(|e| Error::config(field, e.to_string()))
}

fn check_dim(field: &str, v: &Vector, dim: usize) -> Result<()> {
    if v.dim() != dim {
        return Err(Error::config(
            field,
            format!("expected {dim} coordinates, got {}", v.dim()),
        ));
    }
    Ok(())
}

fn nonnegative(field: &str, value: i64) -> Result<u64> {
    u64::try_from(value).map_err(|_| Error::config(field, format!("must be nonnegative, got {value}")))
}

impl RawProblem {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config("problem file", e.message().to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config("problem file", format!("{}: {e}", path.display())))?;
        RawProblem::from_toml_str(&text)
    }

    /// Fields set in `over` replace those in `self`.
    pub fn merge(self, over: RawProblem) -> RawProblem {
        macro_rules! pick {
            ($($f:ident),*) => {
                RawProblem { $($f: over.$f.or(self.$f)),* }
            };
        }
        pick!(
            operator, scheme, theta, thetas, tol, max_iter, guard_domain, x0, y0, reference,
            reference_y, a, b, c, lower, upper, seed, samples, out, format
        )
    }

    pub fn build_operator(&self) -> Result<BivariateOperator> {
        let name = self
            .operator
            .as_deref()
            .ok_or_else(|| Error::config("operator", "missing"))?;
        if name != "linear" {
            return operators::registry(name).map_err(|e| Error::config("operator", e.to_string()));
        }
        let shift = vector("c", self.c.as_deref().ok_or_else(|| Error::config("c", "required for the linear operator"))?)?;
        let dim = shift.dim();
        let a = matrix("a", self.a.as_deref().ok_or_else(|| Error::config("a", "required for the linear operator"))?)?;
        let b = matrix("b", self.b.as_deref().ok_or_else(|| Error::config("b", "required for the linear operator"))?)?;
        for (field, m) in [("a", &a), ("b", &b)] {
            if m.dim() != dim {
                return Err(Error::config(field, format!("expected a {dim}x{dim} matrix, got {0}x{0}", m.dim())));
            }
        }
        let lower = vector("lower", self.lower.as_deref().ok_or_else(|| Error::config("lower", "required for the linear operator"))?)?;
        let upper = vector("upper", self.upper.as_deref().ok_or_else(|| Error::config("upper", "required for the linear operator"))?)?;
        check_dim("lower", &lower, dim)?;
        check_dim("upper", &upper, dim)?;
        let domain = BoxDomain::new(lower, upper).map_err(|e| Error::config("upper", e.to_string()))?;
        operators::make_linear_operator(a, b, shift, domain).map_err(|e| Error::config("operator", e.to_string()))
    }

    fn format(&self) -> Result<Format> {
        self.format.as_deref().map_or(Ok(Format::Json), str::parse)
    }

    pub fn run_spec(&self) -> Result<RunSpec> {
        let operator = self.build_operator()?;
        let dim = operator.dim();
        let scheme = match self.scheme.as_deref() {
            Some(s) => s.parse::<Scheme>()?,
            None => Scheme::KrasnoselskijDiagonal,
        };
        let tol = match self.tol {
            Some(t) => t,
            None => default_tol()?,
        };
        let max_iter = match self.max_iter {
            Some(m) => nonnegative("max_iter", m)? as usize,
            None => DEFAULT_MAX_ITER,
        };
        let mut config = SchemeConfig::new(scheme, self.theta.unwrap_or(DEFAULT_THETA), tol, max_iter);
        config.guard_domain = self.guard_domain.unwrap_or(false);
        config.validate()?;

        let x0 = vector("x0", self.x0.as_deref().ok_or_else(|| Error::config("x0", "missing"))?)?;
        check_dim("x0", &x0, dim)?;
        let y0 = match &self.y0 {
            Some(y) => vector("y0", y)?,
            None => x0.clone(),
        };
        check_dim("y0", &y0, dim)?;
        for (field, p) in [("x0", &x0), ("y0", &y0)] {
            if !operator.domain().contains(p)? {
                return Err(Error::config(field, "lies outside the operator domain"));
            }
        }

        let reference = match &self.reference {
            Some(r) => {
                let px = vector("reference", r)?;
                check_dim("reference", &px, dim)?;
                let py = match &self.reference_y {
                    Some(ry) => vector("reference_y", ry)?,
                    None => px.clone(),
                };
                check_dim("reference_y", &py, dim)?;
                Some(CoupledPair { x: px, y: py })
            }
            None => None,
        };

        let thetas = self.thetas.clone().unwrap_or_default();
        if let Some(bad) = thetas.iter().find(|t| !(**t > 0.0 && **t < 1.0)) {
            return Err(Error::config("thetas", format!("every theta must lie in (0, 1), got {bad}")));
        }
        Ok(RunSpec {
            operator,
            config,
            x0,
            y0,
            reference,
            seed: self.seed.map(|s| nonnegative("seed", s)).transpose()?,
            thetas,
            out: self.out.clone(),
            format: self.format()?,
        })
    }

    pub fn analyze_spec(&self) -> Result<AnalyzeSpec> {
        let samples = match self.samples {
            Some(s) => nonnegative("samples", s)? as usize,
            None => DEFAULT_SAMPLES,
        };
        if samples == 0 {
            return Err(Error::config("samples", "must be at least 1"));
        }
        Ok(AnalyzeSpec {
            operator: self.build_operator()?,
            samples,
            seed: self.seed.map(|s| nonnegative("seed", s)).transpose()?.unwrap_or(DEFAULT_SEED),
            out: self.out.clone(),
        })
    }
}

/// Parses `1,2,3` or `[1, 2, 3]`.
pub fn parse_list(text: &str) -> std::result::Result<Vec<f64>, String> {
    let inner = text.trim().trim_start_matches('[').trim_end_matches(']');
    inner
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().map_err(|_| format!("not a number: `{s}`")))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const LINEAR: &str = r#"
operator = "linear"
scheme = "krasnoselskij_diagonal"
theta = 0.5
tol = 1e-12
max_iter = 500
x0 = [0, 0]
a = [[0.2, 0], [0, 0.1]]
b = [[0.3, 0], [0, 0.4]]
c = [1, 1]
lower = [-10, -10]
upper = [10, 10]
reference = [2, 2]
"#;

    #[test]
    fn parses_linear_problem() {
        let raw = RawProblem::from_toml_str(LINEAR).unwrap();
        let spec = raw.run_spec().unwrap();
        assert_eq!(spec.operator.name(), "linear");
        assert_eq!(spec.config.max_iter, 500);
        assert_eq!(spec.y0, spec.x0);
        assert_eq!(spec.reference.unwrap().x, Vector::new(vec![2.0, 2.0]).unwrap());
        assert_eq!(spec.format, Format::Json);
    }

    #[test]
    fn flags_win_over_file() {
        let raw = RawProblem::from_toml_str(LINEAR).unwrap();
        let over = RawProblem {
            theta: Some(0.25),
            max_iter: Some(7),
            ..Default::default()
        };
        let spec = raw.merge(over).run_spec().unwrap();
        assert_eq!((spec.config.theta, spec.config.max_iter), (0.25, 7));
        assert_eq!(spec.config.tol, 1e-12);
    }

    fn field_of(err: Error) -> String {
        match err {
            Error::InvalidConfig { field, .. } => field,
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn errors_name_the_field() {
        let base = RawProblem {
            operator: Some("example_4_1".into()),
            x0: Some(vec![1.0]),
            ..Default::default()
        };
        let cases = [
            (RawProblem { theta: Some(1.5), ..base.clone() }, "theta"),
            (RawProblem { x0: Some(vec![1.0, 2.0]), ..base.clone() }, "x0"),
            (RawProblem { x0: Some(vec![3.0]), ..base.clone() }, "x0"),
            (RawProblem { x0: None, ..base.clone() }, "x0"),
            (RawProblem { operator: Some("nope".into()), ..base.clone() }, "operator"),
            (RawProblem { scheme: Some("newton".into()), ..base.clone() }, "scheme"),
            (RawProblem { max_iter: Some(-3), ..base.clone() }, "max_iter"),
            (RawProblem { tol: Some(-1.0), ..base.clone() }, "tol"),
            (RawProblem { format: Some("xml".into()), ..base.clone() }, "format"),
            (RawProblem { thetas: Some(vec![0.5, 1.0]), ..base.clone() }, "thetas"),
        ];
        for (raw, field) in cases {
            assert_eq!(field_of(raw.run_spec().unwrap_err()), field);
        }
        let linear = RawProblem { operator: Some("linear".into()), ..base };
        assert_eq!(field_of(linear.run_spec().unwrap_err()), "c");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = RawProblem::from_toml_str("thetaa = 0.5").unwrap_err();
        assert!(err.to_string().contains("thetaa"), "{err}");
        let err = RawProblem::from_toml_str("theta = \"half\"").unwrap_err();
        assert!(err.to_string().contains("problem file"), "{err}");
    }

    #[test]
    fn list_parsing() {
        assert_eq!(parse_list("1,2.5,-3").unwrap(), vec![1.0, 2.5, -3.0]);
        assert_eq!(parse_list("[0.1, 0.2]").unwrap(), vec![0.1, 0.2]);
        assert!(parse_list("1,x").is_err());
    }
}
