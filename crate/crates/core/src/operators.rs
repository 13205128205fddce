//! Bivariate operators `F: C × C → X` together with the metadata needed to
//! check the hypotheses of the convergence results: the box domain `C`,
//! whether `F` maps `C × C` back into `C`, and any coupled fixed points known
//! in closed form.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::closed_form::OracleKind;
use crate::error::{Error, Result};
use crate::space::{BoxDomain, Matrix, Vector};

/// Names accepted by [`registry`] (plus `linear`, which needs matrices).
pub const REGISTRY_NAMES: [&str; 4] = ["example_2_1", "example_2_2", "example_4_1", "linear"];

/// Candidate coupled fixed point `(x, y)`: `F(x, y) = x` and `F(y, x) = y`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoupledPair {
    pub x: Vector,
    pub y: Vector,
}

impl CoupledPair {
    pub fn new(x: Vector, y: Vector) -> Result<Self> {
        x.check_dim(&y)?;
        Ok(CoupledPair { x, y })
    }

    /// The equal-component pair `(p, p)`.
    pub fn diagonal(p: Vector) -> Self {
        CoupledPair { y: p.clone(), x: p }
    }

    pub fn scalar(x: f64, y: f64) -> Result<Self> {
        CoupledPair::new(Vector::scalar(x)?, Vector::scalar(y)?)
    }

    pub fn dim(&self) -> usize {
        self.x.dim()
    }
}

/// `F(x, y) = A·x + B·y + c`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearMap {
    pub a: Matrix,
    pub b: Matrix,
    pub shift: Vector,
}

impl LinearMap {
    pub fn new(a: Matrix, b: Matrix, shift: Vector) -> Result<Self> {
        let d = shift.dim();
        for m in [&a, &b] {
            if m.dim() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: m.dim(),
                });
            }
        }
        Ok(LinearMap { a, b, shift })
    }

    fn apply(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let ax = self.a.apply(x);
        let by = self.b.apply(y);
        ax.iter()
            .zip(&by)
            .zip(self.shift.as_slice())
            .map(|((p, q), c)| p + q + c)
            .collect()
    }

    /// Solves `(I − A − B)·x̄ = c`.
    pub fn equal_component_fixed_point(&self) -> Result<Vector> {
        let d = self.shift.dim();
        let system = nalgebra::DMatrix::<f64>::identity(d, d)
            - self.a.to_nalgebra()
            - self.b.to_nalgebra();
        let rhs = nalgebra::DVector::from_column_slice(self.shift.as_slice());
        let solution = system.lu().solve(&rhs).ok_or(Error::Singular)?;
        Vector::new(solution.iter().copied().collect()).map_err(|_| Error::Singular)
    }

    /// Exact interval image of `C × C`, then containment in `C`.
    fn maps_box_into_itself(&self, c: &BoxDomain) -> bool {
        let (lo, hi) = (c.lower(), c.upper());
        (0..c.dim()).all(|r| {
            let mut min = self.shift[r];
            let mut max = self.shift[r];
            for m in [&self.a, &self.b] {
                for (j, &coef) in m.row(r).iter().enumerate() {
                    let (p, q) = (coef * lo[j], coef * hi[j]);
                    min += p.min(q);
                    max += p.max(q);
                }
            }
            min >= lo[r] && max <= hi[r]
        })
    }
}

type Evaluator = dyn Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync;

#[derive(Clone)]
enum Kind {
    Example21,
    Example22,
    Example41,
    Linear(LinearMap),
    Custom(Arc<Evaluator>),
}

/// An evaluatable bivariate map over a box domain.
#[derive(Clone)]
pub struct BivariateOperator {
    name: String,
    domain: BoxDomain,
    kind: Kind,
    known_fixed_points: Vec<CoupledPair>,
    closed_form: Option<OracleKind>,
    range_in_domain: bool,
}

impl fmt::Debug for BivariateOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BivariateOperator")
            .field("name", &self.name)
            .field("domain", &self.domain)
            .field("known_fixed_points", &self.known_fixed_points)
            .field("closed_form", &self.closed_form)
            .field("range_in_domain", &self.range_in_domain)
            .finish_non_exhaustive()
    }
}

fn pair(x: f64, y: f64) -> CoupledPair {
    CoupledPair::scalar(x, y).expect("finite literal")
}

impl BivariateOperator {
    /// `F(x, y) = (x − 2y)/3` on `[−1, 1]`.
    ///
    /// Weakly nonexpansive with `a = 1/3`, `b = 2/3`, but not nonexpansive
    /// in the `1/2, 1/2` sense. Since `F(x, y) − F(y, x) = x − y`, every
    /// pair `(c, −c)` is a coupled fixed point; `(0, 0)` is the only one
    /// with equal components.
    pub fn example_2_1() -> Self {
        BivariateOperator {
            name: "example_2_1".into(),
            domain: BoxDomain::interval(-1.0, 1.0).expect("valid interval"),
            kind: Kind::Example21,
            known_fixed_points: vec![pair(0.0, 0.0), pair(0.5, -0.5), pair(-0.5, 0.5)],
            closed_form: Some(OracleKind::PicardExample21),
            range_in_domain: true,
        }
    }

    /// `F(x, y) = 4 − x² − 2y` on `[−4, 4]`; maps outside the box, so
    /// iterating it requires projection.
    pub fn example_2_2() -> Self {
        BivariateOperator {
            name: "example_2_2".into(),
            domain: BoxDomain::interval(-4.0, 4.0).expect("valid interval"),
            kind: Kind::Example22,
            known_fixed_points: vec![
                pair(-4.0, -4.0),
                pair(1.0, 1.0),
                pair(-1.0, 2.0),
                pair(2.0, -1.0),
            ],
            closed_form: None,
            range_in_domain: false,
        }
    }

    /// `F(x, y) = −(x + y)/2` on `[−1, 1]`, unique coupled fixed point `(0, 0)`.
    pub fn example_4_1() -> Self {
        BivariateOperator {
            name: "example_4_1".into(),
            domain: BoxDomain::interval(-1.0, 1.0).expect("valid interval"),
            kind: Kind::Example41,
            known_fixed_points: vec![pair(0.0, 0.0)],
            closed_form: Some(OracleKind::KrasnoselskijExample41),
            range_in_domain: true,
        }
    }

    /// Wraps an arbitrary deterministic evaluator. `range_in_domain` is
    /// taken on trust.
    pub fn from_fn<F>(name: impl Into<String>, domain: BoxDomain, range_in_domain: bool, f: F) -> Self
    where
        F: Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        BivariateOperator {
            name: name.into(),
            domain,
            kind: Kind::Custom(Arc::new(f)),
            known_fixed_points: Vec::new(),
            closed_form: None,
            range_in_domain,
        }
    }

    pub fn with_known_fixed_points(mut self, points: Vec<CoupledPair>) -> Self {
        self.known_fixed_points = points;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn known_fixed_points(&self) -> &[CoupledPair] {
        &self.known_fixed_points
    }

    pub fn closed_form(&self) -> Option<OracleKind> {
        self.closed_form
    }

    pub fn range_in_domain(&self) -> bool {
        self.range_in_domain
    }

    pub fn linear_map(&self) -> Option<&LinearMap> {
        match &self.kind {
            Kind::Linear(m) => Some(m),
            _ => None,
        }
    }

    /// `F(x, y)`.
    pub fn eval(&self, x: &Vector, y: &Vector) -> Result<Vector> {
        let d = self.dim();
        for v in [x, y] {
            if v.dim() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: v.dim(),
                });
            }
        }
        let (xs, ys) = (x.as_slice(), y.as_slice());
        let out = match &self.kind {
            Kind::Example21 => vec![(xs[0] - 2.0 * ys[0]) / 3.0],
            Kind::Example22 => vec![4.0 - xs[0] * xs[0] - 2.0 * ys[0]],
            Kind::Example41 => vec![-(xs[0] + ys[0]) / 2.0],
            Kind::Linear(m) => m.apply(xs, ys),
            Kind::Custom(f) => f(xs, ys),
        };
        if out.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: out.len(),
            });
        }
        Vector::new(out).map_err(|_| Error::OperatorDefect(self.name.clone()))
    }

    /// `max(‖F(x,y) − x‖, ‖F(y,x) − y‖)`.
    pub fn coupled_residual(&self, p: &CoupledPair) -> Result<f64> {
        let fx = self.eval(&p.x, &p.y)?;
        let fy = self.eval(&p.y, &p.x)?;
        Ok(fx.distance(&p.x)?.max(fy.distance(&p.y)?))
    }

    pub fn is_coupled_fixed_point(&self, p: &CoupledPair, tol: f64) -> Result<bool> {
        if !(tol > 0.0) {
            return Err(Error::config("tol", format!("must be positive, got {tol}")));
        }
        Ok(self.coupled_residual(p)? <= tol)
    }
}

/// `F(x, y) = A·x + B·y + c` on `domain`.
///
/// When `‖A‖₂ + ‖B‖₂ < 1` the equal-component fixed point solving
/// `(I − A − B)·x̄ = c` is attached, provided it lies in the domain. The
/// range flag is computed exactly by interval arithmetic over the box.
pub fn make_linear_operator(
    a_matrix: Matrix,
    b_matrix: Matrix,
    shift: Vector,
    domain: BoxDomain,
) -> Result<BivariateOperator> {
    let map = LinearMap::new(a_matrix, b_matrix, shift)?;
    if domain.dim() != map.shift.dim() {
        return Err(Error::DimensionMismatch {
            expected: map.shift.dim(),
            got: domain.dim(),
        });
    }
    let mut known = Vec::new();
    if map.a.spectral_norm() + map.b.spectral_norm() < 1.0 {
        let p = map.equal_component_fixed_point()?;
        if domain.contains_within(&p, 1e-12)? {
            known.push(CoupledPair::diagonal(p));
        }
    }
    let range_in_domain = map.maps_box_into_itself(&domain);
    Ok(BivariateOperator {
        name: "linear".into(),
        domain,
        kind: Kind::Linear(map),
        known_fixed_points: known,
        closed_form: None,
        range_in_domain,
    })
}

/// Random `A·x + B·y + c` with `‖A‖₂ = a_norm`, `‖B‖₂ = b_norm`, entries of
/// the unscaled matrices and of `c` uniform in `[−1, 1]`, on the cube
/// `[−half_width, half_width]^dim`.
pub fn random_linear_operator<R: Rng + ?Sized>(
    rng: &mut R,
    dim: usize,
    a_norm: f64,
    b_norm: f64,
    half_width: f64,
) -> Result<BivariateOperator> {
    let mut draw = |target: f64| -> Result<Matrix> {
        let m = Matrix::from_row_major(dim, (0..dim * dim).map(|_| rng.gen_range(-1.0..=1.0)).collect())?;
        let n = m.spectral_norm();
        Ok(if n > 0.0 { m.scaled(target / n) } else { m })
    };
    let a = draw(a_norm)?;
    let b = draw(b_norm)?;
    let shift = Vector::new((0..dim).map(|_| rng.gen_range(-1.0..=1.0)).collect())?;
    make_linear_operator(a, b, shift, BoxDomain::cube(dim, -half_width, half_width)?)
}

/// Built-in operators by name. `linear` is not buildable without matrices.
pub fn registry(name: &str) -> Result<BivariateOperator> {
    match name {
        "example_2_1" => Ok(BivariateOperator::example_2_1()),
        "example_2_2" => Ok(BivariateOperator::example_2_2()),
        "example_4_1" => Ok(BivariateOperator::example_4_1()),
        other => Err(Error::UnknownOperator(other.to_string())),
    }
}
