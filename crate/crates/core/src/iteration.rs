//! Picard and Krasnoselskij iterations for coupled fixed points, plus
//! trace-level checks of the Fejér and residual inequalities.
//!
//! `theta` is always the weight on the operator image:
//! `x_{n+1} = (1 − θ)·x_n + θ·F(·,·)`. A scheme written with the weight on
//! the current iterate corresponds to `θ = 1 − λ`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operators::{BivariateOperator, CoupledPair};
use crate::space::{project_box, Vector};

/// Upper bound on stored trace entries.
pub const TRACE_CAP: usize = 100_000;

/// Relative tolerance for the two-cycle test of the double Picard scheme.
pub const CYCLE_TOL: f64 = 1e-12;

/// Relative slack allowed when checking that an unguarded iterate stays in `C`.
const DOMAIN_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    PicardDouble,
    KrasnoselskijDiagonal,
    KrasnoselskijDouble,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [
        Scheme::PicardDouble,
        Scheme::KrasnoselskijDiagonal,
        Scheme::KrasnoselskijDouble,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::PicardDouble => "picard_double",
            Scheme::KrasnoselskijDiagonal => "krasnoselskij_diagonal",
            Scheme::KrasnoselskijDouble => "krasnoselskij_double",
        }
    }

    pub fn is_krasnoselskij(self) -> bool {
        !matches!(self, Scheme::PicardDouble)
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::config("scheme", format!("unknown scheme `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchemeConfig {
    pub scheme: Scheme,
    pub theta: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub guard_domain: bool,
}

impl SchemeConfig {
    pub fn new(scheme: Scheme, theta: f64, tol: f64, max_iter: usize) -> Self {
        SchemeConfig {
            scheme,
            theta,
            tol,
            max_iter,
            guard_domain: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.scheme.is_krasnoselskij() && !(self.theta > 0.0 && self.theta < 1.0) {
            return Err(Error::config(
                "theta",
                format!("must lie in (0, 1), got {}", self.theta),
            ));
        }
        if !(self.tol > 0.0) || !self.tol.is_finite() {
            return Err(Error::config("tol", format!("must be positive, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::config("max_iter", "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Converged,
    MaxIterReached,
    /// Double Picard returned to the iterate of two steps earlier without converging.
    CycleDetected,
    DivergedNonfinite,
    LeftDomain,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Converged => "converged",
            Status::MaxIterReached => "max_iter_reached",
            Status::CycleDetected => "cycle_detected",
            Status::DivergedNonfinite => "diverged_nonfinite",
            Status::LeftDomain => "left_domain",
        }
    }

    pub fn exit_code(self) -> i32 {
        match self {
            Status::Converged => 0,
            Status::MaxIterReached | Status::CycleDetected => 2,
            Status::DivergedNonfinite | Status::LeftDomain => 3,
        }
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Iterate history of one run.
///
/// `steps[i]` is the iteration index of `iterates[i]`; when more than
/// [`TRACE_CAP`] iterates would be produced only every `stored_every`-th one
/// is kept, plus the final iterate.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationTrace {
    pub operator_name: String,
    pub seed: Option<u64>,
    pub config: SchemeConfig,
    pub stored_every: usize,
    pub steps: Vec<usize>,
    pub iterates: Vec<CoupledPair>,
    pub residuals: Vec<f64>,
    pub distances: Option<Vec<f64>>,
    pub status: Status,
}

impl IterationTrace {
    pub fn len(&self) -> usize {
        self.iterates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.iterates.is_empty()
    }

    pub fn last(&self) -> &CoupledPair {
        self.iterates.last().expect("traces hold at least the initial iterate")
    }

    pub fn final_residual(&self) -> f64 {
        *self.residuals.last().expect("traces hold at least one residual")
    }

    /// Index of the last performed iteration.
    pub fn iterations(&self) -> usize {
        *self.steps.last().expect("traces hold at least one step")
    }

    pub fn with_seed(mut self, seed: Option<u64>) -> Self {
        self.seed = seed;
        self
    }
}

struct Recorder {
    stride: usize,
    reference: Option<CoupledPair>,
    diagonal: bool,
    trace: IterationTrace,
}

impl Recorder {
    fn new(f: &BivariateOperator, cfg: SchemeConfig, reference: Option<CoupledPair>) -> Self {
        let total = cfg.max_iter.saturating_add(1);
        let stride = if total <= TRACE_CAP {
            1
        } else {
            total.div_ceil(TRACE_CAP - 1)
        };
        Recorder {
            stride,
            diagonal: cfg.scheme == Scheme::KrasnoselskijDiagonal,
            trace: IterationTrace {
                operator_name: f.name().to_string(),
                seed: None,
                config: cfg,
                stored_every: stride,
                steps: Vec::new(),
                iterates: Vec::new(),
                residuals: Vec::new(),
                distances: reference.as_ref().map(|_| Vec::new()),
                status: Status::MaxIterReached,
            },
            reference,
        }
    }

    fn record(&mut self, n: usize, x: &Vector, y: &Vector, residual: f64, last: bool) -> Result<()> {
        if n % self.stride != 0 && !last {
            return Ok(());
        }
        if self.trace.steps.last() == Some(&n) {
            return Ok(());
        }
        if let (Some(p), Some(d)) = (&self.reference, self.trace.distances.as_mut()) {
            let dx = x.distance(&p.x)?;
            d.push(if self.diagonal { dx } else { dx.max(y.distance(&p.y)?) });
        }
        self.trace.steps.push(n);
        self.trace.iterates.push(CoupledPair {
            x: x.clone(),
            y: y.clone(),
        });
        self.trace.residuals.push(residual);
        Ok(())
    }
}

fn relax(theta: f64, x: &Vector, fx: &Vector) -> Option<Vector> {
    let out: Vec<f64> = x
        .as_slice()
        .iter()
        .zip(fx.as_slice())
        .map(|(a, b)| (1.0 - theta) * a + theta * b)
        .collect();
    Vector::new(out).ok()
}

fn eval_or_nonfinite(f: &BivariateOperator, x: &Vector, y: &Vector) -> Result<Option<Vector>> {
    match f.eval(x, y) {
        Ok(v) => Ok(Some(v)),
        Err(Error::OperatorDefect(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

/// `a` returns to `b` (two steps earlier) while the one-step residual stays
/// large: a converging sequence is close to both neighbours, a two-cycle
/// only to the second.
fn returns_to(a: &Vector, b: &Vector, residual: f64) -> Result<bool> {
    let scale = crate::space::norm(a).max(1.0);
    let d = a.distance(b)?;
    Ok(d <= CYCLE_TOL * scale && d <= CYCLE_TOL * residual)
}

fn check_start(f: &BivariateOperator, points: &[&Vector]) -> Result<()> {
    for p in points {
        if p.dim() != f.dim() {
            return Err(Error::DimensionMismatch {
                expected: f.dim(),
                got: p.dim(),
            });
        }
        if !f.domain().contains(p)? {
            return Err(Error::OutsideDomain);
        }
    }
    Ok(())
}

/// Shared driver for the three schemes.
fn drive(
    f: &BivariateOperator,
    x0: &Vector,
    y0: &Vector,
    mut cfg: SchemeConfig,
    reference: Option<CoupledPair>,
) -> Result<IterationTrace> {
    cfg.validate()?;
    check_start(f, &[x0, y0])?;
    if let Some(p) = &reference {
        if p.dim() != f.dim() {
            return Err(Error::DimensionMismatch {
                expected: f.dim(),
                got: p.dim(),
            });
        }
    }
    cfg.guard_domain = cfg.guard_domain || !f.range_in_domain();
    let diagonal = cfg.scheme == Scheme::KrasnoselskijDiagonal;
    let mut rec = Recorder::new(f, cfg, reference);

    let mut x = x0.clone();
    let mut y = if diagonal { x0.clone() } else { y0.clone() };
    // iterates n-1 and n-2, for the Picard two-cycle test
    let mut history: [Option<(Vector, Vector)>; 2] = [None, None];
    let mut n = 0usize;

    let status = loop {
        let Some(fx) = eval_or_nonfinite(f, &x, &y)? else {
            break Status::DivergedNonfinite;
        };
        let fy = if diagonal {
            Some(fx.clone())
        } else {
            eval_or_nonfinite(f, &y, &x)?
        };
        let Some(fy) = fy else {
            break Status::DivergedNonfinite;
        };
        let residual = x.distance(&fx)?.max(y.distance(&fy)?);
        if !residual.is_finite() {
            break Status::DivergedNonfinite;
        }

        let stop = if residual <= cfg.tol {
            Some(Status::Converged)
        } else if cfg.scheme == Scheme::PicardDouble
            && matches!(&history[1], Some((px, py)) if returns_to(&x, px, residual)? && returns_to(&y, py, residual)?)
        {
            Some(Status::CycleDetected)
        } else if n >= cfg.max_iter {
            Some(Status::MaxIterReached)
        } else {
            None
        };

        let next = match stop {
            Some(_) => None,
            None => match cfg.scheme {
                Scheme::PicardDouble => Some((Some(fx), Some(fy))),
                Scheme::KrasnoselskijDiagonal => {
                    let v = relax(cfg.theta, &x, &fx);
                    Some((v.clone(), v))
                }
                Scheme::KrasnoselskijDouble => {
                    Some((relax(cfg.theta, &x, &fx), relax(cfg.theta, &y, &fy)))
                }
            },
        };
        let next = match next {
            None => Err(stop.expect("stop is set when no step is taken")),
            Some((Some(mut nx), Some(mut ny))) => {
                if cfg.guard_domain {
                    nx = project_box(&nx, f.domain())?;
                    ny = project_box(&ny, f.domain())?;
                    Ok((nx, ny))
                } else if f.domain().contains_within(&nx, DOMAIN_SLACK)?
                    && f.domain().contains_within(&ny, DOMAIN_SLACK)?
                {
                    Ok((nx, ny))
                } else {
                    Err(Status::LeftDomain)
                }
            }
            Some(_) => Err(Status::DivergedNonfinite),
        };
        rec.record(n, &x, &y, residual, next.is_err())?;
        let (nx, ny) = match next {
            Ok(pair) => pair,
            Err(status) => break status,
        };

        history.swap(0, 1);
        history[0] = Some((std::mem::replace(&mut x, nx), std::mem::replace(&mut y, ny)));
        n += 1;
    };

    let mut trace = rec.trace;
    trace.status = status;
    if trace.iterates.is_empty() {
        // F is already non-finite at the starting point
        return Err(Error::OperatorDefect(f.name().to_string()));
    }
    Ok(trace)
}

/// `x_{n+1} = (1 − θ)·x_n + θ·F(x_n, x_n)`; the trace stores `(x_n, x_n)`.
pub fn krasnoselskij_diagonal(f: &BivariateOperator, x0: &Vector, cfg: &SchemeConfig) -> Result<IterationTrace> {
    krasnoselskij_diagonal_with_reference(f, x0, cfg, None)
}

pub fn krasnoselskij_diagonal_with_reference(
    f: &BivariateOperator,
    x0: &Vector,
    cfg: &SchemeConfig,
    reference: Option<CoupledPair>,
) -> Result<IterationTrace> {
    expect_scheme(cfg, Scheme::KrasnoselskijDiagonal)?;
    drive(f, x0, x0, *cfg, reference)
}

/// `x_{n+1} = F(x_n, y_n)`, `y_{n+1} = F(y_n, x_n)`.
///
/// The limit of this scheme need not be a coupled fixed point, and it may
/// oscillate: a return to the iterate of two steps earlier (relative
/// distance at most [`CYCLE_TOL`], both against the iterate's norm and
/// against the current residual) with residual above `tol` stops the run
/// with [`Status::CycleDetected`].
pub fn picard_double(f: &BivariateOperator, x0: &Vector, y0: &Vector, cfg: &SchemeConfig) -> Result<IterationTrace> {
    picard_double_with_reference(f, x0, y0, cfg, None)
}

pub fn picard_double_with_reference(
    f: &BivariateOperator,
    x0: &Vector,
    y0: &Vector,
    cfg: &SchemeConfig,
    reference: Option<CoupledPair>,
) -> Result<IterationTrace> {
    expect_scheme(cfg, Scheme::PicardDouble)?;
    drive(f, x0, y0, *cfg, reference)
}

/// `x_{n+1} = (1 − θ)·x_n + θ·F(x_n, y_n)`, `y_{n+1} = (1 − θ)·y_n + θ·F(y_n, x_n)`.
pub fn krasnoselskij_double(f: &BivariateOperator, x0: &Vector, y0: &Vector, cfg: &SchemeConfig) -> Result<IterationTrace> {
    krasnoselskij_double_with_reference(f, x0, y0, cfg, None)
}

pub fn krasnoselskij_double_with_reference(
    f: &BivariateOperator,
    x0: &Vector,
    y0: &Vector,
    cfg: &SchemeConfig,
    reference: Option<CoupledPair>,
) -> Result<IterationTrace> {
    expect_scheme(cfg, Scheme::KrasnoselskijDouble)?;
    drive(f, x0, y0, *cfg, reference)
}

/// Dispatches on `cfg.scheme`; `y0` is ignored by the diagonal scheme.
pub fn iterate(
    f: &BivariateOperator,
    x0: &Vector,
    y0: &Vector,
    cfg: &SchemeConfig,
    reference: Option<CoupledPair>,
) -> Result<IterationTrace> {
    match cfg.scheme {
        Scheme::KrasnoselskijDiagonal => krasnoselskij_diagonal_with_reference(f, x0, cfg, reference),
        Scheme::PicardDouble => picard_double_with_reference(f, x0, y0, cfg, reference),
        Scheme::KrasnoselskijDouble => krasnoselskij_double_with_reference(f, x0, y0, cfg, reference),
    }
}

fn expect_scheme(cfg: &SchemeConfig, scheme: Scheme) -> Result<()> {
    if cfg.scheme != scheme {
        return Err(Error::config(
            "scheme",
            format!("expected {scheme}, got {}", cfg.scheme),
        ));
    }
    Ok(())
}

/// The averaged map `T(x) = (1 − θ)·x + θ·F(x, x)`.
pub fn averaged_map(f: &BivariateOperator, theta: f64, x: &Vector) -> Result<Vector> {
    let fx = f.eval(x, x)?;
    crate::space::convex_combination(1.0 - theta, x, &fx)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticFailure {
    pub step: usize,
    pub check: &'static str,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DiagnosticReport {
    pub checks: usize,
    pub failures: Vec<DiagnosticFailure>,
}

impl DiagnosticReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    fn check(&mut self, step: usize, check: &'static str, lhs: f64, rhs: f64) {
        self.checks += 1;
        if !(lhs <= rhs) {
            self.failures.push(DiagnosticFailure { step, check, lhs, rhs });
        }
    }
}

/// Checks, for consecutive stored iterates of a Krasnoselskij trace and
/// `a = sqrt(θ(1 − θ))`,
///
/// ```text
/// a²·r_n² ≤ D_n² − D_{n+1}² + 1e-9·max(1, D_n²)
/// D_{n+1} ≤ D_n + 1e-12·max(1, D_n)
/// ```
///
/// where `D_n` is the distance of the iterate to `(p, p)` (for the double
/// scheme, in the product norm) and `r_n` the stored residual. With a
/// thinned trace the inequalities telescope, so they still apply between
/// stored neighbours.
pub fn verify_fejer_monotonicity(trace: &IterationTrace, p: &Vector) -> Result<DiagnosticReport> {
    if !trace.config.scheme.is_krasnoselskij() {
        return Err(Error::NotKrasnoselskij);
    }
    let theta = trace.config.theta;
    let a_sq = theta * (1.0 - theta);
    let diagonal = trace.config.scheme == Scheme::KrasnoselskijDiagonal;
    let dist_sq = |q: &CoupledPair| -> Result<f64> {
        let dx = q.x.distance_squared(p)?;
        Ok(if diagonal { dx } else { dx + q.y.distance_squared(p)? })
    };
    let mut report = DiagnosticReport::default();
    for i in 0..trace.len().saturating_sub(1) {
        let d0 = dist_sq(&trace.iterates[i])?;
        let d1 = dist_sq(&trace.iterates[i + 1])?;
        let r = trace.residuals[i];
        let step = trace.steps[i];
        report.check(step, "fejer_a_squared", a_sq * r * r, d0 - d1 + 1e-9 * d0.max(1.0));
        let (n0, n1) = (d0.sqrt(), d1.sqrt());
        report.check(step, "distance_nonincreasing", n1, n0 + 1e-12 * n0.max(1.0));
    }
    Ok(report)
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 0 {
        0.5 * (v[m - 1] + v[m])
    } else {
        v[m]
    }
}

/// Residual-decay checks: a converged trace ends at or below `tol`, the
/// running minimum of the residuals never increases, and on traces of at
/// least 50 entries the median of the last 10% lies below that of the first 10%.
pub fn verify_residual_decay(trace: &IterationTrace) -> DiagnosticReport {
    let mut report = DiagnosticReport::default();
    let res = &trace.residuals;
    if trace.status == Status::Converged {
        report.check(trace.iterations(), "final_residual_within_tol", trace.final_residual(), trace.config.tol);
    }
    let mut running = f64::INFINITY;
    for (i, &r) in res.iter().enumerate() {
        let next = running.min(r);
        report.check(trace.steps[i], "running_min_nonincreasing", next, running);
        running = next;
    }
    if res.len() >= 50 {
        let k = res.len() / 10;
        let head = median(&res[..k]);
        let tail = median(&res[res.len() - k..]);
        report.checks += 1;
        if !(tail < head) {
            report.failures.push(DiagnosticFailure {
                step: trace.iterations(),
                check: "tail_median_below_head",
                lhs: tail,
                rhs: head,
            });
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closed_form::{oracle_iterate, OracleHandle, OracleKind};
    use crate::operators::{make_linear_operator, random_linear_operator};
    use crate::space::{BoxDomain, Matrix};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn s(x: f64) -> Vector {
        Vector::scalar(x).unwrap()
    }

    fn cfg(scheme: Scheme, theta: f64) -> SchemeConfig {
        SchemeConfig::new(scheme, theta, 1e-10, 1000)
    }

    #[test]
    fn example_4_1_half_theta_converges_in_one_step() {
        let f = BivariateOperator::example_4_1();
        let t = krasnoselskij_diagonal(&f, &s(1.0), &cfg(Scheme::KrasnoselskijDiagonal, 0.5)).unwrap();
        assert_eq!(t.status, Status::Converged);
        assert_eq!(t.len(), 2);
        assert_eq!(t.last().x, s(0.0));
        assert_eq!(t.residuals, vec![2.0, 0.0]);
    }

    #[test]
    fn example_4_1_quarter_theta_halves() {
        let f = BivariateOperator::example_4_1();
        let t = krasnoselskij_diagonal(&f, &s(1.0), &cfg(Scheme::KrasnoselskijDiagonal, 0.25)).unwrap();
        assert_eq!(t.status, Status::Converged);
        for (n, p) in t.iterates.iter().enumerate() {
            assert_eq!(p.x[0], 0.5f64.powi(n as i32));
            assert_eq!(p.x, p.y);
        }
    }

    #[test]
    fn fixed_start_converges_immediately() {
        let f = BivariateOperator::example_2_2();
        for scheme in Scheme::ALL {
            let t = iterate(&f, &s(1.0), &s(1.0), &cfg(scheme, 0.5), None).unwrap();
            assert_eq!(t.status, Status::Converged);
            assert_eq!((t.len(), t.residuals[0]), (1, 0.0));
        }
    }

    #[test]
    fn picard_example_2_1_follows_closed_form() {
        let f = BivariateOperator::example_2_1();
        let mut c = cfg(Scheme::PicardDouble, 0.5);
        c.tol = 1e-300;
        c.max_iter = 60;
        let t = picard_double(&f, &s(1.0), &s(0.0), &c).unwrap();
        assert_eq!(t.iterates[1].x, s(1.0 / 3.0));
        assert!((t.iterates[1].y[0] + 2.0 / 3.0).abs() < 1e-16);
        let h = OracleHandle::picard_example_2_1(1.0, 0.0);
        for (n, p) in t.iterates.iter().enumerate() {
            let o = oracle_iterate(&h, n as u32);
            assert!((p.x[0] - o.x[0]).abs() <= 1e-12 && (p.y[0] - o.y[0]).abs() <= 1e-12);
        }
        // the limit (1/2, -1/2) is itself a coupled fixed point of (x - 2y)/3
        assert!((t.last().x[0] - 0.5).abs() < 1e-12);
        assert!(f.is_coupled_fixed_point(&CoupledPair::scalar(0.5, -0.5).unwrap(), 1e-12).unwrap());
    }

    #[test]
    fn picard_equal_start_goes_to_zero() {
        let f = BivariateOperator::example_2_1();
        let t = picard_double(&f, &s(0.6), &s(0.6), &cfg(Scheme::PicardDouble, 0.5)).unwrap();
        assert_eq!(t.status, Status::Converged);
        for (n, p) in t.iterates.iter().enumerate() {
            assert_eq!(p.x, p.y);
            assert!((p.x[0] - 0.6 * (-1.0f64 / 3.0).powi(n as i32)).abs() < 1e-15);
        }
    }

    #[test]
    fn converging_picard_is_not_a_cycle() {
        let f = BivariateOperator::example_2_1();
        let mut c = cfg(Scheme::PicardDouble, 0.5);
        c.tol = 1e-300;
        c.max_iter = 60;
        let t = picard_double(&f, &s(1.0), &s(0.0), &c).unwrap();
        // the sum part underflows against the half-difference, so the
        // residual eventually rounds to zero
        assert_eq!(t.status, Status::Converged);
        assert_eq!(t.final_residual(), 0.0);
        assert_eq!((t.last().x[0], t.last().y[0]), (0.5, -0.5));
    }

    #[test]
    fn picard_example_4_1_cycles() {
        let f = BivariateOperator::example_4_1();
        let t = picard_double(&f, &s(1.0), &s(1.0), &cfg(Scheme::PicardDouble, 0.5)).unwrap();
        assert_eq!(t.status, Status::CycleDetected);
        assert_eq!(t.status.exit_code(), 2);
        let xs: Vec<f64> = t.iterates.iter().map(|p| p.x[0]).collect();
        assert_eq!(xs, vec![1.0, -1.0, 1.0]);
    }

    #[test]
    fn double_scheme_on_example_4_1_matches_printed_formula() {
        let f = BivariateOperator::example_4_1();
        let h = OracleHandle::new(OracleKind::DoubleKrasnoselskijExample21, 0.9, -0.4, 0.3).unwrap();
        let mut c = cfg(Scheme::KrasnoselskijDouble, h.engine_theta().unwrap());
        c.tol = 1e-13;
        let t = krasnoselskij_double(&f, &s(0.9), &s(-0.4), &c).unwrap();
        assert_eq!(t.status, Status::Converged);
        for (n, p) in t.iterates.iter().enumerate() {
            let o = oracle_iterate(&h, n as u32);
            assert!((p.x[0] - o.x[0]).abs() <= 1e-12 * o.x[0].abs().max(1e-3), "n={n}");
        }
    }

    #[test]
    fn double_scheme_on_example_2_1() {
        // The difference x - y is invariant; the sum contracts by 1 - 4θ/3.
        let f = BivariateOperator::example_2_1();
        let t = krasnoselskij_double(&f, &s(1.0), &s(0.0), &cfg(Scheme::KrasnoselskijDouble, 0.5)).unwrap();
        assert_eq!(t.status, Status::Converged);
        let h = OracleHandle::new(OracleKind::DoubleKrasnoselskijExample21Exact, 1.0, 0.0, 0.5).unwrap();
        for (n, p) in t.iterates.iter().enumerate() {
            let o = oracle_iterate(&h, n as u32);
            assert!((p.x[0] - o.x[0]).abs() <= 1e-12 && (p.y[0] - o.y[0]).abs() <= 1e-12);
        }
        assert!(f.is_coupled_fixed_point(t.last(), 1e-10).unwrap());
        assert!((t.last().x[0] - 0.5).abs() < 1e-9);

        // (1, -1) is already a coupled fixed point
        let t = krasnoselskij_double(&f, &s(1.0), &s(-1.0), &cfg(Scheme::KrasnoselskijDouble, 0.5)).unwrap();
        assert_eq!((t.status, t.len()), (Status::Converged, 1));
    }

    #[test]
    fn double_with_equal_start_is_diagonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let f = random_linear_operator(&mut rng, 3, 0.5, 0.4, 3.0).unwrap();
        let x0 = Vector::new(vec![0.5, -1.0, 2.0]).unwrap();
        let a = krasnoselskij_diagonal(&f, &x0, &cfg(Scheme::KrasnoselskijDiagonal, 0.3)).unwrap();
        let b = krasnoselskij_double(&f, &x0, &x0, &cfg(Scheme::KrasnoselskijDouble, 0.3)).unwrap();
        assert_eq!(a.iterates, b.iterates);
        assert_eq!(a.residuals, b.residuals);
    }

    #[test]
    fn config_errors() {
        let f = BivariateOperator::example_4_1();
        let bad = cfg(Scheme::KrasnoselskijDiagonal, 1.5);
        assert!(matches!(
            krasnoselskij_diagonal(&f, &s(0.5), &bad),
            Err(Error::InvalidConfig { ref field, .. }) if field == "theta"
        ));
        let mut c = cfg(Scheme::KrasnoselskijDiagonal, 0.5);
        c.max_iter = 0;
        assert!(krasnoselskij_diagonal(&f, &s(0.5), &c).is_err());
        c.max_iter = 10;
        c.tol = 0.0;
        assert!(krasnoselskij_diagonal(&f, &s(0.5), &c).is_err());
        let c = cfg(Scheme::KrasnoselskijDiagonal, 0.5);
        assert_eq!(krasnoselskij_diagonal(&f, &s(2.0), &c), Err(Error::OutsideDomain));
        assert!(picard_double(&f, &s(0.0), &s(0.0), &c).is_err());
        // theta is irrelevant to Picard
        let p = cfg(Scheme::PicardDouble, 7.0);
        assert!(picard_double(&f, &s(0.0), &s(0.0), &p).is_ok());
    }

    #[test]
    fn nonfinite_operator_diverges() {
        let f = BivariateOperator::from_fn("explode", BoxDomain::interval(-1.0, 1.0).unwrap(), false, |x, _| {
            vec![if x[0] == 0.5 { 1e308 * 10.0 } else { 0.5 }]
        });
        let t = picard_double(&f, &s(0.0), &s(0.0), &cfg(Scheme::PicardDouble, 0.5)).unwrap();
        assert_eq!(t.status, Status::DivergedNonfinite);
        assert!(t.iterates.iter().all(|p| p.x[0].is_finite()));
        assert_eq!(t.status.exit_code(), 3);
    }

    #[test]
    fn unguarded_iterate_leaving_domain() {
        // Claims to be a self-map but is not.
        let f = BivariateOperator::from_fn("liar", BoxDomain::interval(-1.0, 1.0).unwrap(), true, |x, _| vec![x[0] + 1.5]);
        let t = picard_double(&f, &s(0.0), &s(0.0), &cfg(Scheme::PicardDouble, 0.5)).unwrap();
        assert_eq!(t.status, Status::LeftDomain);
        assert_eq!(t.len(), 1);
    }

    #[test]
    fn example_2_2_is_guarded() {
        let f = BivariateOperator::example_2_2();
        let t = krasnoselskij_double(&f, &s(-3.0), &s(3.5), &cfg(Scheme::KrasnoselskijDouble, 0.2)).unwrap();
        assert!(t.config.guard_domain);
        for p in &t.iterates {
            assert!(f.domain().contains(&p.x).unwrap() && f.domain().contains(&p.y).unwrap());
        }
    }

    #[test]
    fn iterates_stay_in_domain_for_self_maps() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let f = make_linear_operator(
            Matrix::diagonal(&[0.3, -0.2]).unwrap(),
            Matrix::diagonal(&[-0.3, 0.4]).unwrap(),
            Vector::new(vec![0.1, 0.2]).unwrap(),
            BoxDomain::cube(2, -1.0, 1.0).unwrap(),
        )
        .unwrap();
        assert!(f.range_in_domain());
        for theta in [0.1, 0.5, 0.9] {
            let x0 = f.domain().sample(&mut rng);
            let t = krasnoselskij_diagonal(&f, &x0, &cfg(Scheme::KrasnoselskijDiagonal, theta)).unwrap();
            assert!(!t.config.guard_domain);
            assert_eq!(t.status, Status::Converged);
            for p in &t.iterates {
                assert!(f.domain().contains_within(&p.x, 1e-12).unwrap());
            }
        }
    }

    #[test]
    fn reference_distances() {
        let f = BivariateOperator::example_4_1();
        let t = krasnoselskij_diagonal_with_reference(
            &f,
            &s(1.0),
            &cfg(Scheme::KrasnoselskijDiagonal, 0.25),
            Some(CoupledPair::scalar(0.0, 0.0).unwrap()),
        )
        .unwrap();
        let d = t.distances.as_ref().unwrap();
        assert_eq!(d.len(), t.len());
        assert_eq!(d[3], 0.125);
    }

    #[test]
    fn thinned_trace_stays_under_cap() {
        let c = SchemeConfig::new(Scheme::PicardDouble, 0.5, 1e-10, 250_000);
        let g = BivariateOperator::from_fn("drift", BoxDomain::interval(-1.0, 1.0).unwrap(), true, |x, _| {
            vec![(x[0] + 1e-6).min(1.0)]
        });
        let t = picard_double(&g, &s(-1.0), &s(-1.0), &c).unwrap();
        assert!(t.len() <= TRACE_CAP + 1);
        assert!(t.stored_every > 1);
        assert_eq!(t.steps.len(), t.residuals.len());
        assert!(t.steps.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(t.iterations(), 250_000);
    }

    #[test]
    fn fejer_on_example_4_1() {
        let f = BivariateOperator::example_4_1();
        let t = krasnoselskij_diagonal(&f, &s(1.0), &cfg(Scheme::KrasnoselskijDiagonal, 0.25)).unwrap();
        let r = verify_fejer_monotonicity(&t, &s(0.0)).unwrap();
        assert!(r.passed() && r.checks > 0, "{r:?}");
        let p = picard_double(&f, &s(1.0), &s(1.0), &cfg(Scheme::PicardDouble, 0.5)).unwrap();
        assert_eq!(verify_fejer_monotonicity(&p, &s(0.0)), Err(Error::NotKrasnoselskij));
    }

    #[test]
    fn fejer_on_constant_operator() {
        let f = make_linear_operator(Matrix::zeros(1), Matrix::zeros(1), s(0.4), BoxDomain::interval(-1.0, 1.0).unwrap()).unwrap();
        for theta in [0.1, 0.5, 0.9] {
            let t = krasnoselskij_diagonal(&f, &s(-1.0), &cfg(Scheme::KrasnoselskijDiagonal, theta)).unwrap();
            assert!((t.iterates[1].x.distance(&s(0.4)).unwrap() - (1.0 - theta) * 1.4).abs() < 1e-15);
            assert!(verify_fejer_monotonicity(&t, &s(0.4)).unwrap().passed());
        }
    }

    #[test]
    fn fejer_detects_a_wrong_reference() {
        let f = BivariateOperator::example_4_1();
        let t = krasnoselskij_diagonal(&f, &s(1.0), &cfg(Scheme::KrasnoselskijDiagonal, 0.3)).unwrap();
        assert!(!verify_fejer_monotonicity(&t, &s(0.9)).unwrap().passed());
    }

    #[test]
    fn residual_decay_example_4_1() {
        let f = BivariateOperator::example_4_1();
        let mut c = cfg(Scheme::KrasnoselskijDiagonal, 0.3);
        c.tol = 1e-300;
        c.max_iter = 100;
        let t = krasnoselskij_diagonal(&f, &s(1.0), &c).unwrap();
        assert_eq!(t.len(), 101);
        for (n, &r) in t.residuals.iter().enumerate() {
            // r_n = |x_n - F(x_n, x_n)| = 2|x_n| with x_n = 0.4^n
            let expect = 2.0 * 0.4f64.powi(n as i32);
            assert!((r - expect).abs() <= 1e-12 * expect);
        }
        assert!(verify_residual_decay(&t).passed());

        let t = krasnoselskij_diagonal(&f, &s(0.0), &cfg(Scheme::KrasnoselskijDiagonal, 0.3)).unwrap();
        assert_eq!(t.residuals, vec![0.0]);
        assert!(verify_residual_decay(&t).passed());
    }

    #[test]
    fn residual_decay_linear_d20() {
        let mut rng = ChaCha8Rng::seed_from_u64(20);
        let f = random_linear_operator(&mut rng, 20, 0.5, 0.45, 50.0).unwrap();
        let x0 = f.domain().sample(&mut rng);
        let c = SchemeConfig::new(Scheme::KrasnoselskijDiagonal, 0.5, 1e-10, 2000);
        let t = krasnoselskij_diagonal(&f, &x0, &c).unwrap();
        assert_eq!(t.status, Status::Converged);
        assert!(verify_residual_decay(&t).passed());
        let p = &f.known_fixed_points()[0].x;
        assert!(verify_fejer_monotonicity(&t, p).unwrap().passed());
    }

    #[test]
    fn averaged_map_is_nonexpansive() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for f in [BivariateOperator::example_2_1(), BivariateOperator::example_4_1()] {
            for theta in [0.1, 0.5, 0.9] {
                for _ in 0..500 {
                    let x = f.domain().sample(&mut rng);
                    let y = f.domain().sample(&mut rng);
                    let lhs = averaged_map(&f, theta, &x).unwrap().distance(&averaged_map(&f, theta, &y).unwrap()).unwrap();
                    let rhs = x.distance(&y).unwrap();
                    assert!(lhs <= rhs + 1e-9 * rhs.max(1.0));
                }
            }
        }
    }
}
