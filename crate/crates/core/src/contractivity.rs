//! Empirical estimation of the weak-nonexpansiveness constants `(a, b)` and
//! classification of an operator against three contractivity conditions:
//!
//! * weak nonexpansiveness: `‖F(x,y) − F(u,v)‖ ≤ a‖x−u‖ + b‖y−v‖`, `a + b ≤ 1`;
//! * nonexpansiveness: the same with `a = b = 1/2`;
//! * strict contraction: `‖F(x,y) − F(u,v)‖ ≤ k‖x−u‖ + l‖y−v‖`, `k + l < 1`.
//!
//! The constants are estimated by varying one argument at a time, so each
//! sampled ratio is a lower bound for any admissible constant. Refutations
//! carry concrete witnesses; candidate labels only mean that no sample
//! violated the condition.
//!
//! Sampling uses ChaCha8 with one stream per phase (first argument, second
//! argument, general quadruples), so a larger sample count extends the
//! smaller one's draws within each phase.

use std::collections::BTreeSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operators::BivariateOperator;
use crate::space::{BoxDomain, Vector};

/// Slack for every inequality checked against a sample.
pub const MARGIN: f64 = 1e-9;

/// Varied arguments closer than this are redrawn.
pub const MIN_SEPARATION: f64 = 1e-12;

const FIRST_ARGUMENT_STREAM: u64 = 0;
const SECOND_ARGUMENT_STREAM: u64 = 1;
const QUADRUPLE_STREAM: u64 = 2;
const MAX_REDRAWS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    ContractionCandidate,
    WeaklyNonexpansiveCandidate,
    NonexpansiveCandidate,
    RefutedWeaklyNonexpansive,
    RefutedNonexpansive,
    RefutedContraction,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    WeaklyNonexpansive,
    Nonexpansive,
    Contraction,
}

/// How a witness ratio is formed from `ΔF = F(x,y) − F(u,v)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ratio {
    /// `‖ΔF‖ / ‖x − u‖` (with `y = v`).
    FirstArgument,
    /// `‖ΔF‖ / ‖y − v‖` (with `x = u`).
    SecondArgument,
    /// `‖ΔF‖ / max(‖x − u‖, ‖y − v‖)`.
    MaxDistance,
    /// `‖ΔF‖ / (‖x − u‖ + ‖y − v‖)`.
    SumDistance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Quadruple {
    pub x: Vector,
    pub y: Vector,
    pub u: Vector,
    pub v: Vector,
}

impl Quadruple {
    /// Returns `(‖ΔF‖, ‖x − u‖, ‖y − v‖)`.
    fn measure(&self, f: &BivariateOperator) -> Result<(f64, f64, f64)> {
        let df = f.eval(&self.x, &self.y)?.distance(&f.eval(&self.u, &self.v)?)?;
        Ok((df, self.x.distance(&self.u)?, self.y.distance(&self.v)?))
    }

    pub fn ratio(&self, f: &BivariateOperator, kind: Ratio) -> Result<f64> {
        let (df, dx, dy) = self.measure(f)?;
        let denom = match kind {
            Ratio::FirstArgument => dx,
            Ratio::SecondArgument => dy,
            Ratio::MaxDistance => dx.max(dy),
            Ratio::SumDistance => dx + dy,
        };
        Ok(df / denom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub refutes: Condition,
    pub measure: Ratio,
    #[serde(flatten)]
    pub quadruple: Quadruple,
    pub ratio: f64,
}

impl Witness {
    fn new(refutes: Condition, measure: Ratio, quadruple: Quadruple, ratio: f64) -> Self {
        Witness {
            refutes,
            measure,
            quadruple,
            ratio,
        }
    }

    /// Recomputes the stored ratio from the operator.
    pub fn reevaluate(&self, f: &BivariateOperator) -> Result<f64> {
        self.quadruple.ratio(f, self.measure)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractivityReport {
    pub operator_name: String,
    pub a_hat: f64,
    pub b_hat: f64,
    /// Quadruple attaining `a_hat` (`y = v`).
    pub a_hat_witness: Option<Quadruple>,
    /// Quadruple attaining `b_hat` (`x = u`).
    pub b_hat_witness: Option<Quadruple>,
    pub samples_used: usize,
    pub seed: u64,
    pub classification: BTreeSet<Label>,
    pub witnesses: Vec<Witness>,
    /// `|a_hat + b_hat − 1| ≤ MARGIN`: the estimate sits on the boundary of
    /// the admissible simplex and the labels there depend on the margin.
    pub on_simplex_boundary: bool,
    /// General quadruples violating the inequality with `(a_hat, b_hat)`
    /// themselves. Not a refutation: another pair on the simplex may work.
    pub estimate_exceedances: usize,
}

impl ContractivityReport {
    pub fn has(&self, label: Label) -> bool {
        self.classification.contains(&label)
    }

    pub fn witnesses_for(&self, condition: Condition) -> impl Iterator<Item = &Witness> {
        self.witnesses.iter().filter(move |w| w.refutes == condition)
    }

    /// Re-evaluates every stored witness and confirms that each refutation
    /// label is still backed by a violated inequality.
    pub fn certificates_hold(&self, f: &BivariateOperator) -> Result<bool> {
        for w in &self.witnesses {
            let r = w.reevaluate(f)?;
            if (r - w.ratio).abs() > 1e-10 * w.ratio.abs().max(1e-300) {
                return Ok(false);
            }
        }
        let checks = [
            (Label::RefutedWeaklyNonexpansive, Condition::WeaklyNonexpansive),
            (Label::RefutedNonexpansive, Condition::Nonexpansive),
            (Label::RefutedContraction, Condition::Contraction),
        ];
        for (label, condition) in checks {
            if self.has(label) && !certificate_confirms(f, self.witnesses_for(condition))? {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

fn certificate_confirms<'a>(
    f: &BivariateOperator,
    witnesses: impl Iterator<Item = &'a Witness>,
) -> Result<bool> {
    let mut axis_sum = 0.0;
    let mut axis = [false; 2];
    let mut condition = None;
    for w in witnesses {
        condition = Some(w.refutes);
        let (df, dx, dy) = w.quadruple.measure(f)?;
        let single = match (w.refutes, w.measure) {
            (Condition::WeaklyNonexpansive, Ratio::MaxDistance) => df > dx.max(dy) + MARGIN,
            (Condition::Nonexpansive, Ratio::SumDistance) => df > 0.5 * (dx + dy) + MARGIN,
            (_, Ratio::FirstArgument) => {
                axis[0] = true;
                axis_sum += df / dx;
                false
            }
            (_, Ratio::SecondArgument) => {
                axis[1] = true;
                axis_sum += df / dy;
                false
            }
            _ => false,
        };
        if single {
            return Ok(true);
        }
    }
    let pair_ok = axis[0] && axis[1];
    Ok(match condition {
        Some(Condition::WeaklyNonexpansive) => pair_ok && axis_sum > 1.0 + MARGIN,
        Some(Condition::Contraction) => pair_ok && axis_sum >= 1.0 - MARGIN,
        _ => false,
    })
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Draws `partner` until it is at least `MIN_SEPARATION` away from `anchor`.
fn separated(c: &BoxDomain, rng: &mut ChaCha8Rng, anchor: &Vector) -> Result<Vector> {
    for _ in 0..MAX_REDRAWS {
        let p = c.sample(rng);
        if p.distance(anchor)? >= MIN_SEPARATION {
            return Ok(p);
        }
    }
    Err(Error::DegenerateDomain)
}

fn axis_estimate(
    f: &BivariateOperator,
    n_samples: usize,
    seed: u64,
    first: bool,
) -> Result<(f64, Option<Quadruple>)> {
    let c = f.domain();
    let mut rng = stream(seed, if first { FIRST_ARGUMENT_STREAM } else { SECOND_ARGUMENT_STREAM });
    let mut best = (0.0, None);
    for _ in 0..n_samples {
        let fixed = c.sample(&mut rng);
        let moving = c.sample(&mut rng);
        let partner = separated(c, &mut rng, &moving)?;
        let q = if first {
            Quadruple { x: moving, y: fixed.clone(), u: partner, v: fixed }
        } else {
            Quadruple { x: fixed.clone(), y: moving, u: fixed, v: partner }
        };
        let r = q.ratio(f, if first { Ratio::FirstArgument } else { Ratio::SecondArgument })?;
        if best.1.is_none() || r > best.0 {
            best = (r, Some(q));
        }
    }
    Ok(best)
}

/// Axis-restricted estimate of `(a, b)`: `a_hat` is the largest sampled
/// `‖F(x,y) − F(u,y)‖/‖x − u‖`, `b_hat` the largest `‖F(x,y) − F(x,v)‖/‖y − v‖`.
/// The returned report has an empty classification; see [`classify`].
pub fn estimate_constants(f: &BivariateOperator, n_samples: usize, seed: u64) -> Result<ContractivityReport> {
    if n_samples == 0 {
        return Err(Error::config("samples", "must be at least 1"));
    }
    if f.domain().is_degenerate() {
        return Err(Error::DegenerateDomain);
    }
    let (a_hat, a_hat_witness) = axis_estimate(f, n_samples, seed, true)?;
    let (b_hat, b_hat_witness) = axis_estimate(f, n_samples, seed, false)?;
    Ok(ContractivityReport {
        operator_name: f.name().to_string(),
        a_hat,
        b_hat,
        a_hat_witness,
        b_hat_witness,
        samples_used: n_samples,
        seed,
        classification: BTreeSet::new(),
        witnesses: Vec::new(),
        on_simplex_boundary: ((a_hat + b_hat) - 1.0).abs() <= MARGIN,
        estimate_exceedances: 0,
    })
}

/// Uniform quadruples `(x, y, u, v)` from `C⁴` for the general sweep.
pub fn sample_quadruples(f: &BivariateOperator, n_samples: usize, seed: u64) -> Result<Vec<Quadruple>> {
    let c = f.domain();
    if c.is_degenerate() {
        return Err(Error::DegenerateDomain);
    }
    let mut rng = stream(seed, QUADRUPLE_STREAM);
    let mut out = Vec::with_capacity(n_samples);
    while out.len() < n_samples {
        let q = Quadruple {
            x: c.sample(&mut rng),
            y: c.sample(&mut rng),
            u: c.sample(&mut rng),
            v: c.sample(&mut rng),
        };
        if q.x.distance(&q.u)?.max(q.y.distance(&q.v)?) >= MIN_SEPARATION {
            out.push(q);
        }
    }
    Ok(out)
}

/// Assigns one label per condition.
///
/// The general quadruples and the two axis maximizers are scanned for the
/// strongest single-quadruple violation of weak nonexpansiveness
/// (`‖ΔF‖ > max(‖x−u‖, ‖y−v‖) + MARGIN`) and of nonexpansiveness
/// (`‖ΔF‖ > ½(‖x−u‖ + ‖y−v‖) + MARGIN`). Weak nonexpansiveness is also
/// refuted when `a_hat + b_hat > 1 + MARGIN`, and strict contraction when
/// `a_hat + b_hat ≥ 1 − MARGIN`; the two axis maximizers are the witnesses.
pub fn classify(
    mut report: ContractivityReport,
    general_samples: &[Quadruple],
    f: &BivariateOperator,
) -> Result<ContractivityReport> {
    let axis: Vec<Quadruple> = report
        .a_hat_witness
        .iter()
        .chain(report.b_hat_witness.iter())
        .cloned()
        .collect();

    let mut worst_wne: Option<(f64, &Quadruple)> = None;
    let mut worst_ne: Option<(f64, &Quadruple)> = None;
    let mut exceedances = 0;
    for q in general_samples.iter().chain(axis.iter()) {
        let (df, dx, dy) = q.measure(f)?;
        if df > dx.max(dy) + MARGIN {
            let r = df / dx.max(dy);
            if worst_wne.is_none_or(|(best, _)| r > best) {
                worst_wne = Some((r, q));
            }
        }
        if df > 0.5 * (dx + dy) + MARGIN {
            let r = df / (dx + dy);
            if worst_ne.is_none_or(|(best, _)| r > best) {
                worst_ne = Some((r, q));
            }
        }
    }
    for q in general_samples {
        let (df, dx, dy) = q.measure(f)?;
        let bound = report.a_hat * dx + report.b_hat * dy;
        if df > bound + MARGIN * bound.max(1.0) {
            exceedances += 1;
        }
    }

    let sum = report.a_hat + report.b_hat;
    let axis_witnesses = |condition: Condition, report: &ContractivityReport| -> Vec<Witness> {
        let mut out = Vec::new();
        if let Some(q) = &report.a_hat_witness {
            out.push(Witness::new(condition, Ratio::FirstArgument, q.clone(), report.a_hat));
        }
        if let Some(q) = &report.b_hat_witness {
            out.push(Witness::new(condition, Ratio::SecondArgument, q.clone(), report.b_hat));
        }
        out
    };

    let mut labels = BTreeSet::new();
    let mut witnesses = Vec::new();

    if let Some((r, q)) = worst_wne {
        labels.insert(Label::RefutedWeaklyNonexpansive);
        witnesses.push(Witness::new(Condition::WeaklyNonexpansive, Ratio::MaxDistance, q.clone(), r));
    } else if sum > 1.0 + MARGIN {
        labels.insert(Label::RefutedWeaklyNonexpansive);
        witnesses.extend(axis_witnesses(Condition::WeaklyNonexpansive, &report));
    } else {
        labels.insert(Label::WeaklyNonexpansiveCandidate);
    }

    if let Some((r, q)) = worst_ne {
        labels.insert(Label::RefutedNonexpansive);
        witnesses.push(Witness::new(Condition::Nonexpansive, Ratio::SumDistance, q.clone(), r));
    } else {
        labels.insert(Label::NonexpansiveCandidate);
    }

    if sum >= 1.0 - MARGIN {
        labels.insert(Label::RefutedContraction);
        witnesses.extend(axis_witnesses(Condition::Contraction, &report));
    } else {
        labels.insert(Label::ContractionCandidate);
    }

    report.classification = labels;
    report.witnesses = witnesses;
    report.estimate_exceedances = exceedances;
    Ok(report)
}

/// [`estimate_constants`] followed by [`classify`] over `n_samples` general
/// quadruples drawn with the same seed.
pub fn analyze(f: &BivariateOperator, n_samples: usize, seed: u64) -> Result<ContractivityReport> {
    let report = estimate_constants(f, n_samples, seed)?;
    let quadruples = sample_quadruples(f, n_samples, seed)?;
    classify(report, &quadruples, f)
}
