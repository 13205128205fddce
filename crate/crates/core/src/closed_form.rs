//! Closed-form iterate formulas for the scalar example operators.
//!
//! Each oracle is written in terms of the printed relaxation parameter `λ`.
//! For both Krasnoselskij formulas the printed `λ` is the weight on the
//! operator image, i.e. the engine's `theta` (see [`OracleHandle::engine_theta`]).
//! Powers are accumulated by repeated multiplication.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operators::CoupledPair;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleKind {
    /// `x_n = ½[x₀ − y₀ + (−1/3)ⁿ(x₀ + y₀)]`, `y_n` symmetric; double Picard
    /// on `F(x, y) = (x − 2y)/3`.
    PicardExample21,
    /// `x_n = (1 − 2λ)ⁿ x₀`; diagonal Krasnoselskij on `F(x, y) = −(x + y)/2`.
    KrasnoselskijExample41,
    /// `x_n = ½[(1 − λ)ⁿ(x₀ − y₀) + (1 − 2λ)ⁿ(x₀ + y₀)]`, `y_n` symmetric,
    /// transcribed as printed for the double Krasnoselskij scheme. The
    /// formula is the exact trajectory for `F(x, y) = −(x + y)/2`; it does
    /// not describe `F(x, y) = (x − 2y)/3`.
    DoubleKrasnoselskijExample21,
    /// Exact double Krasnoselskij trajectory for `F(x, y) = (x − 2y)/3`:
    /// `x_n = ½[(x₀ − y₀) + (1 − 4λ/3)ⁿ(x₀ + y₀)]`. The difference
    /// `x_n − y_n` is invariant.
    DoubleKrasnoselskijExample21Exact,
}

impl OracleKind {
    pub const ALL: [OracleKind; 4] = [
        OracleKind::PicardExample21,
        OracleKind::KrasnoselskijExample41,
        OracleKind::DoubleKrasnoselskijExample21,
        OracleKind::DoubleKrasnoselskijExample21Exact,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            OracleKind::PicardExample21 => "picard_example_2_1",
            OracleKind::KrasnoselskijExample41 => "krasnoselskij_example_4_1",
            OracleKind::DoubleKrasnoselskijExample21 => "double_krasnoselskij_example_2_1",
            OracleKind::DoubleKrasnoselskijExample21Exact => "double_krasnoselskij_example_2_1_exact",
        }
    }

    pub fn uses_lambda(self) -> bool {
        !matches!(self, OracleKind::PicardExample21)
    }
}

impl fmt::Display for OracleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for OracleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        OracleKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::UnknownOracle(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleHandle {
    kind: OracleKind,
    x0: f64,
    y0: f64,
    lambda: f64,
}

impl OracleHandle {
    /// `lambda` is ignored for the Picard oracle. For the Krasnoselskij
    /// oracles it must lie in `[0, 1]`; the endpoints are accepted so that
    /// [`oracle_limit`] can report the non-convergent regime.
    pub fn new(kind: OracleKind, x0: f64, y0: f64, lambda: f64) -> Result<Self> {
        if !x0.is_finite() || !y0.is_finite() {
            return Err(Error::config("initial", "initial values must be finite"));
        }
        if kind.uses_lambda() && !(0.0..=1.0).contains(&lambda) {
            return Err(Error::LambdaOutOfRange(lambda));
        }
        let y0 = if kind == OracleKind::KrasnoselskijExample41 { x0 } else { y0 };
        Ok(OracleHandle { kind, x0, y0, lambda })
    }

    pub fn picard_example_2_1(x0: f64, y0: f64) -> Self {
        OracleHandle::new(OracleKind::PicardExample21, x0, y0, 0.0).expect("finite inputs")
    }

    pub fn kind(&self) -> OracleKind {
        self.kind
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn initial(&self) -> (f64, f64) {
        (self.x0, self.y0)
    }

    /// Relaxation weight on `F` that the iteration engine must use to
    /// reproduce this oracle. `None` for the Picard oracle.
    pub fn engine_theta(&self) -> Option<f64> {
        self.kind.uses_lambda().then_some(self.lambda)
    }

    /// Per-step factors applied to the difference `x − y` and the sum `x + y`.
    fn factors(&self) -> (f64, f64) {
        let l = self.lambda;
        match self.kind {
            OracleKind::PicardExample21 => (1.0, -1.0 / 3.0),
            OracleKind::KrasnoselskijExample41 => (1.0 - 2.0 * l, 1.0 - 2.0 * l),
            OracleKind::DoubleKrasnoselskijExample21 => (1.0 - l, 1.0 - 2.0 * l),
            OracleKind::DoubleKrasnoselskijExample21Exact => (1.0, 1.0 - 4.0 * l / 3.0),
        }
    }
}

fn power(base: f64, n: u32) -> f64 {
    (0..n).fold(1.0, |acc, _| acc * base)
}

/// The `n`-th iterate pair from the closed form.
pub fn oracle_iterate(h: &OracleHandle, n: u32) -> CoupledPair {
    let (x0, y0) = (h.x0, h.y0);
    if n == 0 {
        return CoupledPair::scalar(x0, y0).expect("finite initial values");
    }
    let (x, y) = match h.kind {
        OracleKind::KrasnoselskijExample41 => {
            let x = power(1.0 - 2.0 * h.lambda, n) * x0;
            (x, x)
        }
        OracleKind::PicardExample21 => {
            let q = power(-1.0 / 3.0, n);
            (
                0.5 * (x0 - y0 + q * (x0 + y0)),
                0.5 * (y0 - x0 + q * (x0 + y0)),
            )
        }
        OracleKind::DoubleKrasnoselskijExample21 | OracleKind::DoubleKrasnoselskijExample21Exact => {
            let (fd, fs) = h.factors();
            let (pd, ps) = (power(fd, n), power(fs, n));
            (
                0.5 * (pd * (x0 - y0) + ps * (x0 + y0)),
                0.5 * (pd * (y0 - x0) + ps * (x0 + y0)),
            )
        }
    };
    CoupledPair::scalar(x, y).expect("closed form stays finite")
}

/// Analytic limit of [`oracle_iterate`] as `n → ∞`.
pub fn oracle_limit(h: &OracleHandle) -> Result<CoupledPair> {
    let (fd, fs) = h.factors();
    let converges = |f: f64| f.abs() < 1.0;
    let (x0, y0) = (h.x0, h.y0);
    match h.kind {
        OracleKind::PicardExample21 | OracleKind::DoubleKrasnoselskijExample21Exact => {
            if !converges(fs) {
                return Err(Error::NonConvergent(h.lambda));
            }
            let half = 0.5 * (x0 - y0);
            Ok(CoupledPair::scalar(half, -half).expect("finite"))
        }
        OracleKind::KrasnoselskijExample41 | OracleKind::DoubleKrasnoselskijExample21 => {
            // the difference term vanishes in the limit only if it contracts
            let diff_ok = converges(fd) || (h.kind == OracleKind::DoubleKrasnoselskijExample21 && x0 == y0);
            if !converges(fs) || !diff_ok {
                return Err(Error::NonConvergent(h.lambda));
            }
            Ok(CoupledPair::scalar(0.0, 0.0).expect("finite"))
        }
    }
}
