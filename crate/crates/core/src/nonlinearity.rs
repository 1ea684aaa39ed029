//! The time-derivative nonlinearity `b`, its smooth family `b_n`, and the
//! divergence-form coefficient `Ψ`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest double strictly below one.
const ONE_MINUS_ULP: f64 = 1.0 - f64::EPSILON / 2.0;

/// An increasing Lipschitz `b` vanishing on the nonpositive axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BSpec {
    PositivePart,
    /// Piecewise linear: `slopes[i]` applies on `[breakpoints[i], breakpoints[i+1])`,
    /// the last slope extends to infinity. `breakpoints[0]` must be 0.
    LipschitzTable {
        breakpoints: Vec<f64>,
        slopes: Vec<f64>,
    },
}

impl BSpec {
    pub fn table(breakpoints: Vec<f64>, slopes: Vec<f64>) -> Result<Self> {
        if breakpoints.is_empty() || breakpoints.len() != slopes.len() {
            return Err(Error::config(
                "b table needs as many slopes as breakpoints (at least one)",
            ));
        }
        if breakpoints[0] != 0.0 {
            return Err(Error::config("b table must start at breakpoint 0"));
        }
        if breakpoints.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::config("b table breakpoints must increase strictly"));
        }
        if slopes.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
            return Err(Error::config("b table slopes must be positive and finite"));
        }
        Ok(BSpec::LipschitzTable {
            breakpoints,
            slopes,
        })
    }

    pub fn eval(&self, s: f64) -> f64 {
        match self {
            BSpec::PositivePart => s.max(0.0),
            BSpec::LipschitzTable {
                breakpoints,
                slopes,
            } => {
                if s <= 0.0 {
                    return 0.0;
                }
                let mut acc = 0.0;
                for i in 0..slopes.len() {
                    let lo = breakpoints[i];
                    let hi = breakpoints.get(i + 1).copied().unwrap_or(f64::INFINITY);
                    if s < hi {
                        return acc + slopes[i] * (s - lo);
                    }
                    acc += slopes[i] * (hi - lo);
                }
                acc
            }
        }
    }

    /// One-sided derivative; the right derivative is used at kinks except at 0,
    /// where the left value 0 is returned.
    pub fn derivative(&self, s: f64) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        match self {
            BSpec::PositivePart => 1.0,
            BSpec::LipschitzTable {
                breakpoints,
                slopes,
            } => {
                let i = breakpoints.partition_point(|&b| b <= s);
                slopes[i.saturating_sub(1)]
            }
        }
    }

    /// Lower bound `c` on the slope over the positive axis.
    pub fn min_slope(&self) -> f64 {
        match self {
            BSpec::PositivePart => 1.0,
            BSpec::LipschitzTable { slopes, .. } => {
                slopes.iter().copied().fold(f64::INFINITY, f64::min)
            }
        }
    }

    pub fn lipschitz(&self) -> f64 {
        match self {
            BSpec::PositivePart => 1.0,
            BSpec::LipschitzTable { slopes, .. } => slopes.iter().copied().fold(0.0, f64::max),
        }
    }
}

/// The smooth approximations `b_n(s) = n^-2 log((e^n + e^{n² s}) / (e^n + 1))` of `s₊`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BnFamily {
    pub n: u32,
}

impl BnFamily {
    pub fn new(n: u32) -> Result<Self> {
        if n == 0 {
            return Err(Error::config("b_n requires n >= 1"));
        }
        Ok(BnFamily { n })
    }

    /// Overflow-safe evaluation. Below the crossover `n² s = n` the expression is
    /// rewritten with `log1p`/`expm1` so that `b_n(0) = 0` exactly and small
    /// arguments keep full relative accuracy; above it the linear part is
    /// factored out.
    pub fn eval(&self, s: f64) -> f64 {
        let n = self.n as f64;
        let n2 = n * n;
        let y = n2 * s;
        let en = (-n).exp();
        if y <= n {
            (y.exp_m1() * (en / (1.0 + en))).ln_1p() / n2
        } else {
            s - 1.0 / n + ((n - y).exp().ln_1p() - en.ln_1p()) / n2
        }
    }

    /// `b_n'(s) = sigmoid(n² s - n)`, clamped into the open unit interval so the
    /// strict bounds survive underflow and rounding.
    pub fn derivative(&self, s: f64) -> f64 {
        let n = self.n as f64;
        let x = n * n * s - n;
        let v = if x >= 0.0 {
            1.0 / (1.0 + (-x).exp())
        } else {
            let e = x.exp();
            e / (1.0 + e)
        };
        v.clamp(f64::MIN_POSITIVE, ONE_MINUS_ULP)
    }

    pub fn second_derivative(&self, s: f64) -> f64 {
        let n = self.n as f64;
        let x = n * n * s - n;
        let e = (-x.abs()).exp();
        n * n * e / ((1.0 + e) * (1.0 + e))
    }
}

/// The nonlinearity actually integrated: either an exact `b` or a member of `b_n`.
#[derive(Debug, Clone, PartialEq)]
pub enum Nonlinearity {
    Exact(BSpec),
    Smooth(BnFamily),
}

impl Nonlinearity {
    pub fn eval(&self, s: f64) -> f64 {
        match self {
            Nonlinearity::Exact(b) => b.eval(s),
            Nonlinearity::Smooth(f) => f.eval(s),
        }
    }

    pub fn derivative(&self, s: f64) -> f64 {
        match self {
            Nonlinearity::Exact(b) => b.derivative(s),
            Nonlinearity::Smooth(f) => f.derivative(s),
        }
    }

    /// Zero for the piecewise-linear exact kinds.
    pub fn second_derivative(&self, s: f64) -> f64 {
        match self {
            Nonlinearity::Exact(_) => 0.0,
            Nonlinearity::Smooth(f) => f.second_derivative(s),
        }
    }
}

/// Positive `C¹` coefficient of the divergence-form operator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PsiSpec {
    Constant {
        value: f64,
    },
    /// `Σ coeffs[i] y^i`.
    Polynomial {
        coeffs: Vec<f64>,
    },
}

impl PsiSpec {
    /// Unchecked value.
    pub fn value(&self, y: f64) -> f64 {
        match self {
            PsiSpec::Constant { value } => *value,
            PsiSpec::Polynomial { coeffs } => coeffs.iter().rev().fold(0.0, |acc, c| acc * y + c),
        }
    }

    pub fn eval(&self, y: f64) -> Result<f64> {
        if y < 0.0 {
            return Err(Error::domain(format!("psi evaluated at negative y = {y}")));
        }
        let v = self.value(y);
        if !(v > 0.0) {
            return Err(Error::domain(format!("psi({y}) = {v} is not positive")));
        }
        Ok(v)
    }

    pub fn derivative(&self, y: f64) -> f64 {
        match self {
            PsiSpec::Constant { .. } => 0.0,
            PsiSpec::Polynomial { coeffs } => coeffs
                .iter()
                .enumerate()
                .skip(1)
                .rev()
                .fold(0.0, |acc, (i, c)| acc * y + i as f64 * c),
        }
    }

    pub fn second_derivative(&self, y: f64) -> f64 {
        match self {
            PsiSpec::Constant { .. } => 0.0,
            PsiSpec::Polynomial { coeffs } => coeffs
                .iter()
                .enumerate()
                .skip(2)
                .rev()
                .fold(0.0, |acc, (i, c)| acc * y + (i * (i - 1)) as f64 * c),
        }
    }

    /// Checks positivity on `[0, y_max]` at evenly spaced samples.
    pub fn check_positive_on(&self, y_max: f64) -> Result<()> {
        let samples = 2048;
        for k in 0..=samples {
            let y = y_max * k as f64 / samples as f64;
            self.eval(y)?;
        }
        Ok(())
    }
}
