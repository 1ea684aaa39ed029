//! Logarithmic supersolution for divergence-form operators,
//! `φ(x, t) = ψ(|x| - ωt - ρ₀)` with `ψ(s) = log(aks + 1)/k` on `0 ≤ s ≤ η`.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{sample_sphere, Barrier, BarrierConfig, FluxGap, Jet, NamedCheck, Sense};
use crate::error::{Error, Result};
use crate::nonlinearity::{Nonlinearity, PsiSpec};
use crate::operators::{OperatorContext, OperatorSpec};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LogDivBarrier {
    pub k1: f64,
    pub k2: f64,
    pub k: f64,
    pub a: f64,
    pub eta0: f64,
    pub eta: f64,
    pub omega: f64,
    pub rho0: f64,
    #[serde(rename = "M")]
    pub m: f64,
    pub n_dim: usize,
    /// Time window `[t_lo, t_hi]`.
    pub t_lo: f64,
    pub t_hi: f64,
}

const GRID_NODES: usize = 1000;

/// Maximum of `f` on `[0, hi]`: grid search, then golden-section refinement
/// around the best node.
fn maximize(f: impl Fn(f64) -> Result<f64>, hi: f64) -> Result<f64> {
    let h = hi / (GRID_NODES - 1) as f64;
    let mut best = (0usize, f64::NEG_INFINITY);
    for i in 0..GRID_NODES {
        let v = f(i as f64 * h)?;
        if v > best.1 {
            best = (i, v);
        }
    }
    let (mut a, mut b) = (
        (best.0 as f64 - 1.0).max(0.0) * h,
        ((best.0 + 1) as f64 * h).min(hi),
    );
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    for _ in 0..80 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d)?;
        }
    }
    Ok(best.1.max(fc).max(fd))
}

fn dfbk_first(k: f64, k1: f64, k2: f64, eta: f64) -> f64 {
    (k - k2) / (k * k1) - 1.0 / k - eta
}

fn dfbk_second(k: f64, k1: f64, k2: f64, m: f64) -> f64 {
    2.0 * m - ((k - k2) / k1).ln() / k
}

pub fn solve_logdiv_barrier(
    psi: &PsiSpec,
    b: &Nonlinearity,
    omega: f64,
    rho0: f64,
    m: f64,
    n_dim: usize,
) -> Result<LogDivBarrier> {
    if !(omega >= 0.0 && rho0 > 0.0 && m > 0.0 && n_dim >= 1)
        || !(omega.is_finite() && rho0.is_finite() && m.is_finite())
    {
        return Err(Error::domain(format!(
            "log barrier needs omega >= 0, rho0 > 0, M > 0, got {omega}, {rho0}, {m}"
        )));
    }
    let coeff = |s: f64| -> Result<f64> {
        psi.eval(b.eval(s).max(0.0))
            .map_err(|e| Error::infeasible(format!("coefficient not positive on [0, 3M]: {e}")))
    };
    let f1 = |s: f64| Ok(omega * b.derivative(s) / coeff(s)?);
    let f2 = |s: f64| Ok(psi.derivative(b.eval(s).max(0.0)).abs() * b.derivative(s) / coeff(s)?);
    let curvature = 2.0 * (n_dim as f64 - 1.0) / rho0;
    let mut k1 = maximize(f1, 3.0 * m)? + curvature;
    if k1 <= 0.0 {
        // one dimension and a stationary front: any positive bound will do
        k1 = 1.0 / rho0;
    }
    let k2 = maximize(f2, 3.0 * m)?.max(0.0);
    let eta0 = 1.0 / k1;
    let eta = eta0 / 2.0;
    let mut k = k2 + 1.0;
    for _ in 0..200 {
        if 2.5 * m * k > 700.0 {
            break;
        }
        if dfbk_first(k, k1, k2, eta) > 0.0 && dfbk_second(k, k1, k2, m) > 0.0 {
            let a = (2.5 * m * k).exp_m1() / (k * eta);
            if a > 1.0 {
                let t_lo = if omega > 0.0 {
                    -0.99 * rho0 / (2.0 * omega)
                } else {
                    -1.0
                };
                return Ok(LogDivBarrier {
                    k1,
                    k2,
                    k,
                    a,
                    eta0,
                    eta,
                    omega,
                    rho0,
                    m,
                    n_dim,
                    t_lo,
                    t_hi: 1.0,
                });
            }
        }
        k *= 2.0;
    }
    Err(Error::infeasible(format!(
        "no admissible k for k1 = {k1}, k2 = {k2}, M = {m} before exp overflow"
    )))
}

impl LogDivBarrier {
    pub fn psi(&self, s: f64) -> f64 {
        (self.a * self.k * s).ln_1p() / self.k
    }

    fn psi_prime(&self, s: f64) -> f64 {
        self.a / (self.a * self.k * s + 1.0)
    }

    fn shift(&self, rho: f64, t: f64) -> f64 {
        rho - self.omega * t - self.rho0
    }
}

impl Barrier for LogDivBarrier {
    fn family(&self) -> &'static str {
        "logdiv"
    }

    fn sense(&self) -> Sense {
        Sense::Super
    }

    fn n_dim(&self) -> usize {
        self.n_dim
    }

    fn jet(&self, x: &[f64], t: f64) -> Result<Jet> {
        let rho = super::norm(x);
        let s = self.shift(rho, t);
        if !(s >= 0.0 && s <= self.eta && t >= self.t_lo && t <= self.t_hi) {
            return Err(Error::domain(format!(
                "(|x| = {rho}, t = {t}) outside the log-barrier window"
            )));
        }
        let dp = self.psi_prime(s);
        Ok(Jet::radial(
            x,
            self.psi(s),
            -self.omega * dp,
            dp,
            -self.k * dp * dp,
        ))
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> Option<(Vec<f64>, f64)> {
        let t = rng.gen_range(self.t_lo..=self.t_hi);
        let s = rng.gen_range(0.0..=self.eta);
        let rho = self.rho0 + self.omega * t + s;
        Some((sample_sphere(rng, self.n_dim, rho), t))
    }

    fn scale(&self) -> f64 {
        self.m / (self.eta * self.eta)
    }

    fn flux(&self) -> Option<FluxGap> {
        None
    }

    fn checks(&self) -> Vec<NamedCheck> {
        let top = self.psi(self.eta);
        vec![
            NamedCheck::new("psi_zero_at_front", self.psi(0.0) == 0.0, self.psi(0.0)),
            NamedCheck::new("psi_above_2M", top > 2.0 * self.m, top),
            NamedCheck::new("psi_below_3M", top < 3.0 * self.m, top),
            NamedCheck::new("a_above_one", self.a > 1.0, self.a),
            NamedCheck::new(
                "dfbk_first",
                dfbk_first(self.k, self.k1, self.k2, self.eta) > 0.0,
                dfbk_first(self.k, self.k1, self.k2, self.eta),
            ),
            NamedCheck::new(
                "dfbk_second",
                dfbk_second(self.k, self.k1, self.k2, self.m) > 0.0,
                dfbk_second(self.k, self.k1, self.k2, self.m),
            ),
        ]
    }
}

pub(super) fn build(
    cfg: &BarrierConfig,
    op: &OperatorSpec,
    ctx: &OperatorContext,
) -> Result<Box<dyn Barrier>> {
    let psi = ctx
        .psi
        .as_ref()
        .ok_or_else(|| Error::config("logdiv barrier needs a [psi] section"))?;
    Ok(Box::new(solve_logdiv_barrier(
        psi,
        &ctx.b,
        cfg.omega.unwrap_or(0.0),
        cfg.require(cfg.rho0, "rho0")?,
        cfg.require(cfg.m, "M")?,
        op.n_dim,
    )?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::barriers::test_support::check_derivatives;
    use crate::barriers::verify_subsolution_margin;
    use crate::nonlinearity::BSpec;

    fn divergence(
        psi: &PsiSpec,
        b: &Nonlinearity,
        n: usize,
    ) -> Box<dyn crate::operators::EllipticOperator> {
        let ctx = OperatorContext {
            b: b.clone(),
            psi: Some(psi.clone()),
        };
        OperatorSpec::new("divergence", 1.0, 1.0, 0.0, 0.0, n)
            .build(&ctx)
            .unwrap()
    }

    #[test]
    fn constant_coefficient_example() {
        let psi = PsiSpec::Constant { value: 1.0 };
        let b = Nonlinearity::Exact(BSpec::PositivePart);
        let bar = solve_logdiv_barrier(&psi, &b, 0.0, 1.0, 1.0, 2).unwrap();
        assert_eq!(bar.k2, 0.0);
        assert_eq!(bar.k1, 2.0);
        assert_eq!(bar.eta0, 0.5);
        assert_eq!(bar.eta, 0.25);
        assert!(bar.k > 4.0);
        assert_eq!(bar.k, 8.0);
        assert_eq!(bar.psi(0.0), 0.0);
        let top = bar.psi(bar.eta);
        assert!(top > 2.0 && top < 3.0);
        let op = divergence(&psi, &b, 2);
        let r = verify_subsolution_margin(&bar, op.as_ref(), Some(&b), 1000, 5).unwrap();
        assert!(r.passed && r.worst_margin > 0.0, "{r:?}");
    }

    #[test]
    fn moving_front_variable_coefficient() {
        let psi = PsiSpec::Polynomial {
            coeffs: vec![1.0, 0.5, 0.25],
        };
        let b = Nonlinearity::Exact(BSpec::table(vec![0.0, 1.0], vec![1.0, 0.5]).unwrap());
        for (omega, n) in [(0.5, 2), (2.0, 3), (0.0, 1)] {
            let bar = solve_logdiv_barrier(&psi, &b, omega, 1.0, 0.5, n).unwrap();
            assert!(bar.k2 > 0.0);
            let op = divergence(&psi, &b, n);
            let r = verify_subsolution_margin(&bar, op.as_ref(), Some(&b), 1000, 9).unwrap();
            assert!(r.passed, "{omega} {n}: {r:?}");
        }
    }

    #[test]
    fn nonpositive_coefficient_is_infeasible() {
        let psi = PsiSpec::Polynomial {
            coeffs: vec![1.0, -1.0],
        };
        let b = Nonlinearity::Exact(BSpec::PositivePart);
        let e = solve_logdiv_barrier(&psi, &b, 0.0, 1.0, 1.0, 2).unwrap_err();
        assert!(matches!(e, Error::Infeasible(_)));
    }

    #[test]
    fn derivatives_match_differences() {
        let psi = PsiSpec::Constant { value: 1.0 };
        let b = Nonlinearity::Exact(BSpec::PositivePart);
        let bar = solve_logdiv_barrier(&psi, &b, 0.5, 1.0, 1.0, 3).unwrap();
        check_derivatives(&bar, 100, |x, t| {
            let s = bar.shift(crate::barriers::norm(x), t);
            s < 0.05 * bar.eta || s > 0.95 * bar.eta || t < bar.t_lo + 0.01 || t > 0.99
        });
    }
}
