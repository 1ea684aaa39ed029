//! Slow-diffusion heat-kernel barrier in the first coordinate:
//! `ψ(x₁, t) = t^{-1/2} exp(-x₁²/(4kt))`, `φ̃ = ψ(x₁, t+η) - ε`,
//! `φ = αφ̃₊ - (α/2)φ̃₋`.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{Barrier, BarrierConfig, FluxGap, Jet, NamedCheck, Sense};
use crate::error::{Error, Result};
use crate::operators::{Ellipticity, OperatorContext, OperatorSpec};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HeatKernelBarrier {
    pub k: f64,
    pub eps: f64,
    pub eta: f64,
    pub alpha_scale: f64,
    pub d: f64,
    pub delta: f64,
    pub c: f64,
    pub constants: Ellipticity,
}

/// Largest value over `x ∈ [d, 2d]` of
/// `-(λ-k)x² + 2δ(2k(λ-k) + 2δ₁kx) + 16δ₀k²δ²`, which bounds the bracketed
/// coefficient times `4k²t²` for `t ≤ 2δ`.
pub fn bracket_bound(c: &Ellipticity, k: f64, d: f64, delta: f64) -> f64 {
    let q = |x: f64| {
        -(c.lambda - k) * x * x
            + 2.0 * delta * (2.0 * k * (c.lambda - k) + 2.0 * c.delta1 * k * x)
            + 16.0 * c.delta0 * k * k * delta * delta
    };
    let vertex = if c.lambda > k {
        (2.0 * delta * c.delta1 * k / (c.lambda - k)).clamp(d, 2.0 * d)
    } else {
        d
    };
    q(d).max(q(2.0 * d)).max(q(vertex))
}

fn log_psi(x: f64, s: f64, k: f64) -> f64 {
    -0.5 * s.ln() - x * x / (4.0 * k * s)
}

pub fn solve_heat_kernel_barrier(
    op: &OperatorSpec,
    d: f64,
    delta: f64,
    c: f64,
) -> Result<HeatKernelBarrier> {
    op.validate()?;
    let constants = op.ellipticity();
    if !(d > 0.0 && delta > 0.0 && c > 0.0)
        || !(d.is_finite() && delta.is_finite() && c.is_finite())
    {
        return Err(Error::domain(format!(
            "heat-kernel barrier needs d, delta, c > 0, got {d}, {delta}, {c}"
        )));
    }
    let mut k = (d * d / (4.0 * delta)).min(constants.lambda) / 2.0;
    let mut found = false;
    for _ in 0..200 {
        if bracket_bound(&constants, k, d, delta) < 0.0 {
            found = true;
            break;
        }
        k /= 2.0;
    }
    if !found || k <= 0.0 {
        return Err(Error::infeasible(
            "no diffusion speed k makes the bracketed coefficient negative",
        ));
    }
    let lhs = |eta: f64| log_psi(d, eta, k);
    let rhs = |eta: f64| log_psi(2.0 * d, delta + eta, k);
    let mut eta = delta / 2.0;
    found = false;
    for _ in 0..200 {
        if lhs(eta) < rhs(eta) {
            found = true;
            break;
        }
        eta /= 2.0;
    }
    if !found {
        return Err(Error::infeasible(
            "no time shift eta separates the kernel tails",
        ));
    }
    let log_eps = 0.5 * (lhs(eta) + rhs(eta));
    let eps = log_eps.exp();
    if !(eps > 1e-300) {
        return Err(Error::infeasible(format!(
            "kernel threshold underflows (log eps = {log_eps})"
        )));
    }
    let max_psi = (2.0 * k / (d * d)).sqrt() * (-0.5f64).exp();
    Ok(HeatKernelBarrier {
        k,
        eps,
        eta,
        alpha_scale: 0.5 * c / max_psi,
        d,
        delta,
        c,
        constants,
    })
}

impl HeatKernelBarrier {
    fn psi(&self, x1: f64, t: f64) -> f64 {
        log_psi(x1, t + self.eta, self.k).exp()
    }

    fn value(&self, x1: f64, t: f64) -> f64 {
        let f = self.psi(x1, t) - self.eps;
        if f > 0.0 {
            self.alpha_scale * f
        } else {
            0.5 * self.alpha_scale * f
        }
    }

    /// A point of the zero level set at `x₁ = 3d/2`, if it crosses `(0, δ)`.
    fn front_time(&self) -> Option<f64> {
        let x = 1.5 * self.d;
        let (mut lo, mut hi) = (0.0, self.delta);
        if self.psi(x, lo) >= self.eps || self.psi(x, hi) <= self.eps {
            return None;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.psi(x, mid) < self.eps {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Some(0.5 * (lo + hi))
    }
}

impl Barrier for HeatKernelBarrier {
    fn family(&self) -> &'static str {
        "heatkernel"
    }

    fn sense(&self) -> Sense {
        Sense::Sub
    }

    fn n_dim(&self) -> usize {
        self.constants.n_dim
    }

    fn jet(&self, x: &[f64], t: f64) -> Result<Jet> {
        let x1 = x[0];
        if !(x1 >= self.d && x1 <= 2.0 * self.d && t > 0.0 && t <= self.delta) {
            return Err(Error::domain(format!(
                "({x1}, {t}) outside the heat-kernel window"
            )));
        }
        let s = t + self.eta;
        let k = self.k;
        let psi = self.psi(x1, t);
        let f = psi - self.eps;
        let w = if f > 0.0 {
            self.alpha_scale
        } else {
            0.5 * self.alpha_scale
        };
        let n = x.len();
        let mut grad = vec![0.0; n];
        grad[0] = w * psi * (-x1 / (2.0 * k * s));
        let mut hess = nalgebra::DMatrix::zeros(n, n);
        hess[(0, 0)] = w * psi * (x1 * x1 / (4.0 * k * k * s * s) - 1.0 / (2.0 * k * s));
        Ok(Jet {
            value: w * f,
            dt: w * psi * (x1 * x1 / (4.0 * k * s * s) - 0.5 / s),
            grad,
            hess,
        })
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> Option<(Vec<f64>, f64)> {
        let mut x: Vec<f64> = (0..self.n_dim())
            .map(|_| rng.gen_range(-self.d..self.d))
            .collect();
        x[0] = rng.gen_range(self.d..=2.0 * self.d);
        let t = self.delta * (1.0 - rng.gen::<f64>());
        Some((x, t))
    }

    fn scale(&self) -> f64 {
        1.0 / (self.delta + self.eta)
    }

    fn residual_weight(&self, x: &[f64], t: f64) -> f64 {
        (self.alpha_scale * self.psi(x[0], t)).max(f64::MIN_POSITIVE)
    }

    fn flux(&self) -> Option<FluxGap> {
        let t = self.front_time()?;
        let x = 1.5 * self.d;
        let s = t + self.eta;
        let dpsi = (self.psi(x, t) * x / (2.0 * self.k * s)).abs();
        Some(FluxGap::new(
            self.alpha_scale * dpsi,
            0.5 * self.alpha_scale * dpsi,
            None,
        ))
    }

    fn checks(&self) -> Vec<NamedCheck> {
        let max_psi = (2.0 * self.k / (self.d * self.d)).sqrt() * (-0.5f64).exp();
        let top = self.alpha_scale * (max_psi - self.eps);
        let initial = self.value(self.d, 0.0);
        let final_ = self.value(2.0 * self.d, self.delta);
        let q = bracket_bound(&self.constants, self.k, self.d, self.delta);
        vec![
            NamedCheck::new("below_c", top < self.c, top),
            NamedCheck::new("negative_at_start", initial < 0.0, initial),
            NamedCheck::new("positive_at_end", final_ > 0.0, final_),
            NamedCheck::new("bracket_negative", q < 0.0, q),
            NamedCheck::new("front_crosses_window", self.front_time().is_some(), 0.0),
        ]
    }
}

pub(super) fn build(
    cfg: &BarrierConfig,
    op: &OperatorSpec,
    _ctx: &OperatorContext,
) -> Result<Box<dyn Barrier>> {
    Ok(Box::new(solve_heat_kernel_barrier(
        op,
        cfg.require(cfg.d, "d")?,
        cfg.require(cfg.delta, "delta")?,
        cfg.require(cfg.c, "c")?,
    )?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::barriers::test_support::check_derivatives;
    use crate::barriers::verify_subsolution_margin;

    #[test]
    fn bracket_negative_for_recipe_k() {
        for (d1, d0) in [(0.0, 0.0), (1.0, 0.5), (5.0, 2.0)] {
            let s = OperatorSpec::new("pucci-minus", 1.0, 2.0, d1, d0, 1);
            let b = solve_heat_kernel_barrier(&s, 0.5, 0.1, 1.0).unwrap();
            assert!(b.k > 0.0 && b.k <= 0.25 * 0.25 / 0.1);
            // direct sampling of the bracket on x ∈ [d, 2d], t ∈ (0, 2δ)
            for i in 0..=50 {
                let x = 0.5 + 0.5 * i as f64 / 50.0;
                for j in 1..=50 {
                    let t = 0.2 * j as f64 / 50.0;
                    let k = b.k;
                    let br = (x * x - 2.0 * k * t) * (k - 1.0) / (4.0 * k * k * t * t)
                        + d1 * x / (2.0 * k * t)
                        + d0;
                    assert!(br < 0.0, "{x} {t} {br}");
                }
            }
        }
    }

    #[test]
    fn subsolution_margin() {
        for (d1, d0) in [(0.0, 0.0), (1.0, 0.5)] {
            let s = OperatorSpec::new("pucci-minus", 1.0, 2.0, d1, d0, 2);
            let b = solve_heat_kernel_barrier(&s, 0.5, 0.1, 1.0).unwrap();
            let op = s.build(&OperatorContext::default()).unwrap();
            let r = verify_subsolution_margin(&b, op.as_ref(), None, 1000, 3).unwrap();
            assert!(r.passed, "{r:?}");
            assert!(r.flux.unwrap().gap > 0.0);
        }
    }

    #[test]
    fn derivatives_match_differences() {
        let s = OperatorSpec::new("pucci-minus", 1.0, 2.0, 0.3, 0.0, 2);
        let b = solve_heat_kernel_barrier(&s, 0.5, 0.1, 1.0).unwrap();
        check_derivatives(&b, 100, |x, t| {
            let f = b.psi(x[0], t) - b.eps;
            f.abs() < 1e-3 * b.eps || x[0] < 0.51 || x[0] > 0.99 || !(1e-3..=0.099).contains(&t)
        });
    }

    #[test]
    fn rejects_bad_input() {
        let s = OperatorSpec::trace(1.0, 1);
        assert!(solve_heat_kernel_barrier(&s, 0.0, 0.1, 1.0).is_err());
        assert!(solve_heat_kernel_barrier(&s, 0.5, -0.1, 1.0).is_err());
    }
}
