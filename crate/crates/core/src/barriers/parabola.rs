//! Paraboloid barriers: the shrinking cap `(-t/(2γ) - 4|x|² + 1)₊` and the
//! small-scale supersolution `ψ_{ε,η} = (4M/ε)(4nΛt + |x|² + η)`.

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{sample_ball, Barrier, BarrierConfig, FluxGap, Jet, NamedCheck, Sense};
use crate::error::{Error, Result};
use crate::operators::{Ellipticity, OperatorContext, OperatorSpec};

pub fn decr_parabola_gamma(c: &Ellipticity) -> f64 {
    let n = c.n_dim as f64;
    (1.0 / (16.0 * n * c.big_lambda + 8.0 * c.delta1 + 2.0 * c.delta0)).min(1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecrParabola {
    pub gamma: f64,
    pub n_dim: usize,
}

impl DecrParabola {
    pub fn new(c: &Ellipticity) -> Self {
        DecrParabola {
            gamma: decr_parabola_gamma(c),
            n_dim: c.n_dim,
        }
    }

    fn inner(&self, x: &[f64], t: f64) -> f64 {
        -t / (2.0 * self.gamma) - 4.0 * x.iter().map(|v| v * v).sum::<f64>() + 1.0
    }
}

impl Barrier for DecrParabola {
    fn family(&self) -> &'static str {
        "parabola"
    }

    fn sense(&self) -> Sense {
        Sense::Sub
    }

    fn n_dim(&self) -> usize {
        self.n_dim
    }

    fn jet(&self, x: &[f64], t: f64) -> Result<Jet> {
        if !(t >= 0.0 && t < 2.0 * self.gamma && super::norm(x) <= 0.5) {
            return Err(Error::domain(format!(
                "t = {t} outside the parabola window"
            )));
        }
        let q = self.inner(x, t);
        let n = x.len();
        Ok(if q > 0.0 {
            Jet {
                value: q,
                dt: -1.0 / (2.0 * self.gamma),
                grad: x.iter().map(|v| -8.0 * v).collect(),
                hess: DMatrix::from_diagonal_element(n, n, -8.0),
            }
        } else {
            Jet {
                value: 0.0,
                dt: 0.0,
                grad: vec![0.0; n],
                hess: DMatrix::zeros(n, n),
            }
        })
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> Option<(Vec<f64>, f64)> {
        let x = sample_ball(rng, self.n_dim, 0.5);
        let t = rng.gen_range(0.0..2.0 * self.gamma);
        (self.inner(&x, t) > 0.0).then_some((x, t))
    }

    fn scale(&self) -> f64 {
        1.0 / (2.0 * self.gamma)
    }

    fn strict(&self) -> bool {
        false
    }

    fn flux(&self) -> Option<FluxGap> {
        // at t = 0 the positive phase meets zero on |x| = 1/2
        Some(FluxGap::new(4.0, 0.0, None))
    }
}

/// Supersolution sense, valid on `B_{√ε} × (-ε/(8nΛ), 0]` where it is positive.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpsEtaBarrier {
    #[serde(rename = "M")]
    pub m: f64,
    pub eps: f64,
    pub eta: f64,
    pub n_dim: usize,
    #[serde(rename = "Lambda")]
    pub big_lambda: f64,
    pub r: f64,
}

impl EpsEtaBarrier {
    pub fn new(c: &Ellipticity, m: f64, eps: f64, eta: f64, r: f64) -> Result<Self> {
        if !(m > 0.0 && eps > 0.0 && r > 0.0 && eta > 0.0 && eta < eps) {
            return Err(Error::domain(format!(
                "eps-eta barrier needs M, r > 0 and 0 < eta < eps, got M = {m}, eps = {eps}, eta = {eta}, r = {r}"
            )));
        }
        let n = c.n_dim as f64;
        let root = eps.sqrt();
        let drift = c.delta0 + c.delta1;
        if drift > 0.0 && root >= 2.0 * n * c.big_lambda / (3.0 * drift) {
            return Err(Error::infeasible(format!(
                "eps = {eps} too large: sqrt(eps) must stay below {}",
                2.0 * n * c.big_lambda / (3.0 * drift)
            )));
        }
        if (r * eps / (8.0 * n * c.big_lambda)).cbrt() <= root {
            return Err(Error::infeasible(format!(
                "eps = {eps} too large for r = {r}: cbrt(r eps / (8 n Lambda)) must exceed sqrt(eps)"
            )));
        }
        Ok(EpsEtaBarrier {
            m,
            eps,
            eta,
            n_dim: c.n_dim,
            big_lambda: c.big_lambda,
            r,
        })
    }

    fn rate(&self) -> f64 {
        4.0 * self.n_dim as f64 * self.big_lambda
    }

    pub fn value(&self, x: &[f64], t: f64) -> f64 {
        4.0 * self.m / self.eps
            * (self.rate() * t + x.iter().map(|v| v * v).sum::<f64>() + self.eta)
    }

    fn t_min(&self) -> f64 {
        -self.eps / (2.0 * self.rate())
    }
}

impl Barrier for EpsEtaBarrier {
    fn family(&self) -> &'static str {
        "parabola"
    }

    fn sense(&self) -> Sense {
        Sense::Super
    }

    fn n_dim(&self) -> usize {
        self.n_dim
    }

    fn jet(&self, x: &[f64], t: f64) -> Result<Jet> {
        if !(t > self.t_min() && t <= 0.0 && super::norm(x) < self.eps.sqrt()) {
            return Err(Error::domain(format!("t = {t} outside the eps-eta window")));
        }
        let n = x.len();
        let s = 4.0 * self.m / self.eps;
        Ok(Jet {
            value: self.value(x, t),
            dt: s * self.rate(),
            grad: x.iter().map(|v| 2.0 * s * v).collect(),
            hess: DMatrix::from_diagonal_element(n, n, 2.0 * s),
        })
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> Option<(Vec<f64>, f64)> {
        let x = sample_ball(rng, self.n_dim, self.eps.sqrt());
        let t = self.t_min() * rng.gen::<f64>();
        (t > self.t_min() && self.value(&x, t) > 0.0).then_some((x, t))
    }

    fn scale(&self) -> f64 {
        4.0 * self.m / self.eps * self.rate()
    }

    fn flux(&self) -> Option<FluxGap> {
        None
    }

    fn checks(&self) -> Vec<NamedCheck> {
        // lateral boundary |x| = √ε, worst at the earliest time
        let mut x = vec![0.0; self.n_dim];
        x[0] = self.eps.sqrt();
        let lateral = self.value(&x, self.t_min());
        vec![NamedCheck::new(
            "lateral_above_2M",
            lateral >= 2.0 * self.m,
            lateral,
        )]
    }
}

pub(super) fn build(
    cfg: &BarrierConfig,
    op: &OperatorSpec,
    _ctx: &OperatorContext,
) -> Result<Box<dyn Barrier>> {
    let c = op.ellipticity();
    match cfg.variant.as_deref().unwrap_or("decr-parabola") {
        "decr-parabola" => Ok(Box::new(DecrParabola::new(&c))),
        "eps-eta" => Ok(Box::new(EpsEtaBarrier::new(
            &c,
            cfg.require(cfg.m, "M")?,
            cfg.require(cfg.eps, "eps")?,
            cfg.require(cfg.eta, "eta")?,
            cfg.require(cfg.r, "r")?,
        )?)),
        other => Err(Error::Unknown {
            what: "parabola variant",
            name: other.to_string(),
        }),
    }
}
