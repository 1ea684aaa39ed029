//! Two-phase radial power barrier
//! `φ = τ(t) + α(ρ^{-γ} - ρ₀^{-γ}) + β(ρ² - ρ₀²)` around a moving sphere.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{sample_sphere, Barrier, BarrierConfig, FluxGap, Jet, NamedCheck, Sense};
use crate::error::{Error, Result};
use crate::operators::{pucci_minus, Ellipticity, OperatorContext, OperatorSpec};

/// One phase `ψ(ρ) = α(ρ^{-γ} - ρ₀^{-γ}) + β(ρ² - ρ₀²)` with target slope
/// `|ψ'(ρ₀)| = slope`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RadialPhase {
    pub slope: f64,
    pub alpha: f64,
    pub beta: f64,
    pub c: f64,
    pub tau1: f64,
    pub tau2: f64,
}

impl RadialPhase {
    fn psi(&self, rho: f64, rho0: f64, gamma: f64) -> f64 {
        self.alpha * (rho.powf(-gamma) - rho0.powf(-gamma)) + self.beta * (rho * rho - rho0 * rho0)
    }

    fn psi_prime(&self, rho: f64, gamma: f64) -> f64 {
        -self.alpha * gamma * rho.powf(-gamma - 1.0) + 2.0 * self.beta * rho
    }

    fn psi_second(&self, rho: f64, gamma: f64) -> f64 {
        self.alpha * gamma * (gamma + 1.0) * rho.powf(-gamma - 2.0) + 2.0 * self.beta
    }

    /// `c - ατ₁ - βτ₂`, the guaranteed sign of the residual at the front.
    pub fn front_margin(&self) -> f64 {
        self.c - self.alpha * self.tau1 - self.beta * self.tau2
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RadialJet {
    pub value: f64,
    pub dt: f64,
    pub d_rho: f64,
    pub d_rho2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RadialPowerBarrier {
    pub rho0: f64,
    pub a_hat: f64,
    pub b_hat: f64,
    pub omega_hat: f64,
    pub gamma: f64,
    pub eps: f64,
    pub rho_c: f64,
    pub sense: Sense,
    pub constants: Ellipticity,
    /// Phase where `φ > 0` for the subsolution (inside the sphere).
    pub inner: RadialPhase,
    pub outer: RadialPhase,
}

pub fn critical_radius(c: &Ellipticity) -> f64 {
    if c.delta1 > 0.0 {
        (c.lambda + (c.n_dim as f64 - 1.0) * c.big_lambda) / (2.0 * c.delta1)
    } else {
        f64::INFINITY
    }
}

pub fn solve_radial_barrier(
    op: &OperatorSpec,
    rho0: f64,
    a_hat: f64,
    b_hat: f64,
    omega_hat: f64,
    sense: Sense,
) -> Result<RadialPowerBarrier> {
    op.validate()?;
    let k = op.ellipticity();
    if !(rho0 > 0.0 && rho0.is_finite()) {
        return Err(Error::domain(format!("rho0 must be positive, got {rho0}")));
    }
    if !(a_hat > 0.0 && b_hat < 0.0 && a_hat + b_hat > 0.0) {
        return Err(Error::domain(format!(
            "slopes need a_hat > 0 > b_hat and a_hat + b_hat > 0, got {a_hat}, {b_hat}"
        )));
    }
    if !(omega_hat >= 0.0 && omega_hat.is_finite()) {
        return Err(Error::domain(format!(
            "omega_hat must be >= 0, got {omega_hat}"
        )));
    }
    let rho_c = critical_radius(&k);
    if rho0 > rho_c {
        return Err(Error::infeasible(format!(
            "rho0 = {rho0} exceeds the critical radius {rho_c}"
        )));
    }
    let nm1 = k.n_dim as f64 - 1.0;
    let gamma_min = (nm1 * k.big_lambda + k.delta1 * rho0) / k.lambda - 1.0;
    let gamma = (2.0 * gamma_min).max(1.0);
    let tau1 = (k.lambda * (gamma + 1.0) - nm1 * k.big_lambda - k.delta1 * rho0)
        * gamma
        * rho0.powf(-gamma - 2.0);
    let tau2 = 2.0 * (k.lambda + nm1 * k.big_lambda - k.delta1 * rho0);
    let phase = |slope: f64| {
        let c = omega_hat * slope;
        let beta = 2.0 * (c / tau2).max(slope / (2.0 * rho0));
        let alpha = (slope + 2.0 * beta * rho0) * rho0.powf(gamma + 1.0) / gamma;
        RadialPhase {
            slope,
            alpha,
            beta,
            c,
            tau1,
            tau2,
        }
    };
    let mut bar = RadialPowerBarrier {
        rho0,
        a_hat,
        b_hat,
        omega_hat,
        gamma,
        eps: rho0 / 2.0,
        rho_c,
        sense,
        constants: k,
        inner: phase(a_hat),
        outer: phase(-b_hat),
    };
    let target = 0.5 * bar.inner.front_margin().max(bar.outer.front_margin());
    for _ in 0..80 {
        if bar.window_bound() <= target {
            return Ok(bar);
        }
        bar.eps /= 2.0;
    }
    Err(Error::infeasible(
        "no validity window found for the radial barrier",
    ))
}

impl RadialPowerBarrier {
    fn front(&self, t: f64) -> f64 {
        self.rho0 + self.omega_hat * t
    }

    fn phase_at(&self, rho: f64, t: f64) -> &RadialPhase {
        if rho <= self.front(t) {
            &self.inner
        } else {
            &self.outer
        }
    }

    /// Subsolution-sense profile, before the sign flip of the super variant.
    fn raw(&self, rho: f64, t: f64) -> RadialJet {
        let p = self.phase_at(rho, t);
        let g = self.gamma;
        let rf = self.front(t);
        RadialJet {
            value: p.psi(rho, self.rho0, g) - p.psi(rf, self.rho0, g),
            dt: -p.psi_prime(rf, g) * self.omega_hat,
            d_rho: p.psi_prime(rho, g),
            d_rho2: p.psi_second(rho, g),
        }
    }

    pub fn in_window(&self, rho: f64, t: f64) -> bool {
        (rho - self.rho0).abs() < self.eps && t.abs() < self.eps
    }

    pub fn radial_jet(&self, rho: f64, t: f64) -> Result<RadialJet> {
        if !self.in_window(rho, t) {
            return Err(Error::domain(format!(
                "({rho}, {t}) outside the window of half-width {} around rho0 = {}",
                self.eps, self.rho0
            )));
        }
        let j = self.raw(rho, t);
        Ok(match self.sense {
            Sense::Sub => j,
            Sense::Super => RadialJet {
                value: -j.value,
                dt: -j.dt,
                d_rho: -j.d_rho,
                d_rho2: -j.d_rho2,
            },
        })
    }

    /// Upper bound of `φ_t - F` over the window valid for every operator with
    /// these constants, sampled on a tensor grid.
    fn window_bound(&self) -> f64 {
        let k = &self.constants;
        let n = k.n_dim;
        let mut worst = f64::NEG_INFINITY;
        let m = 40;
        for i in 0..=m {
            let rho = self.rho0 - self.eps + 2.0 * self.eps * i as f64 / m as f64;
            for j in 0..=m {
                let t = -self.eps + 2.0 * self.eps * j as f64 / m as f64;
                let r = self.raw(rho, t);
                let mut eigs = vec![r.d_rho / rho; n];
                eigs[n - 1] = r.d_rho2;
                let lower = pucci_minus(&eigs, k.lambda, k.big_lambda)
                    - k.delta1 * r.d_rho.abs()
                    - k.delta0 * r.value.abs();
                worst = worst.max(r.dt.max(0.0) - lower);
            }
        }
        worst
    }

    /// Relative residual of `|â| = αγρ₀^{-γ-1} - 2βρ₀`.
    pub fn slope_residual(&self) -> f64 {
        let p = &self.inner;
        let g = self.gamma;
        let rhs = p.alpha * g * self.rho0.powf(-g - 1.0) - 2.0 * p.beta * self.rho0;
        (rhs - self.a_hat).abs() / self.a_hat
    }
}

impl Barrier for RadialPowerBarrier {
    fn family(&self) -> &'static str {
        "radial"
    }

    fn sense(&self) -> Sense {
        self.sense
    }

    fn n_dim(&self) -> usize {
        self.constants.n_dim
    }

    fn jet(&self, x: &[f64], t: f64) -> Result<Jet> {
        let rho = super::norm(x);
        let j = self.radial_jet(rho, t)?;
        Ok(Jet::radial(x, j.value, j.dt, j.d_rho, j.d_rho2))
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> Option<(Vec<f64>, f64)> {
        let rho = self.rho0 + self.eps * rng.gen_range(-1.0..1.0);
        let t = self.eps * rng.gen_range(-1.0..1.0);
        if !self.in_window(rho, t) {
            return None;
        }
        Some((sample_sphere(rng, self.n_dim(), rho), t))
    }

    fn scale(&self) -> f64 {
        [self.inner, self.outer]
            .iter()
            .map(|p| p.alpha * p.tau1 + p.beta * p.tau2)
            .fold(0.0, f64::max)
    }

    fn flux(&self) -> Option<FluxGap> {
        let inner = self.inner.psi_prime(self.rho0, self.gamma).abs();
        let outer = self.outer.psi_prime(self.rho0, self.gamma).abs();
        Some(match self.sense {
            Sense::Sub => FluxGap::new(inner, outer, Some(self.a_hat + self.b_hat)),
            Sense::Super => FluxGap::new(outer, inner, Some(-(self.a_hat + self.b_hat))),
        })
    }

    fn checks(&self) -> Vec<NamedCheck> {
        let slope = self.slope_residual();
        let tau_ok = self.inner.tau1 > 0.0 && self.inner.tau2 > 0.0;
        let c_ok = [self.inner, self.outer]
            .iter()
            .all(|p| p.c < p.beta * p.tau2 && p.alpha > 0.0);
        vec![
            NamedCheck::new("slope_equation", slope <= 1e-12, slope),
            NamedCheck::new("tau_positive", tau_ok, self.inner.tau1.min(self.inner.tau2)),
            NamedCheck::new(
                "speed_below_beta_tau2",
                c_ok,
                self.inner.front_margin().max(self.outer.front_margin()),
            ),
            NamedCheck::new(
                "rho0_below_critical",
                self.rho0 <= self.rho_c,
                self.rho_c - self.rho0,
            ),
        ]
    }
}

pub(super) fn build(
    cfg: &BarrierConfig,
    op: &OperatorSpec,
    _ctx: &OperatorContext,
) -> Result<Box<dyn Barrier>> {
    let bar = solve_radial_barrier(
        op,
        cfg.require(cfg.rho0, "rho0")?,
        cfg.require(cfg.a_hat, "a_hat")?,
        cfg.require(cfg.b_hat, "b_hat")?,
        cfg.omega_hat.unwrap_or(0.0),
        cfg.sense.unwrap_or(Sense::Sub),
    )?;
    Ok(Box::new(bar))
}
