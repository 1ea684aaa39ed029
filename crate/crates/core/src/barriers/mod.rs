//! Closed-form barrier families with parameter solving and sampled
//! verification of strict sub/supersolution margins and the flux ordering on
//! the zero level set.
//!
//! Families are registered by name (`radial`, `heatkernel`, `logdiv`,
//! `parabola`) and built from a [`BarrierConfig`].

mod front;
mod heat_kernel;
mod logdiv;
mod parabola;
mod radial;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::OnceLock;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nonlinearity::Nonlinearity;
use crate::operators::{EllipticOperator, OperatorContext, OperatorSpec};

pub use front::{front_offset_sets, sign_intervals, OffsetSet};
pub use heat_kernel::{solve_heat_kernel_barrier, HeatKernelBarrier};
pub use logdiv::{solve_logdiv_barrier, LogDivBarrier};
pub use parabola::{decr_parabola_gamma, DecrParabola, EpsEtaBarrier};
pub use radial::{solve_radial_barrier, RadialJet, RadialPhase, RadialPowerBarrier};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sense {
    Sub,
    Super,
}

/// Value and derivatives of a barrier at one space-time point.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    pub value: f64,
    pub dt: f64,
    pub grad: Vec<f64>,
    pub hess: DMatrix<f64>,
}

impl Jet {
    /// Jet of `x ↦ f(|x|)` from its radial derivatives.
    pub fn radial(x: &[f64], value: f64, dt: f64, d_rho: f64, d_rho2: f64) -> Jet {
        let n = x.len();
        let rho = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let dir: Vec<f64> = x.iter().map(|v| v / rho).collect();
        let grad = dir.iter().map(|d| d_rho * d).collect();
        let tangential = d_rho / rho;
        let hess = DMatrix::from_fn(n, n, |i, j| {
            let outer = dir[i] * dir[j];
            let id = if i == j { 1.0 } else { 0.0 };
            d_rho2 * outer + tangential * (id - outer)
        });
        Jet {
            value,
            dt,
            grad,
            hess,
        }
    }
}

/// Gradient norms of the two phases at a point of the zero level set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FluxGap {
    pub plus: f64,
    pub minus: f64,
    pub gap: f64,
    /// Closed-form value the gap must equal, when the family fixes one.
    pub expected: Option<f64>,
}

impl FluxGap {
    pub fn new(plus: f64, minus: f64, expected: Option<f64>) -> Self {
        FluxGap {
            plus,
            minus,
            gap: plus - minus,
            expected,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NamedCheck {
    pub name: String,
    pub passed: bool,
    pub value: f64,
}

impl NamedCheck {
    pub fn new(name: &str, passed: bool, value: f64) -> Self {
        NamedCheck {
            name: name.to_string(),
            passed,
            value,
        }
    }
}

pub trait Barrier: Send + Sync + fmt::Debug {
    fn family(&self) -> &'static str;

    fn sense(&self) -> Sense;

    fn n_dim(&self) -> usize;

    /// Errors outside the validity window.
    fn jet(&self, x: &[f64], t: f64) -> Result<Jet>;

    /// One point of the validity window, or `None` for a rejected draw.
    fn sample(&self, rng: &mut ChaCha8Rng) -> Option<(Vec<f64>, f64)>;

    /// Magnitude against which margins are judged.
    fn scale(&self) -> f64;

    /// Strict barriers need a margin bounded away from zero; the others only a
    /// nonnegative one.
    fn strict(&self) -> bool {
        true
    }

    /// Pointwise normalization of the residual (kernel-type barriers decay
    /// exponentially and are judged relative to their own size).
    fn residual_weight(&self, _x: &[f64], _t: f64) -> f64 {
        1.0
    }

    fn flux(&self) -> Option<FluxGap>;

    /// Family-specific postconditions.
    fn checks(&self) -> Vec<NamedCheck> {
        Vec::new()
    }
}

pub const STRICT_MARGIN_FACTOR: f64 = 1e-6;
pub const WEAK_MARGIN_FACTOR: f64 = 1e-10;
pub const FLUX_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Serialize)]
pub struct MarginReport {
    pub family: String,
    pub sense: Sense,
    pub samples: usize,
    /// Smallest sign-adjusted residual; positive means the inequality holds.
    pub worst_margin: f64,
    pub worst_point: Vec<f64>,
    pub worst_time: f64,
    pub scale: f64,
    pub threshold: f64,
    pub strict: bool,
    pub flux: Option<FluxGap>,
    pub flux_ok: bool,
    pub checks: Vec<NamedCheck>,
    pub passed: bool,
}

/// Samples the window and evaluates `b(φ)_t - F(D²φ, Dφ, φ)` with analytic
/// derivatives. With `b = None` the exact `b(s) = s₊` is used phase-wise.
pub fn verify_subsolution_margin(
    bar: &dyn Barrier,
    op: &dyn EllipticOperator,
    b: Option<&Nonlinearity>,
    samples: usize,
    seed: u64,
) -> Result<MarginReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::INFINITY;
    let mut worst_point = Vec::new();
    let mut worst_time = 0.0;
    let mut taken = 0;
    let mut draws = 0;
    while taken < samples {
        draws += 1;
        if draws > 1000 * samples.max(1) {
            return Err(Error::domain(format!(
                "{}: window sampler rejects almost every draw",
                bar.family()
            )));
        }
        let Some((x, t)) = bar.sample(&mut rng) else {
            continue;
        };
        let jet = bar.jet(&x, t)?;
        let theta = match b {
            Some(nl) => nl.derivative(jet.value),
            None => {
                if jet.value > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        };
        let residual = theta * jet.dt - op.eval(&jet.hess, &jet.grad, jet.value);
        let signed = match bar.sense() {
            Sense::Sub => -residual,
            Sense::Super => residual,
        } / bar.residual_weight(&x, t);
        if signed < worst {
            worst = signed;
            worst_point = x;
            worst_time = t;
        }
        taken += 1;
    }
    let scale = bar.scale();
    let strict = bar.strict();
    let threshold = if strict {
        STRICT_MARGIN_FACTOR * scale
    } else {
        -WEAK_MARGIN_FACTOR * scale
    };
    let flux = bar.flux();
    let flux_ok = match flux {
        None => true,
        Some(f) => {
            let sign_ok = match bar.sense() {
                Sense::Sub => f.gap > 0.0,
                Sense::Super => f.gap < 0.0,
            };
            let value_ok = f.expected.is_none_or(|e| {
                (f.gap - e).abs() <= FLUX_TOLERANCE * e.abs().max(f64::MIN_POSITIVE)
            });
            (sign_ok || (!strict && f.gap == 0.0)) && value_ok
        }
    };
    let checks = bar.checks();
    let passed = worst >= threshold && flux_ok && checks.iter().all(|c| c.passed);
    Ok(MarginReport {
        family: bar.family().to_string(),
        sense: bar.sense(),
        samples,
        worst_margin: worst,
        worst_point,
        worst_time,
        scale,
        threshold,
        strict,
        flux,
        flux_ok,
        checks,
        passed,
    })
}

/// Uniform point in the open ball of radius `radius` in `n` dimensions.
pub(crate) fn sample_ball(rng: &mut ChaCha8Rng, n: usize, radius: f64) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let r2: f64 = v.iter().map(|x| x * x).sum();
        if r2 < 1.0 {
            return v.into_iter().map(|x| x * radius).collect();
        }
    }
}

/// Point at distance `rho` from the origin in a uniformly random direction.
pub(crate) fn sample_sphere(rng: &mut ChaCha8Rng, n: usize, rho: f64) -> Vec<f64> {
    loop {
        let v = sample_ball(rng, n, 1.0);
        let r: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if r > 1e-3 {
            return v.into_iter().map(|x| x * rho / r).collect();
        }
    }
}

pub(crate) fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Flat parameter set for all families; each family reads what it needs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BarrierConfig {
    #[serde(default)]
    pub family: String,
    #[serde(default)]
    pub sense: Option<Sense>,
    #[serde(default)]
    pub variant: Option<String>,
    #[serde(default)]
    pub rho0: Option<f64>,
    #[serde(default)]
    pub a_hat: Option<f64>,
    #[serde(default)]
    pub b_hat: Option<f64>,
    #[serde(default)]
    pub omega_hat: Option<f64>,
    #[serde(default)]
    pub omega: Option<f64>,
    #[serde(default, rename = "M")]
    pub m: Option<f64>,
    #[serde(default)]
    pub d: Option<f64>,
    #[serde(default)]
    pub delta: Option<f64>,
    #[serde(default)]
    pub c: Option<f64>,
    #[serde(default)]
    pub eps: Option<f64>,
    #[serde(default)]
    pub eta: Option<f64>,
    #[serde(default)]
    pub r: Option<f64>,
    #[serde(default)]
    pub samples: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
}

impl BarrierConfig {
    pub fn require(&self, value: Option<f64>, key: &str) -> Result<f64> {
        value.ok_or_else(|| {
            Error::config(format!(
                "barrier.{key} is required for family {}",
                self.family
            ))
        })
    }
}

pub type BarrierBuilder =
    fn(&BarrierConfig, &OperatorSpec, &OperatorContext) -> Result<Box<dyn Barrier>>;

#[derive(Clone)]
pub struct BarrierRegistry {
    builders: BTreeMap<String, BarrierBuilder>,
}

impl fmt::Debug for BarrierRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.builders.keys()).finish()
    }
}

impl BarrierRegistry {
    pub fn empty() -> Self {
        BarrierRegistry {
            builders: BTreeMap::new(),
        }
    }

    pub fn with_defaults() -> Self {
        let mut r = Self::empty();
        r.register("radial", radial::build);
        r.register("heatkernel", heat_kernel::build);
        r.register("logdiv", logdiv::build);
        r.register("parabola", parabola::build);
        r
    }

    pub fn global() -> &'static BarrierRegistry {
        static REGISTRY: OnceLock<BarrierRegistry> = OnceLock::new();
        REGISTRY.get_or_init(Self::with_defaults)
    }

    pub fn register(&mut self, name: &str, builder: BarrierBuilder) {
        self.builders.insert(name.to_string(), builder);
    }

    pub fn names(&self) -> Vec<&str> {
        self.builders.keys().map(String::as_str).collect()
    }

    pub fn build(
        &self,
        cfg: &BarrierConfig,
        op: &OperatorSpec,
        ctx: &OperatorContext,
    ) -> Result<Box<dyn Barrier>> {
        op.validate()?;
        let builder = self
            .builders
            .get(&cfg.family)
            .ok_or_else(|| Error::Unknown {
                what: "barrier family",
                name: cfg.family.clone(),
            })?;
        builder(cfg, op, ctx)
    }
}

#[cfg(test)]
pub(crate) mod test_support {
    use super::*;

    /// Central differences of the jet value against the analytic derivatives,
    /// at window samples where `skip` is false.
    pub fn check_derivatives(
        bar: &dyn Barrier,
        samples: usize,
        skip: impl Fn(&[f64], f64) -> bool,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut checked = 0;
        let mut draws = 0;
        while checked < samples && draws < 100 * samples {
            draws += 1;
            let Some((x, t)) = bar.sample(&mut rng) else {
                continue;
            };
            if skip(&x, t) {
                continue;
            }
            let jet = bar.jet(&x, t).unwrap();
            let scale = jet.value.abs().max(norm(&jet.grad)).max(1e-300);
            let h = 1e-6 * norm(&x).max(1e-3);
            let f = |y: &[f64], s: f64| bar.jet(y, s).unwrap().value;
            let ht = 1e-6 * t.abs().max(1e-3);
            if let (Ok(a), Ok(b)) = (bar.jet(&x, t + ht), bar.jet(&x, t - ht)) {
                let fd = (a.value - b.value) / (2.0 * ht);
                let tol = 1e-6 * jet.dt.abs().max(scale);
                assert!(
                    (fd - jet.dt).abs() <= tol,
                    "{}: dt {} vs {}",
                    bar.family(),
                    fd,
                    jet.dt
                );
            }
            for i in 0..x.len() {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[i] += h;
                xm[i] -= h;
                let fd = (f(&xp, t) - f(&xm, t)) / (2.0 * h);
                let tol = 1e-6 * jet.grad[i].abs().max(scale);
                assert!(
                    (fd - jet.grad[i]).abs() <= tol,
                    "{}: grad {fd} vs {}",
                    bar.family(),
                    jet.grad[i]
                );
                let gp = bar.jet(&xp, t).unwrap().grad;
                let gm = bar.jet(&xm, t).unwrap().grad;
                for j in 0..x.len() {
                    let fd = (gp[j] - gm[j]) / (2.0 * h);
                    let hs = jet.hess.amax().max(scale);
                    assert!(
                        (fd - jet.hess[(j, i)]).abs() <= 1e-6 * hs,
                        "{}: hess {fd} vs {}",
                        bar.family(),
                        jet.hess[(j, i)]
                    );
                }
            }
            checked += 1;
        }
        assert!(
            checked > samples / 2,
            "{}: too few derivative samples",
            bar.family()
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn radial_jet_matches_laplacian() {
        // f = |x|² in 3D: gradient 2x, Hessian 2I.
        let x = [0.3, -0.4, 1.2];
        let rho = norm(&x);
        let j = Jet::radial(&x, rho * rho, 0.0, 2.0 * rho, 2.0);
        for i in 0..3 {
            assert!((j.grad[i] - 2.0 * x[i]).abs() < 1e-14);
            for k in 0..3 {
                let want = if i == k { 2.0 } else { 0.0 };
                assert!((j.hess[(i, k)] - want).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn registry_names() {
        let names = BarrierRegistry::global().names();
        assert_eq!(names, vec!["heatkernel", "logdiv", "parabola", "radial"]);
        let cfg = BarrierConfig {
            family: "nope".into(),
            ..Default::default()
        };
        let op = OperatorSpec::trace(1.0, 1);
        assert!(BarrierRegistry::global()
            .build(&cfg, &op, &OperatorContext::default())
            .is_err());
    }
}
