//! Elliptic operators `F(M, p, z)`: linear trace, the Pucci pair, finite
//! Bellman-Isaacs families and the divergence form. Operators are built from
//! an [`OperatorSpec`] through a name-keyed [`OperatorRegistry`].
//!
//! Dimension enters only through the radial reduction: on a radial grid the
//! Hessian is diagonal in the frame `(tangential..., radial)` with eigenvalues
//! `ψ'/ρ` (n-1 times) and `ψ''`. No general multi-dimensional stencil exists.

pub mod discrete;
mod kinds;
pub mod pucci;
pub mod structural;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::OnceLock;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nonlinearity::{BSpec, Nonlinearity, PsiSpec};

pub use kinds::{BellmanIsaacs, Divergence, PucciMinusOp, PucciPlusOp, Trace};
pub use pucci::{pucci_minus, pucci_plus};

/// Ellipticity constants `(λ, Λ, δ₁, δ₀)` and the space dimension.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ellipticity {
    pub lambda: f64,
    #[serde(rename = "Lambda")]
    pub big_lambda: f64,
    pub delta1: f64,
    pub delta0: f64,
    pub n_dim: usize,
}

/// One control `(A, b, c)` of a Bellman-Isaacs family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BiEntry {
    pub a: Vec<Vec<f64>>,
    #[serde(default)]
    pub b: Vec<f64>,
    #[serde(default)]
    pub c: f64,
}

/// `entries[α][β]`: the outer index is minimized, the inner one maximized.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BiSpec {
    pub entries: Vec<Vec<BiEntry>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorSpec {
    pub kind: String,
    pub lambda: f64,
    #[serde(rename = "Lambda")]
    pub big_lambda: f64,
    #[serde(default)]
    pub delta1: f64,
    #[serde(default)]
    pub delta0: f64,
    #[serde(default = "default_dim")]
    pub n_dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bi: Option<BiSpec>,
}

fn default_dim() -> usize {
    1
}

impl OperatorSpec {
    pub fn new(
        kind: &str,
        lambda: f64,
        big_lambda: f64,
        delta1: f64,
        delta0: f64,
        n_dim: usize,
    ) -> Self {
        OperatorSpec {
            kind: kind.to_string(),
            lambda,
            big_lambda,
            delta1,
            delta0,
            n_dim,
            bi: None,
        }
    }

    pub fn trace(lambda: f64, n_dim: usize) -> Self {
        Self::new("trace", lambda, lambda, 0.0, 0.0, n_dim)
    }

    pub fn ellipticity(&self) -> Ellipticity {
        Ellipticity {
            lambda: self.lambda,
            big_lambda: self.big_lambda,
            delta1: self.delta1,
            delta0: self.delta0,
            n_dim: self.n_dim,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::config(format!(
                "op.lambda = {} must be positive",
                self.lambda
            )));
        }
        if !(self.big_lambda >= self.lambda && self.big_lambda.is_finite()) {
            return Err(Error::config(format!(
                "op.Lambda = {} must be >= op.lambda = {}",
                self.big_lambda, self.lambda
            )));
        }
        if !(self.delta1 >= 0.0) || !(self.delta0 >= 0.0) {
            return Err(Error::config("op.delta1 and op.delta0 must be nonnegative"));
        }
        if self.n_dim == 0 {
            return Err(Error::config("op.n_dim must be at least 1"));
        }
        Ok(())
    }

    /// Builds through the default registry.
    pub fn build(&self, ctx: &OperatorContext) -> Result<Box<dyn EllipticOperator>> {
        OperatorRegistry::global().build(self, ctx)
    }
}

/// Problem data an operator may depend on besides its own spec.
#[derive(Debug, Clone)]
pub struct OperatorContext {
    pub b: Nonlinearity,
    pub psi: Option<PsiSpec>,
}

impl Default for OperatorContext {
    fn default() -> Self {
        OperatorContext {
            b: Nonlinearity::Exact(BSpec::PositivePart),
            psi: None,
        }
    }
}

/// An elliptic operator `F(M, p, z)`.
pub trait EllipticOperator: Send + Sync + fmt::Debug {
    fn name(&self) -> &'static str;

    fn ellipticity(&self) -> Ellipticity;

    /// Evaluation at a full symmetric matrix.
    fn eval(&self, m: &DMatrix<f64>, p: &[f64], z: f64) -> f64;

    /// Evaluation and partial derivatives at a diagonal Hessian `diag(eigs)`
    /// with the gradient expressed in the same frame. Writes `∂F/∂e_i` and
    /// `∂F/∂p_i` and returns `(F, ∂F/∂z)`. Piecewise-linear envelopes report the
    /// derivative of the active branch.
    fn linearize_diag(
        &self,
        eigs: &[f64],
        p: &[f64],
        z: f64,
        d_eigs: &mut [f64],
        d_p: &mut [f64],
    ) -> (f64, f64);

    fn eval_diag(&self, eigs: &[f64], p: &[f64], z: f64) -> f64 {
        let mut de = vec![0.0; eigs.len()];
        let mut dp = vec![0.0; p.len()];
        self.linearize_diag(eigs, p, z, &mut de, &mut dp).0
    }

    /// For divergence-form operators, `(Ψ(b(z)), d/dz Ψ(b(z)))`; the
    /// discretization then uses the conservative flux form.
    fn conservative_coefficient(&self, _z: f64) -> Option<(f64, f64)> {
        None
    }
}

pub type OperatorBuilder = fn(&OperatorSpec, &OperatorContext) -> Result<Box<dyn EllipticOperator>>;

/// Operator kinds registered by name.
#[derive(Clone)]
pub struct OperatorRegistry {
    builders: BTreeMap<String, OperatorBuilder>,
}

impl fmt::Debug for OperatorRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.builders.keys()).finish()
    }
}

impl OperatorRegistry {
    pub fn empty() -> Self {
        OperatorRegistry {
            builders: BTreeMap::new(),
        }
    }

    pub fn with_defaults() -> Self {
        let mut r = Self::empty();
        r.register("trace", kinds::build_trace);
        r.register("pucci-plus", kinds::build_pucci_plus);
        r.register("pucci-minus", kinds::build_pucci_minus);
        r.register("bellman-isaacs", kinds::build_bellman_isaacs);
        r.register("divergence", kinds::build_divergence);
        r
    }

    pub fn global() -> &'static OperatorRegistry {
        static REGISTRY: OnceLock<OperatorRegistry> = OnceLock::new();
        REGISTRY.get_or_init(Self::with_defaults)
    }

    pub fn register(&mut self, name: &str, builder: OperatorBuilder) {
        self.builders.insert(name.to_string(), builder);
    }

    pub fn names(&self) -> Vec<&str> {
        self.builders.keys().map(String::as_str).collect()
    }

    pub fn build(
        &self,
        spec: &OperatorSpec,
        ctx: &OperatorContext,
    ) -> Result<Box<dyn EllipticOperator>> {
        spec.validate()?;
        let builder = self
            .builders
            .get(&spec.kind)
            .ok_or_else(|| Error::Unknown {
                what: "operator kind",
                name: spec.kind.clone(),
            })?;
        builder(spec, ctx)
    }
}

/// `F` at the Hessian of a radial profile at radius `rho`:
/// eigenvalues `ψ'/ρ` (n-1 copies) then `ψ''`, gradient `(0, ..., ψ')`.
/// Divergence kinds are evaluated in the same expanded form.
pub fn radial_second_order(
    op: &dyn EllipticOperator,
    n_dim: usize,
    rho: f64,
    psi: f64,
    psi_p: f64,
    psi_pp: f64,
) -> Result<f64> {
    if !(rho > 0.0) {
        return Err(Error::domain(format!(
            "radial evaluation needs rho > 0, got {rho}"
        )));
    }
    let (eigs, p) = radial_frame(n_dim, rho, psi_p, psi_pp);
    Ok(op.eval_diag(&eigs, &p, psi))
}

pub(crate) fn radial_frame(
    n_dim: usize,
    rho: f64,
    psi_p: f64,
    psi_pp: f64,
) -> (Vec<f64>, Vec<f64>) {
    let mut eigs = vec![psi_p / rho; n_dim];
    eigs[n_dim - 1] = psi_pp;
    let mut p = vec![0.0; n_dim];
    p[n_dim - 1] = psi_p;
    (eigs, p)
}

/// Sampled radial profile (values and derivatives on a grid of radii).
#[derive(Debug, Clone, PartialEq)]
pub struct RadialProfile {
    pub rho: Vec<f64>,
    pub psi: Vec<f64>,
    pub psi_prime: Vec<f64>,
    pub psi_double_prime: Vec<f64>,
    pub n_dim: usize,
}

impl RadialProfile {
    pub fn second_order(&self, i: usize, op: &dyn EllipticOperator) -> Result<f64> {
        let len = self.rho.len();
        if i >= len
            || self.psi.len() != len
            || self.psi_prime.len() != len
            || self.psi_double_prime.len() != len
        {
            return Err(Error::Index { index: i, len });
        }
        radial_second_order(
            op,
            self.n_dim,
            self.rho[i],
            self.psi[i],
            self.psi_prime[i],
            self.psi_double_prime[i],
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn build(kind: &str, l: f64, big: f64, n: usize) -> Box<dyn EllipticOperator> {
        OperatorSpec::new(kind, l, big, 0.0, 0.0, n)
            .build(&OperatorContext::default())
            .unwrap()
    }

    #[test]
    fn registry_lists_kinds() {
        let names = OperatorRegistry::global().names();
        for k in [
            "trace",
            "pucci-plus",
            "pucci-minus",
            "bellman-isaacs",
            "divergence",
        ] {
            assert!(names.contains(&k));
        }
        let err =
            OperatorSpec::new("nope", 1.0, 1.0, 0.0, 0.0, 1).build(&OperatorContext::default());
        assert!(matches!(err, Err(Error::Unknown { .. })));
    }

    #[test]
    fn spec_validation() {
        let ctx = OperatorContext::default();
        assert!(OperatorSpec::new("trace", 0.0, 1.0, 0.0, 0.0, 1)
            .build(&ctx)
            .is_err());
        assert!(OperatorSpec::new("trace", 2.0, 1.0, 0.0, 0.0, 1)
            .build(&ctx)
            .is_err());
        assert!(OperatorSpec::new("trace", 1.0, 1.0, -1.0, 0.0, 1)
            .build(&ctx)
            .is_err());
        assert!(OperatorSpec::new("trace", 1.0, 1.0, 0.0, 0.0, 1)
            .build(&ctx)
            .is_ok());
    }

    #[test]
    fn radial_examples() {
        let tr = build("trace", 1.0, 1.0, 2);
        let (rho, pp, ppp) = (0.7, -0.3, 1.1);
        let v = radial_second_order(tr.as_ref(), 2, rho, 0.0, pp, ppp).unwrap();
        assert!((v - (pp / rho + ppp)).abs() < 1e-15);

        let pm = build("pucci-minus", 1.0, 2.0, 3);
        let (pp, ppp) = (0.5, -0.8);
        let v = radial_second_order(pm.as_ref(), 3, rho, 0.0, pp, ppp).unwrap();
        assert!((v - (1.0 * 2.0 * pp / rho + 2.0 * ppp)).abs() < 1e-15);

        // |x|² in three dimensions.
        let tr3 = build("trace", 1.0, 1.0, 3);
        let profile = RadialProfile {
            rho: vec![0.5, 1.0, 2.0],
            psi: vec![0.25, 1.0, 4.0],
            psi_prime: vec![1.0, 2.0, 4.0],
            psi_double_prime: vec![2.0; 3],
            n_dim: 3,
        };
        for i in 0..3 {
            assert!((profile.second_order(i, tr3.as_ref()).unwrap() - 6.0).abs() < 1e-14);
        }
        assert!(profile.second_order(3, tr3.as_ref()).is_err());
        assert!(radial_second_order(tr.as_ref(), 2, 0.0, 0.0, 1.0, 1.0).is_err());
    }
}
