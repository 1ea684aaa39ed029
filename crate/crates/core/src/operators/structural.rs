//! Randomized check of the two-sided structural envelope
//! `M⁻(M-N) - δ₁|p-q| - δ₀|z-w| <= F(M,p,z) - F(N,q,w) <= M⁺(M-N) + δ₁|p-q| + δ₀|z-w|`.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::pucci::{pucci_minus_matrix, pucci_plus_matrix};
use super::EllipticOperator;

pub const STRUCTURAL_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Serialize)]
pub struct StructuralReport {
    pub operator: String,
    pub trials: usize,
    /// Smallest slack to either envelope; negative means a violation.
    pub worst_margin: f64,
    pub violations: usize,
    pub passed: bool,
}

pub fn random_symmetric(rng: &mut impl Rng, n: usize, scale: f64) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = rng.gen_range(-scale..scale);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub fn structural_envelope_check(
    op: &dyn EllipticOperator,
    trials: usize,
    seed: u64,
) -> StructuralReport {
    let c = op.ellipticity();
    let n = c.n_dim;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::INFINITY;
    let mut violations = 0;
    for _ in 0..trials.max(1) {
        let m = random_symmetric(&mut rng, n, 2.0);
        let nm = random_symmetric(&mut rng, n, 2.0);
        let p: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let q: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let z: f64 = rng.gen_range(-1.0..1.0);
        let w: f64 = rng.gen_range(-1.0..1.0);
        let diff = &m - &nm;
        let slack = c.delta1 * dist(&p, &q) + c.delta0 * (z - w).abs();
        let lo = pucci_minus_matrix(&diff, c.lambda, c.big_lambda) - slack;
        let hi = pucci_plus_matrix(&diff, c.lambda, c.big_lambda) + slack;
        let mid = op.eval(&m, &p, z) - op.eval(&nm, &q, w);
        let margin = (mid - lo).min(hi - mid);
        if margin < -STRUCTURAL_TOLERANCE {
            violations += 1;
        }
        worst = worst.min(margin);
    }
    StructuralReport {
        operator: op.name().to_string(),
        trials,
        worst_margin: worst,
        violations,
        passed: violations == 0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{OperatorContext, OperatorSpec};

    #[test]
    fn trace_equality_case() {
        let op = OperatorSpec::trace(1.0, 2)
            .build(&OperatorContext::default())
            .unwrap();
        let r = structural_envelope_check(op.as_ref(), 2000, 1);
        assert!(r.passed);
        assert!(r.worst_margin.abs() < 1e-12);
    }

    #[test]
    fn pucci_plus_passes() {
        let op = OperatorSpec::new("pucci-plus", 0.5, 2.0, 0.3, 0.2, 3)
            .build(&OperatorContext::default())
            .unwrap();
        assert!(structural_envelope_check(op.as_ref(), 10_000, 2).passed);
    }

    #[test]
    fn wrong_constants_are_caught() {
        // A trace operator scaled by 3 does not fit into [1, 2].
        let op = OperatorSpec::trace(3.0, 2)
            .build(&OperatorContext::default())
            .unwrap();
        let mut c = op.ellipticity();
        c.big_lambda = 3.0;
        #[derive(Debug)]
        struct Shrunk(Box<dyn EllipticOperator>, crate::operators::Ellipticity);
        impl EllipticOperator for Shrunk {
            fn name(&self) -> &'static str {
                "shrunk"
            }
            fn ellipticity(&self) -> crate::operators::Ellipticity {
                let mut c = self.1;
                c.lambda = 1.0;
                c.big_lambda = 2.0;
                c
            }
            fn eval(&self, m: &DMatrix<f64>, p: &[f64], z: f64) -> f64 {
                self.0.eval(m, p, z)
            }
            fn linearize_diag(
                &self,
                e: &[f64],
                p: &[f64],
                z: f64,
                a: &mut [f64],
                b: &mut [f64],
            ) -> (f64, f64) {
                self.0.linearize_diag(e, p, z, a, b)
            }
        }
        let r = structural_envelope_check(&Shrunk(op, c), 1000, 3);
        assert!(!r.passed && r.worst_margin < 0.0);
    }
}
