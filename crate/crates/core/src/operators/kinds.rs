use nalgebra::DMatrix;

use super::pucci::{pucci_minus, pucci_plus, sym_eigenvalues};
use super::{BiEntry, EllipticOperator, Ellipticity, OperatorContext, OperatorSpec};
use crate::error::{Error, Result};
use crate::nonlinearity::{Nonlinearity, PsiSpec};

fn norm(p: &[f64]) -> f64 {
    p.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn trace_of(m: &DMatrix<f64>) -> f64 {
    m.diagonal().sum()
}

/// `F = λ tr M`.
#[derive(Debug, Clone)]
pub struct Trace {
    pub constants: Ellipticity,
}

impl EllipticOperator for Trace {
    fn name(&self) -> &'static str {
        "trace"
    }

    fn ellipticity(&self) -> Ellipticity {
        self.constants
    }

    fn eval(&self, m: &DMatrix<f64>, _p: &[f64], _z: f64) -> f64 {
        self.constants.lambda * trace_of(m)
    }

    fn linearize_diag(
        &self,
        eigs: &[f64],
        _p: &[f64],
        _z: f64,
        d_eigs: &mut [f64],
        d_p: &mut [f64],
    ) -> (f64, f64) {
        let l = self.constants.lambda;
        d_eigs.fill(l);
        d_p.fill(0.0);
        (l * eigs.iter().sum::<f64>(), 0.0)
    }
}

fn pucci_linearize(
    eigs: &[f64],
    p: &[f64],
    z: f64,
    c: &Ellipticity,
    plus: bool,
    d_eigs: &mut [f64],
    d_p: &mut [f64],
) -> (f64, f64) {
    let (up, down) = if plus {
        (c.big_lambda, c.lambda)
    } else {
        (c.lambda, c.big_lambda)
    };
    for (d, &e) in d_eigs.iter_mut().zip(eigs) {
        *d = if e > 0.0 { up } else { down };
    }
    let pn = norm(p);
    let sign = if plus { 1.0 } else { -1.0 };
    for (d, &pi) in d_p.iter_mut().zip(p) {
        *d = if pn > 0.0 {
            sign * c.delta1 * pi / pn
        } else {
            0.0
        };
    }
    let second = if plus {
        pucci_plus(eigs, c.lambda, c.big_lambda)
    } else {
        pucci_minus(eigs, c.lambda, c.big_lambda)
    };
    (second + sign * c.delta1 * pn - c.delta0 * z, -c.delta0)
}

/// `F = M⁺(M) + δ₁|p| - δ₀ z`.
#[derive(Debug, Clone)]
pub struct PucciPlusOp {
    pub constants: Ellipticity,
}

impl EllipticOperator for PucciPlusOp {
    fn name(&self) -> &'static str {
        "pucci-plus"
    }

    fn ellipticity(&self) -> Ellipticity {
        self.constants
    }

    fn eval(&self, m: &DMatrix<f64>, p: &[f64], z: f64) -> f64 {
        let c = &self.constants;
        pucci_plus(&sym_eigenvalues(m), c.lambda, c.big_lambda) + c.delta1 * norm(p) - c.delta0 * z
    }

    fn linearize_diag(
        &self,
        eigs: &[f64],
        p: &[f64],
        z: f64,
        d_eigs: &mut [f64],
        d_p: &mut [f64],
    ) -> (f64, f64) {
        pucci_linearize(eigs, p, z, &self.constants, true, d_eigs, d_p)
    }
}

/// `F = M⁻(M) - δ₁|p| - δ₀ z`.
#[derive(Debug, Clone)]
pub struct PucciMinusOp {
    pub constants: Ellipticity,
}

impl EllipticOperator for PucciMinusOp {
    fn name(&self) -> &'static str {
        "pucci-minus"
    }

    fn ellipticity(&self) -> Ellipticity {
        self.constants
    }

    fn eval(&self, m: &DMatrix<f64>, p: &[f64], z: f64) -> f64 {
        let c = &self.constants;
        pucci_minus(&sym_eigenvalues(m), c.lambda, c.big_lambda) - c.delta1 * norm(p) - c.delta0 * z
    }

    fn linearize_diag(
        &self,
        eigs: &[f64],
        p: &[f64],
        z: f64,
        d_eigs: &mut [f64],
        d_p: &mut [f64],
    ) -> (f64, f64) {
        pucci_linearize(eigs, p, z, &self.constants, false, d_eigs, d_p)
    }
}

#[derive(Debug, Clone)]
struct Control {
    a: DMatrix<f64>,
    b: Vec<f64>,
    c: f64,
}

impl Control {
    fn apply(&self, m: &DMatrix<f64>, p: &[f64], z: f64) -> f64 {
        self.a.component_mul(m).sum() + dot(&self.b, p) + self.c * z
    }

    fn apply_diag(&self, eigs: &[f64], p: &[f64], z: f64) -> f64 {
        let mut s = 0.0;
        for (i, e) in eigs.iter().enumerate() {
            s += self.a[(i, i)] * e;
        }
        s + dot(&self.b, p) + self.c * z
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `F = inf_α sup_β [tr(A^{αβ} M) + b^{αβ}·p + c^{αβ} z]` over finite families.
#[derive(Debug, Clone)]
pub struct BellmanIsaacs {
    constants: Ellipticity,
    controls: Vec<Vec<Control>>,
}

impl BellmanIsaacs {
    pub fn new(constants: Ellipticity, entries: &[Vec<BiEntry>]) -> Result<Self> {
        let n = constants.n_dim;
        if entries.is_empty() || entries.iter().any(|row| row.is_empty()) {
            return Err(Error::config(
                "bellman-isaacs needs a nonempty family in op.bi.entries",
            ));
        }
        let tol = 1e-12 * constants.big_lambda.max(1.0);
        let mut controls = Vec::with_capacity(entries.len());
        for (ai, row) in entries.iter().enumerate() {
            let mut out = Vec::with_capacity(row.len());
            for (bi, e) in row.iter().enumerate() {
                let at = format!("op.bi.entries[{ai}][{bi}]");
                if e.a.len() != n || e.a.iter().any(|r| r.len() != n) {
                    return Err(Error::config(format!("{at}: a must be {n}x{n}")));
                }
                let a = DMatrix::from_fn(n, n, |i, j| e.a[i][j]);
                if (0..n).any(|i| (0..n).any(|j| a[(i, j)] != a[(j, i)])) {
                    return Err(Error::config(format!("{at}: a must be symmetric")));
                }
                let ev = sym_eigenvalues(&a);
                if ev
                    .iter()
                    .any(|&x| x < constants.lambda - tol || x > constants.big_lambda + tol)
                {
                    return Err(Error::config(format!(
                        "{at}: eigenvalues of a outside [lambda, Lambda]"
                    )));
                }
                let b = if e.b.is_empty() {
                    vec![0.0; n]
                } else {
                    e.b.clone()
                };
                if b.len() != n {
                    return Err(Error::config(format!("{at}: b must have length {n}")));
                }
                if norm(&b) > constants.delta1 * (1.0 + 1e-12) {
                    return Err(Error::config(format!("{at}: |b| exceeds delta1")));
                }
                if e.c > 0.0 {
                    return Err(Error::config(format!(
                        "{at}: zeroth-order coefficient c = {} must be nonpositive",
                        e.c
                    )));
                }
                if -e.c > constants.delta0 * (1.0 + 1e-12) {
                    return Err(Error::config(format!("{at}: |c| exceeds delta0")));
                }
                out.push(Control { a, b, c: e.c });
            }
            controls.push(out);
        }
        Ok(BellmanIsaacs {
            constants,
            controls,
        })
    }

    fn active(&self, value: impl Fn(&Control) -> f64) -> (f64, usize, usize) {
        let mut best = (f64::INFINITY, 0, 0);
        for (ai, row) in self.controls.iter().enumerate() {
            let mut inner = (f64::NEG_INFINITY, 0);
            for (bi, ctl) in row.iter().enumerate() {
                let v = value(ctl);
                if v > inner.0 {
                    inner = (v, bi);
                }
            }
            if inner.0 < best.0 {
                best = (inner.0, ai, inner.1);
            }
        }
        best
    }
}

impl EllipticOperator for BellmanIsaacs {
    fn name(&self) -> &'static str {
        "bellman-isaacs"
    }

    fn ellipticity(&self) -> Ellipticity {
        self.constants
    }

    fn eval(&self, m: &DMatrix<f64>, p: &[f64], z: f64) -> f64 {
        self.active(|c| c.apply(m, p, z)).0
    }

    fn linearize_diag(
        &self,
        eigs: &[f64],
        p: &[f64],
        z: f64,
        d_eigs: &mut [f64],
        d_p: &mut [f64],
    ) -> (f64, f64) {
        let (v, ai, bi) = self.active(|c| c.apply_diag(eigs, p, z));
        let ctl = &self.controls[ai][bi];
        for (i, d) in d_eigs.iter_mut().enumerate() {
            *d = ctl.a[(i, i)];
        }
        d_p.copy_from_slice(&ctl.b[..d_p.len()]);
        (v, ctl.c)
    }
}

/// `F = Ψ(b(z)) tr M + Ψ'(b(z)) b'(z) |p|²`, the expanded form of
/// `∇·(Ψ(b(u)) ∇u)`. Negative values of `b` are clamped to 0 before `Ψ`.
#[derive(Debug, Clone)]
pub struct Divergence {
    constants: Ellipticity,
    psi: PsiSpec,
    b: Nonlinearity,
}

impl Divergence {
    pub fn new(constants: Ellipticity, psi: PsiSpec, b: Nonlinearity) -> Self {
        Divergence { constants, psi, b }
    }

    fn coeffs(&self, z: f64) -> (f64, f64, f64, f64, f64) {
        let y = self.b.eval(z).max(0.0);
        (
            self.psi.value(y),
            self.psi.derivative(y),
            self.psi.second_derivative(y),
            self.b.derivative(z),
            self.b.second_derivative(z),
        )
    }
}

impl EllipticOperator for Divergence {
    fn name(&self) -> &'static str {
        "divergence"
    }

    fn ellipticity(&self) -> Ellipticity {
        self.constants
    }

    fn eval(&self, m: &DMatrix<f64>, p: &[f64], z: f64) -> f64 {
        let (psi, dpsi, _, db, _) = self.coeffs(z);
        psi * trace_of(m) + dpsi * db * dot(p, p)
    }

    fn linearize_diag(
        &self,
        eigs: &[f64],
        p: &[f64],
        z: f64,
        d_eigs: &mut [f64],
        d_p: &mut [f64],
    ) -> (f64, f64) {
        let (psi, dpsi, ddpsi, db, ddb) = self.coeffs(z);
        let tr: f64 = eigs.iter().sum();
        let p2 = dot(p, p);
        d_eigs.fill(psi);
        for (d, &pi) in d_p.iter_mut().zip(p) {
            *d = 2.0 * dpsi * db * pi;
        }
        let dz = dpsi * db * tr + (ddpsi * db * db + dpsi * ddb) * p2;
        (psi * tr + dpsi * db * p2, dz)
    }

    fn conservative_coefficient(&self, z: f64) -> Option<(f64, f64)> {
        let (psi, dpsi, _, db, _) = self.coeffs(z);
        Some((psi, dpsi * db))
    }
}

pub(super) fn build_trace(
    spec: &OperatorSpec,
    _: &OperatorContext,
) -> Result<Box<dyn EllipticOperator>> {
    Ok(Box::new(Trace {
        constants: spec.ellipticity(),
    }))
}

pub(super) fn build_pucci_plus(
    spec: &OperatorSpec,
    _: &OperatorContext,
) -> Result<Box<dyn EllipticOperator>> {
    Ok(Box::new(PucciPlusOp {
        constants: spec.ellipticity(),
    }))
}

pub(super) fn build_pucci_minus(
    spec: &OperatorSpec,
    _: &OperatorContext,
) -> Result<Box<dyn EllipticOperator>> {
    Ok(Box::new(PucciMinusOp {
        constants: spec.ellipticity(),
    }))
}

pub(super) fn build_bellman_isaacs(
    spec: &OperatorSpec,
    _: &OperatorContext,
) -> Result<Box<dyn EllipticOperator>> {
    let bi = spec
        .bi
        .as_ref()
        .ok_or_else(|| Error::config("bellman-isaacs requires op.bi.entries"))?;
    Ok(Box::new(BellmanIsaacs::new(
        spec.ellipticity(),
        &bi.entries,
    )?))
}

pub(super) fn build_divergence(
    spec: &OperatorSpec,
    ctx: &OperatorContext,
) -> Result<Box<dyn EllipticOperator>> {
    let psi = ctx
        .psi
        .clone()
        .ok_or_else(|| Error::config("divergence kind requires a [psi] section"))?;
    psi.eval(0.0).map_err(|e| Error::config(e.to_string()))?;
    Ok(Box::new(Divergence::new(
        spec.ellipticity(),
        psi,
        ctx.b.clone(),
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nonlinearity::BSpec;
    use crate::operators::BiSpec;

    fn consts(n: usize) -> Ellipticity {
        Ellipticity {
            lambda: 1.0,
            big_lambda: 2.0,
            delta1: 0.5,
            delta0: 0.25,
            n_dim: n,
        }
    }

    fn entry(a: Vec<Vec<f64>>, b: Vec<f64>, c: f64) -> BiEntry {
        BiEntry { a, b, c }
    }

    #[test]
    fn bi_rejects_bad_controls() {
        let ok = entry(vec![vec![1.5]], vec![0.1], -0.1);
        assert!(BellmanIsaacs::new(consts(1), &[vec![ok.clone()]]).is_ok());
        let pos_c = entry(vec![vec![1.5]], vec![], 0.1);
        assert!(BellmanIsaacs::new(consts(1), &[vec![pos_c]]).is_err());
        let big_a = entry(vec![vec![3.0]], vec![], 0.0);
        assert!(BellmanIsaacs::new(consts(1), &[vec![big_a]]).is_err());
        let big_b = entry(vec![vec![1.0]], vec![0.6], 0.0);
        assert!(BellmanIsaacs::new(consts(1), &[vec![big_b]]).is_err());
        assert!(BellmanIsaacs::new(consts(1), &[]).is_err());
        assert!(BellmanIsaacs::new(consts(2), &[vec![ok]]).is_err());
    }

    #[test]
    fn bi_inf_sup() {
        // inf over rows of the max within the row.
        let fam = vec![
            vec![
                entry(vec![vec![1.0]], vec![], 0.0),
                entry(vec![vec![2.0]], vec![], 0.0),
            ],
            vec![entry(vec![vec![1.5]], vec![], 0.0)],
        ];
        let op = BellmanIsaacs::new(consts(1), &fam).unwrap();
        let m = DMatrix::from_element(1, 1, 1.0);
        assert_eq!(op.eval(&m, &[0.0], 0.0), 1.5);
        let m = DMatrix::from_element(1, 1, -1.0);
        // Row maxima are -1 and -1.5.
        assert_eq!(op.eval(&m, &[0.0], 0.0), -1.5);
        let (mut de, mut dp) = ([0.0], [0.0]);
        let (v, _) = op.linearize_diag(&[-1.0], &[0.0], 0.0, &mut de, &mut dp);
        assert_eq!((v, de[0]), (-1.5, 1.5));
    }

    #[test]
    fn bi_spec_parses_from_toml() {
        let text = r#"
            entries = [[{ a = [[1.0, 0.0], [0.0, 2.0]], b = [0.1, 0.0], c = -0.1 }]]
        "#;
        let spec: BiSpec = toml::from_str(text).unwrap();
        assert!(BellmanIsaacs::new(consts(2), &spec.entries).is_ok());
    }

    #[test]
    fn divergence_constant_psi_is_scaled_trace() {
        let op = Divergence::new(
            consts(2),
            PsiSpec::Constant { value: 1.5 },
            Nonlinearity::Exact(BSpec::PositivePart),
        );
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, -2.0]);
        assert!((op.eval(&m, &[1.0, 1.0], 0.4) + 1.5).abs() < 1e-15);
        assert_eq!(op.conservative_coefficient(0.4), Some((1.5, 0.0)));
    }

    #[test]
    fn linearizations_match_finite_differences() {
        let ops: Vec<Box<dyn EllipticOperator>> = vec![
            Box::new(Trace {
                constants: consts(2),
            }),
            Box::new(PucciPlusOp {
                constants: consts(2),
            }),
            Box::new(PucciMinusOp {
                constants: consts(2),
            }),
            Box::new(Divergence::new(
                consts(2),
                PsiSpec::Polynomial {
                    coeffs: vec![1.0, 0.5, 0.25],
                },
                Nonlinearity::Smooth(crate::nonlinearity::BnFamily { n: 3 }),
            )),
        ];
        let eigs = [0.7, -1.3];
        let p = [0.4, -0.9];
        let z = 0.6;
        let h = 1e-6;
        for op in &ops {
            let (mut de, mut dp) = ([0.0; 2], [0.0; 2]);
            let (v, dz) = op.linearize_diag(&eigs, &p, z, &mut de, &mut dp);
            assert!((v - op.eval_diag(&eigs, &p, z)).abs() < 1e-14);
            let fd = (op.eval_diag(&eigs, &p, z + h) - op.eval_diag(&eigs, &p, z - h)) / (2.0 * h);
            assert!((fd - dz).abs() < 1e-6, "{} dz {fd} {dz}", op.name());
            for i in 0..2 {
                let mut e1 = eigs;
                let mut e2 = eigs;
                e1[i] += h;
                e2[i] -= h;
                let fd = (op.eval_diag(&e1, &p, z) - op.eval_diag(&e2, &p, z)) / (2.0 * h);
                assert!((fd - de[i]).abs() < 1e-6, "{} de", op.name());
                let mut p1 = p;
                let mut p2 = p;
                p1[i] += h;
                p2[i] -= h;
                let fd = (op.eval_diag(&eigs, &p1, z) - op.eval_diag(&eigs, &p2, z)) / (2.0 * h);
                assert!((fd - dp[i]).abs() < 1e-6, "{} dp", op.name());
            }
        }
    }
}
