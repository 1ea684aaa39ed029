//! Three-point finite-difference assembly of `F(D²u, Du, u)` on a [`Grid`].
//!
//! Nondivergence kinds use central differences; on radial grids the
//! tangential eigenvalue is `D₁u/ρ`. Divergence kinds use the conservative
//! flux form with arithmetic-mean face coefficients (weighted by `ρ^{n-1}` on
//! radial grids).

use super::EllipticOperator;
use crate::error::{Error, Result};
use crate::grid::Grid;

/// `F_i` and its partials with respect to `u_{i-1}`, `u_i`, `u_{i+1}`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NodeLinearization {
    pub value: f64,
    pub d_left: f64,
    pub d_center: f64,
    pub d_right: f64,
}

pub struct Stencil<'a> {
    op: &'a dyn EllipticOperator,
    grid: &'a Grid,
    dim: usize,
    eigs: Vec<f64>,
    p: Vec<f64>,
    d_eigs: Vec<f64>,
    d_p: Vec<f64>,
}

impl<'a> Stencil<'a> {
    pub fn new(op: &'a dyn EllipticOperator, grid: &'a Grid) -> Result<Self> {
        let op_dim = op.ellipticity().n_dim;
        let dim = match grid.radial_dim() {
            Some(n) if n != op_dim => {
                return Err(Error::config(format!(
                    "radial grid dimension {n} differs from op.n_dim {op_dim}"
                )))
            }
            Some(n) => n,
            None => op_dim,
        };
        Ok(Stencil {
            op,
            grid,
            dim,
            eigs: vec![0.0; dim],
            p: vec![0.0; dim],
            d_eigs: vec![0.0; dim],
            d_p: vec![0.0; dim],
        })
    }

    pub fn grid(&self) -> &Grid {
        self.grid
    }

    /// Linearization at node `i` given the three stencil values. On a
    /// reflecting inner node the caller passes `um = u[1]`.
    pub fn linearize(&mut self, i: usize, um: f64, u: f64, up: f64) -> NodeLinearization {
        let h = self.grid.h;
        let x = self.grid.x[i];
        if let Some((psi_c, dpsi_c)) = self.op.conservative_coefficient(u) {
            let (psi_m, dpsi_m) = self.op.conservative_coefficient(um).unwrap_or((psi_c, 0.0));
            let (psi_p, dpsi_p) = self.op.conservative_coefficient(up).unwrap_or((psi_c, 0.0));
            let w = self.grid.measure(x);
            let wm = self.grid.measure(x - 0.5 * h);
            let wp = self.grid.measure(x + 0.5 * h);
            let fm = 0.5 * (psi_c + psi_m);
            let fp = 0.5 * (psi_c + psi_p);
            let s = 1.0 / (w * h * h);
            let value = s * (wp * fp * (up - u) - wm * fm * (u - um));
            let d_right = s * wp * (fp + 0.5 * dpsi_p * (up - u));
            let d_left = s * wm * (fm - 0.5 * dpsi_m * (u - um));
            let d_center =
                s * (wp * (0.5 * dpsi_c * (up - u) - fp) - wm * (fm + 0.5 * dpsi_c * (u - um)));
            return NodeLinearization {
                value,
                d_left,
                d_center,
                d_right,
            };
        }
        let d2 = (up - 2.0 * u + um) / (h * h);
        let d1 = (up - um) / (2.0 * h);
        let n = self.dim;
        self.p.fill(0.0);
        match self.grid.radial_dim() {
            Some(_) => {
                self.eigs[..n - 1].fill(d1 / x);
                self.eigs[n - 1] = d2;
                self.p[n - 1] = d1;
            }
            None => {
                self.eigs.fill(0.0);
                self.eigs[0] = d2;
                self.p[0] = d1;
            }
        }
        let (value, dz) =
            self.op
                .linearize_diag(&self.eigs, &self.p, u, &mut self.d_eigs, &mut self.d_p);
        let (f_d2, f_d1) = match self.grid.radial_dim() {
            Some(_) => {
                let tangential: f64 = self.d_eigs[..n - 1].iter().sum();
                (self.d_eigs[n - 1], tangential / x + self.d_p[n - 1])
            }
            None => (self.d_eigs[0], self.d_p[0]),
        };
        let a = f_d2 / (h * h);
        let b = f_d1 / (2.0 * h);
        NodeLinearization {
            value,
            d_left: a - b,
            d_center: -2.0 * a + dz,
            d_right: a + b,
        }
    }

    /// Stencil values around node `i`, honoring the reflection condition.
    pub fn neighbors(&self, u: &[f64], i: usize) -> (f64, f64, f64) {
        let um = if i == 0 { u[1] } else { u[i - 1] };
        (um, u[i], u[i + 1])
    }
}

/// Nodewise `F(D²u, Du, u)` at the solved-for nodes; Dirichlet nodes carry NaN.
pub fn apply_operator_1d(op: &dyn EllipticOperator, grid: &Grid, u: &[f64]) -> Result<Vec<f64>> {
    if u.len() != grid.len() {
        return Err(Error::Shape(format!(
            "field has {} nodes, grid {}",
            u.len(),
            grid.len()
        )));
    }
    let mut st = Stencil::new(op, grid)?;
    let mut out = vec![f64::NAN; u.len()];
    for i in grid.unknowns() {
        let (um, uc, up) = st.neighbors(u, i);
        out[i] = st.linearize(i, um, uc, up).value;
    }
    Ok(out)
}

/// Conditions under which the three-point scheme is monotone; each violated
/// condition yields a message.
pub fn monotonicity_warnings(op: &dyn EllipticOperator, grid: &Grid) -> Vec<String> {
    let c = op.ellipticity();
    let mut out = Vec::new();
    if c.delta1 * grid.h > 2.0 * c.lambda {
        out.push(format!(
            "drift bound delta1 = {} too large for h = {} (need delta1 h <= 2 lambda)",
            c.delta1, grid.h
        ));
    }
    if let Some(n) = grid.radial_dim() {
        let rho_min = (n as f64 - 1.0) * c.big_lambda * grid.h / (2.0 * c.lambda);
        let first = grid.unknowns().start;
        if grid.x[first] < rho_min {
            out.push(format!(
                "innermost radius {} below {rho_min}; radial scheme not monotone there",
                grid.x[first]
            ));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Geometry;
    use crate::nonlinearity::PsiSpec;
    use crate::operators::{radial_second_order, OperatorContext, OperatorSpec};

    fn interval(n: usize) -> Grid {
        Grid::new(Geometry::Interval { lo: -1.0, hi: 1.0 }, n).unwrap()
    }

    #[test]
    fn trace_on_affine_and_quadratic() {
        let op = OperatorSpec::trace(1.0, 1)
            .build(&OperatorContext::default())
            .unwrap();
        let g = interval(41);
        let lin: Vec<f64> = g.x.iter().map(|x| 3.0 * x - 1.0).collect();
        let out = apply_operator_1d(op.as_ref(), &g, &lin).unwrap();
        assert!(out[0].is_nan() && out[40].is_nan());
        assert!(out[1..40].iter().all(|v| v.abs() < 1e-10));
        let g = Grid::new(Geometry::Interval { lo: 0.0, hi: 1.0 }, 9).unwrap();
        let q: Vec<f64> = g.x.iter().map(|x| x * x).collect();
        let out = apply_operator_1d(op.as_ref(), &g, &q).unwrap();
        assert!(out[1..8].iter().all(|v| *v == 2.0));
        assert!(apply_operator_1d(op.as_ref(), &g, &q[..3]).is_err());
    }

    #[test]
    fn divergence_with_unit_psi_matches_trace() {
        let ctx = OperatorContext {
            psi: Some(PsiSpec::Constant { value: 1.0 }),
            ..OperatorContext::default()
        };
        let div = OperatorSpec::new("divergence", 1.0, 1.0, 0.0, 0.0, 1)
            .build(&ctx)
            .unwrap();
        let tr = OperatorSpec::trace(1.0, 1).build(&ctx).unwrap();
        let g = interval(51);
        let u: Vec<f64> = g.x.iter().map(|x| 1.0 + 0.5 * x - x * x * 0.3).collect();
        let a = apply_operator_1d(div.as_ref(), &g, &u).unwrap();
        let b = apply_operator_1d(tr.as_ref(), &g, &u).unwrap();
        for i in 1..50 {
            assert!((a[i] - b[i]).abs() < 1e-12);
        }
    }

    fn radial_error(op_kind: &str, nodes: usize, ctx: &OperatorContext) -> f64 {
        let op = OperatorSpec::new(op_kind, 1.0, 2.0, 0.0, 0.0, 3)
            .build(ctx)
            .unwrap();
        let g = Grid::new(
            Geometry::RadialAnnulus {
                r_lo: 0.5,
                r_hi: 1.5,
                n_dim: 3,
            },
            nodes,
        )
        .unwrap();
        let u: Vec<f64> = g.x.iter().map(|r| (-r * r).exp()).collect();
        let out = apply_operator_1d(op.as_ref(), &g, &u).unwrap();
        let mut err: f64 = 0.0;
        for i in g.unknowns() {
            let r = g.x[i];
            let p = -2.0 * r * (-r * r).exp();
            let pp = (4.0 * r * r - 2.0) * (-r * r).exp();
            let exact = radial_second_order(op.as_ref(), 3, r, u[i], p, pp).unwrap();
            err = err.max((out[i] - exact).abs());
        }
        err
    }

    #[test]
    fn radial_consistency_is_second_order() {
        let ctx = OperatorContext {
            psi: Some(PsiSpec::Constant { value: 1.3 }),
            ..OperatorContext::default()
        };
        for kind in ["trace", "pucci-minus", "pucci-plus", "divergence"] {
            let e1 = radial_error(kind, 41, &ctx);
            let e2 = radial_error(kind, 81, &ctx);
            let e3 = radial_error(kind, 161, &ctx);
            let s1 = (e1 / e2).log2();
            let s2 = (e2 / e3).log2();
            assert!(s1 >= 1.9 && s2 >= 1.9, "{kind}: slopes {s1} {s2}");
        }
    }

    #[test]
    fn linearization_matches_differences() {
        let ctx = OperatorContext {
            psi: Some(PsiSpec::Polynomial {
                coeffs: vec![1.0, 0.7],
            }),
            ..OperatorContext::default()
        };
        let g = Grid::new(
            Geometry::RadialAnnulus {
                r_lo: 1.0,
                r_hi: 2.0,
                n_dim: 2,
            },
            11,
        )
        .unwrap();
        for kind in ["trace", "pucci-minus", "divergence"] {
            let op = OperatorSpec::new(kind, 1.0, 2.0, 0.0, 0.0, 2)
                .build(&ctx)
                .unwrap();
            let mut st = Stencil::new(op.as_ref(), &g).unwrap();
            let (um, u, up) = (0.3, 0.5, 0.9);
            let lin = st.linearize(4, um, u, up);
            let h = 1e-7;
            let fd_l = (st.linearize(4, um + h, u, up).value
                - st.linearize(4, um - h, u, up).value)
                / (2.0 * h);
            let fd_c = (st.linearize(4, um, u + h, up).value
                - st.linearize(4, um, u - h, up).value)
                / (2.0 * h);
            let fd_r = (st.linearize(4, um, u, up + h).value
                - st.linearize(4, um, u, up - h).value)
                / (2.0 * h);
            let scale = lin.d_center.abs();
            assert!((fd_l - lin.d_left).abs() < 1e-6 * scale, "{kind}");
            assert!((fd_c - lin.d_center).abs() < 1e-6 * scale, "{kind}");
            assert!((fd_r - lin.d_right).abs() < 1e-6 * scale, "{kind}");
        }
    }

    #[test]
    fn monotonicity_conditions() {
        let op = OperatorSpec::new("pucci-plus", 1.0, 4.0, 0.0, 0.0, 3)
            .build(&OperatorContext::default())
            .unwrap();
        let g = Grid::new(
            Geometry::RadialBallPunctured {
                r_eps: None,
                r_hi: 1.0,
                n_dim: 3,
            },
            50,
        )
        .unwrap();
        assert_eq!(monotonicity_warnings(op.as_ref(), &g).len(), 1);
        let g = Grid::new(
            Geometry::RadialAnnulus {
                r_lo: 1.0,
                r_hi: 2.0,
                n_dim: 3,
            },
            50,
        )
        .unwrap();
        assert!(monotonicity_warnings(op.as_ref(), &g).is_empty());
    }
}
