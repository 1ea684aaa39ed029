//! Implicit time integration of `b_n(u)_t = F(D²u, Du, u)` with Dirichlet
//! data, the stationary solver, and singular-limit studies.

mod newton;
mod run;
mod study;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Geometry, Grid};
use crate::nonlinearity::{BSpec, BnFamily, Nonlinearity, PsiSpec};
use crate::operators::discrete::apply_operator_1d;
use crate::operators::discrete::monotonicity_warnings;
use crate::operators::{EllipticOperator, OperatorContext, OperatorSpec};

pub use newton::{solve_elliptic, step_parabolic, thomas_solve, StepOutcome};
pub use run::{
    run, run_ordered_pair, zero_crossings, OrderedPairReport, RunStats, SpaceTimeField, ORDER_TOL,
};
pub use study::{
    bracket_maximal_minimal, singular_limit_study, BracketLevel, BracketReport, ConvergenceReport,
    StudyRun,
};

/// Initial data on the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialData {
    /// `peak (1 - (d/a)²)` inside distance `a` of the centre (the midpoint of
    /// an interval, the origin of a radial line), continued harmonically for
    /// the trace operator to the boundary data outside.
    ClassP {
        a: f64,
        peak: f64,
    },
    Tabulated {
        values: Vec<f64>,
    },
    Constant {
        value: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub geometry: Geometry,
    pub nodes: usize,
    pub op: OperatorSpec,
    pub b: BSpec,
    pub bn: Option<BnFamily>,
    pub psi: Option<PsiSpec>,
    /// Dirichlet values at the inner and outer end (the inner one is unused
    /// on a punctured ball).
    pub g_lo: f64,
    pub g_hi: f64,
    pub initial: InitialData,
    pub horizon: f64,
    pub dt: f64,
}

impl ProblemSpec {
    /// The nonlinearity actually integrated.
    pub fn nonlinearity(&self) -> Nonlinearity {
        match self.bn {
            Some(f) => Nonlinearity::Smooth(f),
            None => Nonlinearity::Exact(self.b.clone()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NewtonPolicy {
    pub max_iters: usize,
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub damping: f64,
}

impl Default for NewtonPolicy {
    fn default() -> Self {
        NewtonPolicy {
            max_iters: 50,
            abs_tol: 1e-10,
            rel_tol: 0.0,
            damping: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdaptivePolicy {
    pub enabled: bool,
    pub shrink: f64,
    pub growth: f64,
    pub target_iters: usize,
    pub dt_min: f64,
}

impl Default for AdaptivePolicy {
    fn default() -> Self {
        AdaptivePolicy {
            enabled: true,
            shrink: 0.5,
            growth: 2.0,
            target_iters: 8,
            dt_min: 1e-9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct SolverPolicy {
    pub newton: NewtonPolicy,
    pub adaptive: AdaptivePolicy,
}

impl SolverPolicy {
    pub fn validate(&self) -> Result<()> {
        let n = &self.newton;
        if !(n.abs_tol > 0.0)
            || !(n.damping > 0.0 && n.damping <= 1.0)
            || n.max_iters == 0
            || n.rel_tol < 0.0
        {
            return Err(Error::config(
                "newton needs abs_tol > 0, damping in (0, 1], max_iters >= 1",
            ));
        }
        let a = &self.adaptive;
        if !(a.shrink > 0.0 && a.shrink < 1.0) || !(a.growth >= 1.0) || !(a.dt_min > 0.0) {
            return Err(Error::config(
                "adaptive needs shrink in (0, 1), growth >= 1, dt_min > 0",
            ));
        }
        Ok(())
    }
}

/// A [`ProblemSpec`] with its grid, operator and initial field built.
#[derive(Debug)]
pub struct Problem {
    pub spec: ProblemSpec,
    pub grid: Grid,
    pub op: Box<dyn EllipticOperator>,
    pub b: Nonlinearity,
    pub u0: Vec<f64>,
}

impl Problem {
    pub fn new(spec: ProblemSpec) -> Result<Self> {
        spec.op.validate()?;
        if !(spec.horizon > 0.0 && spec.dt > 0.0)
            || !(spec.horizon.is_finite() && spec.dt.is_finite())
        {
            return Err(Error::config(format!(
                "need horizon > 0 and dt > 0, got {} and {}",
                spec.horizon, spec.dt
            )));
        }
        if !(spec.g_lo.is_finite() && spec.g_hi.is_finite()) {
            return Err(Error::config("boundary values must be finite"));
        }
        let grid = Grid::new(spec.geometry.clone(), spec.nodes)?;
        let b = spec.nonlinearity();
        let ctx = OperatorContext {
            b: b.clone(),
            psi: spec.psi.clone(),
        };
        let op = spec.op.build(&ctx)?;
        for w in monotonicity_warnings(op.as_ref(), &grid) {
            log::warn!("{w}");
        }
        let u0 = initial_field(&spec, &grid)?;
        let p = Problem {
            spec,
            grid,
            op,
            b,
            u0,
        };
        let report = p.class_p_report()?;
        for w in &report.warnings {
            log::warn!("initial data not in class P: {w}");
        }
        Ok(p)
    }

    pub fn boundary(&self) -> (f64, f64) {
        (self.spec.g_lo, self.spec.g_hi)
    }

    /// Advisory class-P checks of the initial field.
    pub fn class_p_report(&self) -> Result<ClassPReport> {
        class_p_report(self.op.as_ref(), &self.grid, &self.u0, self.boundary())
    }
}

/// Harmonic profile of the trace operator through `(a, 0)` and `(r_hi, g)`.
fn radial_harmonic(rho: f64, a: f64, r_hi: f64, g: f64, n: usize) -> f64 {
    match n {
        1 => g * (rho - a) / (r_hi - a),
        2 => g * (rho / a).ln() / (r_hi / a).ln(),
        _ => {
            let e = 2.0 - n as f64;
            g * (rho.powf(e) - a.powf(e)) / (r_hi.powf(e) - a.powf(e))
        }
    }
}

pub fn initial_field(spec: &ProblemSpec, grid: &Grid) -> Result<Vec<f64>> {
    match &spec.initial {
        InitialData::Constant { value } => Ok(vec![*value; grid.len()]),
        InitialData::Tabulated { values } => {
            if values.len() != grid.len() {
                return Err(Error::config(format!(
                    "tabulated initial data has {} values for {} nodes",
                    values.len(),
                    grid.len()
                )));
            }
            Ok(values.clone())
        }
        &InitialData::ClassP { a, peak } => {
            if !(a > 0.0 && peak.is_finite()) {
                return Err(Error::config(format!("class-p data needs a > 0, got {a}")));
            }
            let cap = |d: f64| peak * (1.0 - (d / a) * (d / a));
            match grid.geometry {
                Geometry::Interval { lo, hi } => {
                    let c = 0.5 * (lo + hi);
                    if a >= 0.5 * (hi - lo) {
                        return Err(Error::config(format!(
                            "class-p radius {a} reaches the boundary"
                        )));
                    }
                    Ok(grid
                        .x
                        .iter()
                        .map(|&x| {
                            let d = x - c;
                            if d.abs() < a {
                                cap(d)
                            } else if d < 0.0 {
                                spec.g_lo * (c - a - x) / (c - a - lo)
                            } else {
                                spec.g_hi * (x - c - a) / (hi - c - a)
                            }
                        })
                        .collect())
                }
                Geometry::RadialAnnulus { r_hi, n_dim, .. }
                | Geometry::RadialBallPunctured { r_hi, n_dim, .. } => {
                    if a >= r_hi || a <= grid.x[0] {
                        return Err(Error::config(format!(
                            "class-p radius {a} must lie inside ({}, {r_hi})",
                            grid.x[0]
                        )));
                    }
                    Ok(grid
                        .x
                        .iter()
                        .map(|&r| {
                            if r < a {
                                cap(r)
                            } else {
                                radial_harmonic(r, a, r_hi, spec.g_hi, n_dim)
                            }
                        })
                        .collect())
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassPReport {
    pub boundary_ok: bool,
    /// Largest `|F(u₀)|` at negative-phase nodes whose stencil stays in the
    /// negative phase.
    pub negative_residual: f64,
    pub interfaces: usize,
    pub warnings: Vec<String>,
}

impl ClassPReport {
    pub fn passed(&self) -> bool {
        self.warnings.is_empty()
    }
}

pub fn class_p_report(
    op: &dyn EllipticOperator,
    grid: &Grid,
    u0: &[f64],
    g: (f64, f64),
) -> Result<ClassPReport> {
    let mut warnings = Vec::new();
    let n = grid.len();
    let outer_ok = u0[n - 1] == g.1 && g.1 < 0.0;
    let inner_ok = grid.reflect_inner() || (u0[0] == g.0 && g.0 < 0.0);
    let boundary_ok = outer_ok && inner_ok;
    if !boundary_ok {
        warnings.push("initial data does not match negative boundary values".to_string());
    }
    let f = apply_operator_1d(op, grid, u0)?;
    let mut residual: f64 = 0.0;
    for i in grid.unknowns() {
        let lo = i.saturating_sub(1);
        if u0[lo..=i + 1].iter().all(|&v| v < 0.0) {
            residual = residual.max(f[i].abs());
        }
    }
    let tol = 1e-6 * (1.0 + u0.iter().fold(0.0f64, |m, v| m.max(v.abs()))) / (grid.h * grid.h);
    if residual > tol {
        warnings.push(format!(
            "elliptic residual {residual:e} on the negative phase"
        ));
    }
    let interfaces = zero_crossings(&grid.x, u0).len();
    let expected = if grid.radial_dim().is_some() { 1 } else { 2 };
    if interfaces != expected {
        warnings.push(format!("{interfaces} interfaces, expected {expected}"));
    }
    Ok(ClassPReport {
        boundary_ok,
        negative_residual: residual,
        interfaces,
        warnings,
    })
}

#[cfg(test)]
pub(crate) fn jump_spec(nodes: usize, n: u32) -> ProblemSpec {
    ProblemSpec {
        geometry: Geometry::Interval { lo: -1.0, hi: 1.0 },
        nodes,
        op: OperatorSpec::trace(1.0, 1),
        b: BSpec::PositivePart,
        bn: Some(BnFamily::new(n).unwrap()),
        psi: None,
        g_lo: -1.0,
        g_hi: -1.0,
        initial: InitialData::ClassP { a: 0.3, peak: 0.5 },
        horizon: 1.0,
        dt: 2.0 / (nodes - 1) as f64,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jump_initial_data() {
        let p = Problem::new(jump_spec(401, 32)).unwrap();
        let u = &p.u0;
        assert_eq!(u[200], 0.5);
        assert_eq!(u[0], -1.0);
        assert_eq!(u[400], -1.0);
        let i = p
            .grid
            .x
            .iter()
            .position(|x| (x - 0.3).abs() < 1e-12)
            .unwrap();
        assert!(u[i].abs() < 1e-12);
        // affine on the negative phase
        let k = p
            .grid
            .x
            .iter()
            .position(|x| (x - 0.65).abs() < 1e-12)
            .unwrap();
        assert!((u[k] + 0.5).abs() < 1e-12);
        let r = p.class_p_report().unwrap();
        assert!(r.passed(), "{r:?}");
        assert_eq!(r.interfaces, 2);
    }

    #[test]
    fn radial_class_p() {
        for n in [1, 2, 3] {
            let mut s = jump_spec(201, 16);
            s.geometry = Geometry::RadialBallPunctured {
                r_eps: None,
                r_hi: 1.0,
                n_dim: n,
            };
            s.op = OperatorSpec::trace(1.0, n);
            let p = Problem::new(s).unwrap();
            let r = p.class_p_report().unwrap();
            assert!(r.passed(), "{n}: {r:?}");
        }
    }

    #[test]
    fn bad_specs() {
        let mut s = jump_spec(101, 8);
        s.initial = InitialData::ClassP { a: 1.5, peak: 0.5 };
        assert!(Problem::new(s).unwrap_err().is_config());
        let mut s = jump_spec(101, 8);
        s.initial = InitialData::Tabulated {
            values: vec![0.0; 3],
        };
        assert!(Problem::new(s).unwrap_err().is_config());
        let mut s = jump_spec(101, 8);
        s.dt = 0.0;
        assert!(Problem::new(s).unwrap_err().is_config());
        let p = SolverPolicy {
            newton: NewtonPolicy {
                damping: 0.0,
                ..Default::default()
            },
            ..Default::default()
        };
        assert!(p.validate().is_err());
    }
}
