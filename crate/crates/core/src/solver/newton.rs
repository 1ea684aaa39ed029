//! Damped Newton on the tridiagonal nodal systems of the implicit step and
//! of the stationary problem.

use serde::Serialize;

use super::{NewtonPolicy, Problem, SolverPolicy};
use crate::error::{Error, Result};
use crate::operators::discrete::Stencil;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepOutcome {
    pub u: Vec<f64>,
    pub iters: usize,
    pub residual: f64,
    pub history: Vec<f64>,
}

/// Solves the tridiagonal system `lower[k] x[k-1] + diag[k] x[k] + upper[k] x[k+1] = rhs[k]`
/// in place of `rhs`.
pub fn thomas_solve(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &mut [f64]) -> Result<()> {
    let n = diag.len();
    if lower.len() != n || upper.len() != n || rhs.len() != n {
        return Err(Error::Shape("tridiagonal bands differ in length".into()));
    }
    let mut c = vec![0.0; n];
    let mut beta = diag[0];
    for k in 0..n {
        if k > 0 {
            beta = diag[k] - lower[k] * c[k - 1];
        }
        if beta == 0.0 || !beta.is_finite() {
            return Err(Error::domain(format!(
                "singular tridiagonal pivot at row {k}"
            )));
        }
        c[k] = upper[k] / beta;
        let prev = if k > 0 { rhs[k - 1] } else { 0.0 };
        rhs[k] = (rhs[k] - lower[k] * prev) / beta;
    }
    for k in (0..n.saturating_sub(1)).rev() {
        rhs[k] -= c[k] * rhs[k + 1];
    }
    Ok(())
}

/// Which nodal equation is solved.
#[derive(Clone, Copy)]
enum Mode<'a> {
    /// `B(u) - B_prev - dt F(u) = 0`.
    Implicit { b_prev: &'a [f64], dt: f64 },
    /// `-F(u) = 0`.
    Stationary,
}

struct System {
    lower: Vec<f64>,
    diag: Vec<f64>,
    upper: Vec<f64>,
    residual: Vec<f64>,
}

impl System {
    fn new(m: usize) -> Self {
        System {
            lower: vec![0.0; m],
            diag: vec![0.0; m],
            upper: vec![0.0; m],
            residual: vec![0.0; m],
        }
    }
}

/// Fills residual and Jacobian at `u`; returns `(‖R‖∞, roundoff floor)`.
fn assemble(p: &Problem, st: &mut Stencil, mode: Mode, u: &[f64], sys: &mut System) -> (f64, f64) {
    let range = p.grid.unknowns();
    let first = range.start;
    let last = range.end - 1;
    let mut norm: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for i in range {
        let k = i - first;
        let (um, uc, up) = st.neighbors(u, i);
        let lin = st.linearize(i, um, uc, up);
        let size = (lin.d_left * um).abs()
            + (lin.d_center * uc).abs()
            + (lin.d_right * up).abs()
            + lin.value.abs();
        let (r, w, bd, s) = match mode {
            Mode::Implicit { b_prev, dt } => {
                let bu = p.b.eval(uc);
                (
                    bu - b_prev[i] - dt * lin.value,
                    -dt,
                    p.b.derivative(uc),
                    bu.abs() + b_prev[i].abs() + dt * size,
                )
            }
            Mode::Stationary => (-lin.value, -1.0, 0.0, size),
        };
        sys.residual[k] = r;
        sys.diag[k] = bd + w * lin.d_center;
        sys.lower[k] = if i > first { w * lin.d_left } else { 0.0 };
        sys.upper[k] = if i < last { w * lin.d_right } else { 0.0 };
        if i == 0 {
            // reflection: the ghost value is u[1]
            sys.upper[k] += w * lin.d_left;
        }
        norm = norm.max(r.abs());
        scale = scale.max(s);
    }
    (norm, 64.0 * f64::EPSILON * scale)
}

fn newton(p: &Problem, mode: Mode, mut u: Vec<f64>, policy: &NewtonPolicy) -> Result<StepOutcome> {
    let mut st = Stencil::new(p.op.as_ref(), &p.grid)?;
    let range = p.grid.unknowns();
    let first = range.start;
    let m = range.len();
    let mut sys = System::new(m);
    let mut trial_sys = System::new(m);
    let (mut norm, mut floor) = assemble(p, &mut st, mode, &u, &mut sys);
    let target = policy.abs_tol + policy.rel_tol * norm;
    let mut history = vec![norm];
    let mut trial = u.clone();
    for iter in 0..=policy.max_iters {
        if !norm.is_finite() {
            break;
        }
        if norm <= target || norm <= floor {
            return Ok(StepOutcome {
                u,
                iters: iter,
                residual: norm,
                history,
            });
        }
        if iter == policy.max_iters {
            break;
        }
        let mut delta: Vec<f64> = sys.residual.iter().map(|r| -r).collect();
        if thomas_solve(&sys.lower, &sys.diag, &sys.upper, &mut delta).is_err() {
            break;
        }
        let mut lambda = policy.damping;
        loop {
            trial.copy_from_slice(&u);
            for (k, d) in delta.iter().enumerate() {
                trial[first + k] += lambda * d;
            }
            let (tn, tf) = assemble(p, &mut st, mode, &trial, &mut trial_sys);
            if tn <= (1.0 - 1e-4 * lambda) * norm || lambda < 1.0 / 1024.0 || tn <= tf {
                std::mem::swap(&mut u, &mut trial);
                std::mem::swap(&mut sys, &mut trial_sys);
                norm = tn;
                floor = tf;
                break;
            }
            lambda *= 0.5;
        }
        history.push(norm);
    }
    Err(Error::Newton {
        iters: history.len() - 1,
        residual: norm,
        history,
    })
}

fn with_boundary(p: &Problem, mut u: Vec<f64>, g: (f64, f64)) -> Vec<f64> {
    let n = u.len();
    if !p.grid.reflect_inner() {
        u[0] = g.0;
    }
    u[n - 1] = g.1;
    u
}

/// One implicit Euler step of length `dt` from `u_prev`.
pub fn step_parabolic(
    p: &Problem,
    u_prev: &[f64],
    dt: f64,
    policy: &SolverPolicy,
) -> Result<StepOutcome> {
    if u_prev.len() != p.grid.len() {
        return Err(Error::Shape(format!(
            "field has {} nodes, grid {}",
            u_prev.len(),
            p.grid.len()
        )));
    }
    if !(dt > 0.0) {
        return Err(Error::domain(format!(
            "time step must be positive, got {dt}"
        )));
    }
    let b_prev: Vec<f64> = u_prev.iter().map(|&v| p.b.eval(v)).collect();
    let guess = with_boundary(p, u_prev.to_vec(), p.boundary());
    newton(
        p,
        Mode::Implicit {
            b_prev: &b_prev,
            dt,
        },
        guess,
        &policy.newton,
    )
}

/// Stationary solution with boundary values `g = (inner, outer)`.
pub fn solve_elliptic(p: &Problem, g: (f64, f64), policy: &SolverPolicy) -> Result<StepOutcome> {
    let x = &p.grid.x;
    let (lo, hi) = (x[0], x[x.len() - 1]);
    let guess: Vec<f64> = if p.grid.reflect_inner() {
        vec![g.1; x.len()]
    } else {
        x.iter()
            .map(|&v| g.0 + (g.1 - g.0) * (v - lo) / (hi - lo))
            .collect()
    };
    newton(
        p,
        Mode::Stationary,
        with_boundary(p, guess, g),
        &policy.newton,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Geometry;
    use crate::nonlinearity::BnFamily;
    use crate::operators::OperatorSpec;
    use crate::solver::{jump_spec, InitialData};

    #[test]
    fn thomas_matches_dense() {
        let lower = [0.0, -1.0, -1.0, -1.0];
        let diag = [4.0, 4.0, 4.0, 4.0];
        let upper = [-1.0, -1.0, -1.0, 0.0];
        let x = [1.0, -2.0, 0.5, 3.0];
        let mut rhs: Vec<f64> = (0..4)
            .map(|k| {
                diag[k] * x[k]
                    + if k > 0 { lower[k] * x[k - 1] } else { 0.0 }
                    + if k < 3 { upper[k] * x[k + 1] } else { 0.0 }
            })
            .collect();
        thomas_solve(&lower, &diag, &upper, &mut rhs).unwrap();
        for k in 0..4 {
            assert!((rhs[k] - x[k]).abs() < 1e-14);
        }
        let mut r = [1.0];
        assert!(thomas_solve(&[0.0], &[0.0], &[0.0], &mut r).is_err());
    }

    #[test]
    fn elliptic_trivial_cases() {
        let policy = SolverPolicy::default();
        let p = Problem::new(jump_spec(101, 8)).unwrap();
        let out = solve_elliptic(&p, (-1.0, -1.0), &policy).unwrap();
        assert!(out.u.iter().all(|&v| v == -1.0));
        let mut s = jump_spec(11, 8);
        s.geometry = Geometry::Interval { lo: 0.0, hi: 1.0 };
        s.initial = InitialData::Constant { value: -1.0 };
        let p = Problem::new(s).unwrap();
        let out = solve_elliptic(&p, (0.0, -1.0), &policy).unwrap();
        for (u, x) in out.u.iter().zip(&p.grid.x) {
            assert!((u + x).abs() < 1e-14);
        }
    }

    #[test]
    fn constant_state_is_fixed() {
        let mut s = jump_spec(101, 32);
        s.initial = InitialData::Constant { value: -1.0 };
        let p = Problem::new(s).unwrap();
        let out = step_parabolic(&p, &p.u0, 0.02, &SolverPolicy::default()).unwrap();
        assert!(out.u.iter().all(|&v| v == -1.0));
        assert_eq!(out.iters, 0);
    }

    #[test]
    fn positive_region_is_a_heat_step() {
        let mut s = jump_spec(201, 64);
        s.g_lo = 0.5;
        s.g_hi = 0.5;
        let x: Vec<f64> = (0..201).map(|i| -1.0 + i as f64 * 0.01).collect();
        s.initial = InitialData::Tabulated {
            values: x.iter().map(|x| 0.5 + (1.0 - x * x)).collect(),
        };
        let p = Problem::new(s).unwrap();
        let dt = 0.01;
        let out = step_parabolic(&p, &p.u0, dt, &SolverPolicy::default()).unwrap();
        // constant-coefficient implicit heat step: (I - dt Δ_h) v = u0, with v shifted by b_n's offset
        let m = 199;
        let h2 = 1e-4;
        let lower = vec![-dt / h2; m];
        let upper = vec![-dt / h2; m];
        let diag = vec![1.0 + 2.0 * dt / h2; m];
        let mut rhs: Vec<f64> = (1..200).map(|i| p.u0[i]).collect();
        rhs[0] += dt / h2 * 0.5;
        rhs[m - 1] += dt / h2 * 0.5;
        thomas_solve(&lower, &diag, &upper, &mut rhs).unwrap();
        for k in 0..m {
            assert!((out.u[k + 1] - rhs[k]).abs() < 1e-3);
        }
    }

    #[test]
    fn newton_budget_on_jump_data() {
        let policy = SolverPolicy::default();
        for n in [4, 16, 32, 64] {
            let p = Problem::new(jump_spec(401, n)).unwrap();
            let mut u = p.u0.clone();
            for _ in 0..40 {
                let out = step_parabolic(&p, &u, p.spec.dt, &policy).unwrap();
                assert!(out.iters <= 10, "n = {n}: {} iterations", out.iters);
                u = out.u;
            }
        }
    }

    #[test]
    fn radial_pucci_against_closed_form() {
        // λ = 1, Λ = 2, n = 2 on (1, 2) with u(1) = 0, u(2) = -1: u = 2/ρ - 2
        let mut s = jump_spec(401, 8);
        s.geometry = Geometry::RadialAnnulus {
            r_lo: 1.0,
            r_hi: 2.0,
            n_dim: 2,
        };
        s.op = OperatorSpec::new("pucci-minus", 1.0, 2.0, 0.0, 0.0, 2);
        s.initial = InitialData::Constant { value: -1.0 };
        let p = Problem::new(s).unwrap();
        let out = solve_elliptic(&p, (0.0, -1.0), &SolverPolicy::default()).unwrap();
        for (u, r) in out.u.iter().zip(&p.grid.x) {
            assert!((u - (2.0 / r - 2.0)).abs() < 1e-5);
        }
        // stationarity under the evolution
        let mut q = jump_spec(401, 8);
        q.geometry = p.spec.geometry.clone();
        q.op = p.spec.op.clone();
        q.g_lo = 0.0;
        q.initial = InitialData::Tabulated {
            values: out.u.clone(),
        };
        q.bn = Some(BnFamily::new(16).unwrap());
        let pq = Problem::new(q).unwrap();
        for dt in [1e-3, 0.1, 10.0] {
            let next = step_parabolic(&pq, &out.u, dt, &SolverPolicy::default()).unwrap();
            let d = next
                .u
                .iter()
                .zip(&out.u)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(d <= 1e-8, "{dt}: {d}");
        }
    }
}
