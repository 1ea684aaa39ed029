//! Independent reference solutions used by the acceptance suite.

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PucciSide {
    Plus,
    Minus,
}

/// Radial Pucci problem `M±(D²u) = 0` on the annulus `r_lo < ρ < r_hi` in
/// `R^n` with Dirichlet data at both radii.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RadialPucciProblem {
    pub side: PucciSide,
    pub lambda: f64,
    pub big_lambda: f64,
    pub n_dim: usize,
    pub r_lo: f64,
    pub r_hi: f64,
    pub g_lo: f64,
    pub g_hi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShootingSolution {
    /// `u'(r_lo)` found by the secant iteration.
    pub slope: f64,
    pub rho: Vec<f64>,
    pub u: Vec<f64>,
    pub du: Vec<f64>,
    /// `|u(r_hi) - g_hi|` at the accepted slope.
    pub mismatch: f64,
}

impl RadialPucciProblem {
    /// `u''` solving `M±(diag(u'/ρ, …, u'/ρ, u'')) = 0`.
    fn second_derivative(&self, rho: f64, du: f64) -> f64 {
        let (up, down) = match self.side {
            PucciSide::Plus => (self.big_lambda, self.lambda),
            PucciSide::Minus => (self.lambda, self.big_lambda),
        };
        let coef = |e: f64| if e > 0.0 { up } else { down };
        let q = du / rho;
        let a = (self.n_dim as f64 - 1.0) * coef(q) * q;
        -a / coef(-a)
    }

    fn integrate(&self, slope: f64, steps: usize) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let h = (self.r_hi - self.r_lo) / steps as f64;
        let f = |rho: f64, y: [f64; 2]| [y[1], self.second_derivative(rho, y[1])];
        let mut y = [self.g_lo, slope];
        let mut rho = Vec::with_capacity(steps + 1);
        let mut u = Vec::with_capacity(steps + 1);
        let mut du = Vec::with_capacity(steps + 1);
        rho.push(self.r_lo);
        u.push(y[0]);
        du.push(y[1]);
        for k in 0..steps {
            let r = self.r_lo + k as f64 * h;
            let k1 = f(r, y);
            let k2 = f(
                r + h / 2.0,
                [y[0] + h / 2.0 * k1[0], y[1] + h / 2.0 * k1[1]],
            );
            let k3 = f(
                r + h / 2.0,
                [y[0] + h / 2.0 * k2[0], y[1] + h / 2.0 * k2[1]],
            );
            let k4 = f(r + h, [y[0] + h * k3[0], y[1] + h * k3[1]]);
            for i in 0..2 {
                y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            rho.push(if k + 1 == steps {
                self.r_hi
            } else {
                self.r_lo + (k + 1) as f64 * h
            });
            u.push(y[0]);
            du.push(y[1]);
        }
        (rho, u, du)
    }

    /// RK4 shooting on `u'(r_lo)` with a secant iteration on the outer value.
    pub fn shoot(&self, steps: usize) -> Result<ShootingSolution> {
        if !(self.r_lo > 0.0 && self.r_hi > self.r_lo) || self.n_dim == 0 || steps == 0 {
            return Err(Error::domain(
                "shooting needs 0 < r_lo < r_hi, n_dim >= 1, steps >= 1",
            ));
        }
        if !(self.lambda > 0.0 && self.big_lambda >= self.lambda) {
            return Err(Error::domain("shooting needs 0 < lambda <= Lambda"));
        }
        let miss = |s: f64| *self.integrate(s, steps).1.last().expect("nonempty") - self.g_hi;
        let mut s0 = (self.g_hi - self.g_lo) / (self.r_hi - self.r_lo);
        let mut s1 = if s0 == 0.0 { 1.0 } else { 2.0 * s0 };
        let (mut f0, mut f1) = (miss(s0), miss(s1));
        for _ in 0..100 {
            if f1 == 0.0 || f1 == f0 {
                break;
            }
            let s2 = s1 - f1 * (s1 - s0) / (f1 - f0);
            (s0, f0) = (s1, f1);
            s1 = s2;
            f1 = miss(s1);
            if (s1 - s0).abs() <= 1e-15 * s1.abs().max(1.0) {
                break;
            }
        }
        let (rho, u, du) = self.integrate(s1, steps);
        let mismatch = (u[steps] - self.g_hi).abs();
        if !(mismatch <= 1e-12 * (1.0 + self.g_hi.abs())) {
            return Err(Error::domain(format!(
                "shooting did not converge (mismatch {mismatch:e})"
            )));
        }
        Ok(ShootingSolution {
            slope: s1,
            rho,
            u,
            du,
            mismatch,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trace_case_is_logarithmic() {
        // λ = Λ, n = 2: u = -log ρ / log 2
        let p = RadialPucciProblem {
            side: PucciSide::Minus,
            lambda: 1.0,
            big_lambda: 1.0,
            n_dim: 2,
            r_lo: 1.0,
            r_hi: 2.0,
            g_lo: 0.0,
            g_hi: -1.0,
        };
        let s = p.shoot(1000).unwrap();
        for (r, u) in s.rho.iter().zip(&s.u) {
            assert!((u + r.ln() / 2f64.ln()).abs() < 1e-12);
        }
        assert!((s.slope + 1.0 / 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn pucci_minus_decreasing_profile() {
        // u' < 0 so the angular eigenvalue is negative (weight Λ) and u'' > 0
        // (weight λ): λu'' + Λ(n-1)u'/ρ = 0, u' ∝ ρ^{-(n-1)Λ/λ}.
        let p = RadialPucciProblem {
            side: PucciSide::Minus,
            lambda: 1.0,
            big_lambda: 2.0,
            n_dim: 2,
            r_lo: 1.0,
            r_hi: 2.0,
            g_lo: 0.0,
            g_hi: -1.0,
        };
        let s = p.shoot(2000).unwrap();
        // u = c (ρ^{-1} - 1) with c = 2 from u(2) = -1
        for (r, u) in s.rho.iter().zip(&s.u) {
            assert!((u - 2.0 * (1.0 / r - 1.0)).abs() < 1e-10, "{r}: {u}");
        }
        let bad = RadialPucciProblem { r_hi: 0.5, ..p };
        assert!(bad.shoot(10).is_err());
    }
}
