//! The regularization body `Ξ_r = D_r + E_r` (a space disk plus the flattened
//! body `|x|³ + |t|² < r²`) and the Harnack-chain recurrence built on its slices.

use crate::error::{Error, Result};

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct XiShape {
    r: f64,
}

impl XiShape {
    pub fn new(r: f64) -> Result<Self> {
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::domain(format!("radius must be positive, got {r}")));
        }
        Ok(XiShape { r })
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    /// Membership in the open body centered at the origin, by the radial test
    /// `max(|dx| - r, 0)³ + dt² < r²`.
    pub fn contains(&self, dx: &[f64], dt: f64) -> bool {
        self.contains_norm(norm(dx), dt)
    }

    pub fn contains_norm(&self, dx_norm: f64, dt: f64) -> bool {
        self.gauge(dx_norm, dt) < self.r * self.r
    }

    /// Membership in the closed body.
    pub fn contains_closed(&self, dx: &[f64], dt: f64) -> bool {
        self.contains_closed_norm(norm(dx), dt)
    }

    pub fn contains_closed_norm(&self, dx_norm: f64, dt: f64) -> bool {
        self.gauge(dx_norm, dt) <= self.r * self.r
    }

    fn gauge(&self, dx_norm: f64, dt: f64) -> f64 {
        let e = (dx_norm - self.r).max(0.0);
        e * e * e + dt * dt
    }

    /// Radius of the timeslice at `t` (open body), `None` when `|t| >= r`.
    pub fn slice_radius(&self, t: f64) -> Option<f64> {
        let w = self.r * self.r - t * t;
        (w > 0.0).then(|| self.r + w.cbrt())
    }

    /// Bounding cylinder `B_{r + r^{2/3}} × [-r, r]`.
    pub fn bounding_radius(&self) -> f64 {
        self.r + self.r.powf(2.0 / 3.0)
    }
}

/// Distance from the observation point to the lateral boundary slice at time
/// `t ∈ (-r, 0)`: `s + cbrt(r² - (t + r)²)`.
pub fn xi_lateral_distance(r: f64, s: f64, t: f64) -> Result<f64> {
    if !(r > 0.0) || !(s > 0.0 && s <= r) {
        return Err(Error::domain(format!("need 0 < s <= r, got r={r}, s={s}")));
    }
    if !(t > -r && t < 0.0) {
        return Err(Error::domain(format!("t = {t} outside (-r, 0)")));
    }
    Ok(s + (r * r - (t + r) * (t + r)).cbrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct HarnackChain {
    pub r: f64,
    pub s: f64,
    pub a: Vec<f64>,
    pub h: Vec<f64>,
    pub k: usize,
}

const MAX_CHAIN: usize = 10_000;

pub fn harnack_chain(r: f64, s: f64) -> Result<HarnackChain> {
    if !(r > 0.0 && r.is_finite()) || !(s > 0.0 && s <= r) {
        return Err(Error::domain(format!("need 0 < s <= r, got r={r}, s={s}")));
    }
    let a0 = s.min(r / 16.0);
    let mut a = vec![a0];
    let mut h = vec![0.0];
    if s >= r / 16.0 {
        return Ok(HarnackChain { r, s, a, h, k: 0 });
    }
    let target = r / 2.0 + s;
    while *a.last().unwrap() < target {
        if a.len() > MAX_CHAIN {
            return Err(Error::domain("harnack chain did not terminate"));
        }
        let aj = *a.last().unwrap();
        let hj = *h.last().unwrap();
        a.push((r * aj * aj + (aj - s).powi(3)).cbrt() + s);
        h.push(hj - aj * aj);
    }
    let k = a.len() - 1;
    Ok(HarnackChain { r, s, a, h, k })
}

/// Closed-form lower bound `a_j >= r (s/r)^{(2/3)^j}`.
pub fn chain_lower_bound(r: f64, s: f64, j: usize) -> f64 {
    r * (s / r).powf((2.0f64 / 3.0).powi(j as i32))
}

/// Upper bound on the chain length, `log(log(s/r)/log(1/2))/log(3/2) + 1`.
pub fn chain_length_bound(r: f64, s: f64) -> f64 {
    ((s / r).ln() / 0.5f64.ln()).ln() / 1.5f64.ln() + 1.0
}

/// `f(s) = α (log(s/r)/log(1/2))^{log α / log(3/2)} vmin`. Returns `+∞` at `s = r`,
/// where the base vanishes and the exponent is negative; callers clamp.
pub fn harnack_lower_bound(alpha: f64, s: f64, r: f64, vmin: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::domain(format!("alpha = {alpha} outside (0, 1)")));
    }
    if !(r > 0.0) || !(s > 0.0 && s <= r) {
        return Err(Error::domain(format!("need 0 < s <= r, got r={r}, s={s}")));
    }
    if !(vmin > 0.0) {
        return Err(Error::domain(format!("vmin = {vmin} must be positive")));
    }
    let base = (s / r).ln() / 0.5f64.ln();
    Ok(alpha * base.powf(alpha.ln() / 1.5f64.ln()) * vmin)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn membership_examples() {
        let xi = XiShape::new(1.0).unwrap();
        assert!(xi.contains(&[0.0], 0.0));
        assert!(xi.contains(&[1.5], 0.0));
        assert!(xi.contains(&[0.9, 1.2], 0.0));
        assert!(!xi.contains(&[0.0], 1.0));
        assert!(xi.contains_closed(&[0.0], 1.0));
        assert!(!xi.contains(&[2.0 + 1e-9], 0.0));
        assert!(XiShape::new(0.0).is_err());
    }

    #[test]
    fn slices() {
        let xi = XiShape::new(0.5).unwrap();
        assert_eq!(xi.slice_radius(0.5), None);
        let r0 = xi.slice_radius(0.0).unwrap();
        assert!((r0 - xi.bounding_radius()).abs() < 1e-15);
        let mut prev = f64::INFINITY;
        for k in 0..100 {
            let t = 0.5 * k as f64 / 100.0;
            let rad = xi.slice_radius(t).unwrap();
            assert!(rad <= prev && rad >= 0.5);
            prev = rad;
        }
    }

    #[test]
    fn lateral_distance() {
        assert!((xi_lateral_distance(1.0, 0.1, -1.0 + 1e-12).unwrap() - 1.1).abs() < 1e-6);
        assert!((xi_lateral_distance(1.0, 0.1, -1e-15).unwrap() - 0.1).abs() < 1e-4);
        let d = xi_lateral_distance(1.0, 0.25, -0.5).unwrap();
        assert!((d - (0.25 + 0.75f64.cbrt())).abs() < 1e-15);
        assert!((d - 1.158_560_1).abs() < 1e-6);
        assert!(xi_lateral_distance(1.0, 0.25, 0.0).is_err());
        assert!(xi_lateral_distance(1.0, 0.25, -1.0).is_err());
    }

    #[test]
    fn chain_examples() {
        let c = harnack_chain(1.0, 1.0).unwrap();
        assert_eq!(c.k, 0);
        let c = harnack_chain(1.0, 1.0 / 16.0).unwrap();
        assert!(c.k <= 4);
        let c = harnack_chain(1.0, 1.0 / 256.0).unwrap();
        assert!(c.k <= 6);
        assert_eq!(c.k, 5);
        assert!(*c.a.last().unwrap() >= 0.5 + 1.0 / 256.0);
        assert_eq!(c.h.len(), c.a.len());
        assert!(harnack_chain(1.0, 0.0).is_err());
        assert!(harnack_chain(1.0, 1.5).is_err());
    }

    #[test]
    fn chain_lengths_match_reference() {
        for (ratio, k) in [
            (1.0 / 17.0, 3),
            (1.0 / 32.0, 4),
            (1.0 / 256.0, 5),
            (1e-4, 6),
        ] {
            for r in [1.0, 0.5, 0.1, 0.01, 2.0] {
                let c = harnack_chain(r, ratio * r).unwrap();
                assert_eq!(c.k, k, "r={r} ratio={ratio}");
                assert!((c.k as f64) <= chain_length_bound(r, ratio * r));
            }
        }
    }

    #[test]
    fn lower_bound_function() {
        assert_eq!(
            harnack_lower_bound(0.5, 1.0, 1.0, 1.0).unwrap(),
            f64::INFINITY
        );
        assert!((harnack_lower_bound(0.5, 0.5, 1.0, 1.0).unwrap() - 0.5).abs() < 1e-15);
        let mut prev = 0.0;
        for k in 4..=20 {
            let s = 0.5f64.powi(k);
            let q = harnack_lower_bound(0.5, s, 1.0, 1.0).unwrap() / s;
            assert!(q > prev);
            prev = q;
        }
        assert!(harnack_lower_bound(1.0, 0.5, 1.0, 1.0).is_err());
        assert!(harnack_lower_bound(0.5, 0.5, 1.0, 0.0).is_err());
    }
}
