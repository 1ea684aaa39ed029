//! One-dimensional computational grids: intervals and radial lines.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Geometry {
    Interval {
        lo: f64,
        hi: f64,
    },
    RadialAnnulus {
        r_lo: f64,
        r_hi: f64,
        n_dim: usize,
    },
    /// Ball with the origin removed; the inner node carries a reflection
    /// (no-flux) condition. `r_eps` defaults to two cells.
    RadialBallPunctured {
        #[serde(default)]
        r_eps: Option<f64>,
        r_hi: f64,
        n_dim: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub geometry: Geometry,
    pub x: Vec<f64>,
    pub h: f64,
}

impl Grid {
    pub fn new(geometry: Geometry, nodes: usize) -> Result<Self> {
        if nodes < 3 {
            return Err(Error::config(format!(
                "grid needs at least 3 nodes, got {nodes}"
            )));
        }
        let (lo, hi) = match &geometry {
            Geometry::Interval { lo, hi } => (*lo, *hi),
            Geometry::RadialAnnulus { r_lo, r_hi, n_dim } => {
                if *n_dim == 0 || !(*r_lo > 0.0) {
                    return Err(Error::config("annulus needs r_lo > 0 and n_dim >= 1"));
                }
                (*r_lo, *r_hi)
            }
            Geometry::RadialBallPunctured { r_eps, r_hi, n_dim } => {
                if *n_dim == 0 {
                    return Err(Error::config("punctured ball needs n_dim >= 1"));
                }
                let eps = r_eps.unwrap_or(2.0 * r_hi / (nodes as f64 + 1.0));
                if !(eps > 0.0) {
                    return Err(Error::config("punctured ball needs r_eps > 0"));
                }
                (eps, *r_hi)
            }
        };
        if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::config(format!(
                "empty or infinite domain [{lo}, {hi}]"
            )));
        }
        let h = (hi - lo) / (nodes - 1) as f64;
        let mut x: Vec<f64> = (0..nodes).map(|i| lo + i as f64 * h).collect();
        x[nodes - 1] = hi;
        Ok(Grid { geometry, x, h })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Space dimension of a radial grid, `None` for intervals.
    pub fn radial_dim(&self) -> Option<usize> {
        match self.geometry {
            Geometry::Interval { .. } => None,
            Geometry::RadialAnnulus { n_dim, .. } | Geometry::RadialBallPunctured { n_dim, .. } => {
                Some(n_dim)
            }
        }
    }

    pub fn reflect_inner(&self) -> bool {
        matches!(self.geometry, Geometry::RadialBallPunctured { .. })
    }

    /// Index range of nodes solved for (the rest carry Dirichlet data).
    pub fn unknowns(&self) -> std::ops::Range<usize> {
        let first = if self.reflect_inner() { 0 } else { 1 };
        first..self.len() - 1
    }

    /// Weight `ρ^{n-1}` of the radial measure (1 on intervals).
    pub fn measure(&self, rho: f64) -> f64 {
        match self.radial_dim() {
            Some(n) => rho.powi(n as i32 - 1),
            None => 1.0,
        }
    }

    pub fn coordinate_label(&self) -> &'static str {
        match self.geometry {
            Geometry::Interval { .. } => "x",
            _ => "rho",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_nodes() {
        let g = Grid::new(Geometry::Interval { lo: -1.0, hi: 1.0 }, 401).unwrap();
        assert_eq!(g.len(), 401);
        assert!((g.h - 0.005).abs() < 1e-15);
        assert_eq!(g.x[200], 0.0);
        assert_eq!(g.unknowns(), 1..400);
        assert!(Grid::new(Geometry::Interval { lo: 1.0, hi: 1.0 }, 5).is_err());
        assert!(Grid::new(Geometry::Interval { lo: 0.0, hi: 1.0 }, 2).is_err());
    }

    #[test]
    fn punctured_ball_default_eps() {
        let g = Grid::new(
            Geometry::RadialBallPunctured {
                r_eps: None,
                r_hi: 1.0,
                n_dim: 2,
            },
            99,
        )
        .unwrap();
        assert!((g.x[0] - 2.0 * g.h).abs() < 1e-14);
        assert_eq!(g.unknowns(), 0..98);
        assert_eq!(g.measure(2.0), 2.0);
    }
}
