//! Parameter studies: convergence in `n` and bracketing by perturbed data.

use rayon::prelude::*;
use serde::Serialize;

use super::run::{run, SpaceTimeField, ORDER_TOL};
use super::{InitialData, Problem, ProblemSpec, SolverPolicy};
use crate::error::{Error, Result};
use crate::nonlinearity::BnFamily;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyRun {
    pub n: u32,
    pub extinction_time: Option<f64>,
    pub extinction_estimate: Option<f64>,
    pub newton_iters_max: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub n_list: Vec<u32>,
    pub probe_times: Vec<f64>,
    pub runs: Vec<StudyRun>,
    /// `distances[k][j] = sup |u_{n_{k+1}} - u_{n_k}|` at probe time `j`.
    pub distances: Vec<Vec<f64>>,
    /// `|T_{k+1} - T_k|` of the interpolated extinction times.
    pub extinction_gaps: Vec<f64>,
    pub distances_decreasing: bool,
    pub extinction_cauchy: bool,
}

fn sup_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

pub fn singular_limit_study(
    spec: &ProblemSpec,
    n_list: &[u32],
    probe_times: &[f64],
    policy: &SolverPolicy,
) -> Result<ConvergenceReport> {
    if n_list.len() < 3 || n_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::config(
            "study needs at least three strictly increasing values of n",
        ));
    }
    let fields: Vec<SpaceTimeField> = n_list
        .par_iter()
        .map(|&n| {
            let mut s = spec.clone();
            s.bn = Some(BnFamily::new(n)?);
            run(&Problem::new(s)?, policy)
        })
        .collect::<Result<_>>()?;
    let mut probes = Vec::with_capacity(fields.len());
    for f in &fields {
        probes.push(
            probe_times
                .iter()
                .map(|&t| f.at_time(t))
                .collect::<Result<Vec<_>>>()?,
        );
    }
    let distances: Vec<Vec<f64>> = probes
        .windows(2)
        .map(|w| {
            w[0].iter()
                .zip(&w[1])
                .map(|(a, b)| sup_distance(a, b))
                .collect()
        })
        .collect();
    let distances_decreasing = (0..probe_times.len()).all(|j| {
        let col: Vec<f64> = distances.iter().map(|d| d[j]).collect();
        strictly_decreasing(&col)
    });
    let est: Vec<Option<f64>> = fields.iter().map(|f| f.extinction_estimate).collect();
    let extinction_gaps: Vec<f64> = est
        .windows(2)
        .map(|w| match (w[0], w[1]) {
            (Some(a), Some(b)) => (b - a).abs(),
            _ => f64::INFINITY,
        })
        .collect();
    let extinction_cauchy =
        est.iter().all(Option::is_some) && strictly_decreasing(&extinction_gaps);
    Ok(ConvergenceReport {
        n_list: n_list.to_vec(),
        probe_times: probe_times.to_vec(),
        runs: n_list
            .iter()
            .zip(&fields)
            .map(|(&n, f)| StudyRun {
                n,
                extinction_time: f.extinction_time,
                extinction_estimate: f.extinction_estimate,
                newton_iters_max: f.stats.newton_iters_max,
            })
            .collect(),
        distances,
        extinction_gaps,
        distances_decreasing,
        extinction_cauchy,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BracketLevel {
    pub eps: f64,
    /// `sup (u⁺ - u⁻)` at each probe time.
    pub gaps: Vec<f64>,
    /// Smallest of `u - u⁻` and `u⁺ - u` over all levels and nodes.
    pub sandwich_margin: f64,
    pub upper_extinction: Option<f64>,
    pub lower_extinction: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BracketReport {
    pub probe_times: Vec<f64>,
    pub base_extinction: Option<f64>,
    pub levels: Vec<BracketLevel>,
    /// Smallest slack of `u^{-ε} <= u^{-ε'}` and `u^{+ε'} <= u^{+ε}` for `ε > ε'`.
    pub nested_margin: f64,
    pub nested: bool,
    pub gaps_shrinking: bool,
    /// `|T⁺ - T⁻|` at the smallest ε, against `2 (dt + h)`.
    pub extinction_spread: Option<f64>,
    pub extinction_tolerance: f64,
}

/// Smallest `upper - lower` over every level and node.
fn field_margin(lower: &SpaceTimeField, upper: &SpaceTimeField) -> f64 {
    lower
        .values
        .iter()
        .zip(&upper.values)
        .flat_map(|(l, u)| l.iter().zip(u).map(|(a, b)| b - a))
        .fold(f64::INFINITY, f64::min)
}

fn perturbed(spec: &ProblemSpec, eps: f64) -> Result<ProblemSpec> {
    let InitialData::ClassP { a, peak } = spec.initial else {
        return Err(Error::config("bracketing needs class-p initial data"));
    };
    if !(a + eps > 0.0 && peak + eps > 0.0) {
        return Err(Error::infeasible(format!(
            "perturbation {eps} removes the positive phase"
        )));
    }
    let mut s = spec.clone();
    s.initial = InitialData::ClassP {
        a: a + eps,
        peak: peak + eps,
    };
    Ok(s)
}

fn run_spec(s: ProblemSpec, policy: &SolverPolicy) -> Result<SpaceTimeField> {
    let p = Problem::new(s).map_err(|e| match e {
        Error::Config(m) => Error::infeasible(m),
        other => other,
    })?;
    run(&p, policy)
}

pub fn bracket_maximal_minimal(
    spec: &ProblemSpec,
    eps_list: &[f64],
    probe_times: &[f64],
    policy: &SolverPolicy,
) -> Result<BracketReport> {
    if eps_list.is_empty()
        || eps_list.iter().any(|&e| !(e > 0.0))
        || eps_list.windows(2).any(|w| w[1] >= w[0])
    {
        return Err(Error::config(
            "eps_list must be positive and strictly decreasing",
        ));
    }
    let mut specs = vec![spec.clone()];
    for &e in eps_list {
        specs.push(perturbed(spec, e)?);
        specs.push(perturbed(spec, -e)?);
    }
    let fields: Vec<SpaceTimeField> = specs
        .into_par_iter()
        .map(|s| run_spec(s, policy))
        .collect::<Result<_>>()?;
    let base = &fields[0];
    let mut levels = Vec::new();
    for (k, &eps) in eps_list.iter().enumerate() {
        let up = &fields[1 + 2 * k];
        let lo = &fields[2 + 2 * k];
        let mut gaps = Vec::new();
        for &t in probe_times {
            gaps.push(sup_signed(&lo.at_time(t)?, &up.at_time(t)?));
        }
        levels.push(BracketLevel {
            eps,
            gaps,
            sandwich_margin: field_margin(lo, base).min(field_margin(base, up)),
            upper_extinction: up.extinction_estimate,
            lower_extinction: lo.extinction_estimate,
        });
    }
    let mut nested_margin = levels
        .iter()
        .map(|l| l.sandwich_margin)
        .fold(f64::INFINITY, f64::min);
    for k in 0..eps_list.len().saturating_sub(1) {
        let (up, lo) = (&fields[1 + 2 * k], &fields[2 + 2 * k]);
        let (up2, lo2) = (&fields[3 + 2 * k], &fields[4 + 2 * k]);
        nested_margin = nested_margin
            .min(field_margin(up2, up))
            .min(field_margin(lo, lo2));
    }
    let gaps_shrinking = (0..probe_times.len()).all(|j| {
        let col: Vec<f64> = levels.iter().map(|l| l.gaps[j]).collect();
        strictly_decreasing(&col)
    });
    let last = levels.last().expect("eps_list is nonempty");
    let extinction_spread = match (last.upper_extinction, last.lower_extinction) {
        (Some(a), Some(b)) => Some((a - b).abs()),
        _ => None,
    };
    let h = (base.x[base.x.len() - 1] - base.x[0]) / (base.x.len() - 1) as f64;
    Ok(BracketReport {
        probe_times: probe_times.to_vec(),
        base_extinction: base.extinction_estimate,
        levels,
        nested: nested_margin >= -ORDER_TOL,
        nested_margin,
        gaps_shrinking,
        extinction_spread,
        extinction_tolerance: 2.0 * (spec.dt + h),
    })
}

fn sup_signed(lower: &[f64], upper: &[f64]) -> f64 {
    lower
        .iter()
        .zip(upper)
        .map(|(l, u)| u - l)
        .fold(f64::NEG_INFINITY, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::jump_spec;

    #[test]
    fn study_rejects_short_lists() {
        let s = jump_spec(101, 8);
        let p = SolverPolicy::default();
        assert!(singular_limit_study(&s, &[4, 8], &[0.01], &p).is_err());
        assert!(singular_limit_study(&s, &[4, 8, 8], &[0.01], &p).is_err());
        assert!(bracket_maximal_minimal(&s, &[0.05, 0.1], &[0.01], &p).is_err());
        assert!(matches!(
            bracket_maximal_minimal(&s, &[0.4], &[0.01], &p),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn coarse_bracketing_is_nested() {
        let mut s = jump_spec(101, 16);
        s.horizon = 0.2;
        let r = bracket_maximal_minimal(&s, &[0.1, 0.05], &[0.02, 0.05], &SolverPolicy::default())
            .unwrap();
        assert!(r.nested, "{r:?}");
        assert!(r.gaps_shrinking, "{r:?}");
    }
}
