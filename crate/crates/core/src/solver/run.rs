//! Time loops: a single run and a co-stepped ordered pair.

use serde::Serialize;

use super::newton::step_parabolic;
use super::{Problem, SolverPolicy};
use crate::error::{Error, Result};

pub const MAX_PRINCIPLE_TOL: f64 = 1e-9;
pub const ORDER_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct RunStats {
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub newton_iters_total: usize,
    pub newton_iters_max: usize,
    pub min_dt: f64,
    /// Smallest slack of the discrete maximum principle over accepted steps.
    pub max_principle_margin: f64,
}

impl RunStats {
    fn new() -> Self {
        RunStats {
            min_dt: f64::INFINITY,
            max_principle_margin: f64::INFINITY,
            ..Default::default()
        }
    }
}

/// Values on the space-time grid, one row per recorded time level.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpaceTimeField {
    pub coordinate: String,
    pub x: Vec<f64>,
    pub times: Vec<f64>,
    pub values: Vec<Vec<f64>>,
    /// Zero crossings bounding the positive phase at each level.
    pub front: Vec<Vec<f64>>,
    /// First recorded level with `max u < 0`.
    pub extinction_time: Option<f64>,
    /// Linear interpolation of `max u` between that level and the previous one.
    pub extinction_estimate: Option<f64>,
    pub stats: RunStats,
}

impl SpaceTimeField {
    /// Linear interpolation in time between recorded levels.
    pub fn at_time(&self, t: f64) -> Result<Vec<f64>> {
        let last = self.times.len() - 1;
        if !(t >= self.times[0] - 1e-12 && t <= self.times[last] + 1e-12) {
            return Err(Error::domain(format!(
                "time {t} outside [{}, {}]",
                self.times[0], self.times[last]
            )));
        }
        let k = self.times.partition_point(|&s| s <= t).clamp(1, last);
        let (t0, t1) = (self.times[k - 1], self.times[k]);
        let w = ((t - t0) / (t1 - t0)).clamp(0.0, 1.0);
        if w == 0.0 {
            return Ok(self.values[k - 1].clone());
        }
        if w == 1.0 {
            return Ok(self.values[k].clone());
        }
        Ok(self.values[k - 1]
            .iter()
            .zip(&self.values[k])
            .map(|(a, b)| (1.0 - w) * a + w * b)
            .collect())
    }
}

/// Linearly interpolated boundary points of `{u > 0}`.
pub fn zero_crossings(x: &[f64], u: &[f64]) -> Vec<f64> {
    let mut out = Vec::new();
    for i in 0..x.len().saturating_sub(1) {
        let (a, b) = (u[i], u[i + 1]);
        if (a > 0.0) != (b > 0.0) {
            out.push(x[i] + (x[i + 1] - x[i]) * a / (a - b));
        }
    }
    out
}

fn level_times(horizon: f64, dt: f64) -> Vec<f64> {
    let steps = (horizon / dt).round();
    let k = if (steps * dt - horizon).abs() <= 1e-9 * horizon {
        steps as usize
    } else {
        (horizon / dt).ceil() as usize
    };
    (0..=k).map(|i| (i as f64 * dt).min(horizon)).collect()
}

fn max_of(u: &[f64]) -> f64 {
    u.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

fn min_of(u: &[f64]) -> f64 {
    u.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Slack of `min(u_prev, g, 0) <= u <= max(u_prev, g, 0)`.
fn max_principle_slack(p: &Problem, prev: &[f64], u: &[f64]) -> f64 {
    let (g_lo, g_hi) = p.boundary();
    let (mut lo, mut hi) = (
        min_of(prev).min(g_hi).min(0.0),
        max_of(prev).max(g_hi).max(0.0),
    );
    if !p.grid.reflect_inner() {
        lo = lo.min(g_lo);
        hi = hi.max(g_lo);
    }
    (min_of(u) - lo).min(hi - max_of(u))
}

/// Advances all `states` over one level of length `span`, shrinking the
/// substep on Newton failure or when `ordered` rejects the result. Returns
/// whether an order rejection had to be accepted at the smallest substep.
fn advance(
    problems: &[&Problem],
    states: &mut [Vec<f64>],
    span: f64,
    t0: f64,
    policy: &SolverPolicy,
    stats: &mut [RunStats],
    ordered: &dyn Fn(&[Vec<f64>]) -> bool,
) -> Result<bool> {
    let ad = &policy.adaptive;
    let mut h = span;
    let mut done = 0.0;
    let mut forced = false;
    while span - done > 1e-12 * span {
        let s = h.min(span - done);
        let mut next = Vec::with_capacity(states.len());
        let mut iters = Vec::with_capacity(states.len());
        let mut failure = None;
        for (p, u) in problems.iter().zip(states.iter()) {
            match step_parabolic(p, u, s, policy) {
                Ok(out) => {
                    iters.push(out.iters);
                    next.push(out.u);
                }
                Err(e) => {
                    failure = Some(e);
                    break;
                }
            }
        }
        let order_ok = failure.is_none() && ordered(&next);
        if failure.is_some() || !order_ok {
            let smaller = s * ad.shrink;
            let may_shrink = ad.enabled && smaller >= ad.dt_min;
            if may_shrink {
                for st in stats.iter_mut() {
                    st.rejected_steps += 1;
                }
                h = smaller;
                continue;
            }
            if let Some(e) = failure {
                return Err(Error::Step {
                    t: t0 + done,
                    reason: format!("substep {s:e} failed: {e}"),
                });
            }
            forced = true;
        }
        for (k, (p, u)) in problems.iter().zip(next.iter()).enumerate() {
            let slack = max_principle_slack(p, &states[k], u);
            if slack < -MAX_PRINCIPLE_TOL {
                return Err(Error::Step {
                    t: t0 + done + s,
                    reason: format!("discrete maximum principle violated by {:e}", -slack),
                });
            }
            let st = &mut stats[k];
            st.max_principle_margin = st.max_principle_margin.min(slack);
            st.accepted_steps += 1;
            st.newton_iters_total += iters[k];
            st.newton_iters_max = st.newton_iters_max.max(iters[k]);
            st.min_dt = st.min_dt.min(s);
        }
        for (dst, src) in states.iter_mut().zip(next) {
            *dst = src;
        }
        done += s;
        if ad.enabled && iters.iter().all(|&i| i <= ad.target_iters) {
            h = (h * ad.growth).min(span);
        }
    }
    Ok(forced)
}

struct Recorder {
    field: SpaceTimeField,
    prev_max: f64,
}

impl Recorder {
    fn new(p: &Problem) -> Self {
        Recorder {
            field: SpaceTimeField {
                coordinate: p.grid.coordinate_label().to_string(),
                x: p.grid.x.clone(),
                times: Vec::new(),
                values: Vec::new(),
                front: Vec::new(),
                extinction_time: None,
                extinction_estimate: None,
                stats: RunStats::new(),
            },
            prev_max: f64::NAN,
        }
    }

    fn push(&mut self, t: f64, u: &[f64]) {
        let f = &mut self.field;
        let m = max_of(u);
        if f.extinction_time.is_none() && m < 0.0 {
            f.extinction_time = Some(t);
            f.extinction_estimate = Some(match f.times.last() {
                Some(&tp) if self.prev_max >= 0.0 => {
                    tp + (t - tp) * self.prev_max / (self.prev_max - m)
                }
                _ => t,
            });
        }
        self.prev_max = m;
        f.times.push(t);
        f.front.push(zero_crossings(&f.x, u));
        f.values.push(u.to_vec());
    }
}

pub fn run(p: &Problem, policy: &SolverPolicy) -> Result<SpaceTimeField> {
    policy.validate()?;
    let times = level_times(p.spec.horizon, p.spec.dt);
    let mut rec = Recorder::new(p);
    let mut state = vec![p.u0.clone()];
    rec.push(0.0, &state[0]);
    let mut stats = vec![RunStats::new()];
    for w in times.windows(2) {
        advance(
            &[p],
            &mut state,
            w[1] - w[0],
            w[0],
            policy,
            &mut stats,
            &|_| true,
        )?;
        rec.push(w[1], &state[0]);
    }
    rec.field.stats = stats.pop().unwrap_or_default();
    Ok(rec.field)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderedPairReport {
    pub lower: SpaceTimeField,
    pub upper: SpaceTimeField,
    /// Smallest `upper - lower` over all recorded levels and nodes.
    pub min_gap: f64,
    /// Level-node pairs with `upper - lower < -1e-9`.
    pub violations: usize,
    /// Levels where the order could not be restored by shrinking the step.
    pub forced_levels: usize,
}

fn order_violations(lower: &[f64], upper: &[f64]) -> (usize, f64) {
    let mut count = 0;
    let mut gap = f64::INFINITY;
    for (l, u) in lower.iter().zip(upper) {
        let d = u - l;
        gap = gap.min(d);
        if d < -ORDER_TOL {
            count += 1;
        }
    }
    (count, gap)
}

/// Co-steps two problems on the same grid and time levels, rejecting steps
/// that break `lower <= upper`.
pub fn run_ordered_pair(
    lower: &Problem,
    upper: &Problem,
    policy: &SolverPolicy,
) -> Result<OrderedPairReport> {
    policy.validate()?;
    if lower.grid != upper.grid
        || lower.spec.dt != upper.spec.dt
        || lower.spec.horizon != upper.spec.horizon
    {
        return Err(Error::config(
            "ordered pair needs identical grids, time steps and horizons",
        ));
    }
    let times = level_times(lower.spec.horizon, lower.spec.dt);
    let mut rl = Recorder::new(lower);
    let mut ru = Recorder::new(upper);
    let mut states = vec![lower.u0.clone(), upper.u0.clone()];
    let (mut violations, mut min_gap) = order_violations(&states[0], &states[1]);
    rl.push(0.0, &states[0]);
    ru.push(0.0, &states[1]);
    let mut stats = vec![RunStats::new(), RunStats::new()];
    let mut forced_levels = 0;
    let ordered = |s: &[Vec<f64>]| order_violations(&s[0], &s[1]).0 == 0;
    for w in times.windows(2) {
        if advance(
            &[lower, upper],
            &mut states,
            w[1] - w[0],
            w[0],
            policy,
            &mut stats,
            &ordered,
        )? {
            forced_levels += 1;
        }
        let (v, g) = order_violations(&states[0], &states[1]);
        violations += v;
        min_gap = min_gap.min(g);
        rl.push(w[1], &states[0]);
        ru.push(w[1], &states[1]);
    }
    rl.field.stats = stats[0].clone();
    ru.field.stats = stats[1].clone();
    Ok(OrderedPairReport {
        lower: rl.field,
        upper: ru.field,
        min_gap,
        violations,
        forced_levels,
    })
}
