//! Sup/inf-convolutions of sampled space-time fields over the body `Ξ_r`,
//! dual points, first crossing times and essential envelopes.
//!
//! Spatial distances are `|x_j - x_i|` along the sampled line. On radial grids
//! this is exact for radially symmetric fields: a ball of radius `s` about a
//! point at radius `ρ` meets exactly the radii `[ρ - s, ρ + s] ∩ [0, ∞)`.

use std::collections::VecDeque;
use std::ops::Range;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::XiShape;
use crate::solver::SpaceTimeField;

/// A field sampled on `times × x`, stored level by level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldSamples {
    pub coordinate: String,
    pub x: Vec<f64>,
    pub times: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

fn strictly_increasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] > w[0])
}

impl FieldSamples {
    pub fn new(
        coordinate: impl Into<String>,
        x: Vec<f64>,
        times: Vec<f64>,
        values: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if x.is_empty() || times.is_empty() {
            return Err(Error::domain("field needs at least one node and one level"));
        }
        if !strictly_increasing(&x) || !strictly_increasing(&times) {
            return Err(Error::domain(
                "node coordinates and times must be strictly increasing",
            ));
        }
        if x.iter().chain(&times).any(|v| !v.is_finite()) {
            return Err(Error::domain("non-finite coordinate"));
        }
        if values.len() != times.len() || values.iter().any(|row| row.len() != x.len()) {
            return Err(Error::domain(format!(
                "values must be {} levels of {} nodes",
                times.len(),
                x.len()
            )));
        }
        if values.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::domain("field contains non-finite values"));
        }
        Ok(FieldSamples {
            coordinate: coordinate.into(),
            x,
            times,
            values,
        })
    }

    pub fn nodes(&self) -> usize {
        self.x.len()
    }

    pub fn levels(&self) -> usize {
        self.times.len()
    }

    fn same_lattice(&self, other: &FieldSamples) -> bool {
        self.x == other.x && self.times == other.times
    }

    /// Largest spacing in space and in time (0 for a single sample).
    fn spacing(&self) -> (f64, f64) {
        let gap = |v: &[f64]| v.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
        (gap(&self.x), gap(&self.times))
    }
}

impl From<&SpaceTimeField> for FieldSamples {
    fn from(f: &SpaceTimeField) -> Self {
        FieldSamples {
            coordinate: f.coordinate.clone(),
            x: f.x.clone(),
            times: f.times.clone(),
            values: f.values.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConvolutionKind {
    Sup,
    Inf,
}

impl ConvolutionKind {
    fn sign(self) -> f64 {
        match self {
            ConvolutionKind::Sup => 1.0,
            ConvolutionKind::Inf => -1.0,
        }
    }
}

impl std::str::FromStr for ConvolutionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sup" => Ok(ConvolutionKind::Sup),
            "inf" => Ok(ConvolutionKind::Inf),
            other => Err(Error::Unknown {
                what: "convolution kind",
                name: other.to_string(),
            }),
        }
    }
}

/// Result of a convolution on the shrunk lattice `Q_r`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvolvedField {
    pub kind: ConvolutionKind,
    pub r: f64,
    /// Base level and node ranges making up `Q_r`.
    pub levels: Range<usize>,
    pub nodes: Range<usize>,
    pub field: FieldSamples,
    /// Attaining base sample `(level, node)` per output node; ties go to the
    /// smallest flat index `level * nodes + node`.
    pub dual: Vec<Vec<(usize, usize)>>,
    pub base_x: Vec<f64>,
    pub base_times: Vec<f64>,
}

impl ConvolvedField {
    pub fn value(&self, k: usize, i: usize) -> f64 {
        self.field.values[k][i]
    }

    /// Flat base index of the dual point of output node `(k, i)`.
    pub fn dual_index(&self, k: usize, i: usize) -> usize {
        let (kb, jb) = self.dual[k][i];
        kb * self.base_x.len() + jb
    }
}

/// Base level and node ranges of `Q_r`: `t - t_0 >= r`, `t_last - t >= r`,
/// and distance `> r + r^{2/3}` from both ends of the sampled line.
pub fn shrunk_lattice(base: &FieldSamples, r: f64) -> Result<(Range<usize>, Range<usize>)> {
    let shape = XiShape::new(r)?;
    let margin = shape.bounding_radius();
    let (lo, hi) = (base.x[0], base.x[base.nodes() - 1]);
    let (t0, t1) = (base.times[0], base.times[base.levels() - 1]);
    let nodes: Vec<usize> = (0..base.nodes())
        .filter(|&i| base.x[i] - lo > margin && hi - base.x[i] > margin)
        .collect();
    let levels: Vec<usize> = (0..base.levels())
        .filter(|&k| base.times[k] - t0 >= r && t1 - base.times[k] >= r)
        .collect();
    match (nodes.first(), nodes.last(), levels.first(), levels.last()) {
        (Some(&a), Some(&b), Some(&c), Some(&d)) => Ok((c..d + 1, a..b + 1)),
        _ => Err(Error::domain(format!(
            "Q_r is empty for r = {r} on this field"
        ))),
    }
}

fn check_sampling(base: &FieldSamples, r: f64) -> Result<()> {
    let (h, dt) = base.spacing();
    let limit = r / 4.0 * (1.0 + 1e-9);
    if h > limit || dt > limit {
        return Err(Error::domain(format!(
            "sampling too coarse for r = {r}: spacing {h} in space, {dt} in time (need <= r/4)"
        )));
    }
    Ok(())
}

pub fn sup_convolve(base: &FieldSamples, r: f64) -> Result<ConvolvedField> {
    convolve(base, r, ConvolutionKind::Sup)
}

pub fn inf_convolve(base: &FieldSamples, r: f64) -> Result<ConvolvedField> {
    convolve(base, r, ConvolutionKind::Inf)
}

/// Better of two candidates under "larger value, then smaller flat index".
fn better(a: (f64, usize), b: (f64, usize)) -> bool {
    a.0 > b.0 || (a.0 == b.0 && a.1 < b.1)
}

/// Sliding-window convolution. For a fixed pair of levels the admissible
/// nodes form a window whose ends move monotonically with the output node,
/// so a monotone deque gives each window extremum in amortized O(1).
pub fn convolve(base: &FieldSamples, r: f64, kind: ConvolutionKind) -> Result<ConvolvedField> {
    check_sampling(base, r)?;
    let (levels, nodes) = shrunk_lattice(base, r)?;
    let shape = XiShape::new(r)?;
    let s = kind.sign();
    let n = base.nodes();
    let x = &base.x;
    let rows: Vec<LevelRow> = levels
        .clone()
        .into_par_iter()
        .map(|k| {
            let mut best: Vec<(f64, usize)> = vec![(f64::NEG_INFINITY, usize::MAX); nodes.len()];
            let t = base.times[k];
            // generous bracket; membership is decided by the body predicate alone
            let first = base.times.partition_point(|&tt| tt < t - 2.0 * r);
            for kk in first..base.levels() {
                let dt = base.times[kk] - t;
                if dt > 2.0 * r {
                    break;
                }
                if !shape.contains_closed_norm(0.0, dt) {
                    continue;
                }
                let row = &base.values[kk];
                let inside =
                    |i: usize, j: usize| shape.contains_closed_norm((x[j] - x[i]).abs(), dt);
                let mut deque: VecDeque<usize> = VecDeque::new();
                let (mut lo, mut next) = (0usize, 0usize);
                for (slot, i) in nodes.clone().enumerate() {
                    while !inside(i, lo) {
                        lo += 1;
                    }
                    while next < n && (next <= i || inside(i, next)) {
                        let v = s * row[next];
                        while deque.back().is_some_and(|&b| s * row[b] < v) {
                            deque.pop_back();
                        }
                        deque.push_back(next);
                        next += 1;
                    }
                    while deque.front().is_some_and(|&f| f < lo) {
                        deque.pop_front();
                    }
                    let j = *deque.front().expect("window contains the node itself");
                    let cand = (s * row[j], kk * n + j);
                    if better(cand, best[slot]) {
                        best[slot] = cand;
                    }
                }
            }
            let vals = best.iter().map(|b| s * b.0).collect();
            let dual = best.iter().map(|b| (b.1 / n, b.1 % n)).collect();
            (vals, dual)
        })
        .collect();
    assemble(base, r, kind, levels, nodes, rows)
}

/// Reference convolution scanning every base sample for every output node.
pub fn convolve_brute_force(
    base: &FieldSamples,
    r: f64,
    kind: ConvolutionKind,
) -> Result<ConvolvedField> {
    check_sampling(base, r)?;
    let (levels, nodes) = shrunk_lattice(base, r)?;
    let shape = XiShape::new(r)?;
    let s = kind.sign();
    let n = base.nodes();
    let rows = levels
        .clone()
        .map(|k| {
            let mut vals = Vec::with_capacity(nodes.len());
            let mut dual = Vec::with_capacity(nodes.len());
            for i in nodes.clone() {
                let mut best = (f64::NEG_INFINITY, usize::MAX);
                for kk in 0..base.levels() {
                    for j in 0..n {
                        let dt = base.times[kk] - base.times[k];
                        if shape.contains_closed_norm((base.x[j] - base.x[i]).abs(), dt) {
                            let cand = (s * base.values[kk][j], kk * n + j);
                            if better(cand, best) {
                                best = cand;
                            }
                        }
                    }
                }
                vals.push(s * best.0);
                dual.push((best.1 / n, best.1 % n));
            }
            (vals, dual)
        })
        .collect();
    assemble(base, r, kind, levels, nodes, rows)
}

/// Values of one convolved level and the dual point of each node.
type LevelRow = (Vec<f64>, Vec<(usize, usize)>);

fn assemble(
    base: &FieldSamples,
    r: f64,
    kind: ConvolutionKind,
    levels: Range<usize>,
    nodes: Range<usize>,
    rows: Vec<LevelRow>,
) -> Result<ConvolvedField> {
    let (values, dual): (Vec<_>, Vec<_>) = rows.into_iter().unzip();
    let field = FieldSamples::new(
        base.coordinate.clone(),
        base.x[nodes.clone()].to_vec(),
        base.times[levels.clone()].to_vec(),
        values,
    )?;
    Ok(ConvolvedField {
        kind,
        r,
        levels,
        nodes,
        field,
        dual,
        base_x: base.x.clone(),
        base_times: base.times.clone(),
    })
}

/// Largest violation of `Z >= u` (sup) or `W <= u` (inf) at the output nodes;
/// zero when the ordering holds exactly.
pub fn ordering_defect(c: &ConvolvedField, base: &FieldSamples) -> f64 {
    let s = c.kind.sign();
    let mut worst: f64 = 0.0;
    for (k, kb) in c.levels.clone().enumerate() {
        for (i, ib) in c.nodes.clone().enumerate() {
            worst = worst.max(s * (base.values[kb][ib] - c.value(k, i)));
        }
    }
    worst
}

/// Whether every dual point carries exactly the convolved value.
pub fn dual_points_attain(c: &ConvolvedField, base: &FieldSamples) -> bool {
    c.dual.iter().enumerate().all(|(k, row)| {
        row.iter()
            .enumerate()
            .all(|(i, &(kb, jb))| base.values[kb][jb] == c.value(k, i))
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Crossing {
    pub t0: Option<f64>,
    pub level: Option<usize>,
    /// Nodes with `W - Z <= 0` at the crossing level.
    pub contact_nodes: Vec<usize>,
    pub contact_x: Vec<f64>,
    /// Smallest `W - Z` over the levels up to the crossing (or all levels).
    pub min_gap: f64,
}

/// First level where `min (W - Z) <= 0` on two fields sharing a lattice.
pub fn first_crossing(z: &FieldSamples, w: &FieldSamples) -> Result<Crossing> {
    if !z.same_lattice(w) {
        return Err(Error::domain("Z and W are sampled on different lattices"));
    }
    let mut min_gap = f64::INFINITY;
    for k in 0..z.levels() {
        let gaps: Vec<f64> = w.values[k]
            .iter()
            .zip(&z.values[k])
            .map(|(a, b)| a - b)
            .collect();
        min_gap = gaps.iter().copied().fold(min_gap, f64::min);
        let contact: Vec<usize> = (0..gaps.len()).filter(|&i| gaps[i] <= 0.0).collect();
        if !contact.is_empty() {
            return Ok(Crossing {
                t0: Some(z.times[k]),
                level: Some(k),
                contact_x: contact.iter().map(|&i| z.x[i]).collect(),
                contact_nodes: contact,
                min_gap,
            });
        }
    }
    Ok(Crossing {
        t0: None,
        level: None,
        contact_nodes: Vec::new(),
        contact_x: Vec::new(),
        min_gap,
    })
}

pub fn crossing_time(z: &ConvolvedField, w: &ConvolvedField) -> Result<Crossing> {
    if z.kind != ConvolutionKind::Sup || w.kind != ConvolutionKind::Inf {
        return Err(Error::config(
            "crossing_time needs a sup-convolution Z and an inf-convolution W",
        ));
    }
    first_crossing(&z.field, &w.field)
}

/// `Z < W` strictly on the first level and on the first and last node
/// columns of a shared lattice.
pub fn separated_on_parabolic_boundary(z: &FieldSamples, w: &FieldSamples) -> Result<bool> {
    if !z.same_lattice(w) {
        return Err(Error::domain("Z and W are sampled on different lattices"));
    }
    let last = z.nodes() - 1;
    Ok(z.values[0].iter().zip(&w.values[0]).all(|(a, b)| a < b)
        && z.values
            .iter()
            .zip(&w.values)
            .all(|(a, b)| a[0] < b[0] && a[last] < b[last]))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Envelopes {
    pub upper: FieldSamples,
    pub lower: FieldSamples,
    /// `max(min(u, upper), lower)`.
    pub candidate: FieldSamples,
}

/// Window extrema over closed space-time balls, minimized (upper) or
/// maximized (lower) over the radii.
pub fn essential_envelopes(field: &FieldSamples, radii: &[f64]) -> Result<Envelopes> {
    if radii.is_empty() || radii.iter().any(|&r| !(r > 0.0 && r.is_finite())) {
        return Err(Error::domain("radii must be positive and finite"));
    }
    if radii.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::domain("radii must be strictly decreasing"));
    }
    let (nl, nn) = (field.levels(), field.nodes());
    let mut upper = vec![vec![f64::INFINITY; nn]; nl];
    let mut lower = vec![vec![f64::NEG_INFINITY; nn]; nl];
    for &r in radii {
        for k in 0..nl {
            let t = field.times[k];
            let k_lo = field.times.partition_point(|&s| s < t - r);
            let k_hi = field.times.partition_point(|&s| s <= t + r);
            for i in 0..nn {
                let x = field.x[i];
                let j_lo = field.x.partition_point(|&s| s < x - r);
                let j_hi = field.x.partition_point(|&s| s <= x + r);
                let (mut mx, mut mn) = (f64::NEG_INFINITY, f64::INFINITY);
                for kk in k_lo..k_hi {
                    let dt = field.times[kk] - t;
                    for j in j_lo..j_hi {
                        let dx = field.x[j] - x;
                        if dx * dx + dt * dt <= r * r {
                            let v = field.values[kk][j];
                            mx = mx.max(v);
                            mn = mn.min(v);
                        }
                    }
                }
                upper[k][i] = upper[k][i].min(mx);
                lower[k][i] = lower[k][i].max(mn);
            }
        }
    }
    let candidate = (0..nl)
        .map(|k| {
            (0..nn)
                .map(|i| field.values[k][i].min(upper[k][i]).max(lower[k][i]))
                .collect()
        })
        .collect();
    let wrap = |values| {
        FieldSamples::new(
            field.coordinate.clone(),
            field.x.clone(),
            field.times.clone(),
            values,
        )
    };
    Ok(Envelopes {
        upper: wrap(upper)?,
        lower: wrap(lower)?,
        candidate: wrap(candidate)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LevelSet {
    /// `{Z >= 0}` of a sup-convolution.
    #[serde(rename = "Z>=0")]
    ZNonNegative,
    /// `{W <= 0}` of an inf-convolution.
    #[serde(rename = "W<=0")]
    WNonPositive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InteriorBallReport {
    pub level: LevelSet,
    pub boundary_nodes: usize,
    pub checked_points: usize,
    pub violations: usize,
    /// Smallest `Z(P'') - Z(P)` (or `W(P) - W(P'')`) over the checked points.
    pub worst_slack: f64,
    pub passed: bool,
}

/// For every boundary node `P` of the level set, checks that the lattice
/// points of `Ξ_r(P')` inside `Q_r`, with `P'` the dual point of `P`, stay in
/// `{Z >= Z(P)}` (resp. `{W <= W(P)}`).
pub fn interior_ball_check(c: &ConvolvedField, level: LevelSet) -> Result<InteriorBallReport> {
    let s = match (level, c.kind) {
        (LevelSet::ZNonNegative, ConvolutionKind::Sup) => 1.0,
        (LevelSet::WNonPositive, ConvolutionKind::Inf) => -1.0,
        _ => {
            return Err(Error::config(
                "level set does not match the convolution kind",
            ))
        }
    };
    let shape = XiShape::new(c.r)?;
    let f = &c.field;
    let (nl, nn) = (f.levels(), f.nodes());
    let inside = |k: usize, i: usize| s * f.values[k][i] >= 0.0;
    let mut report = InteriorBallReport {
        level,
        boundary_nodes: 0,
        checked_points: 0,
        violations: 0,
        worst_slack: f64::INFINITY,
        passed: true,
    };
    for k in 0..nl {
        for i in 0..nn {
            if !inside(k, i) {
                continue;
            }
            let neighbours = [
                (k.checked_sub(1), Some(i)),
                ((k + 1 < nl).then_some(k + 1), Some(i)),
                (Some(k), i.checked_sub(1)),
                (Some(k), (i + 1 < nn).then_some(i + 1)),
            ];
            let on_boundary = neighbours.iter().any(|nb| match nb {
                (Some(kk), Some(ii)) => !inside(*kk, *ii),
                _ => false,
            });
            if !on_boundary {
                continue;
            }
            report.boundary_nodes += 1;
            let (kd, jd) = c.dual[k][i];
            let (td, xd) = (c.base_times[kd], c.base_x[jd]);
            let zp = s * f.values[k][i];
            for kk in 0..nl {
                let dt = f.times[kk] - td;
                if dt.abs() > 2.0 * c.r {
                    continue;
                }
                for ii in 0..nn {
                    if shape.contains_closed_norm((f.x[ii] - xd).abs(), dt) {
                        let slack = s * f.values[kk][ii] - zp;
                        report.checked_points += 1;
                        report.worst_slack = report.worst_slack.min(slack);
                        if slack < 0.0 {
                            report.violations += 1;
                        }
                    }
                }
            }
        }
    }
    report.passed = report.violations == 0;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn lattice(
        nx: usize,
        nt: usize,
        x: (f64, f64),
        t: (f64, f64),
        u: impl Fn(f64, f64) -> f64,
    ) -> FieldSamples {
        let xs: Vec<f64> = (0..nx)
            .map(|i| x.0 + (x.1 - x.0) * i as f64 / (nx - 1) as f64)
            .collect();
        let ts: Vec<f64> = (0..nt)
            .map(|k| t.0 + (t.1 - t.0) * k as f64 / (nt - 1) as f64)
            .collect();
        let values = ts
            .iter()
            .map(|&tt| xs.iter().map(|&xx| u(xx, tt)).collect())
            .collect();
        FieldSamples::new("x", xs, ts, values).unwrap()
    }

    fn ball_indicator(cx: f64, ct: f64, rad: f64) -> impl Fn(f64, f64) -> f64 {
        move |x, t| {
            if (x - cx).powi(2) + (t - ct).powi(2) <= rad * rad {
                1.0
            } else {
                -1.0
            }
        }
    }

    fn same(a: &ConvolvedField, b: &ConvolvedField) -> bool {
        a.levels == b.levels
            && a.nodes == b.nodes
            && a.dual == b.dual
            && a.field
                .values
                .iter()
                .flatten()
                .zip(b.field.values.iter().flatten())
                .all(|(p, q)| p.to_bits() == q.to_bits())
    }

    #[test]
    fn sliding_matches_brute_force_bitwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let noise: Vec<f64> = (0..61 * 41).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let corpus = vec![
            lattice(61, 41, (-1.0, 1.0), (0.0, 1.0), |x, t| (3.0 * x).sin() - t),
            lattice(61, 41, (-1.0, 1.0), (0.0, 1.0), |x, _| -x.abs()),
            lattice(
                61,
                41,
                (-1.0, 1.0),
                (0.0, 1.0),
                ball_indicator(0.1, 0.5, 0.2),
            ),
            lattice(61, 41, (-1.0, 1.0), (0.0, 1.0), |x, t| {
                ((x * 2.0).round() + (t * 4.0).round()).rem_euclid(2.0)
            }),
            lattice(61, 41, (-1.0, 1.0), (0.0, 1.0), |x, t| {
                noise[((t * 40.0).round() as usize) * 61 + ((x + 1.0) * 30.0).round() as usize]
            }),
        ];
        for f in &corpus {
            for r in [0.15, 0.2, 0.25] {
                for kind in [ConvolutionKind::Sup, ConvolutionKind::Inf] {
                    let fast = convolve(f, r, kind).unwrap();
                    let slow = convolve_brute_force(f, r, kind).unwrap();
                    assert!(same(&fast, &slow), "r = {r}, {kind:?}");
                }
            }
        }
    }

    #[test]
    fn constant_field() {
        let f = lattice(41, 41, (0.0, 1.0), (0.0, 1.0), |_, _| 2.5);
        let z = sup_convolve(&f, 0.1).unwrap();
        assert!(z.field.values.iter().flatten().all(|&v| v == 2.5));
        assert!(dual_points_attain(&z, &f));
        let rep = interior_ball_check(&z, LevelSet::ZNonNegative).unwrap();
        assert!(rep.passed);
        assert_eq!(rep.boundary_nodes, 0);
    }

    #[test]
    fn ordering_duality_and_attainment() {
        let f = lattice(81, 41, (-1.0, 1.0), (0.0, 1.0), |x, t| {
            (5.0 * x * t).cos() * x - t * t
        });
        for r in [0.1, 0.2] {
            let z = sup_convolve(&f, r).unwrap();
            let w = inf_convolve(&f, r).unwrap();
            assert_eq!(ordering_defect(&z, &f), 0.0);
            assert_eq!(ordering_defect(&w, &f), 0.0);
            assert!(dual_points_attain(&z, &f) && dual_points_attain(&w, &f));
            let neg = FieldSamples {
                values: f
                    .values
                    .iter()
                    .map(|row| row.iter().map(|v| -v).collect())
                    .collect(),
                ..f.clone()
            };
            let zn = sup_convolve(&neg, r).unwrap();
            for (a, b) in w
                .field
                .values
                .iter()
                .flatten()
                .zip(zn.field.values.iter().flatten())
            {
                assert_eq!(a.to_bits(), (-b).to_bits());
            }
            assert_eq!(w.dual, zn.dual);
        }
        // monotone in r and one-sided idempotence on a common lattice
        let z1 = sup_convolve(&f, 0.1).unwrap();
        let z2 = sup_convolve(&f, 0.2).unwrap();
        for (k, kb) in z2.levels.clone().enumerate() {
            for (i, ib) in z2.nodes.clone().enumerate() {
                let (k1, i1) = (kb - z1.levels.start, ib - z1.nodes.start);
                assert!(z2.value(k, i) >= z1.value(k1, i1));
            }
        }
        let zz = sup_convolve(&z1.field, 0.1).unwrap();
        for (k, kb) in zz.levels.clone().enumerate() {
            for (i, ib) in zz.nodes.clone().enumerate() {
                assert!(zz.value(k, i) >= z1.value(kb, ib));
            }
        }
    }

    #[test]
    fn negative_distance_profile() {
        let f = lattice(201, 41, (-2.0, 2.0), (0.0, 1.0), |x, _| -x.abs());
        let r = 0.5;
        let z = sup_convolve(&f, r).unwrap();
        let reach = XiShape::new(r).unwrap().bounding_radius();
        let h = 0.02;
        for row in &z.field.values {
            for (i, &v) in row.iter().enumerate() {
                let exact = -(z.field.x[i].abs() - reach).max(0.0);
                assert!(v >= exact - 1e-12 && v <= exact + h, "{v} vs {exact}");
            }
        }
    }

    #[test]
    fn indicator_ball_dilation() {
        let f = lattice(
            81,
            81,
            (-1.0, 1.0),
            (0.0, 1.0),
            ball_indicator(0.0, 0.5, 0.15),
        );
        let r = 0.1;
        let z = sup_convolve(&f, r).unwrap();
        let shape = XiShape::new(r).unwrap();
        for (k, kb) in z.levels.clone().enumerate() {
            for (i, ib) in z.nodes.clone().enumerate() {
                let hit = (0..f.levels()).any(|kk| {
                    (0..f.nodes()).any(|j| {
                        f.values[kk][j] > 0.0
                            && shape.contains_closed_norm(
                                (f.x[j] - f.x[ib]).abs(),
                                f.times[kk] - f.times[kb],
                            )
                    })
                });
                assert_eq!(z.value(k, i) >= 0.0, hit);
            }
        }
        let rep = interior_ball_check(&z, LevelSet::ZNonNegative).unwrap();
        assert!(rep.passed && rep.boundary_nodes > 0, "{rep:?}");
        let w = inf_convolve(&f, r).unwrap();
        assert!(
            interior_ball_check(&w, LevelSet::WNonPositive)
                .unwrap()
                .passed
        );
        assert!(interior_ball_check(&w, LevelSet::ZNonNegative).is_err());
    }

    #[test]
    fn checkerboard_noise_passes() {
        let f = lattice(81, 81, (-1.0, 1.0), (0.0, 1.0), |x, t| {
            let i = ((x + 1.0) * 40.0).round() as i64;
            let k = (t * 80.0).round() as i64;
            0.3 - x * x - 0.2 * t + if (i + k) % 2 == 0 { 1e-3 } else { -1e-3 }
        });
        for r in [0.1, 0.15] {
            assert!(
                interior_ball_check(&sup_convolve(&f, r).unwrap(), LevelSet::ZNonNegative)
                    .unwrap()
                    .passed
            );
            assert!(
                interior_ball_check(&inf_convolve(&f, r).unwrap(), LevelSet::WNonPositive)
                    .unwrap()
                    .passed
            );
        }
    }

    #[test]
    fn crossings() {
        let f = lattice(41, 41, (0.0, 1.0), (0.0, 1.0), |x, t| x - t);
        let mut w = f.clone();
        for row in &mut w.values {
            for v in row.iter_mut() {
                *v += 1.0;
            }
        }
        let c = first_crossing(&f, &w).unwrap();
        assert_eq!(c.t0, None);
        assert!((c.min_gap - 1.0).abs() < 1e-12);
        let z = lattice(41, 41, (0.0, 1.0), (0.0, 1.0), |_, _| 0.0);
        let w = lattice(41, 41, (0.0, 1.0), (0.0, 1.0), |x, t| {
            if x == 0.5 {
                0.5 - t
            } else {
                1.0
            }
        });
        let c = first_crossing(&z, &w).unwrap();
        assert_eq!(c.t0, Some(0.5));
        assert_eq!(c.contact_nodes, vec![20]);
        let coarse = lattice(21, 41, (0.0, 1.0), (0.0, 1.0), |_, _| 0.0);
        assert!(first_crossing(&z, &coarse).is_err());
        let zc = sup_convolve(&f, 0.1).unwrap();
        assert!(crossing_time(&zc, &zc).is_err());
    }

    #[test]
    fn sampling_and_domain_errors() {
        let f = lattice(11, 11, (0.0, 1.0), (0.0, 1.0), |x, _| x);
        assert!(sup_convolve(&f, 0.2).is_err());
        let f = lattice(101, 101, (0.0, 1.0), (0.0, 1.0), |x, _| x);
        assert!(sup_convolve(&f, 0.6).is_err());
        assert!(sup_convolve(&f, -1.0).is_err());
        assert!(FieldSamples::new("x", vec![0.0, 0.0], vec![0.0], vec![vec![0.0, 0.0]]).is_err());
        assert!(FieldSamples::new("x", vec![0.0, 1.0], vec![0.0], vec![vec![0.0]]).is_err());
    }

    #[test]
    fn envelopes() {
        let f = lattice(21, 21, (0.0, 1.0), (0.0, 1.0), |x, t| x * t);
        let e = essential_envelopes(&f, &[0.2, 0.01]).unwrap();
        assert_eq!(e.upper, f);
        assert_eq!(e.lower, f);
        let mut spike = lattice(5, 5, (0.0, 1.0), (0.0, 1.0), |_, _| 0.0);
        spike.values[2][2] = 1.0;
        let e = essential_envelopes(&spike, &[0.5, 0.25]).unwrap();
        assert_eq!(e.upper.values[2][2], 1.0);
        assert_eq!(e.lower.values[2][2], 0.0);
        assert_eq!(e.candidate, spike);
        for k in 0..5 {
            for i in 0..5 {
                assert!(
                    e.lower.values[k][i] <= spike.values[k][i]
                        && spike.values[k][i] <= e.upper.values[k][i]
                );
            }
        }
        assert!(essential_envelopes(&f, &[0.1, 0.2]).is_err());
        assert!(essential_envelopes(&f, &[]).is_err());
    }
}
