//! Scenario library and the acceptance suite.

mod acceptance;
pub mod oracle;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::Geometry;
use crate::nonlinearity::{BSpec, BnFamily};
use crate::operators::OperatorSpec;
use crate::regularize::{
    crossing_time, inf_convolve, separated_on_parabolic_boundary, sup_convolve, Crossing,
    FieldSamples,
};
use crate::solver::{
    run_ordered_pair, solve_elliptic, InitialData, Problem, ProblemSpec, SolverPolicy,
    SpaceTimeField,
};

pub use acceptance::{
    criterion_names, run_acceptance, AcceptanceOptions, AcceptanceReport, CriterionResult, Fault,
    REPORT_SCHEMA,
};

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "check", rename_all = "kebab-case")]
pub enum Expectation {
    /// Some recorded level has `max u < 0`, strictly after the start.
    FiniteExtinction,
    /// `sup |u - u_stat| <= tolerance` on every level at least `burn_in`
    /// after extinction.
    StationaryProximity { burn_in: f64, tolerance: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExpectationResult {
    pub expectation: Expectation,
    pub value: Option<f64>,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scenario {
    pub name: String,
    pub spec: ProblemSpec,
    pub expectations: Vec<Expectation>,
}

impl Scenario {
    pub fn problem(&self) -> Result<Problem> {
        Problem::new(self.spec.clone())
    }

    pub fn evaluate(
        &self,
        p: &Problem,
        field: &SpaceTimeField,
        policy: &SolverPolicy,
    ) -> Result<Vec<ExpectationResult>> {
        let mut out = Vec::new();
        for e in &self.expectations {
            let (value, passed) = match *e {
                Expectation::FiniteExtinction => match field.extinction_time {
                    Some(t) => (Some(t), t > field.times[0]),
                    None => (None, false),
                },
                Expectation::StationaryProximity { burn_in, tolerance } => {
                    match field.extinction_time {
                        Some(te) => {
                            let stat = solve_elliptic(p, p.boundary(), policy)?.u;
                            let d = field
                                .times
                                .iter()
                                .zip(&field.values)
                                .filter(|(t, _)| **t >= te + burn_in)
                                .flat_map(|(_, u)| u.iter().zip(&stat).map(|(a, b)| (a - b).abs()))
                                .fold(f64::NEG_INFINITY, f64::max);
                            // no level late enough is a failure, not a vacuous pass
                            (Some(d), d.is_finite() && d <= tolerance)
                        }
                        None => (None, false),
                    }
                }
            };
            out.push(ExpectationResult {
                expectation: e.clone(),
                value,
                passed,
            });
        }
        Ok(out)
    }
}

/// Class-P datum on `(-1, 1)` with the trace operator and `g ≡ -1`:
/// a cap of height `peak` on `(-a, a)`, affine down to the boundary.
pub fn class_p_scenario(grid: usize, n: u32, a: f64, peak: f64) -> Result<Scenario> {
    if grid < 101 {
        return Err(Error::config(format!(
            "grid must have at least 101 nodes, got {grid}"
        )));
    }
    if !(a > 0.0 && a < 1.0 && peak > 0.0) {
        return Err(Error::config(format!(
            "need 0 < a < 1 and peak > 0, got a = {a}, peak = {peak}"
        )));
    }
    let h = 2.0 / (grid - 1) as f64;
    Ok(Scenario {
        name: format!("class-p(a={a}, peak={peak})"),
        spec: ProblemSpec {
            geometry: Geometry::Interval { lo: -1.0, hi: 1.0 },
            nodes: grid,
            op: OperatorSpec::trace(1.0, 1),
            b: BSpec::PositivePart,
            bn: Some(BnFamily::new(n)?),
            psi: None,
            g_lo: -1.0,
            g_hi: -1.0,
            initial: InitialData::ClassP { a, peak },
            horizon: 1.0,
            dt: h,
        },
        expectations: vec![
            Expectation::FiniteExtinction,
            Expectation::StationaryProximity {
                burn_in: 0.2,
                tolerance: 0.05,
            },
        ],
    })
}

/// The discontinuous-jump example: `a = 0.3`, peak `0.5`, `dt = h`, `T = 1`.
pub fn make_jump_scenario(grid: usize, n: u32) -> Result<Scenario> {
    let mut s = class_p_scenario(grid, n, 0.3, 0.5)?;
    s.name = "jump".into();
    Ok(s)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonPair {
    pub gap: f64,
    pub lower: Scenario,
    pub upper: Scenario,
}

/// `upper` has its front moved out by `gap`, its cap raised by `gap`, and
/// boundary data lifted by `gap / 2`.
pub fn make_comparison_pair(base: &Scenario, gap: f64) -> Result<ComparisonPair> {
    if !(gap > 0.0 && gap.is_finite()) {
        return Err(Error::config(format!("gap must be positive, got {gap}")));
    }
    let InitialData::ClassP { a, peak } = base.spec.initial else {
        return Err(Error::config("comparison pairs need class-p initial data"));
    };
    let half_width = match base.spec.geometry {
        Geometry::Interval { lo, hi } => (hi - lo) / 2.0,
        Geometry::RadialAnnulus { r_hi, .. } | Geometry::RadialBallPunctured { r_hi, .. } => r_hi,
    };
    if a + gap >= half_width {
        return Err(Error::infeasible(format!(
            "front shift {gap} leaves the domain"
        )));
    }
    let (g_lo, g_hi) = (base.spec.g_lo + gap / 2.0, base.spec.g_hi + gap / 2.0);
    if g_lo >= 0.0 || g_hi >= 0.0 {
        return Err(Error::infeasible(format!(
            "lift {} makes the boundary data nonnegative",
            gap / 2.0
        )));
    }
    let mut upper = base.clone();
    upper.name = format!("{}+{gap}", base.name);
    upper.spec.initial = InitialData::ClassP {
        a: a + gap,
        peak: peak + gap,
    };
    upper.spec.g_lo = g_lo;
    upper.spec.g_hi = g_hi;
    Ok(ComparisonPair {
        gap,
        lower: base.clone(),
        upper,
    })
}

impl ComparisonPair {
    /// Smallest `v₀ - u₀` over all nodes, boundary included.
    pub fn initial_separation(&self) -> Result<f64> {
        let lo = self.lower.problem()?;
        let up = self.upper.problem()?;
        if lo.grid.x != up.grid.x {
            return Err(Error::Shape("pair members use different grids".into()));
        }
        Ok(lo
            .u0
            .iter()
            .zip(&up.u0)
            .map(|(a, b)| b - a)
            .fold(f64::INFINITY, f64::min))
    }
}

/// Solver ordering plus the regularized crossing check for one pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareReport {
    pub gap: f64,
    pub initial_separation: f64,
    pub min_gap: f64,
    pub violations: usize,
    pub forced_levels: usize,
    pub r: f64,
    /// Whether `Z < W` holds on the parabolic boundary of the shrunk lattice;
    /// the crossing check is only conclusive when it does.
    pub separated_on_parabolic_boundary: bool,
    pub crossing: Crossing,
}

impl CompareReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
            && (!self.separated_on_parabolic_boundary || self.crossing.t0.is_none())
    }
}

/// `r` defaults to `4 max(h, dt)`, the smallest radius the lattice resolves
/// with some room.
pub fn compare_pair(
    pair: &ComparisonPair,
    r: Option<f64>,
    policy: &SolverPolicy,
) -> Result<CompareReport> {
    let (lo, up) = (pair.lower.problem()?, pair.upper.problem()?);
    let rep = run_ordered_pair(&lo, &up, policy)?;
    let r = r.unwrap_or(4.0 * lo.grid.h.max(lo.spec.dt));
    let z = sup_convolve(&FieldSamples::from(&rep.lower), r)?;
    let w = inf_convolve(&FieldSamples::from(&rep.upper), r)?;
    Ok(CompareReport {
        gap: pair.gap,
        initial_separation: pair.initial_separation()?,
        min_gap: rep.min_gap,
        violations: rep.violations,
        forced_levels: rep.forced_levels,
        r,
        separated_on_parabolic_boundary: separated_on_parabolic_boundary(&z.field, &w.field)?,
        crossing: crossing_time(&z, &w)?,
    })
}
