//! TOML run configuration. Every section is optional; the defaults describe
//! the jump scenario at grid 401 with `n = 32`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::barriers::BarrierConfig;
use crate::error::{Error, Result};
use crate::grid::Geometry;
use crate::harness::AcceptanceOptions;
use crate::nonlinearity::{BSpec, BnFamily, PsiSpec};
use crate::operators::OperatorSpec;
use crate::regularize::ConvolutionKind;
use crate::solver::{InitialData, Problem, ProblemSpec, SolverPolicy};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub nodes: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection { nodes: 401 }
    }
}

/// `b.kind` selects the exact nonlinearity; `b.n`, when present, integrates
/// its smooth approximation instead.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BSection {
    #[serde(flatten)]
    pub spec: BSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<u32>,
}

impl Default for BSection {
    fn default() -> Self {
        BSection {
            spec: BSpec::PositivePart,
            n: Some(32),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoundarySection {
    pub g_lo: f64,
    pub g_hi: f64,
}

impl Default for BoundarySection {
    fn default() -> Self {
        BoundarySection {
            g_lo: -1.0,
            g_hi: -1.0,
        }
    }
}

/// `dt` defaults to the grid spacing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimeSection {
    pub horizon: f64,
    pub dt: Option<f64>,
}

impl Default for TimeSection {
    fn default() -> Self {
        TimeSection {
            horizon: 1.0,
            dt: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub n_list: Vec<u32>,
    pub probe_times: Vec<f64>,
    pub eps_list: Vec<f64>,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            n_list: vec![4, 8, 16, 32],
            probe_times: vec![0.01, 0.02, 0.03],
            eps_list: vec![0.1, 0.05, 0.025],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CompareSection {
    pub gap: f64,
    /// Convolution radius for the crossing check; `4 max(h, dt)` when absent.
    pub r: Option<f64>,
}

impl Default for CompareSection {
    fn default() -> Self {
        CompareSection { gap: 0.05, r: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RegularizeSection {
    pub r: f64,
    pub kind: ConvolutionKind,
}

impl Default for RegularizeSection {
    fn default() -> Self {
        RegularizeSection {
            r: 0.02,
            kind: ConvolutionKind::Sup,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub seed: u64,
    pub geometry: Geometry,
    pub grid: GridSection,
    pub op: OperatorSpec,
    pub b: BSection,
    pub psi: Option<PsiSpec>,
    pub boundary: BoundarySection,
    pub initial: InitialData,
    pub time: TimeSection,
    pub policy: SolverPolicy,
    pub sweep: SweepSection,
    pub barrier: Option<BarrierConfig>,
    pub compare: CompareSection,
    pub regularize: RegularizeSection,
    pub accept: AcceptanceOptions,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            seed: 0,
            geometry: Geometry::Interval { lo: -1.0, hi: 1.0 },
            grid: GridSection::default(),
            op: OperatorSpec::trace(1.0, 1),
            b: BSection::default(),
            psi: None,
            boundary: BoundarySection::default(),
            initial: InitialData::ClassP { a: 0.3, peak: 0.5 },
            time: TimeSection::default(),
            policy: SolverPolicy::default(),
            sweep: SweepSection::default(),
            barrier: None,
            compare: CompareSection::default(),
            regularize: RegularizeSection::default(),
            accept: AcceptanceOptions::default(),
        }
    }
}

impl Config {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text)?;
        cfg.policy.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn problem_spec(&self) -> Result<ProblemSpec> {
        if self.grid.nodes < 3 {
            return Err(Error::config("grid.nodes must be at least 3"));
        }
        let (lo, hi) = match self.geometry {
            Geometry::Interval { lo, hi } => (lo, hi),
            Geometry::RadialAnnulus { r_lo, r_hi, .. } => (r_lo, r_hi),
            Geometry::RadialBallPunctured { r_hi, .. } => (0.0, r_hi),
        };
        let h = (hi - lo) / (self.grid.nodes - 1) as f64;
        Ok(ProblemSpec {
            geometry: self.geometry.clone(),
            nodes: self.grid.nodes,
            op: self.op.clone(),
            b: self.b.spec.clone(),
            bn: self.b.n.map(BnFamily::new).transpose()?,
            psi: self.psi.clone(),
            g_lo: self.boundary.g_lo,
            g_hi: self.boundary.g_hi,
            initial: self.initial.clone(),
            horizon: self.time.horizon,
            dt: self.time.dt.unwrap_or(h),
        })
    }

    pub fn problem(&self) -> Result<Problem> {
        Problem::new(self.problem_spec()?)
    }
}
