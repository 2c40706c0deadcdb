//! Physical and feedback parameters, damping presets and initial conditions.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Densities, stiffnesses, the point mass and the segment endpoints.
///
/// The first string occupies `(l0, l1)`, the second `(l1, l2)`; the mass sits
/// at `l1` and the left end is clamped, so `l0` is always 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    pub rho1: f64,
    pub rho2: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub m: f64,
    pub l0: f64,
    pub l1: f64,
    pub l2: f64,
}

impl PhysicalParams {
    /// The heterogeneous reference configuration used for all experiments.
    pub fn reference() -> Self {
        Self {
            rho1: 7f64.sqrt(),
            rho2: PI,
            alpha1: 3f64.sqrt(),
            alpha2: 1.0,
            m: 0.6,
            l0: 0.0,
            l1: 1.0,
            l2: 2.0,
        }
    }

    pub fn segment_length(&self, segment: usize) -> f64 {
        match segment {
            1 => self.l1 - self.l0,
            2 => self.l2 - self.l1,
            _ => panic!("segment index must be 1 or 2, got {segment}"),
        }
    }

    pub fn rho(&self, segment: usize) -> f64 {
        if segment == 1 {
            self.rho1
        } else {
            self.rho2
        }
    }

    pub fn alpha(&self, segment: usize) -> f64 {
        if segment == 1 {
            self.alpha1
        } else {
            self.alpha2
        }
    }
}

/// Feedback gains: `b0` slope-rate feedback and `b1` velocity feedback at
/// the mass, `d1` velocity feedback at the free end.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gains {
    pub b0: f64,
    pub b1: f64,
    pub d1: f64,
}

impl Gains {
    pub const fn new(b0: f64, b1: f64, d1: f64) -> Self {
        Self { b0, b1, d1 }
    }

    pub const fn zero() -> Self {
        Self::new(0.0, 0.0, 0.0)
    }

    pub fn all_positive(&self) -> bool {
        self.b0 > 0.0 && self.b1 > 0.0 && self.d1 > 0.0
    }
}

/// The four damping configurations compared in the experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// No slope-rate feedback: `b0 = 0`, `b1 = d1 = 1`.
    A,
    /// No boundary feedback: `d1 = 0`, `b0 = b1 = 1`.
    B,
    /// All three mechanisms active.
    C,
    /// No velocity feedback at the mass: `b1 = 0`, `b0 = d1 = 1`.
    D,
}

impl Preset {
    pub const ALL: [Preset; 4] = [Preset::A, Preset::B, Preset::C, Preset::D];

    pub fn gains(self) -> Gains {
        match self {
            Preset::A => Gains::new(0.0, 1.0, 1.0),
            Preset::B => Gains::new(1.0, 1.0, 0.0),
            Preset::C => Gains::new(1.0, 1.0, 1.0),
            Preset::D => Gains::new(1.0, 0.0, 1.0),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Preset::A => "a",
            Preset::B => "b",
            Preset::C => "c",
            Preset::D => "d",
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "a" => Ok(Preset::A),
            "b" => Ok(Preset::B),
            "c" => Ok(Preset::C),
            "d" => Ok(Preset::D),
            other => Err(Error::InvalidParams(format!(
                "unknown preset '{other}' (expected a, b, c or d)"
            ))),
        }
    }
}

/// Every violated invariant, one message each. Empty means valid.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<String>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn into_result(self) -> Result<()> {
        if self.is_valid() {
            Ok(())
        } else {
            Err(Error::InvalidParams(self.violations.join("; ")))
        }
    }
}

pub fn validate_params(p: &PhysicalParams, g: &Gains) -> ValidationReport {
    let mut violations = Vec::new();
    let mut positive = |name: &str, value: f64| {
        if !(value > 0.0 && value.is_finite()) {
            violations.push(format!("{name} must be positive (got {value})"));
        }
    };
    positive("rho1", p.rho1);
    positive("rho2", p.rho2);
    positive("alpha1", p.alpha1);
    positive("alpha2", p.alpha2);
    positive("m", p.m);

    if p.l0 != 0.0 {
        violations.push(format!("l0 must be 0 (got {})", p.l0));
    }
    if !(p.l0 < p.l1 && p.l1 < p.l2) || !p.l2.is_finite() {
        violations.push(format!(
            "endpoints must be strictly increasing (got l0 = {}, l1 = {}, l2 = {})",
            p.l0, p.l1, p.l2
        ));
    }
    for (name, value) in [("b0", g.b0), ("b1", g.b1), ("d1", g.d1)] {
        if !(value >= 0.0 && value.is_finite()) {
            violations.push(format!("{name} must be nonnegative (got {value})"));
        }
    }
    ValidationReport { violations }
}

/// Nodal samples of one segment, including both of its endpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentSamples {
    pub displacement: Vec<f64>,
    pub velocity: Vec<f64>,
}

/// Initial displacement and velocity profiles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum InitialCondition {
    Zero,
    /// Zero displacement, velocity `sin(k π x / l2)`.
    SineVelocity { wavenumber: f64 },
    /// Zero velocity, displacement `±1` on the middle half of each segment.
    BoxDisplacement,
    /// Box displacement and sine velocity (`k = 4`) applied together.
    PaperExperiment,
    /// Samples at the grid nodes of each segment (endpoints included).
    CustomSamples {
        segment1: SegmentSamples,
        segment2: SegmentSamples,
    },
}

pub const DEFAULT_WAVENUMBER: f64 = 4.0;

pub fn paper_experiment_ic() -> InitialCondition {
    InitialCondition::PaperExperiment
}

impl InitialCondition {
    /// Displacement at global coordinate `x`, for the analytic variants.
    pub fn displacement_at(&self, p: &PhysicalParams, x: f64) -> Option<f64> {
        match self {
            InitialCondition::Zero | InitialCondition::SineVelocity { .. } => Some(0.0),
            InitialCondition::BoxDisplacement | InitialCondition::PaperExperiment => {
                Some(box_profile(p, x))
            }
            InitialCondition::CustomSamples { .. } => None,
        }
    }

    /// Velocity at global coordinate `x`, for the analytic variants.
    pub fn velocity_at(&self, p: &PhysicalParams, x: f64) -> Option<f64> {
        match self {
            InitialCondition::Zero | InitialCondition::BoxDisplacement => Some(0.0),
            InitialCondition::SineVelocity { wavenumber } => {
                Some((wavenumber * PI * x / p.l2).sin())
            }
            InitialCondition::PaperExperiment => {
                Some((DEFAULT_WAVENUMBER * PI * x / p.l2).sin())
            }
            InitialCondition::CustomSamples { .. } => None,
        }
    }
}

/// `(-1)^(i+1)` times the indicator of the middle half of segment `i`.
/// A node sitting exactly on a jump gets the mean of the one-sided limits.
fn box_profile(p: &PhysicalParams, x: f64) -> f64 {
    let tol = 1e-12 * (p.l2 - p.l0).abs().max(1.0);
    let mut value = 0.0;
    for (segment, sign) in [(1usize, 1.0), (2usize, -1.0)] {
        let start = if segment == 1 { p.l0 } else { p.l1 };
        let len = p.segment_length(segment);
        let lo = start + 0.25 * len;
        let hi = start + 0.75 * len;
        if (x - lo).abs() <= tol || (x - hi).abs() <= tol {
            value += 0.5 * sign;
        } else if x > lo && x < hi {
            value += sign;
        }
    }
    value
}

/// Parameter file contents. Missing keys fall back to [`PhysicalParams::reference`]
/// and unit gains; `l0` is not configurable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ParamFile {
    pub rho1: f64,
    pub rho2: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub m: f64,
    pub l1: f64,
    pub l2: f64,
    pub b0: f64,
    pub b1: f64,
    pub d1: f64,
}

impl Default for ParamFile {
    fn default() -> Self {
        let p = PhysicalParams::reference();
        Self {
            rho1: p.rho1,
            rho2: p.rho2,
            alpha1: p.alpha1,
            alpha2: p.alpha2,
            m: p.m,
            l1: p.l1,
            l2: p.l2,
            b0: 1.0,
            b1: 1.0,
            d1: 1.0,
        }
    }
}

impl ParamFile {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn split(&self) -> (PhysicalParams, Gains) {
        (
            PhysicalParams {
                rho1: self.rho1,
                rho2: self.rho2,
                alpha1: self.alpha1,
                alpha2: self.alpha2,
                m: self.m,
                l0: 0.0,
                l1: self.l1,
                l2: self.l2,
            },
            Gains::new(self.b0, self.b1, self.d1),
        )
    }
}
