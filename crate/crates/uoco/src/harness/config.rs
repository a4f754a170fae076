//! Experiment configuration: TOML file plus command-line overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::domains::{DomainKind, DomainSpec, Halfspace};
use crate::experts::OnsProjection;

use super::stream::{FamilyKind, ProblemFamily, TargetDrift};
use super::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlgoChoice {
    /// Two-layer universal learner, one projection per round.
    Universal,
    /// Universal learner with the smoothness-exploiting expert set.
    UniversalSmooth,
    /// Multi-projection baseline: every expert projects onto the feasible
    /// set each round.
    Baseline,
    /// Single gradient-descent expert (reference point).
    Ogd,
    /// Single Newton-step expert (reference point).
    Ons,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyChoice {
    LinearAdversarial,
    StronglyConvexQuadratic,
    ExpConcaveSquared,
    SmoothRealizable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DriftChoice {
    Fixed,
    PerRound,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SmoothKindChoice {
    Convex,
    StronglyConvex,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FamilyParams {
    pub lambda: f64,
    pub drift: DriftChoice,
    pub smooth_kind: SmoothKindChoice,
    pub rotation: f64,
}

impl Default for FamilyParams {
    fn default() -> Self {
        FamilyParams {
            lambda: 1.0,
            drift: DriftChoice::PerRound,
            smooth_kind: SmoothKindChoice::Convex,
            rotation: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DomainChoice {
    Ball,
    Box,
    Simplex,
    Halfspaces,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HalfspaceRow {
    pub a: Vec<f64>,
    pub b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DomainConfig {
    pub kind: DomainChoice,
    pub radius: f64,
    pub lower: Option<Vec<f64>>,
    pub upper: Option<Vec<f64>>,
    pub scale: f64,
    pub rows: Option<Vec<HalfspaceRow>>,
    /// Required for halfspace domains; optional override elsewhere.
    pub diameter_bound: Option<f64>,
    pub projection_tolerance: Option<f64>,
    pub max_projection_iterations: Option<usize>,
}

impl Default for DomainConfig {
    fn default() -> Self {
        DomainConfig {
            kind: DomainChoice::Ball,
            radius: 1.0,
            lower: None,
            upper: None,
            scale: 1.0,
            rows: None,
            diameter_bound: None,
            projection_tolerance: None,
            max_projection_iterations: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlgoParams {
    /// Gradient bound override; 0 means "use the stream certificate".
    pub g_bound: f64,
    pub ons_projection: OnsProjectionChoice,
    /// When false, the wall-clock column records zeros, making traces
    /// byte-identical across repeated runs.
    pub wall_clock: bool,
}

impl Default for AlgoParams {
    fn default() -> Self {
        AlgoParams {
            g_bound: 0.0,
            ons_projection: OnsProjectionChoice::Exact,
            wall_clock: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OnsProjectionChoice {
    Exact,
    Shifted,
}

impl From<OnsProjectionChoice> for OnsProjection {
    fn from(c: OnsProjectionChoice) -> Self {
        match c {
            OnsProjectionChoice::Exact => OnsProjection::Exact,
            OnsProjectionChoice::Shifted => OnsProjection::Shifted,
        }
    }
}

/// One experiment: horizon, dimension, seed, algorithm, family, domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub t: u64,
    pub d: usize,
    pub seed: u64,
    pub algo: AlgoChoice,
    pub family: FamilyChoice,
    pub out: Option<PathBuf>,
    pub domain: DomainConfig,
    pub family_params: FamilyParams,
    pub algo_params: AlgoParams,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            t: 256,
            d: 2,
            seed: 42,
            algo: AlgoChoice::Universal,
            family: FamilyChoice::StronglyConvexQuadratic,
            out: None,
            domain: DomainConfig::default(),
            family_params: FamilyParams::default(),
            algo_params: AlgoParams::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| HarnessError::Config(format!("bad config: {e}")))
    }

    /// Builds and validates the feasible set.
    pub fn build_domain(&self) -> Result<DomainSpec, HarnessError> {
        let dc = &self.domain;
        let mut spec = match dc.kind {
            DomainChoice::Ball => match dc.diameter_bound {
                Some(bound) => DomainSpec::ball_with_bound(self.d, dc.radius, bound),
                None => DomainSpec::ball(self.d, dc.radius),
            },
            DomainChoice::Box => {
                let lower = dc
                    .lower
                    .clone()
                    .unwrap_or_else(|| vec![-dc.radius / (self.d as f64).sqrt(); self.d]);
                let upper = dc
                    .upper
                    .clone()
                    .unwrap_or_else(|| vec![dc.radius / (self.d as f64).sqrt(); self.d]);
                if lower.len() != self.d || upper.len() != self.d {
                    return Err(HarnessError::Config(
                        "box bounds must match the dimension".into(),
                    ));
                }
                let mut spec = DomainSpec::boxed(lower, upper);
                if let Some(bound) = dc.diameter_bound {
                    spec.diameter_bound = bound;
                }
                spec
            }
            DomainChoice::Simplex => {
                let mut spec = DomainSpec::simplex(self.d, dc.scale);
                if let Some(bound) = dc.diameter_bound {
                    spec.diameter_bound = bound;
                }
                spec
            }
            DomainChoice::Halfspaces => {
                let rows = dc.rows.clone().ok_or_else(|| {
                    HarnessError::Config("halfspace domain needs `rows`".into())
                })?;
                let bound = dc.diameter_bound.ok_or_else(|| {
                    HarnessError::Config("halfspace domain needs `diameter_bound`".into())
                })?;
                let rows = rows
                    .into_iter()
                    .map(|r| Halfspace::new(r.a, r.b))
                    .collect::<Result<Vec<_>, _>>()?;
                DomainSpec::halfspaces(self.d, rows, bound)
            }
        };
        if let Some(tol) = dc.projection_tolerance {
            spec.projection_tolerance = tol;
        }
        if let Some(iters) = dc.max_projection_iterations {
            spec.max_projection_iterations = iters;
        }
        spec.validate()?;
        if matches!(spec.kind, DomainKind::HalfspaceIntersection { .. }) {
            spec.validate_diameter_by_sampling(32, self.seed ^ 0x5EED)?;
        }
        Ok(spec)
    }

    pub fn build_family(&self) -> ProblemFamily {
        let fp = &self.family_params;
        let kind = match self.family {
            FamilyChoice::LinearAdversarial => {
                FamilyKind::LinearAdversarial { rotation: fp.rotation }
            }
            FamilyChoice::StronglyConvexQuadratic => FamilyKind::StronglyConvexQuadratic {
                lambda: fp.lambda,
                drift: match fp.drift {
                    DriftChoice::Fixed => TargetDrift::Fixed,
                    DriftChoice::PerRound => TargetDrift::PerRound,
                },
            },
            FamilyChoice::ExpConcaveSquared => FamilyKind::ExpConcaveSquared,
            FamilyChoice::SmoothRealizable => FamilyKind::SmoothRealizable {
                lambda: match fp.smooth_kind {
                    SmoothKindChoice::Convex => None,
                    SmoothKindChoice::StronglyConvex => Some(fp.lambda),
                },
            },
        };
        ProblemFamily {
            kind,
            dimension: self.d,
            horizon: self.t,
            seed: self.seed,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_roundtrip_and_defaults() {
        let text = r#"
            t = 64
            d = 3
            seed = 7
            algo = "universal-smooth"
            family = "smooth-realizable"

            [domain]
            kind = "simplex"
            scale = 2.0

            [family_params]
            smooth_kind = "convex"
        "#;
        let cfg: RunConfig = toml::from_str(text).unwrap();
        assert_eq!(cfg.t, 64);
        assert_eq!(cfg.algo, AlgoChoice::UniversalSmooth);
        let dom = cfg.build_domain().unwrap();
        assert_eq!(dom.dimension, 3);
        assert!(matches!(dom.kind, DomainKind::Simplex { .. }));
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let text = "t = 4\nnot_a_field = 1\n";
        assert!(toml::from_str::<RunConfig>(text).is_err());
    }

    #[test]
    fn halfspace_domain_requires_rows_and_bound() {
        let cfg = RunConfig {
            domain: DomainConfig { kind: DomainChoice::Halfspaces, ..Default::default() },
            ..Default::default()
        };
        assert!(matches!(cfg.build_domain(), Err(HarnessError::Config(_))));
    }

    #[test]
    fn halfspace_domain_builds_with_rows() {
        let cfg = RunConfig {
            d: 2,
            domain: DomainConfig {
                kind: DomainChoice::Halfspaces,
                rows: Some(vec![
                    HalfspaceRow { a: vec![1.0, 0.0], b: 0.5 },
                    HalfspaceRow { a: vec![0.0, 1.0], b: 0.5 },
                    HalfspaceRow { a: vec![-1.0, 0.0], b: 0.5 },
                    HalfspaceRow { a: vec![0.0, -1.0], b: 0.5 },
                ]),
                diameter_bound: Some(2.0_f64.sqrt()),
                ..Default::default()
            },
            ..Default::default()
        };
        let dom = cfg.build_domain().unwrap();
        assert_eq!(dom.dimension, 2);
    }
}
