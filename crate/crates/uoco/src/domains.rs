//! Convex feasible sets with Euclidean projection oracles.
//!
//! Four variants are supported: origin-centered balls, coordinate boxes,
//! the solid simplex {x ≥ 0, Σx ≤ s}, and intersections of halfspaces.
//! The first three project in closed form; halfspace intersections run
//! Dykstra's algorithm, which converges to the exact Euclidean projection
//! (plain alternating projections would only produce a feasible point).
//!
//! Every set must contain the origin and carries a diameter bound `D`,
//! which doubles as the radius of the enclosing ball the online learners
//! work in.

use std::cell::Cell;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::vecmath::{clip_to_ball, dist, dot, norm};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DomainError {
    #[error("dimension mismatch: domain is {expected}-dimensional, point is {got}-dimensional")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("iterative projection failed to converge (residual {residual:e})")]
    NonConvergence { residual: f64 },
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
}

/// One halfspace {x : ⟨a, x⟩ ≤ b}. Rows are stored with unit normals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Halfspace {
    pub normal: Vec<f64>,
    pub offset: f64,
}

impl Halfspace {
    /// Normalizes the row so the normal has unit length.
    pub fn new(normal: Vec<f64>, offset: f64) -> Result<Self, DomainError> {
        let n = norm(&normal);
        if n <= 1e-12 {
            return Err(DomainError::InvalidDomain(
                "halfspace normal must be nonzero".into(),
            ));
        }
        Ok(Halfspace {
            normal: normal.iter().map(|v| v / n).collect(),
            offset: offset / n,
        })
    }

    /// Signed distance to the boundary; positive outside.
    pub fn violation(&self, x: &[f64]) -> f64 {
        dot(&self.normal, x) - self.offset
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DomainKind {
    /// {x : ‖x‖ ≤ radius}
    Ball { radius: f64 },
    /// {x : lower ≤ x ≤ upper} coordinate-wise
    Box { lower: Vec<f64>, upper: Vec<f64> },
    /// {x : x ≥ 0, Σ x_i ≤ scale} — the solid simplex, which contains the origin
    Simplex { scale: f64 },
    /// {x : ⟨a_j, x⟩ ≤ b_j for all j}
    HalfspaceIntersection { rows: Vec<Halfspace> },
}

/// A convex feasible set with a projection oracle and known diameter bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub kind: DomainKind,
    pub dimension: usize,
    /// Upper bound `D` on the set diameter; also the radius of the enclosing
    /// ball, since the set contains the origin.
    pub diameter_bound: f64,
    /// Acceptance tolerance for iterative projections.
    pub projection_tolerance: f64,
    /// Sweep budget for Dykstra's algorithm.
    pub max_projection_iterations: usize,
}

pub const DEFAULT_PROJECTION_TOLERANCE: f64 = 1e-8;
pub const DEFAULT_MAX_PROJECTION_ITERATIONS: usize = 100_000;

impl DomainSpec {
    pub fn ball(dimension: usize, radius: f64) -> Self {
        DomainSpec {
            kind: DomainKind::Ball { radius },
            dimension,
            diameter_bound: 2.0 * radius,
            projection_tolerance: 0.0,
            max_projection_iterations: 1,
        }
    }

    /// Ball with an explicit diameter bound. Used when the enclosing ball
    /// should coincide with the set itself (`diameter_bound = radius`).
    pub fn ball_with_bound(dimension: usize, radius: f64, diameter_bound: f64) -> Self {
        DomainSpec {
            diameter_bound,
            ..Self::ball(dimension, radius)
        }
    }

    pub fn boxed(lower: Vec<f64>, upper: Vec<f64>) -> Self {
        let dimension = lower.len();
        let diameter_bound = dist(&lower, &upper);
        DomainSpec {
            kind: DomainKind::Box { lower, upper },
            dimension,
            diameter_bound,
            projection_tolerance: 0.0,
            max_projection_iterations: 1,
        }
    }

    pub fn simplex(dimension: usize, scale: f64) -> Self {
        DomainSpec {
            kind: DomainKind::Simplex { scale },
            dimension,
            diameter_bound: scale * 2.0_f64.sqrt(),
            projection_tolerance: 0.0,
            max_projection_iterations: 1,
        }
    }

    pub fn halfspaces(
        dimension: usize,
        rows: Vec<Halfspace>,
        diameter_bound: f64,
    ) -> Self {
        DomainSpec {
            kind: DomainKind::HalfspaceIntersection { rows },
            dimension,
            diameter_bound,
            projection_tolerance: DEFAULT_PROJECTION_TOLERANCE,
            max_projection_iterations: DEFAULT_MAX_PROJECTION_ITERATIONS,
        }
    }

    /// Checks origin membership, positivity of the bounds, and containment
    /// of the set in the ball of radius `diameter_bound`.
    pub fn validate(&self) -> Result<(), DomainError> {
        if self.dimension == 0 {
            return Err(DomainError::InvalidDomain("dimension must be positive".into()));
        }
        if !(self.diameter_bound > 0.0) {
            return Err(DomainError::InvalidDomain("diameter bound must be positive".into()));
        }
        if self.projection_tolerance < 0.0 {
            return Err(DomainError::InvalidDomain(
                "projection tolerance must be nonnegative".into(),
            ));
        }
        if self.max_projection_iterations == 0 {
            return Err(DomainError::InvalidDomain(
                "max projection iterations must be positive".into(),
            ));
        }
        match &self.kind {
            DomainKind::Ball { radius } => {
                if !(*radius > 0.0) {
                    return Err(DomainError::InvalidDomain("ball radius must be positive".into()));
                }
                if *radius > self.diameter_bound + 1e-12 {
                    return Err(DomainError::InvalidDomain(
                        "ball is not contained in the enclosing ball of radius D".into(),
                    ));
                }
            }
            DomainKind::Box { lower, upper } => {
                if lower.len() != self.dimension || upper.len() != self.dimension {
                    return Err(DomainError::InvalidDomain("box bound dimensions differ".into()));
                }
                let mut corner_sq = 0.0;
                for (l, u) in lower.iter().zip(upper) {
                    if l > u {
                        return Err(DomainError::InvalidDomain("box has empty coordinate range".into()));
                    }
                    if *l > 0.0 || *u < 0.0 {
                        return Err(DomainError::InvalidDomain("box must contain the origin".into()));
                    }
                    corner_sq += l.abs().max(u.abs()).powi(2);
                }
                if corner_sq.sqrt() > self.diameter_bound + 1e-12 {
                    return Err(DomainError::InvalidDomain(
                        "box is not contained in the enclosing ball of radius D".into(),
                    ));
                }
            }
            DomainKind::Simplex { scale } => {
                if !(*scale > 0.0) {
                    return Err(DomainError::InvalidDomain("simplex scale must be positive".into()));
                }
                if *scale > self.diameter_bound + 1e-12 {
                    return Err(DomainError::InvalidDomain(
                        "simplex is not contained in the enclosing ball of radius D".into(),
                    ));
                }
            }
            DomainKind::HalfspaceIntersection { rows } => {
                if rows.is_empty() {
                    return Err(DomainError::InvalidDomain(
                        "halfspace intersection needs at least one row".into(),
                    ));
                }
                for r in rows {
                    if r.normal.len() != self.dimension {
                        return Err(DomainError::InvalidDomain("halfspace row dimension differs".into()));
                    }
                    if r.offset < 0.0 {
                        return Err(DomainError::InvalidDomain(
                            "halfspace must contain the origin (offset < 0)".into(),
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    fn check_dim(&self, point: &[f64]) -> Result<(), DomainError> {
        if point.len() != self.dimension {
            return Err(DomainError::DimensionMismatch {
                expected: self.dimension,
                got: point.len(),
            });
        }
        Ok(())
    }

    /// Euclidean projection onto the set. Exact for ball/box/simplex,
    /// within `projection_tolerance` for halfspace intersections.
    pub fn project(&self, point: &[f64]) -> Result<Vec<f64>, DomainError> {
        self.check_dim(point)?;
        match &self.kind {
            DomainKind::Ball { radius } => Ok(clip_to_ball(point, *radius)),
            DomainKind::Box { lower, upper } => Ok(point
                .iter()
                .zip(lower.iter().zip(upper))
                .map(|(x, (l, u))| x.max(*l).min(*u))
                .collect()),
            DomainKind::Simplex { scale } => Ok(project_solid_simplex(point, *scale)),
            DomainKind::HalfspaceIntersection { rows } => dykstra(
                point,
                rows,
                self.projection_tolerance.max(1e-14),
                self.max_projection_iterations,
            ),
        }
    }

    /// Distance to the set, ‖y − Π(y)‖.
    pub fn distance_to(&self, point: &[f64]) -> Result<f64, DomainError> {
        let p = self.project(point)?;
        Ok(dist(point, &p))
    }

    /// Membership within `tol`, measured through the projection oracle.
    pub fn membership(&self, point: &[f64], tol: f64) -> Result<bool, DomainError> {
        Ok(self.distance_to(point)? <= tol)
    }

    /// Radius of the smallest origin-centered ball known to contain the set.
    /// Analytic for the closed-form variants; `diameter_bound` otherwise.
    pub fn sup_norm_bound(&self) -> f64 {
        match &self.kind {
            DomainKind::Ball { radius } => *radius,
            DomainKind::Box { lower, upper } => lower
                .iter()
                .zip(upper)
                .map(|(l, u)| l.abs().max(u.abs()).powi(2))
                .sum::<f64>()
                .sqrt(),
            DomainKind::Simplex { scale } => *scale,
            DomainKind::HalfspaceIntersection { .. } => self.diameter_bound,
        }
    }

    /// Samples projected points and rejects the configuration when their
    /// spread exceeds the declared diameter bound or they escape the
    /// enclosing ball. Used to vet user-supplied bounds for halfspace
    /// domains, where the true diameter is not available in closed form.
    pub fn validate_diameter_by_sampling(
        &self,
        samples: usize,
        seed: u64,
    ) -> Result<(), DomainError> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let scale = 2.0 * self.diameter_bound;
        let mut points = Vec::with_capacity(samples);
        for _ in 0..samples {
            let raw: Vec<f64> = (0..self.dimension)
                .map(|_| rng.gen_range(-scale..scale))
                .collect();
            let p = self.project(&raw)?;
            if norm(&p) > self.diameter_bound + 1e-6 {
                return Err(DomainError::InvalidDomain(format!(
                    "projected sample has norm {} exceeding diameter bound {}",
                    norm(&p),
                    self.diameter_bound
                )));
            }
            points.push(p);
        }
        for i in 0..points.len() {
            for j in (i + 1)..points.len() {
                let d = dist(&points[i], &points[j]);
                if d > self.diameter_bound + 1e-6 {
                    return Err(DomainError::InvalidDomain(format!(
                        "observed spread {} exceeds diameter bound {}",
                        d, self.diameter_bound
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Projection onto {x ≥ 0, Σ x_i ≤ scale}.
///
/// Clamping to the nonnegative orthant is the answer whenever the clamped
/// point already satisfies the budget; otherwise the projection lands on
/// the face {Σ = scale} and is computed by the exact sort-and-threshold
/// rule in O(d log d).
fn project_solid_simplex(point: &[f64], scale: f64) -> Vec<f64> {
    let clamped: Vec<f64> = point.iter().map(|x| x.max(0.0)).collect();
    if clamped.iter().sum::<f64>() <= scale {
        return clamped;
    }
    let mut sorted = point.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (j, &u) in sorted.iter().enumerate() {
        cumulative += u;
        let candidate = (cumulative - scale) / (j as f64 + 1.0);
        if u - candidate > 0.0 {
            theta = candidate;
        } else {
            break;
        }
    }
    point.iter().map(|x| (x - theta).max(0.0)).collect()
}

/// Dykstra's algorithm over the halfspace rows. Unlike plain alternating
/// projections, the correction vectors make the limit the true Euclidean
/// projection onto the intersection.
///
/// Stops on a small per-sweep change of the correction vectors plus
/// feasibility. Iterate change alone is unreliable here: the iterate can
/// plateau while the corrections still trade mass between constraints.
fn dykstra(
    point: &[f64],
    rows: &[Halfspace],
    tol: f64,
    max_sweeps: usize,
) -> Result<Vec<f64>, DomainError> {
    let d = point.len();
    let mut x = point.to_vec();
    let mut corrections = vec![0.0; d * rows.len()];
    let mut residual = f64::INFINITY;
    for _ in 0..max_sweeps {
        let mut correction_change_sq = 0.0;
        for (j, row) in rows.iter().enumerate() {
            let p = &mut corrections[j * d..(j + 1) * d];
            // z = x + p, then project z onto the halfspace in place of x.
            for (xi, pi) in x.iter_mut().zip(p.iter()) {
                *xi += pi;
            }
            let v = row.violation(&x).max(0.0);
            for ((xi, pi), ai) in x.iter_mut().zip(p.iter_mut()).zip(&row.normal) {
                *xi -= v * ai;
                let p_new = v * ai;
                correction_change_sq += (*pi - p_new) * (*pi - p_new);
                *pi = p_new;
            }
        }
        let violation = rows
            .iter()
            .map(|r| r.violation(&x).max(0.0))
            .fold(0.0, f64::max);
        residual = correction_change_sq.sqrt().max(violation);
        if residual <= tol {
            return Ok(x);
        }
    }
    Err(DomainError::NonConvergence { residual })
}

/// Wraps a domain with a projection call counter, so runs can certify how
/// many projections onto the feasible set they performed.
#[derive(Debug)]
pub struct CountingDomain {
    spec: DomainSpec,
    count: Cell<u64>,
}

impl CountingDomain {
    pub fn new(spec: DomainSpec) -> Self {
        CountingDomain { spec, count: Cell::new(0) }
    }

    pub fn spec(&self) -> &DomainSpec {
        &self.spec
    }

    pub fn count(&self) -> u64 {
        self.count.get()
    }

    /// Rolls the counter back, used to keep failed rounds atomic.
    pub fn reset_count(&self, value: u64) {
        self.count.set(value);
    }

    pub fn project(&self, point: &[f64]) -> Result<Vec<f64>, DomainError> {
        self.count.set(self.count.get() + 1);
        self.spec.project(point)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracles;
    use crate::vecmath::sub;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit_ball(d: usize) -> DomainSpec {
        DomainSpec::ball(d, 1.0)
    }

    #[test]
    fn ball_projection_rescales() {
        let p = unit_ball(2).project(&[3.0, 4.0]).unwrap();
        assert!((p[0] - 0.6).abs() < 1e-12 && (p[1] - 0.8).abs() < 1e-12);
    }

    #[test]
    fn interior_point_is_fixed() {
        let p = unit_ball(2).project(&[0.1, -0.2]).unwrap();
        assert_eq!(p, vec![0.1, -0.2]);
    }

    #[test]
    fn distances() {
        assert!((unit_ball(2).distance_to(&[2.0, 0.0]).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(unit_ball(3).distance_to(&[0.0; 3]).unwrap(), 0.0);
        let b = DomainSpec::boxed(vec![-0.5, -0.5], vec![0.5, 0.5]);
        let expected = (0.5_f64 * 0.5 * 2.0).sqrt();
        assert!((b.distance_to(&[1.0, 1.0]).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn membership_tolerances() {
        let b = unit_ball(2);
        assert!(b.membership(&[0.0, 0.0], 0.0).unwrap());
        assert!(b.membership(&[1.0 + 1e-12, 0.0], 1e-9).unwrap());
        assert!(!b.membership(&[2.0, 0.0], 1e-9).unwrap());
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let err = unit_ball(2).project(&[1.0, 2.0, 3.0]).unwrap_err();
        assert!(matches!(err, DomainError::DimensionMismatch { expected: 2, got: 3 }));
    }

    #[test]
    fn simplex_contains_origin_and_respects_budget() {
        let s = DomainSpec::simplex(3, 1.0);
        assert!(s.membership(&[0.0; 3], 0.0).unwrap());
        let p = s.project(&[0.9, 0.9, 0.9]).unwrap();
        assert!(p.iter().all(|&x| x >= 0.0));
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        // Interior point with slack stays put.
        let q = s.project(&[0.2, 0.1, 0.3]).unwrap();
        assert_eq!(q, vec![0.2, 0.1, 0.3]);
        // Negative coordinates clamp without engaging the budget.
        let r = s.project(&[-0.4, 0.3, -0.1]).unwrap();
        assert_eq!(r, vec![0.0, 0.3, 0.0]);
    }

    fn random_halfspace_domain(rng: &mut ChaCha8Rng, d: usize, m: usize) -> DomainSpec {
        let rows: Vec<Halfspace> = (0..m)
            .map(|_| {
                let a: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let b = rng.gen_range(0.05..0.6);
                Halfspace::new(a, b).unwrap()
            })
            .collect();
        // Intersect with a generous box of halfspaces to keep the set bounded.
        let mut all = rows;
        for i in 0..d {
            let mut e = vec![0.0; d];
            e[i] = 1.0;
            all.push(Halfspace::new(e.clone(), 1.0).unwrap());
            e[i] = -1.0;
            all.push(Halfspace::new(e, 1.0).unwrap());
        }
        let bound = 2.0 * (d as f64).sqrt();
        DomainSpec::halfspaces(d, all, bound)
    }

    #[test]
    fn dykstra_matches_active_set_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..60 {
            let dom = random_halfspace_domain(&mut rng, 3, 3);
            let y: Vec<f64> = (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let p = dom.project(&y).unwrap();
            let rows = match &dom.kind {
                DomainKind::HalfspaceIntersection { rows } => rows.clone(),
                _ => unreachable!(),
            };
            let q = oracles::project_polyhedron_active_set(&y, &rows).unwrap();
            assert!(
                dist(&p, &q) < 1e-6,
                "dykstra {:?} vs oracle {:?} for {:?}",
                p,
                q,
                y
            );
        }
    }

    #[test]
    fn dykstra_reports_nonconvergence_when_budget_exhausted() {
        let rows = vec![
            Halfspace::new(vec![1.0, 0.0], 0.2).unwrap(),
            Halfspace::new(vec![0.0, 1.0], 0.2).unwrap(),
            Halfspace::new(vec![-1.0, -1.0], 0.5).unwrap(),
        ];
        let mut dom = DomainSpec::halfspaces(2, rows, 2.0);
        dom.max_projection_iterations = 1;
        dom.projection_tolerance = 1e-14;
        let err = dom.project(&[5.0, 5.0]).unwrap_err();
        assert!(matches!(err, DomainError::NonConvergence { .. }));
    }

    fn exact_domains() -> Vec<DomainSpec> {
        vec![
            unit_ball(4),
            DomainSpec::boxed(vec![-0.3, -1.0, -0.2, 0.0], vec![0.4, 0.1, 1.0, 0.8]),
            DomainSpec::simplex(4, 1.5),
        ]
    }

    #[test]
    fn projection_is_idempotent_and_nonexpansive() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut domains = exact_domains();
        domains.push(random_halfspace_domain(&mut rng, 3, 3));
        for dom in domains {
            let slack = dom.projection_tolerance;
            for _ in 0..2500 {
                let x: Vec<f64> = (0..dom.dimension).map(|_| rng.gen_range(-3.0..3.0)).collect();
                let y: Vec<f64> = (0..dom.dimension).map(|_| rng.gen_range(-3.0..3.0)).collect();
                let px = dom.project(&x).unwrap();
                let py = dom.project(&y).unwrap();
                assert!(dist(&dom.project(&px).unwrap(), &px) <= 2.0 * slack + 2e-12);
                assert!(dist(&px, &py) <= dist(&x, &y) + 4.0 * slack + 4e-12);
            }
        }
    }

    #[test]
    fn obtuse_angle_property_holds() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let mut domains = exact_domains();
        domains.push(random_halfspace_domain(&mut rng, 3, 3));
        for dom in domains {
            let slack = dom.projection_tolerance.max(1e-12);
            for _ in 0..2500 {
                let x: Vec<f64> = (0..dom.dimension).map(|_| rng.gen_range(-3.0..3.0)).collect();
                let z_raw: Vec<f64> = (0..dom.dimension).map(|_| rng.gen_range(-3.0..3.0)).collect();
                let px = dom.project(&x).unwrap();
                let z = dom.project(&z_raw).unwrap();
                let gap = dot(&sub(&x, &px), &sub(&z, &px));
                assert!(gap <= slack * dist(&x, &px).max(1.0));
            }
        }
    }

    #[test]
    fn closed_form_projections_match_brute_force_oracles() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let ball = unit_ball(3);
        let boxed = DomainSpec::boxed(vec![-0.5, -0.2, -1.0], vec![0.5, 0.9, 0.1]);
        let simplex = DomainSpec::simplex(3, 1.0);
        for _ in 0..200 {
            let y: Vec<f64> = (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let pb = ball.project(&y).unwrap();
            assert!(dist(&pb, &oracles::project_ball_bisection(&y, 1.0)) < 1e-9);
            let px = boxed.project(&y).unwrap();
            let (l, u) = match &boxed.kind {
                DomainKind::Box { lower, upper } => (lower.clone(), upper.clone()),
                _ => unreachable!(),
            };
            assert!(dist(&px, &oracles::project_box_enumeration(&y, &l, &u)) < 1e-9);
            let ps = simplex.project(&y).unwrap();
            assert!(dist(&ps, &oracles::project_solid_simplex_enumeration(&y, 1.0)) < 1e-9);
        }
    }

    #[test]
    fn counting_domain_counts() {
        let dom = CountingDomain::new(unit_ball(2));
        for _ in 0..5 {
            dom.project(&[2.0, 0.0]).unwrap();
        }
        assert_eq!(dom.count(), 5);
    }

    #[test]
    fn sampling_validation_rejects_understated_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let mut dom = random_halfspace_domain(&mut rng, 2, 2);
        dom.diameter_bound = 1e-3;
        assert!(dom.validate_diameter_by_sampling(16, 1).is_err());
    }

    #[test]
    fn validation_rejects_malformed_domains() {
        assert!(DomainSpec::boxed(vec![0.2, -1.0], vec![0.5, 1.0]).validate().is_err());
        assert!(DomainSpec::ball(0, 1.0).validate().is_err());
        let h = DomainSpec::halfspaces(
            2,
            vec![Halfspace { normal: vec![1.0, 0.0], offset: -0.5 }],
            1.0,
        );
        assert!(h.validate().is_err());
        assert!(unit_ball(3).validate().is_ok());
    }
}
