//! Synthetic loss-stream generators, one per function class.
//!
//! Every generated stream carries certificates (gradient bound, moduli,
//! smoothness constant) computed from the actual draws, so the learner can
//! be configured honestly and the class properties can be spot-checked.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::domains::DomainSpec;
use crate::universal::LossStream;
use crate::vecmath::{add_scaled, dot, norm, scale, sub};

use super::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetDrift {
    /// One target for the whole stream; the problem is realizable.
    Fixed,
    /// A fresh target every round; regret grows and rates become visible.
    PerRound,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FamilyKind {
    /// Sign-alternating linear losses whose direction wobbles by `rotation`
    /// each round, so consecutive pairs cancel only partially and the
    /// comparator gains on the √T scale.
    LinearAdversarial { rotation: f64 },
    /// f_t(x) = (λ/2)‖x − z_t‖².
    StronglyConvexQuadratic { lambda: f64, drift: TargetDrift },
    /// f_t(x) = (⟨a_t, x⟩ − b_t)².
    ExpConcaveSquared,
    /// Nonnegative smooth losses minimized to zero at a fixed feasible
    /// point: squared-affine when `lambda` is absent, isotropic quadratic
    /// otherwise.
    SmoothRealizable { lambda: Option<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemFamily {
    pub kind: FamilyKind,
    pub dimension: usize,
    pub horizon: u64,
    pub seed: u64,
}

/// One round's loss in closed form, replayable for the comparator.
#[derive(Debug, Clone, PartialEq)]
pub enum RoundLoss {
    Linear { grad: Vec<f64> },
    Quadratic { lambda: f64, target: Vec<f64> },
    SquaredAffine { a: Vec<f64>, b: f64 },
}

impl RoundLoss {
    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            RoundLoss::Linear { grad } => dot(grad, x),
            RoundLoss::Quadratic { lambda, target } => {
                0.5 * lambda * crate::vecmath::norm_sq(&sub(x, target))
            }
            RoundLoss::SquaredAffine { a, b } => {
                let r = dot(a, x) - b;
                r * r
            }
        }
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        match self {
            RoundLoss::Linear { grad } => grad.clone(),
            RoundLoss::Quadratic { lambda, target } => scale(&sub(x, target), *lambda),
            RoundLoss::SquaredAffine { a, b } => scale(a, 2.0 * (dot(a, x) - b)),
        }
    }

    /// Upper bound on the Hessian spectral norm.
    pub fn curvature(&self) -> f64 {
        match self {
            RoundLoss::Linear { .. } => 0.0,
            RoundLoss::Quadratic { lambda, .. } => *lambda,
            RoundLoss::SquaredAffine { a, .. } => 2.0 * crate::vecmath::norm_sq(a),
        }
    }
}

/// Class certificates attached to a generated stream, valid on the domain
/// the stream was generated for.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamCertificates {
    pub grad_bound: f64,
    pub strong_convexity: Option<f64>,
    pub exp_concavity: Option<f64>,
    pub smoothness: Option<f64>,
    pub nonnegative: bool,
    /// Feasible point where every loss vanishes, when the stream is
    /// realizable.
    pub realizable_at: Option<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct GeneratedStream {
    pub losses: Vec<RoundLoss>,
    pub certificates: StreamCertificates,
}

impl LossStream for GeneratedStream {
    fn horizon(&self) -> u64 {
        self.losses.len() as u64
    }

    fn gradient(&self, t: u64, x: &[f64]) -> Result<Vec<f64>, String> {
        self.losses
            .get((t - 1) as usize)
            .map(|l| l.gradient(x))
            .ok_or_else(|| format!("round {t} beyond stream horizon"))
    }

    fn value(&self, t: u64, x: &[f64]) -> f64 {
        self.losses[(t - 1) as usize].value(x)
    }
}

fn standard_normal_vec(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| StandardNormal.sample(rng)).collect()
}

/// Uniform draw from the enclosing box, projected onto the set and pulled
/// toward the origin by `shrink` to stay away from the boundary.
fn random_feasible(
    rng: &mut ChaCha8Rng,
    domain: &DomainSpec,
    shrink: f64,
) -> Result<Vec<f64>, HarnessError> {
    let r = domain.sup_norm_bound();
    let raw: Vec<f64> = (0..domain.dimension).map(|_| rng.gen_range(-r..r)).collect();
    let p = domain.project(&raw)?;
    Ok(scale(&p, shrink))
}

/// Deterministic stream construction for a family on a domain.
pub fn generate_stream(
    family: &ProblemFamily,
    domain: &DomainSpec,
) -> Result<GeneratedStream, HarnessError> {
    if family.dimension != domain.dimension {
        return Err(HarnessError::InfeasibleFamily(format!(
            "family dimension {} does not match domain dimension {}",
            family.dimension, domain.dimension
        )));
    }
    if family.horizon < 2 {
        return Err(HarnessError::InfeasibleFamily("horizon must be at least 2".into()));
    }
    let modulus_range = 1.0 / family.horizon as f64..=1.0;
    let check_modulus = |name: &str, m: f64| {
        if !modulus_range.contains(&m) {
            Err(HarnessError::InfeasibleFamily(format!(
                "{name} = {m} outside [1/T, 1]"
            )))
        } else {
            Ok(())
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(family.seed);
    let d = family.dimension;
    let t_total = family.horizon as usize;
    let sup = domain.sup_norm_bound();

    match &family.kind {
        FamilyKind::StronglyConvexQuadratic { lambda, drift } => {
            check_modulus("lambda", *lambda)?;
            let fixed = random_feasible(&mut rng, domain, 0.6)?;
            let mut losses = Vec::with_capacity(t_total);
            let mut max_target_norm: f64 = 0.0;
            for _ in 0..t_total {
                let target = match drift {
                    TargetDrift::Fixed => fixed.clone(),
                    TargetDrift::PerRound => random_feasible(&mut rng, domain, 0.9)?,
                };
                max_target_norm = max_target_norm.max(norm(&target));
                losses.push(RoundLoss::Quadratic { lambda: *lambda, target });
            }
            let grad_bound = lambda * (sup + max_target_norm);
            let realizable = matches!(drift, TargetDrift::Fixed).then(|| fixed.clone());
            Ok(GeneratedStream {
                losses,
                certificates: StreamCertificates {
                    grad_bound,
                    strong_convexity: Some(*lambda),
                    exp_concavity: None,
                    smoothness: Some(*lambda),
                    nonnegative: true,
                    realizable_at: realizable,
                },
            })
        }
        FamilyKind::ExpConcaveSquared => {
            let mut losses = Vec::with_capacity(t_total);
            let mut max_residual: f64 = 0.0;
            let mut max_curvature: f64 = 0.0;
            for _ in 0..t_total {
                let dirn = standard_normal_vec(&mut rng, d);
                let len = rng.gen_range(0.8..1.0);
                let a = scale(&dirn, len / norm(&dirn).max(1e-12));
                let b = rng.gen_range(-0.35 * sup..0.35 * sup);
                max_residual = max_residual.max(norm(&a) * sup + b.abs());
                max_curvature = max_curvature.max(2.0 * crate::vecmath::norm_sq(&a));
                losses.push(RoundLoss::SquaredAffine { a, b });
            }
            // (⟨a,x⟩−b)² is α-exp-concave on the set whenever
            // α ≤ 1/(2·max residual²): the Hessian 2aa' dominates
            // α·∇f∇f' = 4α r² aa' there.
            let alpha = 1.0 / (2.0 * max_residual * max_residual);
            Ok(GeneratedStream {
                losses,
                certificates: StreamCertificates {
                    grad_bound: 2.0 * max_residual,
                    strong_convexity: None,
                    exp_concavity: Some(alpha),
                    smoothness: Some(max_curvature),
                    nonnegative: true,
                    realizable_at: None,
                },
            })
        }
        FamilyKind::SmoothRealizable { lambda } => {
            let z_star = random_feasible(&mut rng, domain, 0.5)?;
            match lambda {
                Some(lam) => {
                    check_modulus("lambda", *lam)?;
                    let losses = vec![
                        RoundLoss::Quadratic { lambda: *lam, target: z_star.clone() };
                        t_total
                    ];
                    Ok(GeneratedStream {
                        losses,
                        certificates: StreamCertificates {
                            grad_bound: lam * (sup + norm(&z_star)),
                            strong_convexity: Some(*lam),
                            exp_concavity: None,
                            smoothness: Some(*lam),
                            nonnegative: true,
                            realizable_at: Some(z_star),
                        },
                    })
                }
                None => {
                    let mut losses = Vec::with_capacity(t_total);
                    let mut max_residual: f64 = 0.0;
                    let mut max_curvature: f64 = 0.0;
                    for _ in 0..t_total {
                        let dirn = standard_normal_vec(&mut rng, d);
                        let len = rng.gen_range(0.4..1.0);
                        let a = scale(&dirn, len / norm(&dirn).max(1e-12));
                        let b = dot(&a, &z_star);
                        max_residual = max_residual.max(norm(&a) * (sup + norm(&z_star)));
                        max_curvature = max_curvature.max(2.0 * crate::vecmath::norm_sq(&a));
                        losses.push(RoundLoss::SquaredAffine { a, b });
                    }
                    Ok(GeneratedStream {
                        losses,
                        certificates: StreamCertificates {
                            grad_bound: 2.0 * max_residual,
                            strong_convexity: None,
                            exp_concavity: None,
                            smoothness: Some(max_curvature),
                            nonnegative: true,
                            realizable_at: Some(z_star),
                        },
                    })
                }
            }
        }
        FamilyKind::LinearAdversarial { rotation } => {
            if !(*rotation >= 0.0) {
                return Err(HarnessError::InfeasibleFamily("rotation must be nonnegative".into()));
            }
            let base_raw = standard_normal_vec(&mut rng, d);
            let base = scale(&base_raw, 1.0 / norm(&base_raw).max(1e-12));
            let mut losses = Vec::with_capacity(t_total);
            for t in 0..t_total {
                let noise = standard_normal_vec(&mut rng, d);
                let wobbled = add_scaled(&base, *rotation, &noise);
                let dirn = scale(&wobbled, 1.0 / norm(&wobbled).max(1e-12));
                let sign = if t % 2 == 0 { 1.0 } else { -1.0 };
                losses.push(RoundLoss::Linear { grad: scale(&dirn, sign) });
            }
            Ok(GeneratedStream {
                losses,
                certificates: StreamCertificates {
                    grad_bound: 1.0,
                    strong_convexity: None,
                    exp_concavity: None,
                    smoothness: Some(0.0),
                    nonnegative: false,
                    realizable_at: None,
                },
            })
        }
    }
}
