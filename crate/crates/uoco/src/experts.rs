//! Expert algorithms over the enclosing ball.
//!
//! Five experts cover the function classes the universal learner adapts to:
//!
//! * `Cvx` — gradient descent with 1/√t steps, for general convex losses.
//! * `Sc` — gradient descent with 1/(λ̂t) steps on a loss whose quadratic
//!   regularizer is anchored at the projected decision, for strongly convex
//!   losses with candidate modulus λ̂.
//! * `Exp` — online Newton step on a squared-linearization loss, for
//!   exp-concave losses with candidate modulus α̂.
//! * `CvxSmooth` — scale-free gradient descent whose step adapts to the
//!   accumulated squared gradient norms, for convex and smooth losses.
//! * `ScSmooth` — gradient descent with an inverse step size accumulating
//!   curvature-weighted gradient mass, for strongly convex smooth losses.
//!
//! All experts keep their iterates inside the ball of radius `D`; none of
//! them ever touches the feasible set, so they cost no projections onto it.

use thiserror::Error;

use crate::linalg::{LinalgError, SymMatrix};
use crate::surrogate::SurrogateContext;
use crate::vecmath::{add_scaled, clip_to_ball, dot, norm, norm_sq, sub, zeros};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExpertError {
    /// The Newton-step curvature matrix lost positive definiteness. Cannot
    /// happen from clean updates; signals state corruption.
    #[error("curvature matrix became singular: {0}")]
    SingularMatrix(#[from] LinalgError),
    #[error("invalid expert configuration: {0}")]
    InvalidConfig(String),
}

/// Which generalized ball projection the Newton-step expert uses when its
/// raw update leaves the ball.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OnsProjection {
    /// Solve argmin_{‖y‖≤D} (y−ŷ)'Σ(y−ŷ) exactly via an eigendecomposition
    /// and a safeguarded multiplier root-find.
    #[default]
    Exact,
    /// Closed-form spectral-shift approximation: apply
    /// (4β̂D²·I + Λ)⁻¹ in the eigenbasis of Σ shifted by its initialization.
    /// Cheaper but does not land exactly on the sphere; retained for
    /// comparison runs.
    Shifted,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExpertKind {
    Cvx,
    CvxSmooth,
    Exp { alpha_hat: f64 },
    Sc { lambda_hat: f64 },
    ScSmooth { lambda_hat: f64 },
}

/// Static configuration shared by one expert across a run.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpertConfig {
    pub kind: ExpertKind,
    /// Gradient norm bound G of the original losses.
    pub grad_bound: f64,
    /// Radius D of the enclosing ball the expert works in.
    pub radius: f64,
    /// Horizon T; moduli are restricted to [1/T, 1].
    pub horizon: u64,
    pub ons_projection: OnsProjection,
}

impl ExpertConfig {
    pub fn new(kind: ExpertKind, grad_bound: f64, radius: f64, horizon: u64) -> Self {
        ExpertConfig {
            kind,
            grad_bound,
            radius,
            horizon,
            ons_projection: OnsProjection::Exact,
        }
    }

    /// β̂ = ½·min{1/(4GD), α̂} for the Newton-step expert.
    pub fn beta_hat(&self) -> Option<f64> {
        match self.kind {
            ExpertKind::Exp { alpha_hat } => {
                Some(0.5 * (1.0 / (4.0 * self.grad_bound * self.radius)).min(alpha_hat))
            }
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<(), ExpertError> {
        if !(self.grad_bound > 0.0) || !(self.radius > 0.0) {
            return Err(ExpertError::InvalidConfig("G and D must be positive".into()));
        }
        if self.horizon < 2 {
            return Err(ExpertError::InvalidConfig("horizon must be at least 2".into()));
        }
        let in_range = |m: f64| m >= 1.0 / self.horizon as f64 - 1e-12 && m <= 1.0 + 1e-12;
        match self.kind {
            ExpertKind::Exp { alpha_hat } if !in_range(alpha_hat) => Err(
                ExpertError::InvalidConfig(format!("alpha_hat {alpha_hat} outside [1/T, 1]")),
            ),
            ExpertKind::Sc { lambda_hat } | ExpertKind::ScSmooth { lambda_hat }
                if !in_range(lambda_hat) =>
            {
                Err(ExpertError::InvalidConfig(format!(
                    "lambda_hat {lambda_hat} outside [1/T, 1]"
                )))
            }
            _ => Ok(()),
        }
    }

    /// Scale-free step numerator; paired with `sogd_delta` this keeps the
    /// first step bounded by D/(√2·G).
    fn sogd_alpha(&self) -> f64 {
        self.radius / 2.0_f64.sqrt()
    }

    fn sogd_delta(&self) -> f64 {
        self.grad_bound * self.grad_bound
    }
}

/// Mutable per-expert state.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpertState {
    iterate: Vec<f64>,
    round: u64,
    /// Curvature matrix and its maintained inverse (Newton-step expert only).
    sigma: Option<SymMatrix>,
    sigma_inv: Option<SymMatrix>,
    /// Accumulated squared surrogate-gradient norms (smooth experts only).
    cumulative_sq: f64,
}

impl ExpertState {
    /// All experts start at the origin, which every conforming feasible set
    /// contains.
    pub fn new(config: &ExpertConfig, dimension: usize) -> Self {
        let (sigma, sigma_inv) = match config.beta_hat() {
            Some(beta) => {
                let eps = 1.0 / (beta * beta * config.radius * config.radius);
                (
                    Some(SymMatrix::scaled_identity(dimension, eps)),
                    Some(SymMatrix::scaled_identity(dimension, 1.0 / eps)),
                )
            }
            None => (None, None),
        };
        ExpertState {
            iterate: zeros(dimension),
            round: 1,
            sigma,
            sigma_inv,
            cumulative_sq: 0.0,
        }
    }

    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn cumulative_sq(&self) -> f64 {
        self.cumulative_sq
    }

    pub fn sigma(&self) -> Option<&SymMatrix> {
        self.sigma.as_ref()
    }

    pub fn iterate(&self) -> &[f64] {
        &self.iterate
    }

    /// Same state with the iterate replaced; the baseline uses this to pin
    /// expert iterates inside the feasible set.
    pub fn with_iterate(mut self, iterate: Vec<f64>) -> Self {
        self.iterate = iterate;
        self
    }
}

/// Current prediction; no state change.
pub fn expert_predict(state: &ExpertState) -> &[f64] {
    &state.iterate
}

/// One update step after observing the round context and the surrogate
/// gradient ∇g at the aggregated point. Returns the successor state.
pub fn expert_update(
    state: &ExpertState,
    config: &ExpertConfig,
    ctx: &SurrogateContext,
    surr_grad: &[f64],
) -> Result<ExpertState, ExpertError> {
    let mut next = state.clone();
    let t = state.round as f64;
    let d_ball = config.radius;
    match config.kind {
        ExpertKind::Cvx => {
            let step = 1.0 / t.sqrt();
            next.iterate = clip_to_ball(&add_scaled(&state.iterate, -step, surr_grad), d_ball);
        }
        ExpertKind::Sc { lambda_hat } => {
            let grad = expert_loss_grad(config, ctx, surr_grad, &state.iterate);
            let step = 1.0 / (lambda_hat * t);
            next.iterate = clip_to_ball(&add_scaled(&state.iterate, -step, &grad), d_ball);
        }
        ExpertKind::CvxSmooth => {
            next.cumulative_sq += norm_sq(surr_grad);
            let step = config.sogd_alpha() / (config.sogd_delta() + next.cumulative_sq).sqrt();
            next.iterate = clip_to_ball(&add_scaled(&state.iterate, -step, surr_grad), d_ball);
        }
        ExpertKind::ScSmooth { lambda_hat } => {
            next.cumulative_sq += norm_sq(surr_grad);
            let g = config.grad_bound;
            let inv_step =
                (1.0 + 2.0 * d_ball / g).powi(2) + lambda_hat / (g * g) * next.cumulative_sq;
            let grad = expert_loss_grad(config, ctx, surr_grad, &state.iterate);
            next.iterate =
                clip_to_ball(&add_scaled(&state.iterate, -1.0 / inv_step, &grad), d_ball);
        }
        ExpertKind::Exp { .. } => {
            let beta = config.beta_hat().expect("Exp expert has beta_hat");
            let grad = expert_loss_grad(config, ctx, surr_grad, &state.iterate);
            let sigma = next.sigma.as_mut().expect("Exp expert has sigma");
            sigma.add_outer(&grad, 1.0);
            let sigma_inv = next.sigma_inv.as_mut().expect("Exp expert has sigma_inv");
            sigma_inv.sherman_morrison_inverse_update(&grad)?;
            let raw = add_scaled(&state.iterate, -1.0 / beta, &sigma_inv.matvec(&grad));
            next.iterate = if norm(&raw) <= d_ball {
                raw
            } else {
                match config.ons_projection {
                    OnsProjection::Exact => {
                        generalized_ball_projection(next.sigma.as_ref().unwrap(), &raw, d_ball)?
                    }
                    OnsProjection::Shifted => shifted_ball_projection(
                        next.sigma.as_ref().unwrap(),
                        &raw,
                        d_ball,
                        beta,
                    )?,
                }
            };
        }
    }
    next.round += 1;
    Ok(next)
}

/// Value of the expert-loss at an arbitrary point, given the surrogate
/// gradient ∇g at the aggregate. Test and audit support; the updates use
/// the closed-form gradients directly.
pub fn expert_loss_value(
    config: &ExpertConfig,
    ctx: &SurrogateContext,
    surr_grad: &[f64],
    y: &[f64],
) -> f64 {
    let linear = dot(surr_grad, &sub(y, &ctx.y_t));
    match config.kind {
        ExpertKind::Cvx | ExpertKind::CvxSmooth => linear,
        ExpertKind::Exp { .. } => {
            let beta = config.beta_hat().unwrap();
            linear + 0.5 * beta * linear * linear
        }
        ExpertKind::Sc { lambda_hat } => {
            linear + 0.5 * lambda_hat * norm_sq(&sub(y, &ctx.x_t))
        }
        ExpertKind::ScSmooth { lambda_hat } => {
            let g = config.grad_bound;
            linear + 0.5 * lambda_hat / (g * g) * norm_sq(surr_grad) * norm_sq(&sub(y, &ctx.x_t))
        }
    }
}

/// Closed-form gradient of the expert-loss at `y`.
pub fn expert_loss_grad(
    config: &ExpertConfig,
    ctx: &SurrogateContext,
    surr_grad: &[f64],
    y: &[f64],
) -> Vec<f64> {
    match config.kind {
        ExpertKind::Cvx | ExpertKind::CvxSmooth => surr_grad.to_vec(),
        ExpertKind::Exp { .. } => {
            let beta = config.beta_hat().unwrap();
            let inner = dot(surr_grad, &sub(y, &ctx.y_t));
            surr_grad.iter().map(|g| g * (1.0 + beta * inner)).collect()
        }
        ExpertKind::Sc { lambda_hat } => add_scaled(surr_grad, lambda_hat, &sub(y, &ctx.x_t)),
        ExpertKind::ScSmooth { lambda_hat } => {
            let g = config.grad_bound;
            let weight = lambda_hat / (g * g) * norm_sq(surr_grad);
            add_scaled(surr_grad, weight, &sub(y, &ctx.x_t))
        }
    }
}

/// Exact solution of argmin_{‖y‖ ≤ radius} (y − target)' Σ (y − target).
///
/// With Σ = V diag(λ) V' the stationarity condition gives
/// y(μ) = V diag(λ/(λ+μ)) V'·target, whose norm decreases monotonically in
/// the multiplier μ ≥ 0. The root of ‖y(μ)‖ = radius is found by Newton
/// iterations safeguarded by bisection; one eigendecomposition per call.
pub fn generalized_ball_projection(
    sigma: &SymMatrix,
    target: &[f64],
    radius: f64,
) -> Result<Vec<f64>, ExpertError> {
    if norm(target) <= radius {
        return Ok(target.to_vec());
    }
    let eig = sigma.jacobi_eigen()?;
    let z = eig.to_basis(target);
    let radius_sq = radius * radius;
    let norm_sq_at = |mu: f64| -> f64 {
        eig.values
            .iter()
            .zip(&z)
            .map(|(&l, &zi)| {
                let c = l / (l + mu);
                c * c * zi * zi
            })
            .sum()
    };
    let derivative_at = |mu: f64| -> f64 {
        eig.values
            .iter()
            .zip(&z)
            .map(|(&l, &zi)| -2.0 * l * l * zi * zi / (l + mu).powi(3))
            .sum()
    };
    let mut hi = 1.0;
    while norm_sq_at(hi) > radius_sq {
        hi *= 2.0;
        if hi > 1e300 {
            return Err(ExpertError::SingularMatrix(LinalgError::SingularMatrix {
                pivot: hi,
            }));
        }
    }
    let mut lo = 0.0;
    let mut mu = hi.min(1.0);
    for _ in 0..200 {
        let phi = norm_sq_at(mu) - radius_sq;
        if phi > 0.0 {
            lo = mu;
        } else {
            hi = mu;
        }
        if phi.abs() <= 1e-26_f64.max(1e-15 * radius_sq) {
            break;
        }
        let dphi = derivative_at(mu);
        let newton = mu - phi / dphi;
        mu = if newton.is_finite() && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
    }
    let scaled: Vec<f64> = eig
        .values
        .iter()
        .zip(&z)
        .map(|(&l, &zi)| l / (l + mu) * zi)
        .collect();
    Ok(eig.from_basis(&scaled))
}

/// Spectral-shift approximation of the generalized projection: works in the
/// eigenbasis of Σ minus its initialization and applies a fixed diagonal
/// shift of 4β̂D². Does not land exactly on the sphere.
fn shifted_ball_projection(
    sigma: &SymMatrix,
    target: &[f64],
    radius: f64,
    beta: f64,
) -> Result<Vec<f64>, ExpertError> {
    let init = 1.0 / (beta * beta * radius * radius);
    let mut centered = sigma.clone();
    centered.add_diagonal(-init);
    let eig = centered.jacobi_eigen()?;
    let st = sigma.matvec(target);
    let z = eig.to_basis(&st);
    let scaled: Vec<f64> = eig
        .values
        .iter()
        .zip(&z)
        .map(|(&l, &zi)| zi / (4.0 * beta * radius * radius + l))
        .collect();
    Ok(eig.from_basis(&scaled))
}
