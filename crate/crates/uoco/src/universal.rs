//! Two-layer universal learner with one projection per round.
//!
//! A grid of experts — one per candidate function class and modulus — runs
//! on the enclosing ball. Each round their predictions are aggregated by
//! Adapt-ML-Prod weights, the aggregate is projected onto the feasible set
//! (the only projection the round performs), the surrogate gradient is
//! computed in closed form, and every expert plus the meta-state is updated.
//! Rounds are atomic: a projection or oracle failure leaves the state and
//! the projection counter untouched.
//!
//! A multi-projection baseline reuses the same experts but keeps every
//! expert iterate inside the feasible set directly, costing one projection
//! per expert per round. It isolates the projection count as the only
//! variable between the two configurations.

use std::time::Instant;

use thiserror::Error;

use crate::domains::{CountingDomain, DomainError, DomainSpec};
use crate::experts::{
    expert_predict, expert_update, ExpertConfig, ExpertError, ExpertKind, ExpertState,
    OnsProjection,
};
use crate::meta::{aggregate_loss, normalize_meta_loss, MetaError, MetaState};
use crate::surrogate::{delta_term, surrogate_grad, SurrogateContext};
use crate::vecmath::{all_finite, axpy, zeros};

#[derive(Debug, Error)]
pub enum UniversalError {
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Expert(#[from] ExpertError),
    #[error(transparent)]
    Meta(#[from] MetaError),
    #[error("gradient oracle failed: {0}")]
    Oracle(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("horizon exhausted after {0} rounds")]
    HorizonExhausted(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Worst-case expert set: OGD, Newton steps, strongly-convex OGD.
    Minimax,
    /// Smoothness-exploiting expert set: scale-free OGD, Newton steps,
    /// curvature-accumulating strongly-convex OGD.
    SmallLoss,
}

#[derive(Debug, Clone)]
pub struct UniversalConfig {
    pub horizon: u64,
    /// Gradient norm bound G.
    pub grad_bound: f64,
    /// Radius D of the enclosing ball; must equal the feasible set's
    /// diameter bound.
    pub radius: f64,
    pub inner_domain: DomainSpec,
    pub mode: Mode,
    /// Run the multi-projection baseline instead of the one-projection
    /// algorithm.
    pub baseline: bool,
    /// Stream seed, carried for trace bookkeeping; the learner itself is
    /// deterministic.
    pub seed: u64,
    pub ons_projection: OnsProjection,
    /// Record this expert's per-round predictions in the trace, for
    /// decomposition audits.
    pub tracked_expert: Option<usize>,
}

impl UniversalConfig {
    pub fn new(horizon: u64, grad_bound: f64, inner_domain: DomainSpec, mode: Mode) -> Self {
        UniversalConfig {
            horizon,
            grad_bound,
            radius: inner_domain.diameter_bound,
            inner_domain,
            mode,
            baseline: false,
            seed: 0,
            ons_projection: OnsProjection::Exact,
            tracked_expert: None,
        }
    }

    pub fn validate(&self) -> Result<(), UniversalError> {
        if self.horizon < 2 {
            return Err(UniversalError::InvalidConfig("horizon must be at least 2".into()));
        }
        if !(self.grad_bound > 0.0) || !(self.radius > 0.0) {
            return Err(UniversalError::InvalidConfig("G and D must be positive".into()));
        }
        if (self.radius - self.inner_domain.diameter_bound).abs() > 1e-12 * self.radius.max(1.0) {
            return Err(UniversalError::InvalidConfig(
                "ball radius must equal the feasible set's diameter bound".into(),
            ));
        }
        self.inner_domain.validate()?;
        Ok(())
    }
}

/// Candidate moduli {2^k / T : k = 0..⌈log₂T⌉}, clipped to one and
/// deduplicated. For every modulus m in [1/T, 1] the grid contains a value
/// m̂ with m̂ ≤ m ≤ 2m̂.
pub fn modulus_grid(horizon: u64) -> Vec<f64> {
    let t = horizon as f64;
    let n = t.log2().ceil() as i32;
    let mut values: Vec<f64> = (0..=n).map(|k| (2.0_f64.powi(k) / t).min(1.0)).collect();
    values.dedup_by(|a, b| (*a - *b).abs() < 1e-15);
    values
}

/// The full expert set: one general-convex expert, one Newton-step expert
/// per candidate exp-concavity modulus, one strongly-convex expert per
/// candidate strong-convexity modulus.
pub fn build_expert_grid(
    horizon: u64,
    grad_bound: f64,
    radius: f64,
    mode: Mode,
) -> Vec<ExpertConfig> {
    let grid = modulus_grid(horizon);
    let mut experts = Vec::with_capacity(1 + 2 * grid.len());
    let cvx_kind = match mode {
        Mode::Minimax => ExpertKind::Cvx,
        Mode::SmallLoss => ExpertKind::CvxSmooth,
    };
    experts.push(ExpertConfig::new(cvx_kind, grad_bound, radius, horizon));
    for &alpha_hat in &grid {
        experts.push(ExpertConfig::new(
            ExpertKind::Exp { alpha_hat },
            grad_bound,
            radius,
            horizon,
        ));
    }
    for &lambda_hat in &grid {
        let kind = match mode {
            Mode::Minimax => ExpertKind::Sc { lambda_hat },
            Mode::SmallLoss => ExpertKind::ScSmooth { lambda_hat },
        };
        experts.push(ExpertConfig::new(kind, grad_bound, radius, horizon));
    }
    experts
}

/// Index of the strongly-convex expert whose candidate modulus covers the
/// true one (largest λ̂ ≤ λ).
pub fn matched_sc_expert(configs: &[ExpertConfig], lambda: f64) -> Option<usize> {
    configs
        .iter()
        .enumerate()
        .filter_map(|(i, c)| match c.kind {
            ExpertKind::Sc { lambda_hat } | ExpertKind::ScSmooth { lambda_hat }
                if lambda_hat <= lambda + 1e-12 =>
            {
                Some((i, lambda_hat))
            }
            _ => None,
        })
        .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
        .map(|(i, _)| i)
}

/// Outcome of one completed round.
#[derive(Debug, Clone)]
pub struct RoundOutput {
    /// Projected decision x_t.
    pub decision: Vec<f64>,
    /// Aggregated pre-projection point y_t.
    pub aggregate: Vec<f64>,
    /// Surrogate gradient at the aggregate.
    pub surr_grad: Vec<f64>,
    /// Slack term of the tightened regret transfer this round.
    pub delta: f64,
    /// Aggregate meta-loss; equals ½ by construction.
    pub meta_loss: f64,
    /// Σ_i p_i, for the normalization invariant.
    pub weight_sum: f64,
    /// Prediction and meta-loss of the tracked expert, when one is set.
    pub tracked_prediction: Option<Vec<f64>>,
    pub tracked_meta_loss: Option<f64>,
}

/// A running instance: expert states, meta state, and the instrumented
/// feasible set.
#[derive(Debug)]
pub struct UniversalRun {
    config: UniversalConfig,
    expert_configs: Vec<ExpertConfig>,
    experts: Vec<ExpertState>,
    meta: MetaState,
    domain: CountingDomain,
    next_round: u64,
}

impl UniversalRun {
    /// Standard construction with the full expert grid.
    pub fn new(config: UniversalConfig) -> Result<Self, UniversalError> {
        let experts =
            build_expert_grid(config.horizon, config.grad_bound, config.radius, config.mode);
        Self::with_experts(config, experts)
    }

    /// Construction with an explicit expert set, used for single-expert
    /// reference runs.
    pub fn with_experts(
        config: UniversalConfig,
        mut expert_configs: Vec<ExpertConfig>,
    ) -> Result<Self, UniversalError> {
        config.validate()?;
        if expert_configs.is_empty() {
            return Err(UniversalError::InvalidConfig("expert set must be nonempty".into()));
        }
        for ec in &mut expert_configs {
            ec.ons_projection = config.ons_projection;
            ec.validate()?;
        }
        if let Some(i) = config.tracked_expert {
            if i >= expert_configs.len() {
                return Err(UniversalError::InvalidConfig(format!(
                    "tracked expert {i} out of range"
                )));
            }
        }
        let dim = config.inner_domain.dimension;
        let experts: Vec<ExpertState> =
            expert_configs.iter().map(|c| ExpertState::new(c, dim)).collect();
        let meta = MetaState::new(expert_configs.len());
        let domain = CountingDomain::new(config.inner_domain.clone());
        Ok(UniversalRun {
            config,
            expert_configs,
            experts,
            meta,
            domain,
            next_round: 1,
        })
    }

    pub fn expert_count(&self) -> usize {
        self.experts.len()
    }

    pub fn expert_configs(&self) -> &[ExpertConfig] {
        &self.expert_configs
    }

    pub fn projection_count(&self) -> u64 {
        self.domain.count()
    }

    pub fn completed_rounds(&self) -> u64 {
        self.next_round - 1
    }

    pub fn config(&self) -> &UniversalConfig {
        &self.config
    }

    pub fn meta(&self) -> &MetaState {
        &self.meta
    }

    pub fn expert_states(&self) -> &[ExpertState] {
        &self.experts
    }

    /// One round of the predict → aggregate → project → update cycle.
    /// `grad_oracle` receives the submitted decision and returns the loss
    /// gradient there. On any failure the state, including the projection
    /// counter, is left exactly as before the call.
    pub fn round<E: std::fmt::Display>(
        &mut self,
        grad_oracle: impl FnOnce(&[f64]) -> Result<Vec<f64>, E>,
    ) -> Result<RoundOutput, UniversalError> {
        let count_before = self.domain.count();
        match self.round_inner(grad_oracle) {
            Ok(out) => Ok(out),
            Err(e) => {
                self.domain.reset_count(count_before);
                Err(e)
            }
        }
    }

    fn round_inner<E: std::fmt::Display>(
        &mut self,
        grad_oracle: impl FnOnce(&[f64]) -> Result<Vec<f64>, E>,
    ) -> Result<RoundOutput, UniversalError> {
        if self.next_round > self.config.horizon {
            return Err(UniversalError::HorizonExhausted(self.completed_rounds()));
        }
        let dim = self.config.inner_domain.dimension;
        let weights = self.meta.weights();
        let weight_sum: f64 = weights.iter().sum();

        let mut aggregate = zeros(dim);
        for (w, st) in weights.iter().zip(&self.experts) {
            axpy(&mut aggregate, *w, expert_predict(st));
        }

        // The only projection of the round (baseline experts are already
        // feasible, and so is their convex combination).
        let decision = if self.config.baseline {
            aggregate.clone()
        } else {
            self.domain.project(&aggregate)?
        };

        let grad_f = grad_oracle(&decision).map_err(|e| UniversalError::Oracle(e.to_string()))?;
        if grad_f.len() != dim || !all_finite(&grad_f) {
            return Err(UniversalError::Oracle("gradient is malformed".into()));
        }

        let ctx = SurrogateContext::from_parts(
            aggregate.clone(),
            decision.clone(),
            grad_f,
            self.config.inner_domain.projection_tolerance,
        );
        let surr_grad = surrogate_grad(&ctx);
        let delta = delta_term(&ctx);

        let mut expert_losses = Vec::with_capacity(self.experts.len());
        for st in &self.experts {
            expert_losses.push(normalize_meta_loss(
                &surr_grad,
                expert_predict(st),
                &ctx.y_t,
                self.config.grad_bound,
                self.config.radius,
            )?);
        }
        let meta_loss = aggregate_loss(&weights, &expert_losses);

        // All fallible work happens before any state mutation.
        let mut next_states = Vec::with_capacity(self.experts.len());
        for (st, cfg) in self.experts.iter().zip(&self.expert_configs) {
            let mut next = expert_update(st, cfg, &ctx, &surr_grad)?;
            if self.config.baseline {
                let feasible = self.domain.project(next.iterate())?;
                next = next.with_iterate(feasible);
            }
            next_states.push(next);
        }

        let tracked_prediction = self
            .config
            .tracked_expert
            .map(|i| expert_predict(&self.experts[i]).to_vec());
        let tracked_meta_loss = self.config.tracked_expert.map(|i| expert_losses[i]);

        self.meta
            .update(&expert_losses, meta_loss)
            .expect("meta losses are clamped to [0,1]");
        self.experts = next_states;
        self.next_round += 1;

        Ok(RoundOutput {
            decision,
            aggregate,
            surr_grad,
            delta,
            meta_loss,
            weight_sum,
            tracked_prediction,
            tracked_meta_loss,
        })
    }
}

/// Per-round gradient and value access to a loss sequence.
pub trait LossStream {
    fn horizon(&self) -> u64;
    fn gradient(&self, t: u64, x: &[f64]) -> Result<Vec<f64>, String>;
    fn value(&self, t: u64, x: &[f64]) -> f64;
}

/// One recorded round of a full run.
#[derive(Debug, Clone)]
pub struct TraceRound {
    pub t: u64,
    pub aggregate: Vec<f64>,
    pub decision: Vec<f64>,
    pub surr_grad: Vec<f64>,
    pub loss: f64,
    pub delta: f64,
    pub meta_loss: f64,
    pub weight_sum: f64,
    pub wall_ns: u64,
    pub projections_after: u64,
    pub tracked_prediction: Option<Vec<f64>>,
}

/// Full run record. `failure` marks traces cut short by an oracle or
/// projection error; completed rounds remain valid.
#[derive(Debug)]
pub struct RunTrace {
    pub rounds: Vec<TraceRound>,
    pub expert_count: usize,
    pub projection_count: u64,
    pub failure: Option<String>,
}

/// Drives a full horizon against the stream. Deterministic given the
/// configuration and stream.
pub fn run(config: UniversalConfig, stream: &dyn LossStream) -> Result<RunTrace, UniversalError> {
    let mut instance = UniversalRun::new(config)?;
    run_instance(&mut instance, stream)
}

/// Same as [`run`] for a prepared instance (custom expert sets).
pub fn run_instance(
    instance: &mut UniversalRun,
    stream: &dyn LossStream,
) -> Result<RunTrace, UniversalError> {
    let horizon = instance.config.horizon.min(stream.horizon());
    let mut rounds = Vec::with_capacity(horizon as usize);
    let mut failure = None;
    for t in 1..=horizon {
        let started = Instant::now();
        let out = match instance.round(|x| stream.gradient(t, x)) {
            Ok(out) => out,
            Err(e) => {
                failure = Some(e.to_string());
                break;
            }
        };
        let wall_ns = started.elapsed().as_nanos() as u64;
        let loss = stream.value(t, &out.decision);
        rounds.push(TraceRound {
            t,
            aggregate: out.aggregate,
            decision: out.decision,
            surr_grad: out.surr_grad,
            loss,
            delta: out.delta,
            meta_loss: out.meta_loss,
            weight_sum: out.weight_sum,
            wall_ns,
            projections_after: instance.projection_count(),
            tracked_prediction: out.tracked_prediction,
        });
    }
    Ok(RunTrace {
        rounds,
        expert_count: instance.expert_count(),
        projection_count: instance.projection_count(),
        failure,
    })
}
