//! Adapt-ML-Prod expert aggregation.
//!
//! Each expert carries its own learning rate driven by the accumulated
//! squared excess of its loss over the aggregate, which yields a
//! second-order regret bound against every expert simultaneously.
//! Weights are stored in the log domain: the exponent-ratio step contracts
//! them relentlessly and naive storage underflows long before the horizons
//! the harness runs.

use thiserror::Error;

use crate::vecmath::dot;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetaError {
    /// An input breached its stated bound by more than the tolerance,
    /// which signals a misconfigured G or D.
    #[error("{what} = {value} breaches bound {bound}")]
    RangeViolation { what: &'static str, value: f64, bound: f64 },
}

const LN_WEIGHT_FLOOR: f64 = -700.0;
const RANGE_SLACK: f64 = 1e-9;

/// Normalized meta-loss of one expert:
/// ⟨∇g, y_i − y_t⟩ / (4GD) + ½, guaranteed to lie in [0, 1] whenever the
/// iterates stay in the radius-D ball and the gradient respects G.
pub fn normalize_meta_loss(
    surr_grad: &[f64],
    y_i: &[f64],
    y_t: &[f64],
    grad_bound: f64,
    radius: f64,
) -> Result<f64, MetaError> {
    let check = |what: &'static str, value: f64, bound: f64| {
        if value > bound + RANGE_SLACK {
            Err(MetaError::RangeViolation { what, value, bound })
        } else {
            Ok(())
        }
    };
    check("‖y_i‖", crate::vecmath::norm(y_i), radius)?;
    check("‖y_t‖", crate::vecmath::norm(y_t), radius)?;
    check("‖∇g‖", crate::vecmath::norm(surr_grad), grad_bound)?;
    let inner: f64 = y_i
        .iter()
        .zip(y_t)
        .zip(surr_grad)
        .map(|((a, b), g)| (a - b) * g)
        .sum();
    let loss = inner / (4.0 * grad_bound * radius) + 0.5;
    Ok(loss.clamp(0.0, 1.0))
}

/// Mutable aggregation state: one log-weight, learning rate, and excess
/// accumulator per expert.
#[derive(Debug, Clone, PartialEq)]
pub struct MetaState {
    ln_weights: Vec<f64>,
    learning_rates: Vec<f64>,
    cum_sq_excess: Vec<f64>,
    round: u64,
}

impl MetaState {
    /// Uniform initial weights; initial learning rate min{½, √(ln n)}.
    /// A single expert needs no aggregation and keeps weight one.
    pub fn new(expert_count: usize) -> Self {
        assert!(expert_count >= 1, "need at least one expert");
        let n = expert_count as f64;
        let eta0 = if expert_count == 1 {
            0.5
        } else {
            0.5_f64.min(n.ln().sqrt())
        };
        MetaState {
            ln_weights: vec![-(n.ln()); expert_count],
            learning_rates: vec![eta0; expert_count],
            cum_sq_excess: vec![0.0; expert_count],
            round: 1,
        }
    }

    pub fn expert_count(&self) -> usize {
        self.ln_weights.len()
    }

    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn learning_rates(&self) -> &[f64] {
        &self.learning_rates
    }

    pub fn ln_weights(&self) -> &[f64] {
        &self.ln_weights
    }

    pub fn cum_sq_excess(&self) -> &[f64] {
        &self.cum_sq_excess
    }

    /// Aggregation probabilities p_i ∝ η_i · w_i, computed in the log
    /// domain. The denominator is positive by construction.
    pub fn weights(&self) -> Vec<f64> {
        let n = self.expert_count();
        if n == 1 {
            return vec![1.0];
        }
        let logits: Vec<f64> = self
            .ln_weights
            .iter()
            .zip(&self.learning_rates)
            .map(|(lw, eta)| lw + eta.ln())
            .collect();
        let peak = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let raw: Vec<f64> = logits.iter().map(|l| (l - peak).exp()).collect();
        let total: f64 = raw.iter().sum();
        raw.into_iter().map(|r| r / total).collect()
    }

    /// One aggregation step: multiplicative update with the old learning
    /// rate, refresh of the excess statistics and learning rate, then the
    /// exponent-ratio correction.
    ///
    /// Because η ≤ ½ and |ℓ − ℓ_i| ≤ 1, the multiplicative factor stays
    /// above ½ and the logarithm is always defined.
    pub fn update(
        &mut self,
        expert_losses: &[f64],
        aggregate_loss: f64,
    ) -> Result<(), MetaError> {
        assert_eq!(expert_losses.len(), self.expert_count());
        let unit = |what: &'static str, v: f64| {
            if !((-RANGE_SLACK..=1.0 + RANGE_SLACK).contains(&v)) {
                Err(MetaError::RangeViolation { what, value: v, bound: 1.0 })
            } else {
                Ok(())
            }
        };
        unit("aggregate loss", aggregate_loss)?;
        for &l in expert_losses {
            unit("expert loss", l)?;
        }
        let n = self.expert_count() as f64;
        if self.expert_count() > 1 {
            let ln_n = n.ln();
            for i in 0..self.expert_count() {
                let excess = aggregate_loss - expert_losses[i];
                let eta_old = self.learning_rates[i];
                self.ln_weights[i] += (eta_old * excess).ln_1p();
                self.cum_sq_excess[i] += excess * excess;
                let eta_new = 0.5_f64.min((ln_n / (1.0 + self.cum_sq_excess[i])).sqrt());
                self.ln_weights[i] *= eta_new / eta_old;
                self.ln_weights[i] = self.ln_weights[i].max(LN_WEIGHT_FLOOR);
                self.learning_rates[i] = eta_new;
            }
        } else {
            let excess = aggregate_loss - expert_losses[0];
            self.cum_sq_excess[0] += excess * excess;
        }
        self.round += 1;
        Ok(())
    }
}

/// Aggregate loss Σ p_i ℓ_i under the given probabilities.
pub fn aggregate_loss(weights: &[f64], expert_losses: &[f64]) -> f64 {
    dot(weights, expert_losses)
}

/// Constant Γ of the second-order regret guarantee:
/// Γ = 3 ln n + ln(1 + n/(2e) · (1 + ln(T+1))).
pub fn second_order_gamma(expert_count: usize, horizon: u64) -> f64 {
    let n = expert_count as f64;
    let t = horizon as f64;
    3.0 * n.ln() + (1.0 + n / (2.0 * std::f64::consts::E) * (1.0 + (t + 1.0).ln())).ln()
}
