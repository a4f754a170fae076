//! Regret growth-rate fitting over horizon checkpoints.

use crate::oracles::regression_slope;

/// Checkpoints separating √T growth from logarithmic growth with good
/// statistical power while keeping runs at desk scale.
pub const RATE_CHECKPOINTS: [u64; 5] = [1 << 10, 1 << 11, 1 << 12, 1 << 13, 1 << 14];

#[derive(Debug, Clone, PartialEq)]
pub enum RateFit {
    /// Regret was nonpositive (or too few positive checkpoints existed):
    /// bounded, no exponent to report.
    Bounded,
    Exponent {
        /// Least-squares slope of log(regret) against log(T).
        loglog: f64,
        /// Slope of regret against ln(T), for log-rate detection.
        linlog: f64,
    },
}

/// Fits the growth rate from (horizon, regret) checkpoints. Needs at least
/// four checkpoints with strictly positive regret to report an exponent;
/// degenerate inputs (realizable streams) report `Bounded`.
pub fn fit_rate(checkpoints: &[(u64, f64)]) -> RateFit {
    let positive: Vec<(f64, f64)> = checkpoints
        .iter()
        .filter(|(_, r)| *r > 0.0)
        .map(|(t, r)| (*t as f64, *r))
        .collect();
    if positive.len() < 4 {
        return RateFit::Bounded;
    }
    let log_t: Vec<f64> = positive.iter().map(|(t, _)| t.ln()).collect();
    let log_r: Vec<f64> = positive.iter().map(|(_, r)| r.ln()).collect();
    let reg: Vec<f64> = positive.iter().map(|(_, r)| *r).collect();
    RateFit::Exponent {
        loglog: regression_slope(&log_t, &log_r),
        linlog: regression_slope(&log_t, &reg),
    }
}

impl RateFit {
    pub fn label(&self) -> String {
        match self {
            RateFit::Bounded => "bounded".to_string(),
            RateFit::Exponent { loglog, .. } => format!("{loglog:.4}"),
        }
    }
}
