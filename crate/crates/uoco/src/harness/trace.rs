//! Experiment execution, regret accounting, and CSV traces.

use std::io::Write;
use std::path::Path;

use crate::experts::{ExpertConfig, ExpertKind};
use crate::universal::{
    run_instance, Mode, RunTrace, UniversalConfig, UniversalRun,
};

use super::comparator::{minimize, ComparatorResult, PrefixObjective};
use super::config::{AlgoChoice, RunConfig};
use super::rate::{fit_rate, RateFit, RATE_CHECKPOINTS};
use super::stream::{generate_stream, GeneratedStream};
use super::HarnessError;

/// Exact column schema of the per-round trace.
pub const CSV_HEADER: &str = "t,loss,cum_loss,comp_cum_loss,regret,proj_count,delta_sum,wall_ns";

/// One row of the experiment trace.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub t: u64,
    pub loss: f64,
    pub cum_loss: f64,
    /// min over the feasible set of the loss sum up to this round.
    pub comp_cum_loss: f64,
    pub regret: f64,
    pub proj_count: u64,
    pub delta_sum: f64,
    pub wall_ns: u64,
}

#[derive(Debug, Clone)]
pub struct ExperimentSummary {
    pub final_regret: f64,
    pub expert_count: usize,
    pub total_projections: u64,
    pub total_wall_ns: u64,
    pub rate: Option<RateFit>,
}

/// Everything a run produced: trace rows, summary, and the raw material
/// needed for audits.
#[derive(Debug)]
pub struct ExperimentOutcome {
    pub records: Vec<RoundRecord>,
    pub summary: ExperimentSummary,
    pub trace: RunTrace,
    pub stream: GeneratedStream,
    pub comparator: ComparatorResult,
    /// Reason the run stopped early, if it did.
    pub aborted: Option<String>,
}

/// Builds the learner instance for an algorithm choice.
pub fn build_instance(
    config: &RunConfig,
    grad_bound: f64,
) -> Result<UniversalRun, HarnessError> {
    let domain = config.build_domain()?;
    let mode = match config.algo {
        AlgoChoice::UniversalSmooth => Mode::SmallLoss,
        _ => Mode::Minimax,
    };
    let mut ucfg = UniversalConfig::new(config.t, grad_bound, domain, mode);
    ucfg.baseline = matches!(config.algo, AlgoChoice::Baseline);
    ucfg.seed = config.seed;
    ucfg.ons_projection = config.algo_params.ons_projection.into();
    let instance = match config.algo {
        AlgoChoice::Ogd => {
            let expert = ExpertConfig::new(ExpertKind::Cvx, grad_bound, ucfg.radius, config.t);
            UniversalRun::with_experts(ucfg, vec![expert])?
        }
        AlgoChoice::Ons => {
            let expert = ExpertConfig::new(
                ExpertKind::Exp { alpha_hat: 1.0 },
                grad_bound,
                ucfg.radius,
                config.t,
            );
            UniversalRun::with_experts(ucfg, vec![expert])?
        }
        _ => UniversalRun::new(ucfg)?,
    };
    Ok(instance)
}

/// Runs one experiment end to end: stream generation, the online run,
/// per-round comparator values, and rate fitting at the standard
/// checkpoints when the horizon reaches them.
pub fn execute(config: &RunConfig) -> Result<ExperimentOutcome, HarnessError> {
    let domain = config.build_domain()?;
    let family = config.build_family();
    let stream = generate_stream(&family, &domain)?;
    let grad_bound = if config.algo_params.g_bound > 0.0 {
        config.algo_params.g_bound
    } else {
        stream.certificates.grad_bound
    };

    let mut instance = build_instance(config, grad_bound)?;
    let trace = run_instance(&mut instance, &stream)?;
    let aborted = trace.failure.clone();

    // Per-round comparator: the prefix objective collapses to sufficient
    // statistics, and each solve warm-starts from the previous minimizer.
    let mut objective = PrefixObjective::new(config.d);
    let mut records = Vec::with_capacity(trace.rounds.len());
    let mut cum_loss = 0.0;
    let mut delta_sum = 0.0;
    let mut warm: Option<Vec<f64>> = None;
    for round in &trace.rounds {
        objective.push(&stream.losses[(round.t - 1) as usize]);
        let solved = minimize(&objective, &domain, warm.as_deref(), 0, config.seed)?;
        warm = Some(solved.minimizer.clone());
        cum_loss += round.loss;
        delta_sum += round.delta;
        records.push(RoundRecord {
            t: round.t,
            loss: round.loss,
            cum_loss,
            comp_cum_loss: solved.value,
            regret: cum_loss - solved.value,
            proj_count: round.projections_after,
            delta_sum,
            wall_ns: if config.algo_params.wall_clock { round.wall_ns } else { 0 },
        });
    }

    // Final comparator gets the full multi-start treatment.
    let comparator = if records.is_empty() {
        ComparatorResult { minimizer: vec![0.0; config.d], value: 0.0, certificate: 0.0 }
    } else {
        let full = minimize(&objective, &domain, warm.as_deref(), 8, config.seed)?;
        if let Some(last) = records.last_mut() {
            last.comp_cum_loss = full.value.min(last.comp_cum_loss);
            last.regret = last.cum_loss - last.comp_cum_loss;
        }
        full
    };

    let checkpoints: Vec<(u64, f64)> = RATE_CHECKPOINTS
        .iter()
        .filter(|&&cp| cp as usize <= records.len())
        .map(|&cp| (cp, records[cp as usize - 1].regret))
        .collect();
    let rate = (checkpoints.len() >= 4).then(|| fit_rate(&checkpoints));

    let summary = ExperimentSummary {
        final_regret: records.last().map_or(0.0, |r| r.regret),
        expert_count: trace.expert_count,
        total_projections: trace.projection_count,
        total_wall_ns: if config.algo_params.wall_clock {
            trace.rounds.iter().map(|r| r.wall_ns).sum()
        } else {
            0
        },
        rate,
    };

    Ok(ExperimentOutcome { records, summary, trace, stream, comparator, aborted })
}

/// Renders the trace with its trailing summary line.
pub fn csv_string(outcome: &ExperimentOutcome) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for r in &outcome.records {
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.t, r.loss, r.cum_loss, r.comp_cum_loss, r.regret, r.proj_count, r.delta_sum,
            r.wall_ns
        ));
    }
    let sm = &outcome.summary;
    s.push_str(&format!(
        "# summary,final_regret={},n_experts={},total_proj={},total_wall_ns={},rate={}{}\n",
        sm.final_regret,
        sm.expert_count,
        sm.total_projections,
        sm.total_wall_ns,
        sm.rate.as_ref().map_or("na".to_string(), |r| r.label()),
        outcome
            .aborted
            .as_ref()
            .map_or(String::new(), |r| format!(",partial_trace={r}")),
    ));
    s
}

pub fn write_csv(path: &Path, outcome: &ExperimentOutcome) -> Result<(), HarnessError> {
    let mut file = std::fs::File::create(path)?;
    file.write_all(csv_string(outcome).as_bytes())?;
    Ok(())
}
