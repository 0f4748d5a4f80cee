//! Priority-hierarchy fitness: exponentially separated constraint penalties,
//! switching to joint energy once every constraint holds.

use serde::{Deserialize, Serialize};

use crate::constraints::{evaluate_plan, ConstraintReport, J_MAX, LEVELS};
use crate::grf_profile::{DesignVector, JumpTask};
use crate::srb_model::RobotParams;
use crate::trajectory::{JumpPlan, Sample, SAMPLE_DT};

/// Offset added to every penalty term.
pub const BETA: f64 = 1e3;

/// How several violations are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    #[default]
    Sum,
    /// Only the term with the largest exponent counts.
    WorstTerm,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitnessConfig {
    pub beta: f64,
    pub aggregation: Aggregation,
    pub sample_dt: f64,
}

impl Default for FitnessConfig {
    fn default() -> Self {
        Self {
            beta: BETA,
            aggregation: Aggregation::Sum,
            sample_dt: SAMPLE_DT,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FitnessValue {
    pub value: f64,
    pub in_energy_mode: bool,
    pub energy_joules: f64,
    pub worst_level: Option<usize>,
    /// The design could not be turned into a trajectory.
    pub degenerate: bool,
}

impl FitnessValue {
    pub fn energy(energy_joules: f64) -> Self {
        Self {
            value: energy_joules,
            in_energy_mode: true,
            energy_joules,
            worst_level: None,
            degenerate: false,
        }
    }

    pub fn sentinel(beta: f64) -> Self {
        Self {
            value: sentinel_value(beta),
            degenerate: true,
            ..Default::default()
        }
    }
}

/// Exponent of sub-constraint `j` of level `i`.
pub fn k_index(i: usize, j: usize) -> usize {
    i * J_MAX + j
}

/// Penalty above every achievable constraint penalty.
pub fn sentinel_value(beta: f64) -> f64 {
    let k_max = k_index(LEVELS - 1, J_MAX - 1);
    10f64.powi(k_max as i32 + 2) * beta
}

/// Constraint level a fitness value points at, `None` in energy mode.
/// Exact for single violations with magnitude below `9 * beta`.
pub fn level_of_value(value: f64, beta: f64) -> Option<usize> {
    if value < beta {
        return None;
    }
    let k = (value / beta).log10().floor().max(0.0) as usize;
    Some((k / J_MAX).min(LEVELS - 1))
}

/// Penalty of a report with at least one violation, `None` when feasible.
pub fn penalty(report: &ConstraintReport, beta: f64, aggregation: Aggregation) -> Option<f64> {
    let terms = report
        .violations()
        .map(|(i, j, m)| 10f64.powi(k_index(i, j) as i32) * (beta + m));
    match aggregation {
        Aggregation::Sum => {
            let mut any = false;
            let total = terms.inspect(|_| any = true).sum();
            any.then_some(total)
        }
        Aggregation::WorstTerm => terms.last(),
    }
}

/// Scores a report together with the energy of its trajectory.
pub fn score(report: &ConstraintReport, energy_joules: f64, cfg: &FitnessConfig) -> FitnessValue {
    match penalty(report, cfg.beta, cfg.aggregation) {
        Some(value) => FitnessValue {
            value,
            in_energy_mode: false,
            energy_joules,
            worst_level: report.worst_level(),
            degenerate: false,
        },
        None => FitnessValue::energy(energy_joules),
    }
}

/// Trapezoidal integral of the summed absolute joint power of all four legs.
pub fn energy_of_samples(samples: &[Sample]) -> f64 {
    let power = |s: &Sample| -> f64 {
        s.joints
            .iter()
            .map(|j| (0..3).map(|n| (j.tau[n] * j.qdot[n]).abs()).sum::<f64>())
            .sum::<f64>()
            * 2.0
    };
    samples
        .windows(2)
        .map(|w| 0.5 * (power(&w[0]) + power(&w[1])) * (w[1].t - w[0].t))
        .sum()
}

/// Joint energy of a sampled trajectory.
pub fn energy(traj: &crate::trajectory::Trajectory) -> f64 {
    energy_of_samples(&traj.samples)
}

/// Fitness with default settings.
pub fn fitness(d: &DesignVector, task: &JumpTask, params: &RobotParams) -> FitnessValue {
    fitness_with(d, task, params, &FitnessConfig::default())
}

pub fn fitness_with(
    d: &DesignVector,
    task: &JumpTask,
    params: &RobotParams,
    cfg: &FitnessConfig,
) -> FitnessValue {
    evaluate_design(d, task, params, cfg)
        .map(|(f, _)| f)
        .unwrap_or_else(|| FitnessValue::sentinel(cfg.beta))
}

/// Fitness and constraint report, or `None` for designs that do not yield a
/// trajectory.
pub fn evaluate_design(
    d: &DesignVector,
    task: &JumpTask,
    params: &RobotParams,
    cfg: &FitnessConfig,
) -> Option<(FitnessValue, ConstraintReport)> {
    if !d.is_finite() {
        return None;
    }
    let plan = JumpPlan::new(d, task, params).ok()?;
    let times = plan.sample_times(cfg.sample_dt);
    let samples: Vec<Sample> = times
        .iter()
        .map(|&t| plan.sample(t))
        .collect::<crate::error::Result<_>>()
        .ok()?;
    let mut report = crate::constraints::evaluate_samples(&samples, &plan);
    crate::constraints::evaluate_obstacle(&plan, &times, &mut report).ok()?;
    let e = energy_of_samples(&samples);
    if !e.is_finite() {
        return None;
    }
    Some((score(&report, e, cfg), report))
}

/// Report for a plan at the configured rate.
pub fn report_for(plan: &JumpPlan, cfg: &FitnessConfig) -> crate::error::Result<ConstraintReport> {
    evaluate_plan(plan, cfg.sample_dt)
}
