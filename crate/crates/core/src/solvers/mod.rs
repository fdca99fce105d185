//! Monte Carlo and multilevel SAA solvers, optimal-gap estimators and
//! theoretical sample-size diagnostics.

mod gap;
mod mc;
mod mlmc;
mod pilot;
pub mod theory;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use gap::{gap_estimates, optimal_gap_mc, optimal_gap_mlmc, GapReport};
pub use mc::{mc_bias_parameter, mc_sample_set, mc_sample_size, mc_saa_solve, McSampleSet};
pub use mlmc::{
    mlmc_level_batches, mlmc_level_count, mlmc_plan, mlmc_saa_solve, MlmcPlan, MlmcSampleSet,
};
pub use pilot::{mc_pilot, mlmc_pilot, Pilot, PilotReport};

use crate::domain::{CostAccount, Interval};
use crate::error::{domain, Result};
use crate::objective::CvarCost;
use crate::samplers::LossModel;
use crate::stream::SeedSpec;

/// A CVaR minimisation problem over a decision interval with a biased
/// loss sampler.
#[derive(Debug, Clone)]
pub struct Problem {
    pub model: Arc<dyn LossModel>,
    pub cost: CvarCost,
    pub domain: Interval,
}

impl Problem {
    pub fn new(model: Arc<dyn LossModel>, cost: CvarCost, domain: Interval) -> Self {
        Self { model, cost, domain }
    }
}

/// Settings for single-level Monte Carlo SAA.
///
/// The bias follows `h = h_ref * (eps / eps_ref)^(1/alpha)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub alpha: f64,
    pub h_ref: f64,
    pub eps_ref: f64,
    pub pilot_n: usize,
    pub eta_bar: f64,
}

/// Settings for multilevel SAA.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MlmcConfig {
    pub alpha: f64,
    pub beta: f64,
    pub a: f64,
    pub h0: f64,
    pub m: u32,
    pub pilot_n: usize,
    pub eta_bar: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "solver", rename_all = "snake_case")]
pub enum SolverConfig {
    Mc(McConfig),
    Mlmc(MlmcConfig),
}

impl SolverConfig {
    pub fn solve(&self, problem: &Problem, eps: f64, seed: SeedSpec) -> Result<SolveReport> {
        match self {
            SolverConfig::Mc(cfg) => mc_saa_solve(problem, eps, cfg, seed),
            SolverConfig::Mlmc(cfg) => mlmc_saa_solve(problem, eps, cfg, seed),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SolverConfig::Mc(_) => "mc",
            SolverConfig::Mlmc(_) => "mlmc",
        }
    }
}

/// How many samples a solve drew.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Sizing {
    Mc { h: f64, n: usize },
    Mlmc(MlmcPlan),
}

impl Sizing {
    /// Coarsest bias parameter used by the solve.
    pub fn h0(&self) -> f64 {
        match self {
            Sizing::Mc { h, .. } => *h,
            Sizing::Mlmc(plan) => plan.h,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub argmin: f64,
    pub value: f64,
    pub sizing: Sizing,
    pub cost: CostAccount,
    pub pilot: PilotReport,
    pub seed: SeedSpec,
    /// Seconds. Excluded from [`SolveReport::outcome_eq`].
    pub wall_time: f64,
}

impl SolveReport {
    /// Equality of everything except timing.
    pub fn outcome_eq(&self, other: &Self) -> bool {
        self.argmin.to_bits() == other.argmin.to_bits()
            && self.value.to_bits() == other.value.to_bits()
            && self.sizing == other.sizing
            && self.cost == other.cost
            && self.pilot == other.pilot
            && self.seed == other.seed
    }
}

pub(crate) fn check_eps(eps: f64) -> Result<()> {
    if !(eps.is_finite() && eps > 0.0) {
        return domain(format!("target accuracy must be positive, got {eps}"));
    }
    Ok(())
}
