use serde::{Deserialize, Serialize};

use super::{mc_sample_set, mlmc_level_batches, McConfig, MlmcConfig, Problem};
use crate::domain::Interval;
use crate::error::{domain, Result};
use crate::objective::{
    minimize_breakpoints, objective_eval, CvarCost, LevelBatch, WeightedSampleSet,
};
use crate::stream::SeedSpec;

fn same_set_gap(
    x_cand: f64,
    set: &WeightedSampleSet,
    cost: &CvarCost,
    dom: Interval,
) -> Result<f64> {
    if !dom.contains(x_cand) {
        return domain(format!("candidate {x_cand} lies outside [{}, {}]", dom.lo(), dom.hi()));
    }
    let min = minimize_breakpoints(set, cost, dom).value;
    Ok((objective_eval(x_cand, set, cost) - min).max(0.0))
}

/// `F_N(x_cand) - min_x F_N(x)` on one uniform sample set.
pub fn optimal_gap_mc(
    x_cand: f64,
    samples: &WeightedSampleSet,
    cost: &CvarCost,
    dom: Interval,
) -> Result<f64> {
    if !samples.is_uniform() {
        return domain("Monte Carlo gap needs uniformly weighted samples");
    }
    same_set_gap(x_cand, samples, cost, dom)
}

/// `F_L(x_cand) - min_x F_L(x)` on one set of level batches.
pub fn optimal_gap_mlmc(
    x_cand: f64,
    level_batches: &[LevelBatch],
    cost: &CvarCost,
    dom: Interval,
) -> Result<f64> {
    let set = WeightedSampleSet::from_level_batches(level_batches)?;
    same_set_gap(x_cand, &set, cost, dom)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub candidate: f64,
    pub eps: f64,
    pub mc_gap: f64,
    pub mc_samples: usize,
    pub mlmc_gap: f64,
    pub mlmc_samples: usize,
}

/// Both gap estimators for `x_cand`, each on the sample set a solve with the
/// same `eps` and `seed` would draw.
pub fn gap_estimates(
    problem: &Problem,
    eps: f64,
    mc: &McConfig,
    mlmc: &MlmcConfig,
    x_cand: f64,
    seed: SeedSpec,
) -> Result<GapReport> {
    if !problem.domain.contains(x_cand) {
        return domain(format!("candidate {x_cand} lies outside the decision interval"));
    }
    let mc_set = mc_sample_set(problem, eps, mc, seed)?;
    let mc_gap = optimal_gap_mc(x_cand, &mc_set.set, &problem.cost, problem.domain)?;
    let ml = mlmc_level_batches(problem, eps, mlmc, seed)?;
    let mlmc_gap = optimal_gap_mlmc(x_cand, &ml.batches, &problem.cost, problem.domain)?;
    Ok(GapReport {
        candidate: x_cand,
        eps,
        mc_gap,
        mc_samples: mc_set.n,
        mlmc_gap,
        mlmc_samples: ml.plan.n_levels.iter().sum(),
    })
}
