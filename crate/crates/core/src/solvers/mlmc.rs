use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_eps, mlmc_pilot, MlmcConfig, PilotReport, Problem, Sizing, SolveReport};
use crate::domain::{simulation_cost, BiasLadder, RateContract};
use crate::error::{domain, Result};
use crate::objective::{minimize_breakpoints, LevelBatch, WeightedSampleSet};
use crate::stream::{SeedSpec, StreamRole};

/// Calibrated multilevel plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlmcPlan {
    /// Finest level `L`.
    pub levels: usize,
    /// Coarsest bias after adjustment.
    pub h: f64,
    /// Allocation fractions, summing to one.
    pub q: Vec<f64>,
    /// Normaliser of the allocation fractions.
    pub q_dagger: f64,
    pub n_total: usize,
    pub n_levels: Vec<usize>,
}

impl MlmcPlan {
    /// Everything at level 0 with `n` samples.
    pub fn single_level(h: f64, n: usize) -> Self {
        Self { levels: 0, h, q: vec![1.0], q_dagger: 1.0, n_total: n, n_levels: vec![n] }
    }
}

fn accuracy_scale(eps: f64, rc: &RateContract) -> f64 {
    (1.0 + 2.0 * rc.alpha).powf(1.0 / (2.0 * rc.alpha)) * (rc.c1.abs() / eps).powf(1.0 / rc.alpha)
}

/// `1 + ceil(log((1 + 2 alpha)^(1/(2 alpha)) (|c1|/eps)^(1/alpha) h0) / log m)`,
/// clamped to at least one.
pub fn mlmc_level_count(eps: f64, rc: &RateContract, m: u32, h0: f64) -> usize {
    let arg = accuracy_scale(eps, rc) * h0;
    if !(arg > 0.0 && arg.is_finite()) {
        return 1;
    }
    let raw = 1.0 + (arg.ln() / (m as f64).ln()).ceil();
    if raw < 1.0 {
        1
    } else {
        raw as usize
    }
}

/// Level count, adjusted bias, allocation fractions and sample sizes from
/// the pilot statistics.
///
/// With `m_l = m^l` and `lambda = pilot.lambda_hat`:
/// `q_0 = 1/q_dag`, `q_l = lambda h^(beta/2) (1/m_{l-1} - 1/m_l)^(beta/2) / (q_dag sqrt(m_{l-1} + m_l))`,
/// `N = ceil((1 + 1/(2 alpha)) V_h q_dag (1 + lambda h^(beta/2) sum_l (1/m_{l-1} - 1/m_l)^(beta/2) sqrt(m_{l-1} + m_l)) / eps^2)`
/// and `N_l = ceil(N q_l)`. A zero `lambda` collapses to a single level.
pub fn mlmc_plan(
    eps: f64,
    pilot: &PilotReport,
    rc: &RateContract,
    m: u32,
    h0: f64,
) -> Result<MlmcPlan> {
    check_eps(eps)?;
    if !(pilot.var_h > 0.0) {
        return domain("plan needs a positive pilot variance");
    }
    if m < 2 {
        return domain(format!("refinement factor must be at least 2, got {m}"));
    }
    let prefactor = (1.0 + 1.0 / (2.0 * rc.alpha)) * pilot.var_h;
    let lambda = pilot.lambda_hat;
    if lambda <= 0.0 {
        let n = ((prefactor / (eps * eps)).ceil() as usize).max(1);
        return Ok(MlmcPlan::single_level(h0, n));
    }

    let levels = mlmc_level_count(eps, rc, m, h0);
    let mf = m as f64;
    let shrink = (h0 * accuracy_scale(eps, rc) * mf.powi(-(levels as i32))).ceil().max(1.0);
    let h = h0 / shrink;

    let b2 = rc.beta / 2.0;
    let scale = lambda * h.powf(b2);
    let mut raw = Vec::with_capacity(levels + 1);
    raw.push(1.0);
    let mut spread = 0.0;
    for ell in 1..=levels {
        let (prev, cur) = (mf.powi(ell as i32 - 1), mf.powi(ell as i32));
        let gap = (1.0 / prev - 1.0 / cur).powf(b2);
        let cost = (prev + cur).sqrt();
        raw.push(scale * gap / cost);
        spread += gap * cost;
    }
    let q_dagger: f64 = raw.iter().sum();
    let q: Vec<f64> = raw.iter().map(|r| r / q_dagger).collect();

    let n_total = (prefactor * q_dagger * (1.0 + scale * spread) / (eps * eps)).ceil();
    if !n_total.is_finite() {
        return Err(crate::Error::Numeric("plan sample size is not finite".into()));
    }
    let n_total = (n_total as usize).max(1);
    let n_levels = q.iter().map(|ql| ((n_total as f64 * ql).ceil() as usize).max(1)).collect();
    Ok(MlmcPlan { levels, h, q, q_dagger, n_total, n_levels })
}

/// Telescoped level batches of a multilevel solve, before minimisation.
#[derive(Debug, Clone)]
pub struct MlmcSampleSet {
    pub batches: Vec<LevelBatch>,
    pub plan: MlmcPlan,
    pub ladder: BiasLadder,
    pub pilot: PilotReport,
}

/// Steps 1-4 of multilevel SAA: pilot, calibration and per-level coupled
/// draws. Level `l` draws from `seed` with role `LevelSampling` at level `l`,
/// so levels can be generated concurrently.
pub fn mlmc_level_batches(
    problem: &Problem,
    eps: f64,
    cfg: &MlmcConfig,
    seed: SeedSpec,
) -> Result<MlmcSampleSet> {
    check_eps(eps)?;
    let pilot = mlmc_pilot(problem, cfg.h0, cfg.m, cfg.alpha, cfg.beta, cfg.pilot_n, seed)?;
    let plan = if pilot.degenerate {
        MlmcPlan::single_level(cfg.h0, cfg.pilot_n)
    } else {
        let h1 = cfg.h0 / cfg.m as f64;
        let c2 = pilot.var_diff / h1.powf(cfg.beta);
        let rc = RateContract::new(cfg.alpha, cfg.beta, cfg.a, pilot.c1_hat, c2)?;
        mlmc_plan(eps, &pilot, &rc, cfg.m, cfg.h0)?
    };
    let ladder = BiasLadder::new(plan.h, cfg.m, plan.levels)?;
    let batches = plan
        .n_levels
        .par_iter()
        .enumerate()
        .map(|(ell, &n)| {
            let mut stream = seed.role(StreamRole::LevelSampling).level(ell as u64).stream();
            let draws = (0..n)
                .map(|_| problem.model.draw_coupled(&ladder, ell, &mut stream))
                .collect::<Result<Vec<_>>>()?;
            LevelBatch::from_draws(&draws)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MlmcSampleSet { batches, plan, ladder, pilot })
}

/// Multilevel SAA: minimises the telescoped objective and charges
/// `eta_bar * N_l / h_l` per level.
pub fn mlmc_saa_solve(
    problem: &Problem,
    eps: f64,
    cfg: &MlmcConfig,
    seed: SeedSpec,
) -> Result<SolveReport> {
    let start = Instant::now();
    let s = mlmc_level_batches(problem, eps, cfg, seed)?;
    let set = WeightedSampleSet::from_level_batches(&s.batches)?;
    let r = minimize_breakpoints(&set, &problem.cost, problem.domain);
    let cost = simulation_cost(&s.plan.n_levels, &s.ladder, cfg.eta_bar)?;
    Ok(SolveReport {
        argmin: r.argmin,
        value: r.value,
        sizing: Sizing::Mlmc(s.plan),
        cost,
        pilot: s.pilot,
        seed,
        wall_time: start.elapsed().as_secs_f64(),
    })
}
