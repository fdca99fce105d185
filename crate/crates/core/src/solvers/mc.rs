use std::time::Instant;

use super::{check_eps, mc_pilot, McConfig, PilotReport, Problem, Sizing, SolveReport};
use crate::domain::{simulation_cost, BiasLadder};
use crate::error::{domain, Result};
use crate::objective::{minimize_breakpoints, WeightedSampleSet};
use crate::stream::{SeedSpec, StreamRole};

/// `h_ref * (eps / eps_ref)^(1/alpha)`.
pub fn mc_bias_parameter(eps: f64, alpha: f64, h_ref: f64, eps_ref: f64) -> f64 {
    h_ref * (eps / eps_ref).powf(1.0 / alpha)
}

/// `ceil((1 + 1/(2 alpha)) var_h / eps^2)`, at least one.
pub fn mc_sample_size(var_h: f64, eps: f64, alpha: f64) -> usize {
    let n = ((1.0 + 0.5 / alpha) * var_h / (eps * eps)).ceil();
    if n.is_finite() && n >= 1.0 {
        n as usize
    } else {
        1
    }
}

/// Uniform sample set of a Monte Carlo solve, before minimisation.
#[derive(Debug, Clone)]
pub struct McSampleSet {
    pub set: WeightedSampleSet,
    pub h: f64,
    pub n: usize,
    pub pilot: PilotReport,
}

/// Steps 1-6 of Monte Carlo SAA: bias choice, pilot, sizing and top-up.
///
/// When the sized `N` does not exceed the pilot, the first `N` pilot draws are
/// used; otherwise the pilot is extended with `N - pilot_n` draws from the
/// level-sampling stream.
pub fn mc_sample_set(
    problem: &Problem,
    eps: f64,
    cfg: &McConfig,
    seed: SeedSpec,
) -> Result<McSampleSet> {
    check_eps(eps)?;
    if !(cfg.alpha > 0.0 && cfg.h_ref > 0.0 && cfg.eps_ref > 0.0) {
        return domain("alpha, h_ref and eps_ref must be positive");
    }
    let h = mc_bias_parameter(eps, cfg.alpha, cfg.h_ref, cfg.eps_ref);
    let pilot = mc_pilot(problem, h, cfg.pilot_n, seed)?;
    let n = if pilot.report.degenerate {
        cfg.pilot_n
    } else {
        mc_sample_size(pilot.report.var_h, eps, cfg.alpha)
    };

    let mut samples = pilot.samples;
    if n <= samples.len() {
        samples.truncate(n);
    } else {
        let mut stream = seed.role(StreamRole::LevelSampling).level(0).stream();
        samples.reserve(n - samples.len());
        for _ in samples.len()..n {
            samples.push(problem.model.draw(h, &mut stream)?);
        }
    }
    Ok(McSampleSet { set: WeightedSampleSet::uniform(samples)?, h, n, pilot: pilot.report })
}

/// Monte Carlo SAA: returns `min_x (1/N) sum_k f(x, zeta_h^k)` with cost
/// `eta_bar * N / h`.
pub fn mc_saa_solve(
    problem: &Problem,
    eps: f64,
    cfg: &McConfig,
    seed: SeedSpec,
) -> Result<SolveReport> {
    let start = Instant::now();
    let s = mc_sample_set(problem, eps, cfg, seed)?;
    let r = minimize_breakpoints(&s.set, &problem.cost, problem.domain);
    let ladder = BiasLadder::new(s.h, 2, 0)?;
    let cost = simulation_cost(&[s.n], &ladder, cfg.eta_bar)?;
    Ok(SolveReport {
        argmin: r.argmin,
        value: r.value,
        sizing: Sizing::Mc { h: s.h, n: s.n },
        cost,
        pilot: s.pilot,
        seed,
        wall_time: start.elapsed().as_secs_f64(),
    })
}
