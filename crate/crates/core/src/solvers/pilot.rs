use serde::{Deserialize, Serialize};

use super::Problem;
use crate::domain::BiasLadder;
use crate::error::{domain, Result};
use crate::objective::{minimize_breakpoints, WeightedSampleSet};
use crate::stats::{mean, sample_variance};
use crate::stream::{SeedSpec, StreamRole};

/// Statistics gathered from a small pilot SAA run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PilotReport {
    /// Pilot minimiser.
    pub x_hat: f64,
    /// Sample variance of `f(x_hat, zeta_h0)`.
    pub var_h: f64,
    /// Sample variance of `f(x_hat, zeta_1) - f(x_hat, zeta_0)` at the first refinement.
    pub var_diff: f64,
    /// Richardson estimate of the bias constant.
    pub c1_hat: f64,
    /// `sqrt(V_1 / V_h)`, the level-allocation weight.
    pub lambda_hat: f64,
    pub pilot_n: usize,
    /// `var_h` was zero; sizing falls back to the pilot size.
    pub degenerate: bool,
}

/// Pilot report plus the level-0 draws it was computed from.
#[derive(Debug, Clone)]
pub struct Pilot {
    pub report: PilotReport,
    pub samples: Vec<f64>,
}

/// Draws `pilot_n` samples at bias `h0`, minimises their objective and
/// returns the variance of the cost at the minimiser.
///
/// Draws come from `seed` with role `Pilot` at level 0.
pub fn mc_pilot(problem: &Problem, h0: f64, pilot_n: usize, seed: SeedSpec) -> Result<Pilot> {
    if pilot_n < 2 {
        return domain(format!("pilot size must be at least 2, got {pilot_n}"));
    }
    let mut stream = seed.role(StreamRole::Pilot).level(0).stream();
    let samples = (0..pilot_n)
        .map(|_| problem.model.draw(h0, &mut stream))
        .collect::<Result<Vec<_>>>()?;
    let set = WeightedSampleSet::uniform(samples.clone())?;
    let x_hat = minimize_breakpoints(&set, &problem.cost, problem.domain).argmin;
    let costs: Vec<f64> = samples.iter().map(|&z| problem.cost.eval(x_hat, z)).collect();
    let var_h = sample_variance(&costs);
    let degenerate = var_h <= 0.0;
    if degenerate {
        log::warn!("pilot variance is zero; sizing falls back to the pilot size");
    }
    Ok(Pilot {
        report: PilotReport {
            x_hat,
            var_h,
            var_diff: 0.0,
            c1_hat: 0.0,
            lambda_hat: 0.0,
            pilot_n,
            degenerate,
        },
        samples,
    })
}

/// [`mc_pilot`] at `h0` followed by `pilot_n` coupled pairs at level 1 of the
/// ladder `(h0, m)`, which calibrate `c1`, `V_1` and `lambda`.
///
/// `c1 = |mean(d)| / (h0^alpha (1 - m^-alpha))` and
/// `V_1 = var(d) / (h0 - h1)^beta`, with `d = f(x_hat, zeta_1) - f(x_hat, zeta_0)`.
pub fn mlmc_pilot(
    problem: &Problem,
    h0: f64,
    m: u32,
    alpha: f64,
    beta: f64,
    pilot_n: usize,
    seed: SeedSpec,
) -> Result<PilotReport> {
    let mut report = mc_pilot(problem, h0, pilot_n, seed)?.report;
    let ladder = BiasLadder::new(h0, m, 1)?;
    let mut stream = seed.role(StreamRole::Pilot).level(1).stream();
    let mut diffs = Vec::with_capacity(pilot_n);
    for _ in 0..pilot_n {
        let d = problem.model.draw_coupled(&ladder, 1, &mut stream)?;
        let coarse = d.coarse.unwrap_or(d.fine);
        diffs.push(problem.cost.eval(report.x_hat, d.fine) - problem.cost.eval(report.x_hat, coarse));
    }
    let mf = m as f64;
    report.var_diff = sample_variance(&diffs);
    report.c1_hat = mean(&diffs).abs() / (h0.powf(alpha) * (1.0 - mf.powf(-alpha)));
    let h1 = h0 / mf;
    let v1 = report.var_diff / (h0 - h1).powf(beta);
    report.lambda_hat = if report.var_h > 0.0 { (v1 / report.var_h).sqrt() } else { 0.0 };
    Ok(report)
}
