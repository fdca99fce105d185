//! Replication harness, summary statistics and empirical rate estimation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::BiasLadder;
use crate::error::{domain, Result};
use crate::solvers::{Problem, SolveReport, SolverConfig};
use crate::stats::{ls_slope, mean, sample_variance};
use crate::stream::{SeedSpec, StreamRole};

/// One row of a results table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub eps: f64,
    pub h0: f64,
    /// `|mean value - p*|` across replications.
    pub bias: f64,
    /// Unbiased sample variance of the replicated values.
    pub variance: f64,
    pub rmse: f64,
    /// Fraction of replications with `|value - p*| > eps`.
    pub tail_prob: f64,
    pub mean_cost: f64,
    pub mean_value: f64,
    pub replications: usize,
}

/// `sqrt(bias^2 + variance)`.
pub fn rmse_from(bias: f64, variance: f64) -> f64 {
    (bias * bias + variance).sqrt()
}

pub fn summarize(reports: &[SolveReport], p_star: f64, eps: f64) -> Result<ExperimentSummary> {
    if reports.len() < 2 {
        return domain(format!("summary needs at least two reports, got {}", reports.len()));
    }
    let values: Vec<f64> = reports.iter().map(|r| r.value).collect();
    let costs: Vec<f64> = reports.iter().map(|r| r.cost.total).collect();
    let mean_value = mean(&values);
    let bias = (mean_value - p_star).abs();
    let variance = sample_variance(&values);
    let misses = values.iter().filter(|v| (*v - p_star).abs() > eps).count();
    Ok(ExperimentSummary {
        eps,
        h0: reports[0].sizing.h0(),
        bias,
        variance,
        rmse: rmse_from(bias, variance),
        tail_prob: misses as f64 / reports.len() as f64,
        mean_cost: mean(&costs),
        mean_value,
        replications: reports.len(),
    })
}

/// `reps` independent solves, replication `i` seeded with `seed.replication(i)`.
///
/// Runs on the current rayon pool. Output order and content do not depend
/// on the number of threads.
pub fn run_replications(
    problem: &Problem,
    solver: &SolverConfig,
    eps: f64,
    reps: usize,
    seed: SeedSpec,
) -> Result<Vec<SolveReport>> {
    if reps == 0 {
        return domain("at least one replication is required");
    }
    (0..reps)
        .into_par_iter()
        .map(|i| solver.solve(problem, eps, seed.replication(i as u64)))
        .collect()
}

/// One summary per `eps`.
pub fn reproduce_table(
    problem: &Problem,
    solver: &SolverConfig,
    eps_list: &[f64],
    reps: usize,
    p_star: f64,
    seed: SeedSpec,
) -> Result<Vec<ExperimentSummary>> {
    if eps_list.is_empty() {
        return domain("eps list is empty");
    }
    eps_list
        .iter()
        .map(|&eps| {
            log::info!("{} eps = {eps}: {reps} replications", solver.name());
            let reports = run_replications(problem, solver, eps, reps, seed)?;
            summarize(&reports, p_star, eps)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateEstimate {
    pub alpha_hat: f64,
    pub beta_hat: f64,
    /// `|mean|` of the coupled cost difference at levels `1..=L`.
    pub level_means: Vec<f64>,
    pub level_vars: Vec<f64>,
}

/// Regresses the coupled cost differences `f(x, zeta_l) - f(x, zeta_{l-1})`
/// at a fixed `x_probe` against the level. `alpha_hat` and `beta_hat` are the
/// negated slopes of `log_m |mean_l|` and `log_m var_l` over `l = 1..=L`.
pub fn estimate_rates(
    problem: &Problem,
    x_probe: f64,
    ladder: &BiasLadder,
    samples_per_level: usize,
    seed: SeedSpec,
) -> Result<RateEstimate> {
    if ladder.levels() < 3 {
        return domain(format!("rate regression needs at least 3 levels, got {}", ladder.levels()));
    }
    if samples_per_level < 2 {
        return domain("at least two samples per level are required");
    }
    let stats = (1..=ladder.levels())
        .into_par_iter()
        .map(|ell| {
            let mut stream = seed.role(StreamRole::MinimizerProbe).level(ell as u64).stream();
            let mut diffs = Vec::with_capacity(samples_per_level);
            for _ in 0..samples_per_level {
                let d = problem.model.draw_coupled(ladder, ell, &mut stream)?;
                let coarse = d.coarse.unwrap_or(d.fine);
                diffs.push(problem.cost.eval(x_probe, d.fine) - problem.cost.eval(x_probe, coarse));
            }
            Ok((mean(&diffs).abs(), sample_variance(&diffs)))
        })
        .collect::<Result<Vec<_>>>()?;
    let (level_means, level_vars): (Vec<f64>, Vec<f64>) = stats.into_iter().unzip();

    let log_m = (ladder.m() as f64).ln();
    let fit = |ys: &[f64], what: &str| -> Result<f64> {
        let (ls, ys): (Vec<f64>, Vec<f64>) = ys
            .iter()
            .enumerate()
            .filter_map(|(i, &y)| {
                if y > 0.0 && y.is_finite() {
                    Some(((i + 1) as f64, y.ln() / log_m))
                } else {
                    log::warn!("level {} {what} vanishes; excluded from the fit", i + 1);
                    None
                }
            })
            .unzip();
        ls_slope(&ls, &ys)
            .map(|s| -s)
            .ok_or_else(|| crate::Error::Numeric(format!("too few usable levels to fit the {what}")))
    };
    Ok(RateEstimate {
        alpha_hat: fit(&level_means, "mean")?,
        beta_hat: fit(&level_vars, "variance")?,
        level_means,
        level_vars,
    })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::domain::{CostAccount, Interval};
    use crate::objective::CvarCost;
    use crate::samplers::{DiscreteLoss, GbmModel, GbmParams, NestedModel, Scheme};
    use crate::solvers::{McConfig, MlmcConfig, PilotReport, Sizing};

    fn report(value: f64, cost: f64) -> SolveReport {
        SolveReport {
            argmin: 0.0,
            value,
            sizing: Sizing::Mc { h: 0.5, n: 10 },
            cost: CostAccount::from_levels(vec![cost]),
            pilot: PilotReport {
                x_hat: 0.0,
                var_h: 1.0,
                var_diff: 0.0,
                c1_hat: 0.0,
                lambda_hat: 0.0,
                pilot_n: 2,
                degenerate: false,
            },
            seed: SeedSpec::new(0),
            wall_time: 0.0,
        }
    }

    #[test]
    fn rmse_identity_examples() {
        assert!((rmse_from(2.7188e-1, 3.0176e-1) - 0.6129).abs() < 5e-4);
        assert!((rmse_from(5.5760e-2, 7.9016e-2) - 0.2866).abs() < 5e-4);
    }

    #[test]
    fn summary_of_exact_values() {
        let reports: Vec<_> = (0..4).map(|_| report(2.0, 10.0)).collect();
        let s = summarize(&reports, 2.0, 0.1).unwrap();
        assert_eq!((s.bias, s.variance, s.rmse, s.tail_prob), (0.0, 0.0, 0.0, 0.0));
        assert_eq!(s.mean_cost, 10.0);
        assert_eq!(s.h0, 0.5);
        assert!(summarize(&reports[..1], 2.0, 0.1).is_err());
    }

    #[test]
    fn summary_fields() {
        let reports = vec![report(1.0, 2.0), report(3.0, 4.0), report(2.5, 6.0), report(1.5, 8.0)];
        let s = summarize(&reports, 1.75, 0.5).unwrap();
        assert!((s.mean_value - 2.0).abs() < 1e-15);
        assert!((s.bias - 0.25).abs() < 1e-15);
        assert!((s.variance - 5.0 / 6.0).abs() < 1e-12);
        assert!((s.rmse - rmse_from(s.bias, s.variance)).abs() < 1e-15);
        // Only |1.5 - 1.75| stays within 0.5.
        assert_eq!(s.tail_prob, 0.75);
        assert_eq!(s.mean_cost, 5.0);
    }

    fn two_point() -> Problem {
        Problem::new(
            Arc::new(DiscreteLoss::new(vec![0.0, 2.0, 3.0], vec![0.5, 0.3, 0.2]).unwrap()),
            CvarCost::new(0.75).unwrap(),
            Interval::new(0.0, 3.0).unwrap(),
        )
    }

    #[test]
    fn single_replication_matches_direct_solve() {
        let solver = SolverConfig::Mc(McConfig { alpha: 1.0, h_ref: 0.5, eps_ref: 0.5, pilot_n: 50, eta_bar: 1.0 });
        let seed = SeedSpec::new(11);
        let one = run_replications(&two_point(), &solver, 0.2, 1, seed).unwrap();
        let direct = solver.solve(&two_point(), 0.2, seed.replication(0)).unwrap();
        assert!(one[0].outcome_eq(&direct));
    }

    #[test]
    fn replications_do_not_depend_on_thread_count() {
        let problem = Problem::new(
            Arc::new(GbmModel::new(GbmParams::paper(), Scheme::Euler).unwrap()),
            CvarCost::new(0.95).unwrap(),
            Interval::new(23.0, 25.0).unwrap(),
        );
        let solver = SolverConfig::Mlmc(MlmcConfig {
            alpha: 1.0,
            beta: 1.0,
            a: 1e-3,
            h0: 1.0,
            m: 4,
            pilot_n: 200,
            eta_bar: 1.0,
        });
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| run_replications(&problem, &solver, 1.0, 6, SeedSpec::new(5)).unwrap())
        };
        let (a, b) = (run(1), run(4));
        assert!(a.iter().zip(&b).all(|(x, y)| x.outcome_eq(y)));
    }

    #[test]
    fn rates_of_nested_problem() {
        let problem = Problem::new(
            Arc::new(NestedModel::new(0.5).unwrap()),
            CvarCost::new(0.975).unwrap(),
            Interval::new(1.0, 4.0).unwrap(),
        );
        let ladder = BiasLadder::new(1.0 / 4.0, 2, 4).unwrap();
        let r = estimate_rates(&problem, 2.9, &ladder, 20_000, SeedSpec::new(1)).unwrap();
        assert_eq!(r.level_means.len(), 4);
        assert!(r.beta_hat > 0.5 && r.beta_hat < 1.5, "{r:?}");
    }

    #[test]
    fn rates_need_three_levels() {
        let ladder = BiasLadder::new(1.0, 4, 2).unwrap();
        assert!(estimate_rates(&two_point(), 1.0, &ladder, 10, SeedSpec::new(1)).is_err());
    }

    #[test]
    fn vanishing_means_fail_the_fit() {
        // Perfect coupling: every difference is zero.
        let ladder = BiasLadder::new(1.0, 2, 3).unwrap();
        assert!(estimate_rates(&two_point(), 1.0, &ladder, 10, SeedSpec::new(1)).is_err());
    }
}
