//! Empirical CVaR objectives and their minimisers.
//!
//! Both the single-level average `F_h^N` and the telescoped multilevel sum
//! `F_L` are represented as a weighted sample set
//! `F(x) = sum_k w_k f(x, zeta_k)` with `f(x, z) = x + (z - x)_+ / (1 - theta)`.
//! `F` is piecewise linear in `x` with kinks at the `zeta_k`, so it is
//! minimised exactly by scanning kinks and endpoints, even when the weights
//! are signed and `F` is not convex.

use serde::{Deserialize, Serialize};

use crate::domain::Interval;
use crate::error::{domain, Error, Result};
use crate::samplers::CoupledDraw;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CvarCost {
    theta: f64,
}

impl CvarCost {
    pub fn new(theta: f64) -> Result<Self> {
        if !(theta > 0.0 && theta < 1.0) {
            return domain(format!("CVaR level must lie in (0, 1), got {theta}"));
        }
        Ok(Self { theta })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    #[inline]
    pub fn eval(&self, x: f64, zeta: f64) -> f64 {
        cvar_cost_eval(x, zeta, self.theta)
    }
}

/// `x + (zeta - x)_+ / (1 - theta)`.
#[inline]
pub fn cvar_cost_eval(x: f64, zeta: f64, theta: f64) -> f64 {
    x + (zeta - x).max(0.0) / (1.0 - theta)
}

/// The draws of one level: fine values and, above level 0, coarse partners.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelBatch {
    pub fine: Vec<f64>,
    pub coarse: Option<Vec<f64>>,
}

impl LevelBatch {
    pub fn level0(fine: Vec<f64>) -> Self {
        Self { fine, coarse: None }
    }

    pub fn coupled(fine: Vec<f64>, coarse: Vec<f64>) -> Result<Self> {
        if fine.len() != coarse.len() {
            return domain("fine and coarse batches differ in length");
        }
        Ok(Self { fine, coarse: Some(coarse) })
    }

    pub fn from_draws(draws: &[CoupledDraw]) -> Result<Self> {
        let fine = draws.iter().map(|d| d.fine).collect();
        match draws.first().map(|d| d.coarse.is_some()) {
            Some(true) => {
                let coarse = draws
                    .iter()
                    .map(|d| d.coarse.ok_or_else(|| Error::Domain("mixed level draws".into())))
                    .collect::<Result<Vec<_>>>()?;
                Self::coupled(fine, coarse)
            }
            _ => Ok(Self::level0(fine)),
        }
    }

    pub fn len(&self) -> usize {
        self.fine.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fine.is_empty()
    }
}

/// Loss draws with signed weights summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedSampleSet {
    values: Vec<f64>,
    weights: Vec<f64>,
}

impl WeightedSampleSet {
    pub fn new(values: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if values.is_empty() || values.len() != weights.len() {
            return domain("sample set needs matching non-empty values and weights");
        }
        if values.iter().chain(&weights).any(|v| !v.is_finite()) {
            return domain("sample set contains non-finite entries");
        }
        let total: f64 = weights.iter().sum();
        let scale: f64 = weights.iter().map(|w| w.abs()).sum();
        if (total - 1.0).abs() > 1e-10 * scale.max(1.0) {
            return domain(format!("weights sum to {total}, not 1"));
        }
        Ok(Self { values, weights })
    }

    /// Equal weights `1/N`.
    pub fn uniform(values: Vec<f64>) -> Result<Self> {
        let n = values.len();
        Self::new(values, vec![1.0 / n.max(1) as f64; n])
    }

    /// Telescoped set: level 0 draws carry `+1/N_0`, and each coupled pair at
    /// level `l` carries `+1/N_l` on the fine value and `-1/N_l` on the coarse.
    pub fn from_level_batches(batches: &[LevelBatch]) -> Result<Self> {
        let Some(first) = batches.first() else {
            return domain("at least one level batch is required");
        };
        if first.coarse.is_some() || first.is_empty() {
            return domain("level 0 batch must be non-empty and uncoupled");
        }
        let total: usize =
            batches.iter().map(|b| b.len() * if b.coarse.is_some() { 2 } else { 1 }).sum();
        let mut values = Vec::with_capacity(total);
        let mut weights = Vec::with_capacity(total);
        for (ell, batch) in batches.iter().enumerate() {
            if batch.is_empty() {
                continue;
            }
            let w = 1.0 / batch.len() as f64;
            values.extend_from_slice(&batch.fine);
            weights.extend(std::iter::repeat_n(w, batch.len()));
            match (&batch.coarse, ell) {
                (None, 0) => {}
                (Some(coarse), l) if l > 0 => {
                    values.extend_from_slice(coarse);
                    weights.extend(std::iter::repeat_n(-w, coarse.len()));
                }
                _ => return domain(format!("level {ell} batch has the wrong coupling")),
            }
        }
        Self::new(values, weights)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_uniform(&self) -> bool {
        let w0 = self.weights[0];
        self.weights.iter().all(|&w| w == w0)
    }
}

/// `sum_k w_k f(x, zeta_k)`.
pub fn objective_eval(x: f64, s: &WeightedSampleSet, cost: &CvarCost) -> f64 {
    s.values.iter().zip(&s.weights).map(|(&z, &w)| w * cost.eval(x, z)).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinimizeResult {
    pub argmin: f64,
    pub value: f64,
    pub evaluations: usize,
}

/// Exact minimiser of a weighted CVaR objective over `domain`.
///
/// Candidates are both endpoints and every sample value inside the interval.
/// Each is scored in O(1) from suffix sums of `w` and `w * zeta` over the
/// sorted samples. Equal scores resolve to the smallest candidate. The
/// reported value is re-evaluated directly at the chosen point.
pub fn minimize_breakpoints(
    s: &WeightedSampleSet,
    cost: &CvarCost,
    domain: Interval,
) -> MinimizeResult {
    let (lo, hi) = (domain.lo(), domain.hi());
    if lo == hi {
        return MinimizeResult { argmin: lo, value: objective_eval(lo, s, cost), evaluations: 1 };
    }

    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&a, &b| s.values[a].total_cmp(&s.values[b]));
    let zs: Vec<f64> = order.iter().map(|&i| s.values[i]).collect();
    let ws: Vec<f64> = order.iter().map(|&i| s.weights[i]).collect();

    let n = zs.len();
    let mut suffix_w = vec![0.0; n + 1];
    let mut suffix_wz = vec![0.0; n + 1];
    for i in (0..n).rev() {
        suffix_w[i] = suffix_w[i + 1] + ws[i];
        suffix_wz[i] = suffix_wz[i + 1] + ws[i] * zs[i];
    }
    let total_w = suffix_w[0];
    let slope = 1.0 / (1.0 - cost.theta());

    let mut best = (f64::NAN, f64::INFINITY);
    let mut evaluations = 0;
    let mut above = 0usize;
    let mut consider = |x: f64| {
        while above < n && zs[above] <= x {
            above += 1;
        }
        let value = x * total_w + slope * (suffix_wz[above] - x * suffix_w[above]);
        evaluations += 1;
        if best.0.is_nan() || value < best.1 - 1e-12 * best.1.abs().max(1.0) {
            best = (x, value);
        }
    };

    consider(lo);
    let start = zs.partition_point(|&z| z <= lo);
    let mut last = lo;
    for &z in &zs[start..] {
        if z >= hi {
            break;
        }
        if z != last {
            consider(z);
            last = z;
        }
    }
    consider(hi);

    let argmin = best.0;
    MinimizeResult { argmin, value: objective_eval(argmin, s, cost), evaluations }
}

/// Golden-section search over `domain`. Exact only for unimodal evaluators.
pub fn minimize_golden(
    mut evaluator: impl FnMut(f64) -> f64,
    domain: Interval,
    tol: f64,
) -> Result<MinimizeResult> {
    if !(tol.is_finite() && tol > 0.0) {
        return Err(Error::Domain(format!("tolerance must be positive, got {tol}")));
    }
    let mut evaluations = 0;
    let mut eval = |x: f64| -> Result<f64> {
        evaluations += 1;
        let v = evaluator(x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Numeric(format!("evaluator returned {v} at x = {x}")))
        }
    };

    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (domain.lo(), domain.hi());
    if a == b {
        let value = eval(a)?;
        return Ok(MinimizeResult { argmin: a, value, evaluations: 1 });
    }
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = eval(c)?;
    let mut fd = eval(d)?;
    while b - a > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = eval(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = eval(d)?;
        }
    }
    let (argmin, value) = if fc <= fd { (c, fc) } else { (d, fd) };
    Ok(MinimizeResult { argmin, value, evaluations })
}
