//! Value types shared by every stage of a solve: decision intervals, bias
//! ladders, rate contracts and simulation-cost accounting.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Closed decision interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    lo: f64,
    hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !lo.is_finite() || !hi.is_finite() {
            return domain(format!("interval bounds must be finite, got [{lo}, {hi}]"));
        }
        if lo > hi {
            return domain(format!("interval lower bound {lo} exceeds upper bound {hi}"));
        }
        Ok(Self { lo, hi })
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn diameter(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }

    pub fn clamp(&self, x: f64) -> f64 {
        x.clamp(self.lo, self.hi)
    }
}

/// Geometric family of bias parameters `h_l = h0 * m^-l` for `l = 0..=levels`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiasLadder {
    h0: f64,
    m: u32,
    levels: usize,
}

impl BiasLadder {
    pub fn new(h0: f64, m: u32, levels: usize) -> Result<Self> {
        if !(h0.is_finite() && h0 > 0.0) {
            return domain(format!("coarsest bias h0 must be positive, got {h0}"));
        }
        if m < 2 {
            return domain(format!("refinement factor must be at least 2, got {m}"));
        }
        Ok(Self { h0, m, levels })
    }

    pub fn h0(&self) -> f64 {
        self.h0
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    /// Index of the finest level.
    pub fn levels(&self) -> usize {
        self.levels
    }

    /// `h0 * m^-ell`.
    pub fn level_bias(&self, ell: usize) -> Result<f64> {
        if ell > self.levels {
            return domain(format!("level {ell} outside ladder 0..={}", self.levels));
        }
        Ok(self.h0 / (self.m as f64).powi(ell as i32))
    }

    /// Refinement multiplier `m^ell`.
    pub fn refinement(&self, ell: usize) -> f64 {
        (self.m as f64).powi(ell as i32)
    }

    pub fn with_levels(&self, levels: usize) -> Self {
        Self { levels, ..*self }
    }
}

/// Free-function form of [`BiasLadder::level_bias`].
pub fn level_bias(ladder: &BiasLadder, ell: usize) -> Result<f64> {
    ladder.level_bias(ell)
}

/// Weak/strong convergence rates and their constants.
///
/// `alpha` governs the bias `|E f(x, zeta_h) - E f(x, zeta)| <= c1 h^alpha`,
/// `beta` the coupled variance `V[f(x, zeta_l) - f(x, zeta_{l-1})] <= c2 h_l^beta`.
/// `a` is the slack in the RMSE exponent `beta_bar = beta / (1 + a)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateContract {
    pub alpha: f64,
    pub beta: f64,
    pub a: f64,
    pub c1: f64,
    pub c2: f64,
}

impl RateContract {
    pub fn new(alpha: f64, beta: f64, a: f64, c1: f64, c2: f64) -> Result<Self> {
        for (name, v) in [("alpha", alpha), ("beta", beta), ("a", a)] {
            if !(v.is_finite() && v > 0.0) {
                return domain(format!("{name} must be positive, got {v}"));
            }
        }
        for (name, v) in [("c1", c1), ("c2", c2)] {
            if !(v.is_finite() && v >= 0.0) {
                return domain(format!("{name} must be non-negative, got {v}"));
            }
        }
        Ok(Self { alpha, beta, a, c1, c2 })
    }

    pub fn beta_bar(&self) -> f64 {
        self.beta / (1.0 + self.a)
    }
}

/// Constants that appear only in the theoretical sample-size calculators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoryConstants {
    /// Lipschitz constant of `f(., zeta)`.
    pub lipschitz: f64,
    /// Confidence exponent: failure probability at most `eps^gamma`.
    pub gamma: f64,
    /// Cramér slack.
    pub delta: f64,
    pub dim: u32,
    /// Uniform second moment bound.
    pub sigma2: f64,
    /// Cost of one unit of simulation.
    pub eta_bar: f64,
    /// Floor for the level-weight exponent when the case analysis yields `r <= 0`.
    pub r: f64,
}

impl TheoryConstants {
    pub fn new(
        lipschitz: f64,
        gamma: f64,
        delta: f64,
        dim: u32,
        sigma2: f64,
        eta_bar: f64,
        r: f64,
    ) -> Result<Self> {
        for (name, v) in [
            ("lipschitz", lipschitz),
            ("gamma", gamma),
            ("delta", delta),
            ("sigma2", sigma2),
            ("eta_bar", eta_bar),
            ("r", r),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return domain(format!("{name} must be positive, got {v}"));
            }
        }
        if dim == 0 {
            return domain("dimension must be at least 1");
        }
        Ok(Self { lipschitz, gamma, delta, dim, sigma2, eta_bar, r })
    }
}

impl Default for TheoryConstants {
    fn default() -> Self {
        Self { lipschitz: 1.0, gamma: 1.0, delta: 1.0, dim: 1, sigma2: 1.0, eta_bar: 1.0, r: 1e-3 }
    }
}

/// Simulation cost split by level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostAccount {
    pub total: f64,
    pub per_level: Vec<f64>,
}

impl CostAccount {
    pub fn from_levels(per_level: Vec<f64>) -> Self {
        let total = per_level.iter().sum();
        Self { total, per_level }
    }
}

/// Cost `eta_bar * N_l / h_l` per level; a one-level ladder is the plain
/// Monte Carlo cost `eta_bar * N / h0`.
pub fn simulation_cost(
    samples_per_level: &[usize],
    ladder: &BiasLadder,
    eta_bar: f64,
) -> Result<CostAccount> {
    if samples_per_level.len() != ladder.levels() + 1 {
        return domain(format!(
            "expected {} per-level sample counts, got {}",
            ladder.levels() + 1,
            samples_per_level.len()
        ));
    }
    let per_level = samples_per_level
        .iter()
        .enumerate()
        .map(|(ell, &n)| Ok(eta_bar * n as f64 / ladder.level_bias(ell)?))
        .collect::<Result<Vec<_>>>()?;
    Ok(CostAccount::from_levels(per_level))
}
