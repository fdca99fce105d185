//! Theoretical sample sizes and complexity regimes.
//!
//! These are diagnostics only. Every unnamed universal constant is set to one,
//! and nothing here feeds the solvers.

use serde::{Deserialize, Serialize};

use crate::domain::{BiasLadder, RateContract, TheoryConstants};
use crate::error::{domain, Result};

const RATE_TIE: f64 = 1e-12;

/// Single-level sample size guaranteeing an `eps`-optimal solution with
/// probability at least `1 - eps^gamma`:
/// `(delta + 2) sigma^2 / (c1^2 h^(2 alpha)) * (d log(8 L_f D / eps) + gamma log(1/eps)) + 1`.
pub fn theoretical_mc_size(
    eps: f64,
    tc: &TheoryConstants,
    rc: &RateContract,
    h: f64,
    diameter: f64,
) -> Result<f64> {
    if !(eps > 0.0 && h > 0.0 && diameter > 0.0) {
        return domain("eps, h and the domain diameter must be positive");
    }
    if !(rc.c1 > 0.0) {
        return domain("the bias constant c1 must be positive");
    }
    let prefactor = (tc.delta + 2.0) * tc.sigma2 / (rc.c1 * rc.c1 * h.powf(2.0 * rc.alpha));
    let covering = tc.dim as f64 * (8.0 * tc.lipschitz * diameter / eps).ln();
    let confidence = tc.gamma * (1.0 / eps).ln();
    Ok(prefactor * (covering + confidence) + 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelSizeDiagnostic {
    /// Level-weight exponent used.
    pub r: f64,
    /// The case analysis gave `r <= 0` and `r` was replaced by the floor in
    /// [`TheoryConstants::r`].
    pub r_clamped: bool,
    /// Unrounded per-level sizes for `l = 0..=L`.
    pub sizes: Vec<f64>,
}

impl LevelSizeDiagnostic {
    pub fn ceiled(&self) -> Vec<f64> {
        self.sizes.iter().map(|n| n.ceil()).collect()
    }
}

/// Level-weight exponent from the three variance-rate cases.
pub fn level_weight_exponent(beta: f64, m: u32) -> f64 {
    let lm = (m as f64).ln();
    let l2 = 2f64.ln();
    if (beta - 1.0).abs() <= RATE_TIE {
        l2 / (2.0 * lm)
    } else if beta > 1.0 {
        (beta - 1.0) / 2.0 - l2 / lm
    } else {
        (1.0 - beta) / 2.0 - l2 / lm
    }
}

/// Multilevel sample sizes guaranteeing an `eps`-optimal solution:
/// `64 m^(2r) m^(2rl) (delta + 2) c2 h_l^beta / (eps^2 (m^r - 1)^2) * log(A (L + 1) / eps^gamma)`
/// with `A = (8 (2L + 1) L_f D / eps)^d`.
pub fn theoretical_mlmc_level_sizes(
    eps: f64,
    tc: &TheoryConstants,
    rc: &RateContract,
    ladder: &BiasLadder,
    diameter: f64,
) -> Result<LevelSizeDiagnostic> {
    if !(eps > 0.0 && diameter > 0.0) {
        return domain("eps and the domain diameter must be positive");
    }
    let m = ladder.m();
    let mut r = level_weight_exponent(rc.beta, m);
    let r_clamped = r <= 0.0;
    if r_clamped {
        log::warn!("level-weight exponent {r} is not positive for beta = {}, m = {m}; using {}", rc.beta, tc.r);
        r = tc.r;
    }
    let mf = m as f64;
    let levels = ladder.levels();
    let big_l = levels as f64;
    let covering = (8.0 * (2.0 * big_l + 1.0) * tc.lipschitz * diameter / eps).powi(tc.dim as i32);
    let log_term = (covering * (big_l + 1.0) / eps.powf(tc.gamma)).ln();
    let denom = eps * eps * (mf.powf(r) - 1.0).powi(2);
    let sizes = (0..=levels)
        .map(|ell| {
            let h = ladder.level_bias(ell)?;
            Ok(64.0 * mf.powf(2.0 * r) * mf.powf(2.0 * r * ell as f64) * (tc.delta + 2.0) * rc.c2
                * h.powf(rc.beta)
                / denom
                * log_term)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LevelSizeDiagnostic { r, r_clamped, sizes })
}

/// Conservative allocation `N_l = ceil(16/eps^2 c2^2 h_l^((bb+2)/3) (sum_j h_j^((bb-1)/3))^2)`
/// on `L = ceil(log(2 c1 h0^alpha / eps) / (alpha log m))` levels, with `bb = beta_bar`.
pub fn conservative_level_sizes(eps: f64, rc: &RateContract, h0: f64, m: u32) -> Result<Vec<f64>> {
    if !(eps > 0.0 && h0 > 0.0) {
        return domain("eps and h0 must be positive");
    }
    let arg = 2.0 * rc.c1 * h0.powf(rc.alpha) / eps;
    let levels = if arg > 1.0 {
        (arg.ln() / (rc.alpha * (m as f64).ln())).ceil() as usize
    } else {
        0
    };
    let ladder = BiasLadder::new(h0, m, levels)?;
    let bb = rc.beta_bar();
    let hs: Vec<f64> = (0..=levels).map(|l| ladder.level_bias(l)).collect::<Result<_>>()?;
    let spread: f64 = hs.iter().map(|h| h.powf((bb - 1.0) / 3.0)).sum();
    Ok(hs
        .iter()
        .map(|h| (16.0 / (eps * eps) * rc.c2 * rc.c2 * h.powf((bb + 2.0) / 3.0) * spread * spread).ceil())
        .collect())
}

/// Predicted growth of multilevel cost as `eps -> 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "regime", rename_all = "snake_case")]
pub enum Regime {
    /// `eps^-2` (variance decays faster than cost grows).
    Quadratic,
    /// `eps^-exponent` up to logarithmic factors, at the balanced rate.
    QuadraticLog { exponent: f64 },
    /// `eps^-(2 + (1 - beta)/alpha)`.
    Degraded { exponent: f64 },
}

impl Regime {
    pub fn cost_exponent(&self) -> f64 {
        match *self {
            Regime::Quadratic => 2.0,
            Regime::QuadraticLog { exponent } | Regime::Degraded { exponent } => exponent,
        }
    }
}

/// Classifies `beta` (or `beta_bar` when `use_beta_bar`) against one.
pub fn complexity_regime(rc: &RateContract, use_beta_bar: bool, m: u32) -> Regime {
    let beta = if use_beta_bar { rc.beta_bar() } else { rc.beta };
    if (beta - 1.0).abs() <= RATE_TIE {
        Regime::QuadraticLog { exponent: 2.0 + 2f64.ln() / (rc.alpha * (m as f64).ln()) }
    } else if beta > 1.0 {
        Regime::Quadratic
    } else {
        Regime::Degraded { exponent: 2.0 + (1.0 - beta) / rc.alpha }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rc(alpha: f64, beta: f64) -> RateContract {
        RateContract::new(alpha, beta, 1e-3, 1.0, 1.0).unwrap()
    }

    fn ones() -> TheoryConstants {
        TheoryConstants::new(1.0, 1.0, 1.0, 1, 1.0, 1.0, 1e-3).unwrap()
    }

    #[test]
    fn mc_size_plug_in() {
        // (delta + 2) = 3; log(8 e) + 1 at eps = 1/e.
        let eps = (-1.0f64).exp();
        let n = theoretical_mc_size(eps, &ones(), &rc(1.0, 1.0), 1.0, 1.0).unwrap();
        let expect = 3.0 * ((1.0 + 8f64.ln()) + 1.0) + 1.0;
        assert!((n - expect).abs() < 1e-12);
    }

    #[test]
    fn mc_size_is_linear_in_gamma() {
        let (eps, h) = (0.1, 0.3);
        let r = rc(1.0, 1.0);
        let one = theoretical_mc_size(eps, &ones(), &r, h, 2.0).unwrap();
        let two = theoretical_mc_size(eps, &TheoryConstants { gamma: 2.0, ..ones() }, &r, h, 2.0).unwrap();
        let expect = 3.0 / h.powi(2) * (1.0 / eps).ln();
        assert!((two - one - expect).abs() < 1e-9);
    }

    #[test]
    fn mc_cost_scales_like_eps_to_minus_three_over_logs() {
        let r = rc(1.0, 1.0);
        let tc = ones();
        let eps: Vec<f64> = (1..8).map(|k| 0.5f64.powi(k)).collect();
        let ys: Vec<f64> = eps
            .iter()
            .map(|&e| {
                let n = theoretical_mc_size(e, &tc, &r, e, 1.0).unwrap() - 1.0;
                let logs = (8.0 / e).ln() + (1.0 / e).ln();
                n / e / logs
            })
            .collect();
        let slope = crate::stats::loglog_slope(&eps, &ys).unwrap();
        assert!((slope + 3.0).abs() < 1e-9, "{slope}");
    }

    #[test]
    fn level_weight_cases() {
        assert!((level_weight_exponent(1.0, 4) - 0.25).abs() < 1e-15);
        assert!(level_weight_exponent(2.0, 4).abs() < 1e-15);
        let d = theoretical_mlmc_level_sizes(0.1, &ones(), &rc(1.0, 2.0), &BiasLadder::new(1.0, 4, 3).unwrap(), 2.0)
            .unwrap();
        assert!(d.r_clamped);
        assert_eq!(d.r, 1e-3);
    }

    #[test]
    fn level_size_ratio() {
        let r = rc(1.0, 1.0);
        let ladder = BiasLadder::new(1.0, 4, 4).unwrap();
        let d = theoretical_mlmc_level_sizes(0.05, &ones(), &r, &ladder, 2.0).unwrap();
        assert!(!d.r_clamped);
        let expect = 4f64.powf(2.0 * d.r) * 4f64.powf(-r.beta);
        for w in d.sizes.windows(2) {
            assert!((w[1] / w[0] - expect).abs() < 1e-12);
        }
        assert!(d.ceiled().iter().zip(&d.sizes).all(|(c, s)| c >= s));
    }

    #[test]
    fn regimes() {
        assert_eq!(complexity_regime(&rc(1.0, 2.0), false, 4), Regime::Quadratic);
        let r = complexity_regime(&rc(1.0, 1.0), false, 4);
        assert!((r.cost_exponent() - 2.5).abs() < 1e-12);
        let r = complexity_regime(&rc(0.5, 0.5), false, 4);
        assert!((r.cost_exponent() - 3.0).abs() < 1e-12);
        // beta_bar = 1/(1 + a) < 1 falls into the degraded case.
        assert!(matches!(complexity_regime(&rc(1.0, 1.0), true, 4), Regime::Degraded { .. }));
    }

    #[test]
    fn regime_is_scale_invariant() {
        for beta in [0.5, 1.0, 2.0] {
            let base = complexity_regime(&rc(1.0, beta), false, 4);
            let scaled = RateContract::new(1.0, beta, 1e-3, 17.0, 0.01).unwrap();
            assert_eq!(complexity_regime(&scaled, false, 4), base);
        }
    }

    #[test]
    fn conservative_sizes_shape() {
        let r = RateContract::new(1.0, 2.0, 1e-3, 1.0, 1.0).unwrap();
        let n = conservative_level_sizes(0.1, &r, 1.0, 4).unwrap();
        // L = ceil(log(20) / log 4) = 3
        assert_eq!(n.len(), 4);
        assert!(n.windows(2).all(|w| w[1] <= w[0]));
    }
}
