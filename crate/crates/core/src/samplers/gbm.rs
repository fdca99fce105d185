//! Short put on a geometric Brownian motion, discretised with Euler-Maruyama
//! or Milstein.

use serde::{Deserialize, Serialize};

use super::{CoupledDraw, LossModel};
use crate::domain::BiasLadder;
use crate::error::{domain, Result};
use crate::stream::Stream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Euler,
    Milstein,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GbmParams {
    pub x0: f64,
    pub r: f64,
    pub sigma: f64,
    /// Horizon `T`.
    pub horizon: f64,
    pub strike: f64,
    /// Premium received when the put was sold.
    pub premium: f64,
}

impl GbmParams {
    /// `sigma = 0` is accepted; the samplers then follow the drift ODE.
    pub fn new(x0: f64, r: f64, sigma: f64, horizon: f64, strike: f64, premium: f64) -> Result<Self> {
        let p = Self { x0, r, sigma, horizon, strike, premium };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.x0, self.r, self.sigma, self.horizon, self.strike, self.premium];
        if all.iter().any(|v| !v.is_finite()) {
            return domain("GBM parameters must be finite");
        }
        if self.x0 <= 0.0 || self.horizon <= 0.0 || self.strike <= 0.0 {
            return domain("x0, horizon and strike must be positive");
        }
        if self.sigma < 0.0 || self.premium < 0.0 {
            return domain("sigma and premium must be non-negative");
        }
        Ok(())
    }

    /// `X0 = 100, r = 0.05, sigma = 0.2, T = 1, K = 110, P0 = 10.7`.
    pub fn paper() -> Self {
        Self { x0: 100.0, r: 0.05, sigma: 0.2, horizon: 1.0, strike: 110.0, premium: 10.7 }
    }

    /// Number of time steps giving a step no larger than `h`.
    pub fn steps_for(&self, h: f64) -> Result<usize> {
        if !(h.is_finite() && h > 0.0) {
            return domain(format!("bias parameter must be positive, got {h}"));
        }
        let ratio = self.horizon / h;
        // Tolerate round-off when T/h is an integer in exact arithmetic.
        let n = (ratio * (1.0 - 1e-12)).ceil();
        Ok((n as usize).max(1))
    }
}

#[inline]
fn step(scheme: Scheme, p: &GbmParams, x: f64, h: f64, dw: f64) -> f64 {
    match scheme {
        Scheme::Euler => x + p.r * x * h + p.sigma * x * dw,
        Scheme::Milstein => {
            let s2 = p.sigma * p.sigma;
            x + (p.r - 0.5 * s2) * h * x + p.sigma * x * dw + 0.5 * s2 * x * dw * dw
        }
    }
}

fn terminal(scheme: Scheme, p: &GbmParams, n_steps: usize, increments: &[f64]) -> Result<f64> {
    if n_steps == 0 {
        return domain("n_steps must be at least 1");
    }
    if increments.len() != n_steps {
        return domain(format!("expected {n_steps} increments, got {}", increments.len()));
    }
    let h = p.horizon / n_steps as f64;
    Ok(increments.iter().fold(p.x0, |x, &dw| step(scheme, p, x, h, dw)))
}

/// Terminal value of the Euler-Maruyama recursion with `n_steps` equal steps,
/// driven by the given Brownian increments.
pub fn gbm_euler_terminal(p: &GbmParams, n_steps: usize, increments: &[f64]) -> Result<f64> {
    terminal(Scheme::Euler, p, n_steps, increments)
}

/// Terminal value of the Milstein recursion.
pub fn gbm_milstein_terminal(p: &GbmParams, n_steps: usize, increments: &[f64]) -> Result<f64> {
    terminal(Scheme::Milstein, p, n_steps, increments)
}

/// `(K - x_T)_+ - e^{rT} P0`.
pub fn put_loss(x_t: f64, p: &GbmParams) -> f64 {
    (p.strike - x_t).max(0.0) - (p.r * p.horizon).exp() * p.premium
}

/// Coupled fine/coarse losses at level `ell`.
///
/// The fine path takes `n_l = ceil(T / h0) * m^ell` steps and the coarse path
/// `n_l / m`. Increments are drawn in order as `sqrt(T / n_l) * Z`, and each
/// coarse increment is the sum of `m` consecutive fine ones.
pub fn gbm_coupled_pair(
    p: &GbmParams,
    scheme: Scheme,
    ladder: &BiasLadder,
    ell: usize,
    stream: &mut Stream,
) -> Result<CoupledDraw> {
    ladder.level_bias(ell)?;
    let base = p.steps_for(ladder.h0())?;
    let m = ladder.m() as usize;
    let n_fine = base * m.pow(ell as u32);
    let h_fine = p.horizon / n_fine as f64;
    let sd = h_fine.sqrt();

    if ell == 0 {
        let mut x = p.x0;
        for _ in 0..n_fine {
            x = step(scheme, p, x, h_fine, sd * stream.normal());
        }
        return Ok(CoupledDraw::level0(put_loss(x, p)));
    }

    let n_coarse = n_fine / m;
    let h_coarse = p.horizon / n_coarse as f64;
    let (mut xf, mut xc) = (p.x0, p.x0);
    for _ in 0..n_coarse {
        let mut dw_coarse = 0.0;
        for _ in 0..m {
            let dw = sd * stream.normal();
            xf = step(scheme, p, xf, h_fine, dw);
            dw_coarse += dw;
        }
        xc = step(scheme, p, xc, h_coarse, dw_coarse);
    }
    Ok(CoupledDraw { fine: put_loss(xf, p), coarse: Some(put_loss(xc, p)) })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GbmModel {
    pub params: GbmParams,
    pub scheme: Scheme,
}

impl GbmModel {
    pub fn new(params: GbmParams, scheme: Scheme) -> Result<Self> {
        params.validate()?;
        Ok(Self { params, scheme })
    }
}

impl LossModel for GbmModel {
    fn draw(&self, h: f64, stream: &mut Stream) -> Result<f64> {
        let p = &self.params;
        let n = p.steps_for(h)?;
        let dt = p.horizon / n as f64;
        let sd = dt.sqrt();
        let mut x = p.x0;
        for _ in 0..n {
            x = step(self.scheme, p, x, dt, sd * stream.normal());
        }
        Ok(put_loss(x, p))
    }

    fn draw_coupled(
        &self,
        ladder: &BiasLadder,
        ell: usize,
        stream: &mut Stream,
    ) -> Result<CoupledDraw> {
        gbm_coupled_pair(&self.params, self.scheme, ladder, ell, stream)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stream::SeedSpec;

    fn params(r: f64, sigma: f64) -> GbmParams {
        GbmParams::new(100.0, r, sigma, 1.0, 110.0, 10.7).unwrap()
    }

    #[test]
    fn zero_volatility_zero_drift_is_constant() {
        let p = params(0.0, 0.0);
        let inc = [0.3, -1.2, 0.7];
        assert_eq!(gbm_euler_terminal(&p, 3, &inc).unwrap(), 100.0);
        assert_eq!(gbm_milstein_terminal(&p, 3, &inc).unwrap(), 100.0);
    }

    #[test]
    fn single_euler_step_without_noise() {
        let p = params(0.05, 0.0);
        let x = gbm_euler_terminal(&p, 1, &[0.4]).unwrap();
        assert!((x - 105.0).abs() < 1e-12);
    }

    #[test]
    fn four_step_euler_matches_hand_recursion() {
        // X_{n+1} = X_n (1 + 0.05 * 0.25 + 0.2 * 0.1), four times.
        let p = params(0.05, 0.2);
        let x = gbm_euler_terminal(&p, 4, &[0.1; 4]).unwrap();
        assert!((x - 113.64759281640626).abs() < 1e-10, "{x}");
    }

    #[test]
    fn single_milstein_step_matches_formula() {
        // x0 (1 + (r - s^2/2) T + s w + s^2 w^2 / 2) with w = 0.3.
        let p = params(0.05, 0.2);
        let x = gbm_milstein_terminal(&p, 1, &[0.3]).unwrap();
        assert!((x - 109.18).abs() < 1e-10, "{x}");
    }

    #[test]
    fn schemes_coincide_without_volatility() {
        for r in [-0.1, 0.0, 0.05, 0.3] {
            let p = params(r, 0.0);
            let inc = [0.1, -0.2, 0.05, 0.7, -1.0];
            assert_eq!(
                gbm_euler_terminal(&p, 5, &inc).unwrap(),
                gbm_milstein_terminal(&p, 5, &inc).unwrap()
            );
        }
    }

    #[test]
    fn terminal_argument_errors() {
        let p = GbmParams::paper();
        assert!(gbm_euler_terminal(&p, 0, &[]).is_err());
        assert!(gbm_milstein_terminal(&p, 2, &[0.1]).is_err());
    }

    #[test]
    fn put_loss_examples() {
        let p = GbmParams::paper();
        assert!((put_loss(120.0, &p) - -11.248600731223457).abs() < 1e-12);
        assert_eq!(put_loss(p.strike, &p), -(p.r * p.horizon).exp() * p.premium);
        let free = GbmParams { premium: 0.0, ..p };
        assert_eq!(put_loss(0.0, &free), 110.0);
    }

    #[test]
    fn deterministic_paths_couple_exactly() {
        let p = params(0.0, 0.0);
        let ladder = BiasLadder::new(1.0, 4, 3).unwrap();
        let mut s = SeedSpec::new(5).stream();
        for ell in 1..=3 {
            for scheme in [Scheme::Euler, Scheme::Milstein] {
                let d = gbm_coupled_pair(&p, scheme, &ladder, ell, &mut s).unwrap();
                assert_eq!(Some(d.fine), d.coarse);
            }
        }
        assert_eq!(gbm_coupled_pair(&p, Scheme::Euler, &ladder, 0, &mut s).unwrap().coarse, None);
    }

    #[test]
    fn coupled_pair_matches_slice_recursion_bitwise() {
        let p = GbmParams::paper();
        let ladder = BiasLadder::new(1.0, 4, 3).unwrap();
        for scheme in [Scheme::Euler, Scheme::Milstein] {
            for ell in 1..=3usize {
                let spec = SeedSpec::new(11).level(ell as u64);
                let d = gbm_coupled_pair(&p, scheme, &ladder, ell, &mut spec.stream()).unwrap();

                let n_fine = 4usize.pow(ell as u32);
                let sd = (1.0 / n_fine as f64).sqrt();
                let mut s = spec.stream();
                let fine: Vec<f64> = (0..n_fine).map(|_| sd * s.normal()).collect();
                let coarse: Vec<f64> = fine
                    .chunks(4)
                    .map(|c| {
                        let mut acc = 0.0;
                        for dw in c {
                            acc += dw;
                        }
                        acc
                    })
                    .collect();
                let term = match scheme {
                    Scheme::Euler => gbm_euler_terminal,
                    Scheme::Milstein => gbm_milstein_terminal,
                };
                let xf = term(&p, n_fine, &fine).unwrap();
                let xc = term(&p, n_fine / 4, &coarse).unwrap();
                assert_eq!(d.fine.to_bits(), put_loss(xf, &p).to_bits());
                assert_eq!(d.coarse.unwrap().to_bits(), put_loss(xc, &p).to_bits());
            }
        }
    }

    #[test]
    fn steps_for_handles_exact_ratios() {
        let p = GbmParams::paper();
        assert_eq!(p.steps_for(1.0).unwrap(), 1);
        assert_eq!(p.steps_for(0.03125).unwrap(), 32);
        assert_eq!(p.steps_for(0.3).unwrap(), 4);
        assert!(p.steps_for(0.0).is_err());
    }
}
