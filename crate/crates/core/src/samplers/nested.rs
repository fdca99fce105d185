//! Nested-expectation loss `zeta = -1 - E[phi(Y, Z) | Y]` with the inner
//! expectation replaced by an average over `M = 1/h` normal draws.

use serde::{Deserialize, Serialize};

use super::{CoupledDraw, LossModel};
use crate::domain::BiasLadder;
use crate::error::{domain, Result};
use crate::stream::Stream;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NestedParams {
    pub tau: f64,
    pub theta: f64,
}

impl NestedParams {
    pub fn new(tau: f64, theta: f64) -> Result<Self> {
        check_tau(tau)?;
        if !(theta > 0.0 && theta < 1.0) {
            return domain(format!("theta must lie in (0, 1), got {theta}"));
        }
        Ok(Self { tau, theta })
    }
}

fn check_tau(tau: f64) -> Result<()> {
    if !(tau > 0.0 && tau < 1.0) {
        return domain(format!("tau must lie in (0, 1), got {tau}"));
    }
    Ok(())
}

/// `-tau y^2 - 2 sqrt(tau (1 - tau)) y z - (1 - tau) z^2`.
#[inline]
pub fn phi(y: f64, z: f64, tau: f64) -> f64 {
    -tau * y * y - 2.0 * (tau * (1.0 - tau)).sqrt() * y * z - (1.0 - tau) * z * z
}

/// `-1 - mean_j phi(y, z_j)`, the inner estimate with bias `h = 1/M`.
pub fn nested_inner_estimate(y: f64, inner_draws: &[f64], tau: f64) -> Result<f64> {
    if inner_draws.is_empty() {
        return domain("inner sample count must be at least 1");
    }
    let mut sum = 0.0;
    for &z in inner_draws {
        sum += phi(y, z, tau);
    }
    Ok(-1.0 - sum / inner_draws.len() as f64)
}

/// `M = round(1/h)`, at least one.
pub fn inner_sample_count(h: f64) -> Result<usize> {
    if !(h.is_finite() && h > 0.0) {
        return domain(format!("bias parameter must be positive, got {h}"));
    }
    Ok(((1.0 / h).round() as usize).max(1))
}

/// Coupled inner estimates for the outer draw `y` at level `ell`.
///
/// `M_l = round(1/h_l)` inner normals are drawn; the fine estimate averages all
/// of them and the coarse estimate averages the first `M_{l-1}`.
pub fn nested_coupled_pair(
    y: f64,
    ladder: &BiasLadder,
    ell: usize,
    stream: &mut Stream,
    tau: f64,
) -> Result<CoupledDraw> {
    check_tau(tau)?;
    let m_fine = inner_sample_count(ladder.level_bias(ell)?)?;
    if ell == 0 {
        let mut sum = 0.0;
        for _ in 0..m_fine {
            sum += phi(y, stream.normal(), tau);
        }
        return Ok(CoupledDraw::level0(-1.0 - sum / m_fine as f64));
    }
    let m_coarse = inner_sample_count(ladder.level_bias(ell - 1)?)?;
    let mut sum = 0.0;
    for _ in 0..m_coarse {
        sum += phi(y, stream.normal(), tau);
    }
    let coarse = -1.0 - sum / m_coarse as f64;
    for _ in m_coarse..m_fine {
        sum += phi(y, stream.normal(), tau);
    }
    let fine = -1.0 - sum / m_fine as f64;
    Ok(CoupledDraw { fine, coarse: Some(coarse) })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NestedModel {
    pub tau: f64,
}

impl NestedModel {
    pub fn new(tau: f64) -> Result<Self> {
        check_tau(tau)?;
        Ok(Self { tau })
    }
}

impl LossModel for NestedModel {
    fn draw(&self, h: f64, stream: &mut Stream) -> Result<f64> {
        let m = inner_sample_count(h)?;
        let y = stream.normal();
        let mut sum = 0.0;
        for _ in 0..m {
            sum += phi(y, stream.normal(), self.tau);
        }
        Ok(-1.0 - sum / m as f64)
    }

    fn draw_coupled(
        &self,
        ladder: &BiasLadder,
        ell: usize,
        stream: &mut Stream,
    ) -> Result<CoupledDraw> {
        let y = stream.normal();
        nested_coupled_pair(y, ladder, ell, stream, self.tau)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stream::SeedSpec;

    #[test]
    fn phi_examples() {
        assert_eq!(phi(0.0, 0.0, 0.3), 0.0);
        assert_eq!(phi(1.0, 0.0, 0.5), -0.5);
        assert!((phi(1.0, 1.0, 0.5) - -2.0).abs() < 1e-15);
    }

    #[test]
    fn inner_estimate_examples() {
        assert_eq!(nested_inner_estimate(0.0, &[0.0, 0.0, 0.0], 0.5).unwrap(), -1.0);
        assert!((nested_inner_estimate(0.0, &[1.0], 0.5).unwrap() - -0.5).abs() < 1e-15);
        assert!(nested_inner_estimate(0.0, &[], 0.5).is_err());
    }

    #[test]
    fn inner_estimate_converges_to_conditional_mean() {
        // E[phi(y, Z)] = -tau y^2 - (1 - tau), so the limit is tau (y^2 - 1).
        let (y, tau) = (1.5, 0.5);
        let mut s = SeedSpec::new(99).stream();
        let m = 1_000_000;
        let draws: Vec<f64> = (0..m).map(|_| s.normal()).collect();
        let est = nested_inner_estimate(y, &draws, tau).unwrap();
        // Var[phi(y, Z)] = 4 tau (1 - tau) y^2 + 2 (1 - tau)^2.
        let var = 4.0 * tau * (1.0 - tau) * y * y + 2.0 * (1.0 - tau) * (1.0 - tau);
        let se = (var / m as f64).sqrt();
        assert!((est - 0.625).abs() < 3.0 * se, "est {est}, se {se}");
    }

    #[test]
    fn coarse_estimate_uses_leading_subsample() {
        let tau = 0.5;
        let ladder = BiasLadder::new(1.0 / 8.0, 2, 3).unwrap();
        for ell in 1..=3usize {
            let spec = SeedSpec::new(4).level(ell as u64);
            let y = 0.8;
            let d = nested_coupled_pair(y, &ladder, ell, &mut spec.stream(), tau).unwrap();

            let m_fine = 8 << ell;
            let m_coarse = m_fine / 2;
            let mut s = spec.stream();
            let z: Vec<f64> = (0..m_fine).map(|_| s.normal()).collect();
            let coarse = nested_inner_estimate(y, &z[..m_coarse], tau).unwrap();
            assert_eq!(d.coarse.unwrap().to_bits(), coarse.to_bits());

            // M_l * (-1 - fine) = M_{l-1} * (-1 - coarse) + tail sum
            let tail: f64 = z[m_coarse..].iter().map(|&zj| phi(y, zj, tau)).sum();
            let lhs = m_fine as f64 * (-1.0 - d.fine);
            let rhs = m_coarse as f64 * (-1.0 - d.coarse.unwrap()) + tail;
            assert!((lhs - rhs).abs() < 1e-9 * lhs.abs().max(1.0));
        }
    }

    #[test]
    fn level_zero_has_no_coarse_partner() {
        let ladder = BiasLadder::new(1.0 / 64.0, 2, 2).unwrap();
        let d = nested_coupled_pair(0.1, &ladder, 0, &mut SeedSpec::new(1).stream(), 0.5).unwrap();
        assert!(d.coarse.is_none());
    }

    #[test]
    fn parameter_validation() {
        assert!(NestedModel::new(0.0).is_err());
        assert!(NestedParams::new(0.5, 1.0).is_err());
        assert!(inner_sample_count(-1.0).is_err());
        assert_eq!(inner_sample_count(1.0 / 64.0).unwrap(), 64);
    }
}
