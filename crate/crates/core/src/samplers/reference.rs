//! Closed-form CVaR values of the two shipped losses, used as `p*`.
//!
//! Neither function touches a sampler: the GBM value integrates the exact
//! lognormal terminal law, the nested value uses `zeta = tau (Y^2 - 1)`.

use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use super::GbmParams;
use crate::error::{domain, Result};

fn std_normal() -> Normal {
    Normal::standard()
}

fn check_theta(theta: f64) -> Result<()> {
    if !(theta > 0.0 && theta < 1.0) {
        return domain(format!("theta must lie in (0, 1), got {theta}"));
    }
    Ok(())
}

/// `CVaR_theta` of `(K - X_T)_+ - e^{rT} P0` for exactly lognormal `X_T`.
///
/// The loss is non-increasing in `X_T`, so the worst `(1 - theta)` tail is
/// `{X_T <= q}` with `q` the `(1 - theta)`-quantile of `X_T`, and
/// `CVaR = E[(K - X_T) 1{X_T <= min(q, K)}] / (1 - theta) - e^{rT} P0`.
pub fn cvar_reference_gbm(p: &GbmParams, theta: f64) -> Result<f64> {
    check_theta(theta)?;
    p.validate()?;
    let growth = (p.r * p.horizon).exp();
    let premium = growth * p.premium;
    if p.sigma == 0.0 {
        return Ok((p.strike - p.x0 * growth).max(0.0) - premium);
    }
    let n = std_normal();
    let s = p.sigma * p.horizon.sqrt();
    let mu = p.x0.ln() + (p.r - 0.5 * p.sigma * p.sigma) * p.horizon;
    let z_q = n.inverse_cdf(1.0 - theta);
    // Standardised log cutoff min(ln q, ln K).
    let z_c = z_q.min((p.strike.ln() - mu) / s);
    let put_part = p.strike * n.cdf(z_c) - p.x0 * growth * n.cdf(z_c - s);
    Ok(put_part / (1.0 - theta) - premium)
}

/// `CVaR_theta` of `tau (Y^2 - 1)` with `Y` standard normal.
///
/// With `a = Phi^{-1}(1 - (1 - theta)/2)` the tail is `{|Y| > a}` and
/// `E[Y^2 1{|Y| > a}] = 2 (a phi(a) + 1 - Phi(a))`.
pub fn cvar_reference_nested(tau: f64, theta: f64) -> Result<f64> {
    check_theta(theta)?;
    if !(tau > 0.0 && tau < 1.0) {
        return domain(format!("tau must lie in (0, 1), got {tau}"));
    }
    let n = std_normal();
    let a = n.inverse_cdf(1.0 - 0.5 * (1.0 - theta));
    let tail_second_moment = 2.0 * (a * n.pdf(a) + n.sf(a));
    Ok(tau * (tail_second_moment / (1.0 - theta) - 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Composite Simpson rule on `[a, b]` with `n` (even) panels.
    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut acc = f(a) + f(b);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * f(a + i as f64 * h);
        }
        acc * h / 3.0
    }

    #[test]
    fn gbm_reference_matches_published_value() {
        let v = cvar_reference_gbm(&GbmParams::paper(), 0.95).unwrap();
        assert!((v - 30.347).abs() < 0.01, "{v}");
    }

    #[test]
    fn gbm_reference_matches_quadrature_over_normal_tail() {
        // CVaR = E[zeta | W <= z_q], integrate zeta(X_T(w)) phi(w) over w <= z_q.
        let p = GbmParams::paper();
        let theta = 0.95;
        let n = std_normal();
        let s = p.sigma * p.horizon.sqrt();
        let mu = p.x0.ln() + (p.r - 0.5 * p.sigma * p.sigma) * p.horizon;
        let z_q = n.inverse_cdf(1.0 - theta);
        let loss = |w: f64| super::super::put_loss((mu + s * w).exp(), &p) * n.pdf(w);
        let quad = simpson(loss, -12.0, z_q, 200_000) / (1.0 - theta);
        let closed = cvar_reference_gbm(&p, theta).unwrap();
        assert!((quad - closed).abs() < 1e-6, "quad {quad} closed {closed}");
    }

    #[test]
    fn gbm_reference_degenerate_cases() {
        let p = GbmParams::paper();
        let growth = (p.r * p.horizon).exp();

        let tiny = GbmParams { sigma: 1e-9, ..p };
        let expect = (p.strike - p.x0 * growth).max(0.0) - growth * p.premium;
        assert!((cvar_reference_gbm(&tiny, 0.95).unwrap() - expect).abs() < 1e-6);

        let otm = GbmParams { sigma: 1e-9, strike: 100.0, ..p };
        let expect = -growth * p.premium;
        assert!((cvar_reference_gbm(&otm, 0.95).unwrap() - expect).abs() < 1e-6);

        let vanishing = GbmParams { strike: 1e-12, premium: 0.0, ..p };
        assert!(cvar_reference_gbm(&vanishing, 0.95).unwrap().abs() < 1e-9);

        assert!(cvar_reference_gbm(&p, 1.0).is_err());
        assert!(cvar_reference_gbm(&p, 0.0).is_err());
    }

    #[test]
    fn nested_reference_value() {
        let v = cvar_reference_nested(0.5, 0.975).unwrap();
        assert!((v - 2.901128255081).abs() < 1e-9, "{v}");
    }

    #[test]
    fn nested_reference_matches_quadrature() {
        let (tau, theta) = (0.5, 0.975);
        let n = std_normal();
        let a = n.inverse_cdf(1.0 - 0.5 * (1.0 - theta));
        let m2 = 2.0 * simpson(|y| y * y * n.pdf(y), a, a + 15.0, 100_000);
        let quad = tau * (m2 / (1.0 - theta) - 1.0);
        let closed = cvar_reference_nested(tau, theta).unwrap();
        assert!((quad - closed).abs() < 1e-8);
    }

    #[test]
    fn nested_reference_is_linear_in_tau() {
        for theta in [0.9, 0.95, 0.975] {
            for tau in [0.05, 0.2, 0.45] {
                let one = cvar_reference_nested(tau, theta).unwrap();
                let two = cvar_reference_nested(2.0 * tau, theta).unwrap();
                assert!((two - 2.0 * one).abs() < 1e-12);
            }
        }
        assert!(cvar_reference_nested(1e-12, 0.975).unwrap().abs() < 1e-10);
        assert!(cvar_reference_nested(0.0, 0.975).is_err());
        assert!(cvar_reference_nested(0.5, 1.5).is_err());
    }
}
