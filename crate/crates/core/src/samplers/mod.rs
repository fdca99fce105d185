//! Loss samplers: single-level draws `zeta_h` and coupled level pairs
//! `(zeta_l, zeta_{l-1})` driven by shared randomness.

mod gbm;
mod nested;
mod reference;

pub use gbm::{
    gbm_coupled_pair, gbm_euler_terminal, gbm_milstein_terminal, put_loss, GbmModel, GbmParams,
    Scheme,
};
pub use nested::{
    inner_sample_count, nested_coupled_pair, nested_inner_estimate, phi, NestedModel,
    NestedParams,
};
pub use reference::{cvar_reference_gbm, cvar_reference_nested};

use serde::{Deserialize, Serialize};

use crate::domain::BiasLadder;
use crate::error::{domain, Result};
use crate::stream::Stream;

/// A fine draw and, above level 0, its coarse partner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoupledDraw {
    pub fine: f64,
    pub coarse: Option<f64>,
}

impl CoupledDraw {
    pub fn level0(fine: f64) -> Self {
        Self { fine, coarse: None }
    }
}

/// A biased sampler for the random loss `zeta`.
pub trait LossModel: Send + Sync + std::fmt::Debug {
    /// One draw of `zeta_h`.
    fn draw(&self, h: f64, stream: &mut Stream) -> Result<f64>;

    /// One coupled draw at level `ell` of `ladder`.
    fn draw_coupled(&self, ladder: &BiasLadder, ell: usize, stream: &mut Stream)
        -> Result<CoupledDraw>;
}

/// An unbiased loss with finitely many outcomes. Fine and coarse draws are the
/// same value, so every level difference vanishes.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteLoss {
    values: Vec<f64>,
    cumulative: Vec<f64>,
}

impl DiscreteLoss {
    pub fn new(values: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        if values.is_empty() || values.len() != probs.len() {
            return domain("discrete loss needs matching non-empty values and probabilities");
        }
        if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return domain("probabilities must be finite and non-negative");
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return domain(format!("probabilities sum to {total}, not 1"));
        }
        let mut acc = 0.0;
        let cumulative = probs
            .iter()
            .map(|p| {
                acc += p / total;
                acc
            })
            .collect();
        Ok(Self { values, cumulative })
    }

    pub fn constant(c: f64) -> Self {
        Self { values: vec![c], cumulative: vec![1.0] }
    }

    fn sample(&self, stream: &mut Stream) -> f64 {
        if self.values.len() == 1 {
            return self.values[0];
        }
        let u = stream.uniform();
        let idx = self.cumulative.partition_point(|&c| c <= u).min(self.values.len() - 1);
        self.values[idx]
    }
}

impl LossModel for DiscreteLoss {
    fn draw(&self, _h: f64, stream: &mut Stream) -> Result<f64> {
        Ok(self.sample(stream))
    }

    fn draw_coupled(
        &self,
        ladder: &BiasLadder,
        ell: usize,
        stream: &mut Stream,
    ) -> Result<CoupledDraw> {
        ladder.level_bias(ell)?;
        let v = self.sample(stream);
        Ok(CoupledDraw { fine: v, coarse: (ell > 0).then_some(v) })
    }
}
