//! The single base classifier used by every multi-label method: a
//! logistic-link linear model trained by stochastic gradient descent.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Predicted probabilities are kept strictly inside (0,1).
pub const PROB_CLAMP: f64 = 1e-12;

/// SGD hyperparameters. The learning rate decays as `lr / sqrt(t)` over
/// the global update counter `t`; L2 applies to the weights, not the bias.
#[derive(Debug, Clone, PartialEq)]
pub struct SgdConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub l2: f64,
    pub seed: u64,
}

impl Default for SgdConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            learning_rate: 0.1,
            l2: 1e-4,
            seed: 0,
        }
    }
}

impl SgdConfig {
    pub(crate) fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }

    fn validate(&self) -> Result<()> {
        if self.epochs < 1 {
            return Err(Error::config("epochs must be at least 1"));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::config("learning rate must be positive"));
        }
        if self.l2 < 0.0 {
            return Err(Error::config("l2 must be nonnegative"));
        }
        Ok(())
    }
}

/// A linear model with a logistic link: `p(x) = sigma(w . x + b)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LinearModel {
    pub fn new(weights: Vec<f64>, bias: f64) -> Self {
        Self { weights, bias }
    }

    pub fn d_in(&self) -> usize {
        self.weights.len()
    }

    /// `sigma(w . x + b)`, clamped away from exact 0 and 1.
    pub fn predict_proba(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.weights.len() {
            return Err(Error::input(format!(
                "expected {} inputs, got {}",
                self.weights.len(),
                x.len()
            )));
        }
        let z = dot(&self.weights, x) + self.bias;
        Ok(sigmoid(z).clamp(PROB_CLAMP, 1.0 - PROB_CLAMP))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("linear model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text)
            .map_err(|e| Error::input(format!("invalid linear model record: {e}")))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Trains a logistic model on `rows x cols` features against binary
/// targets, minimizing the L2-regularized logistic loss by SGD with a
/// seeded per-epoch shuffle. Deterministic for a fixed config.
pub fn train_binary(
    features: &[f64],
    rows: usize,
    cols: usize,
    targets: &[u8],
    config: &SgdConfig,
) -> Result<LinearModel> {
    config.validate()?;
    if rows == 0 || cols == 0 {
        return Err(Error::input("training set must be non-empty"));
    }
    if features.len() != rows * cols {
        return Err(Error::input("feature matrix does not match its dimensions"));
    }
    if targets.len() != rows {
        return Err(Error::input("target count does not match row count"));
    }
    if targets.iter().any(|&t| t > 1) {
        return Err(Error::input("targets must be 0 or 1"));
    }
    if features.iter().any(|v| !v.is_finite()) {
        return Err(Error::input("feature values must be finite"));
    }

    let mut weights = vec![0.0f64; cols];
    let mut bias = 0.0f64;
    let mut order: Vec<usize> = (0..rows).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut step = 0u64;
    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            step += 1;
            let eta = config.learning_rate / (step as f64).sqrt();
            let x = &features[i * cols..(i + 1) * cols];
            let p = sigmoid(dot(&weights, x) + bias);
            let residual = p - targets[i] as f64;
            for (w, &xj) in weights.iter_mut().zip(x) {
                *w -= eta * (residual * xj + config.l2 * *w);
            }
            bias -= eta * residual;
        }
    }
    Ok(LinearModel::new(weights, bias))
}
