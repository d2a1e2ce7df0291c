//! Monte Carlo inference: ancestral sampling for directed models and
//! Gibbs sampling for dependency models.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::models::{DependencyModel, StructuredModel};

/// Gibbs sweep budget: `t_total` full sweeps, the first `t_burn` discarded.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GibbsConfig {
    pub t_total: usize,
    pub t_burn: usize,
    pub seed: u64,
}

impl Default for GibbsConfig {
    fn default() -> Self {
        Self {
            t_total: 100,
            t_burn: 10,
            seed: 0,
        }
    }
}

impl GibbsConfig {
    pub fn new(t_total: usize, t_burn: usize, seed: u64) -> Result<Self> {
        let cfg = Self { t_total, t_burn, seed };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.t_burn >= self.t_total {
            return Err(Error::config(format!(
                "burn-in {} must be below total sweeps {}",
                self.t_burn, self.t_total
            )));
        }
        Ok(())
    }
}

/// A batch of sampled label vectors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleBatch {
    samples: Vec<Vec<u8>>,
}

impl SampleBatch {
    pub fn samples(&self) -> &[Vec<u8>] {
        &self.samples
    }

    pub fn count(&self) -> usize {
        self.samples.len()
    }

    /// Per-label sample means.
    pub fn means(&self) -> Vec<f64> {
        let l = self.samples.first().map_or(0, Vec::len);
        let mut sums = vec![0.0; l];
        for s in &self.samples {
            for (acc, &bit) in sums.iter_mut().zip(s) {
                *acc += bit as f64;
            }
        }
        let n = self.samples.len().max(1) as f64;
        sums.iter_mut().for_each(|v| *v /= n);
        sums
    }
}

/// Draws i.i.d. samples from a directed model by visiting the labels in
/// topological order and sampling each conditional Bernoulli.
pub fn ancestral_sample(
    model: &StructuredModel,
    x: &[f64],
    n_samples: usize,
    seed: u64,
) -> Result<SampleBatch> {
    if n_samples < 1 {
        return Err(Error::config("sample count must be at least 1"));
    }
    let l = model.l();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        let mut state = vec![0u8; l];
        for &label in model.structure().topo_order() {
            let p = model.conditional(label, x, &state)?;
            state[label] = (rng.random::<f64>() < p) as u8;
        }
        samples.push(state);
    }
    Ok(SampleBatch { samples })
}

/// Gibbs sampling over a dependency model, starting from the all-zeros
/// state. Each sweep resamples every label once, in a freshly shuffled
/// order, from its conditional given the current neighbor states.
/// Returns the per-label mean of the states after sweeps
/// `t_burn < t <= t_total`.
pub fn gibbs_sample(model: &DependencyModel, x: &[f64], config: &GibbsConfig) -> Result<Vec<f64>> {
    config.validate()?;
    let l = model.l();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut state = vec![0u8; l];
    let mut sums = vec![0.0f64; l];
    let mut order: Vec<usize> = (0..l).collect();
    for t in 1..=config.t_total {
        order.shuffle(&mut rng);
        for &label in &order {
            let p = model.conditional(label, x, &state)?;
            state[label] = (rng.random::<f64>() < p) as u8;
        }
        if t > config.t_burn {
            for (acc, &bit) in sums.iter_mut().zip(&state) {
                *acc += bit as f64;
            }
        }
    }
    let kept = (config.t_total - config.t_burn) as f64;
    sums.iter_mut().for_each(|v| *v /= kept);
    Ok(sums)
}

/// Thresholds per-label means at 0.5 (ties map to 0).
pub fn marginal_map(means: &[f64]) -> Vec<u8> {
    means.iter().map(|&m| (m > 0.5) as u8).collect()
}
