use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::cae::CaeModel;
use super::nadam::Nadam;
use crate::domain::FieldTensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub max_iterations: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub seed: u64,
    /// Field scale; derived from the data when absent.
    pub input_scale: Option<f64>,
    /// Stop once the mean loss of the latest `stop_window` iterations falls below this.
    pub stop_below: Option<f64>,
    pub stop_window: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 128,
            max_iterations: 5000,
            lr: 0.002,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            seed: 0,
            input_scale: None,
            stop_below: None,
            stop_window: 100,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.stop_window == 0 {
            return Err(Error::InvalidConfig(
                "batch size and stop window must be positive".into(),
            ));
        }
        if !(self.beta1 > 0.0 && self.beta1 < 1.0 && self.beta2 > 0.0 && self.beta2 < 1.0) {
            return Err(Error::InvalidConfig("betas must lie in (0, 1)".into()));
        }
        if !(self.lr >= 0.0) || !(self.eps > 0.0) {
            return Err(Error::InvalidConfig("lr must be >= 0 and eps > 0".into()));
        }
        if matches!(self.input_scale, Some(s) if !(s > 0.0)) {
            return Err(Error::InvalidConfig("input scale must be positive".into()));
        }
        Ok(())
    }
}

/// Scale that maps the largest magnitude in `data` to 0.9, inside tanh's range.
pub fn auto_scale(data: &[FieldTensor]) -> f64 {
    let max = data
        .iter()
        .flat_map(|f| f.values().iter())
        .fold(0.0f64, |m, v| m.max(v.abs()));
    if max > 0.0 {
        max / 0.9
    } else {
        1.0
    }
}

/// Mini-batch Nadam on the mean squared reconstruction error.
///
/// Batches are drawn without replacement from a seeded reshuffle of the
/// dataset each epoch. Returns the trained model and per-iteration batch
/// losses (network units).
pub fn cae_train(mut model: CaeModel, data: &[FieldTensor], cfg: &TrainConfig) -> Result<(CaeModel, Vec<f64>)> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    model.input_scale = cfg.input_scale.unwrap_or_else(|| auto_scale(data));
    let inputs: Vec<Vec<f64>> = data.iter().map(|f| model.to_input(f)).collect::<Result<_>>()?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut opt = Nadam::new(model.param_count(), cfg.lr, cfg.beta1, cfg.beta2, cfg.eps);
    let mut order: Vec<usize> = (0..inputs.len()).collect();
    let mut cursor = order.len();
    let batch = cfg.batch_size.min(inputs.len());
    let mut history = Vec::with_capacity(cfg.max_iterations);
    let mut picked: Vec<Vec<f64>> = Vec::with_capacity(batch);

    for _ in 0..cfg.max_iterations {
        picked.clear();
        while picked.len() < batch {
            if cursor == order.len() {
                order.shuffle(&mut rng);
                cursor = 0;
            }
            picked.push(inputs[order[cursor]].clone());
            cursor += 1;
        }
        let (loss, grad) = model.grad_of_inputs(&picked);
        opt.step(model.params_mut(), &grad);
        model.iterations += 1;
        history.push(loss);

        if let Some(target) = cfg.stop_below {
            if history.len() >= cfg.stop_window {
                let tail = &history[history.len() - cfg.stop_window..];
                if tail.iter().sum::<f64>() / cfg.stop_window as f64 <= target {
                    break;
                }
            }
        }
    }
    Ok((model, history))
}

/// Mean MSE over the full dataset (network units).
pub fn dataset_mse(model: &CaeModel, data: &[FieldTensor]) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let inputs: Vec<Vec<f64>> = data.iter().map(|f| model.to_input(f)).collect::<Result<_>>()?;
    Ok(model.loss_of_inputs(&inputs))
}

/// Means of consecutive non-overlapping `window`-sized blocks.
pub fn block_means(history: &[f64], window: usize) -> Vec<f64> {
    history
        .chunks_exact(window)
        .map(|c| c.iter().sum::<f64>() / window as f64)
        .collect()
}
