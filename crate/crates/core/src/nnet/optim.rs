//! Momentum SGD and the step learning-rate schedule.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SGDConfig {
    pub initial_rate: f64,
    pub decay_factor: f64,
    pub decay_every: usize,
    pub momentum: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for SGDConfig {
    fn default() -> Self {
        SGDConfig {
            initial_rate: 0.1,
            decay_factor: 0.1,
            decay_every: 50,
            momentum: 0.9,
            epochs: 200,
            batch_size: 32,
            seed: 0,
        }
    }
}

impl SGDConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.initial_rate > 0.0 && self.decay_factor > 0.0) {
            return Err(Error::Range("learning rate and decay factor must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Range(format!("momentum {} outside [0, 1)", self.momentum)));
        }
        if self.epochs == 0 || self.decay_every == 0 || self.batch_size == 0 {
            return Err(Error::Range("epochs, decay interval and batch size must be at least 1".into()));
        }
        Ok(())
    }
}

/// `initial_rate * decay_factor^(epoch / decay_every)`.
pub fn lr_at(epoch: usize, config: &SGDConfig) -> Result<f64> {
    if epoch >= config.epochs {
        return Err(Error::Range(format!(
            "epoch {epoch} outside 0..{}",
            config.epochs
        )));
    }
    let steps = (epoch / config.decay_every) as i32;
    Ok(config.initial_rate * config.decay_factor.powi(steps))
}

/// `velocity = momentum * velocity - rate * grads; weights += velocity`.
pub fn sgd_step(
    weights: &mut [f64],
    grads: &[f64],
    velocity: &mut [f64],
    rate: f64,
    momentum: f64,
) -> Result<()> {
    if weights.len() != grads.len() || weights.len() != velocity.len() {
        return Err(Error::Shape(format!(
            "weights {}, grads {}, velocity {}",
            weights.len(),
            grads.len(),
            velocity.len()
        )));
    }
    for ((w, g), v) in weights.iter_mut().zip(grads).zip(velocity.iter_mut()) {
        *v = momentum * *v - rate * g;
        *w += *v;
    }
    Ok(())
}
