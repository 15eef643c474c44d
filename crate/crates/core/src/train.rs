//! Mini-batch training loop shared by the pair heads and the classifier.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{AdamWConfig, AdamWState, Gradients, Loss, Mlp, Mode, Rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    /// Inverted-dropout rate on hidden layers.
    pub dropout: f64,
    pub optimizer: AdamWConfig,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 100,
            batch_size: 32,
            dropout: 0.5,
            optimizer: AdamWConfig::default(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be ≥ 1".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        let o = &self.optimizer;
        if !(o.learning_rate > 0.0 && o.learning_rate.is_finite()) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if !(0.0..1.0).contains(&o.beta1) || !(0.0..1.0).contains(&o.beta2) {
            return Err(Error::Config("beta1 and beta2 must lie in [0, 1)".into()));
        }
        if !(o.epsilon > 0.0) || !(o.weight_decay >= 0.0) {
            return Err(Error::Config("epsilon must be positive and weight_decay non-negative".into()));
        }
        Ok(())
    }
}

/// Mean training loss per epoch.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingLog {
    pub epoch_loss: Vec<f64>,
}

impl TrainingLog {
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("epoch\tmean_loss\n");
        for (i, l) in self.epoch_loss.iter().enumerate() {
            out.push_str(&format!("{}\t{l:?}\n", i + 1));
        }
        out
    }
}

/// Runs `config.epochs` epochs of shuffled mini-batch AdamW over `count`
/// examples. `example(i, rng)` yields the network input and boolean target
/// of example `i`; it may consume randomness.
pub(crate) fn fit<F>(
    mlp: &mut Mlp,
    count: usize,
    loss: Loss,
    config: &TrainConfig,
    rng: &mut Rng,
    mut example: F,
) -> Result<TrainingLog>
where
    F: FnMut(usize, &mut Rng) -> (Vec<f64>, bool),
{
    config.validate()?;
    if count == 0 {
        return Err(Error::Invalid("no training examples".into()));
    }
    let mut optimizer = AdamWState::new(config.optimizer, mlp);
    let mut grads = Gradients::zeros_like(mlp);
    let mut order: Vec<usize> = (0..count).collect();
    let mut log = TrainingLog::default();
    for epoch in 0..config.epochs {
        rng.shuffle(&mut order);
        let mut total = 0.0;
        for batch in order.chunks(config.batch_size) {
            grads.fill_zero();
            for &i in batch {
                let (input, target) = example(i, rng);
                let pass = mlp.forward(&input, Mode::Train, rng)?;
                let s = pass.output()[0];
                let value = loss.value(s, target);
                if !value.is_finite() {
                    return Err(Error::NonFinite {
                        what: format!("training loss in epoch {}", epoch + 1),
                    });
                }
                total += value;
                mlp.accumulate_gradients(&pass, &[loss.grad(s, target)], &mut grads)?;
            }
            grads.scale(1.0 / batch.len() as f64);
            optimizer.step(mlp, &grads)?;
        }
        log.epoch_loss.push(total / count as f64);
    }
    Ok(log)
}
