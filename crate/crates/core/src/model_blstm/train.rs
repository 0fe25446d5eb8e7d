use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::network::{loss_and_gradients, predict, sequence_loss, Sequence};
use super::params::{init_params, BlstmDims, BlstmParams};
use super::ModelError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub max_epochs: usize,
    /// Sequences per optimizer step.
    pub batch_size: usize,
    pub clip_norm: f64,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    pub seed: u64,
    /// Fixed class weights; derived from training label frequencies when
    /// absent.
    pub class_weights: Option<Vec<f64>>,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            max_epochs: 200,
            batch_size: 8,
            clip_norm: 5.0,
            patience: 10,
            seed: 0,
            class_weights: None,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self, classes: usize) -> Result<(), ModelError> {
        let bad = |m: &str| Err(ModelError::InvalidConfig(m.to_string()));
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be finite and non-negative");
        }
        if self.max_epochs == 0 || self.batch_size == 0 || self.patience == 0 {
            return bad("max_epochs, batch_size and patience must be positive");
        }
        if !(self.clip_norm > 0.0) {
            return bad("clip_norm must be positive");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || !(self.adam_eps > 0.0) {
            return bad("Adam moments must lie in [0, 1) and eps must be positive");
        }
        if let Some(w) = &self.class_weights {
            if w.len() != classes || w.iter().any(|v| !(*v > 0.0)) {
                return bad("class_weights needs one positive weight per class");
            }
        }
        Ok(())
    }
}

pub const CLASS_WEIGHT_RANGE: (f64, f64) = (0.25, 4.0);

/// Inverse-frequency weights `N / (C · n_c)`, clamped to [0.25, 4].
pub fn class_weights_from_labels<'a>(labels: impl Iterator<Item = &'a Option<usize>>, classes: usize) -> Vec<f64> {
    let mut counts = vec![0usize; classes];
    for y in labels.flatten() {
        counts[*y] += 1;
    }
    let total: usize = counts.iter().sum();
    counts
        .iter()
        .map(|&n| {
            let w = if n == 0 {
                f64::INFINITY
            } else {
                total as f64 / (classes * n) as f64
            };
            w.clamp(CLASS_WEIGHT_RANGE.0, CLASS_WEIGHT_RANGE.1)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
    pub val_accuracy: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters from the epoch with the lowest monitored loss.
    pub params: BlstmParams,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub class_weights: Vec<f64>,
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    step: i32,
}

impl Adam {
    fn update(&mut self, cfg: &TrainConfig, params: &mut [f64], grad: &[f64]) {
        self.step += 1;
        let c1 = 1.0 - cfg.beta1.powi(self.step);
        let c2 = 1.0 - cfg.beta2.powi(self.step);
        for k in 0..params.len() {
            self.m[k] = cfg.beta1 * self.m[k] + (1.0 - cfg.beta1) * grad[k];
            self.v[k] = cfg.beta2 * self.v[k] + (1.0 - cfg.beta2) * grad[k] * grad[k];
            params[k] -= cfg.learning_rate * (self.m[k] / c1) / ((self.v[k] / c2).sqrt() + cfg.adam_eps);
        }
    }
}

fn accuracy(params: &BlstmParams, seqs: &[Sequence]) -> Result<Option<f64>, ModelError> {
    let (mut hit, mut n) = (0usize, 0usize);
    for s in seqs {
        let pred = predict(params, &s.features)?;
        for (p, y) in pred.iter().zip(&s.labels) {
            if let Some(y) = y {
                n += 1;
                hit += usize::from(p == y);
            }
        }
    }
    Ok((n > 0).then(|| hit as f64 / n as f64))
}

/// Loss over several sequences, weighted the same way as a training batch.
fn mean_loss(params: &BlstmParams, seqs: &[Sequence], weights: &[f64]) -> Result<f64, ModelError> {
    let (mut num, mut den) = (0.0, 0.0);
    for s in seqs {
        let w: f64 = s.labels.iter().flatten().map(|y| weights[*y]).sum();
        if w > 0.0 {
            num += sequence_loss(params, s, weights)? * w;
            den += w;
        }
    }
    Ok(if den > 0.0 { num / den } else { 0.0 })
}

/// Mini-batch Adam with global-norm clipping and early stopping on the
/// validation loss (training loss when `val` is empty). Deterministic for a
/// given config.
pub fn train(
    dims: BlstmDims,
    config: &TrainConfig,
    train_set: &[Sequence],
    val: &[Sequence],
) -> Result<TrainOutcome, ModelError> {
    dims.validate().map_err(ModelError::InvalidConfig)?;
    config.validate(dims.classes)?;
    if !train_set.iter().any(|s| s.labels.iter().any(Option::is_some)) {
        return Err(ModelError::EmptyDataset);
    }
    let weights = config
        .class_weights
        .clone()
        .unwrap_or_else(|| class_weights_from_labels(train_set.iter().flat_map(|s| &s.labels), dims.classes));
    let mut params = init_params(config.seed, dims);
    let mut adam = Adam {
        m: vec![0.0; params.values.len()],
        v: vec![0.0; params.values.len()],
        step: 0,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(0x5eed));
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut history = Vec::new();
    let mut best = (f64::INFINITY, params.clone(), 0usize);
    let mut since_best = 0;
    for epoch in 0..config.max_epochs {
        order.shuffle(&mut rng);
        let (mut loss_sum, mut weight_sum) = (0.0, 0.0);
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<&Sequence> = chunk.iter().map(|&i| &train_set[i]).collect();
            let (loss, mut grad) = loss_and_gradients(&params, &batch, &weights)?;
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(ModelError::NonFiniteLoss {
                    step: adam.step as usize,
                    detail: format!("epoch {epoch}, loss {loss}"),
                });
            }
            let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
            if norm > config.clip_norm {
                let s = config.clip_norm / norm;
                grad.iter_mut().for_each(|g| *g *= s);
            }
            adam.update(config, &mut params.values, &grad);
            let w: f64 = batch
                .iter()
                .flat_map(|s| s.labels.iter().flatten())
                .map(|y| weights[*y])
                .sum();
            loss_sum += loss * w;
            weight_sum += w;
        }
        let train_loss = if weight_sum > 0.0 { loss_sum / weight_sum } else { 0.0 };
        let (val_loss, val_accuracy) = if val.is_empty() {
            (None, None)
        } else {
            (Some(mean_loss(&params, val, &weights)?), accuracy(&params, val)?)
        };
        history.push(EpochRecord {
            epoch,
            train_loss,
            val_loss,
            val_accuracy,
        });
        log::debug!("epoch {epoch}: train {train_loss:.4} val {val_loss:?} acc {val_accuracy:?}");
        let monitored = val_loss.unwrap_or(train_loss);
        if monitored < best.0 {
            best = (monitored, params.clone(), epoch);
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= config.patience {
                break;
            }
        }
    }
    Ok(TrainOutcome {
        params: best.1,
        history,
        best_epoch: best.2,
        class_weights: weights,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_frequency_weights() {
        let labels = [Some(0), Some(0), Some(0), Some(1), None, Some(2), Some(2), Some(2)];
        let w = class_weights_from_labels(labels.iter(), 4);
        // 7 labels: n = 3, 1, 3, 0
        assert!((w[0] - 7.0 / 12.0).abs() < 1e-12);
        assert_eq!(w[1], 7.0 / 4.0);
        assert_eq!(w[3], 4.0);
        let skewed: Vec<Option<usize>> = (0..100).map(|i| Some(if i < 97 { 0 } else { 1 })).collect();
        let w = class_weights_from_labels(skewed.iter(), 2);
        assert_eq!(w[0], 100.0 / 194.0);
        assert_eq!(w[1], 4.0);
    }

    fn toy() -> Vec<Sequence> {
        (0..4)
            .map(|k| Sequence {
                features: (0..10 * 3).map(|i| ((i * 7 + k) % 5) as f64 / 5.0).collect(),
                labels: (0..10).map(|i| Some((i + k) % 2)).collect(),
            })
            .collect()
    }

    fn toy_dims() -> BlstmDims {
        BlstmDims {
            input: 3,
            hidden: 4,
            layers: 1,
            classes: 2,
            bidirectional: true,
        }
    }

    #[test]
    fn zero_learning_rate_keeps_init() {
        let cfg = TrainConfig {
            learning_rate: 0.0,
            max_epochs: 5,
            patience: 100,
            ..Default::default()
        };
        let out = train(toy_dims(), &cfg, &toy(), &[]).unwrap();
        assert_eq!(out.params, init_params(cfg.seed, toy_dims()));
    }

    #[test]
    fn small_steps_never_raise_the_full_batch_loss() {
        // one batch holds every sequence, so each record is the loss before that step
        let cfg = TrainConfig {
            learning_rate: 1e-4,
            max_epochs: 11,
            batch_size: 4,
            patience: 100,
            ..Default::default()
        };
        let out = train(toy_dims(), &cfg, &toy(), &[]).unwrap();
        let losses: Vec<f64> = out.history.iter().map(|r| r.train_loss).collect();
        assert_eq!(losses.len(), 11);
        for w in losses.windows(2) {
            assert!(w[1] <= w[0], "{losses:?}");
        }
        assert!(losses[10] < losses[0]);
    }

    #[test]
    fn runs_are_reproducible() {
        let cfg = TrainConfig {
            max_epochs: 6,
            batch_size: 2,
            learning_rate: 1e-2,
            ..Default::default()
        };
        let a = train(toy_dims(), &cfg, &toy(), &toy()[..1]).unwrap();
        let b = train(toy_dims(), &cfg, &toy(), &toy()[..1]).unwrap();
        assert_eq!(a.history, b.history);
        assert_eq!(a.params, b.params);
    }

    #[test]
    fn config_validation() {
        let cfg = TrainConfig {
            batch_size: 0,
            ..Default::default()
        };
        assert!(matches!(
            train(toy_dims(), &cfg, &toy(), &[]),
            Err(ModelError::InvalidConfig(_))
        ));
        let unlabeled = vec![Sequence {
            features: vec![0.0; 3],
            labels: vec![None],
        }];
        assert!(matches!(
            train(toy_dims(), &TrainConfig::default(), &unlabeled, &[]),
            Err(ModelError::EmptyDataset)
        ));
    }
}
