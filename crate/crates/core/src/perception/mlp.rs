//! Multilayer perceptron with rectifier hidden layers and a softmax output,
//! trained by mini-batch SGD with momentum.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Instance, LabelDistribution, PerceptionError, TrainBatch};

#[derive(Clone, Debug, PartialEq)]
pub struct FitConfig {
    pub epochs: usize,
    pub lr: f64,
    pub momentum: f64,
    /// Examples per gradient step; 0 means the whole batch.
    pub minibatch: usize,
    /// L2 penalty coefficient on weights (not biases).
    pub weight_decay: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            epochs: 1,
            lr: 0.05,
            momentum: 0.9,
            minibatch: 16,
            weight_decay: 0.0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Mlp {
    dims: Vec<usize>,
    /// Per layer: weights row-major (`out × in`), then biases.
    params: Vec<f64>,
    velocity: Vec<f64>,
    rng: ChaCha8Rng,
}

fn param_count(dims: &[usize]) -> usize {
    dims.windows(2).map(|w| w[1] * w[0] + w[1]).sum()
}

impl Mlp {
    /// Glorot-uniform weights and zero biases.
    pub fn new(dims: &[usize], seed: u64) -> Mlp {
        assert!(
            dims.len() >= 2 && dims.iter().all(|d| *d > 0),
            "layer dimensions must be positive"
        );
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = Vec::with_capacity(param_count(dims));
        for w in dims.windows(2) {
            let limit = (6.0 / (w[0] + w[1]) as f64).sqrt();
            params.extend((0..w[0] * w[1]).map(|_| rng.random_range(-limit..limit)));
            params.extend(std::iter::repeat_n(0.0, w[1]));
        }
        let velocity = vec![0.0; params.len()];
        Mlp {
            dims: dims.to_vec(),
            params,
            velocity,
            rng,
        }
    }

    pub fn zeros(dims: &[usize]) -> Mlp {
        let mut m = Mlp::new(dims, 0);
        m.params.iter_mut().for_each(|p| *p = 0.0);
        m
    }

    pub(crate) fn from_params(dims: Vec<usize>, params: Vec<f64>) -> Mlp {
        let velocity = vec![0.0; params.len()];
        Mlp {
            dims,
            params,
            velocity,
            rng: ChaCha8Rng::seed_from_u64(0),
        }
    }

    /// Reseed the mini-batch shuffling stream.
    pub fn reseed(&mut self, seed: u64) {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn classes(&self) -> usize {
        *self.dims.last().unwrap()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn check(&self, x: &[f64]) -> Result<(), PerceptionError> {
        if x.len() != self.input_dim() {
            return Err(PerceptionError::DimensionMismatch {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Layer outputs: rectified for hidden layers, raw logits for the last.
    fn forward(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut acts = vec![x.to_vec()];
        let mut off = 0;
        let layers = self.dims.len() - 1;
        for (l, w) in self.dims.windows(2).enumerate() {
            let (n_in, n_out) = (w[0], w[1]);
            let input = &acts[l];
            let weights = &self.params[off..off + n_in * n_out];
            let bias = &self.params[off + n_in * n_out..off + n_in * n_out + n_out];
            let out: Vec<f64> = (0..n_out)
                .map(|o| {
                    let row = &weights[o * n_in..(o + 1) * n_in];
                    let z = bias[o] + row.iter().zip(input).map(|(a, b)| a * b).sum::<f64>();
                    if l + 1 < layers {
                        z.max(0.0)
                    } else {
                        z
                    }
                })
                .collect();
            off += n_in * n_out + n_out;
            acts.push(out);
        }
        acts
    }

    fn log_softmax(logits: &[f64]) -> Vec<f64> {
        let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + logits.iter().map(|z| (z - m).exp()).sum::<f64>().ln();
        logits.iter().map(|z| z - lse).collect()
    }

    /// Natural-log class probabilities.
    pub fn log_probs(&self, x: &[f64]) -> Result<Vec<f64>, PerceptionError> {
        self.check(x)?;
        Ok(Self::log_softmax(self.forward(x).last().unwrap()))
    }

    pub fn predict(&self, x: &[f64]) -> Result<LabelDistribution, PerceptionError> {
        self.check(x)?;
        let logits = self.forward(x);
        let logits = logits.last().unwrap();
        let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = logits.iter().map(|z| (z - m).exp()).collect();
        let s: f64 = e.iter().sum();
        Ok(LabelDistribution {
            probs: e.into_iter().map(|v| v / s).collect(),
        })
    }

    pub fn argmax(&self, x: &[f64]) -> Result<usize, PerceptionError> {
        Ok(self.predict(x)?.argmax())
    }

    /// Accumulate `weight ×` the cross-entropy gradient into `grad`; returns
    /// the unweighted loss.
    fn backward(&self, x: &[f64], label: usize, weight: f64, grad: &mut [f64]) -> f64 {
        let acts = self.forward(x);
        let lp = Self::log_softmax(acts.last().unwrap());
        let loss = -lp[label];
        let mut delta: Vec<f64> = lp.iter().map(|v| v.exp() * weight).collect();
        delta[label] -= weight;
        let mut offsets = Vec::new();
        let mut off = 0;
        for w in self.dims.windows(2) {
            offsets.push(off);
            off += w[0] * w[1] + w[1];
        }
        for l in (0..self.dims.len() - 1).rev() {
            let (n_in, n_out) = (self.dims[l], self.dims[l + 1]);
            let o = offsets[l];
            let input = &acts[l];
            for j in 0..n_out {
                let d = delta[j];
                if d == 0.0 {
                    continue;
                }
                let row = &mut grad[o + j * n_in..o + (j + 1) * n_in];
                for (g, a) in row.iter_mut().zip(input) {
                    *g += d * a;
                }
                grad[o + n_in * n_out + j] += d;
            }
            if l > 0 {
                let weights = &self.params[o..o + n_in * n_out];
                delta = (0..n_in)
                    .map(|i| {
                        if input[i] <= 0.0 {
                            return 0.0;
                        }
                        (0..n_out).map(|j| weights[j * n_in + i] * delta[j]).sum()
                    })
                    .collect();
            }
        }
        loss
    }

    fn validate(&self, batch: &TrainBatch) -> Result<(), PerceptionError> {
        if batch.is_empty() {
            return Err(PerceptionError::EmptyBatch);
        }
        for (x, &l) in batch.instances.iter().zip(&batch.labels) {
            self.check(x)?;
            if l >= self.classes() {
                return Err(PerceptionError::LabelOutOfRange {
                    label: l,
                    classes: self.classes(),
                });
            }
        }
        Ok(())
    }

    fn batch_gradient(&self, batch: &TrainBatch, idx: &[usize], grad: &mut [f64]) -> f64 {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let total_w: f64 = idx.iter().map(|&i| batch.weight(i)).sum();
        if total_w <= 0.0 {
            return 0.0;
        }
        let mut loss = 0.0;
        for &i in idx {
            let w = batch.weight(i);
            if w == 0.0 {
                continue;
            }
            loss += w * self.backward(&batch.instances[i], batch.labels[i], w / total_w, grad);
        }
        loss / total_w
    }

    /// Weighted mean cross-entropy over the batch and its gradient.
    pub fn gradient(&self, batch: &TrainBatch) -> Result<(f64, Vec<f64>), PerceptionError> {
        self.validate(batch)?;
        let idx: Vec<usize> = (0..batch.len()).collect();
        let mut grad = vec![0.0; self.params.len()];
        let loss = self.batch_gradient(batch, &idx, &mut grad);
        Ok((loss, grad))
    }

    /// Weighted mean cross-entropy over the batch.
    pub fn loss(&self, batch: &TrainBatch) -> Result<f64, PerceptionError> {
        self.validate(batch)?;
        let mut total = 0.0;
        let mut tw = 0.0;
        for i in 0..batch.len() {
            let w = batch.weight(i);
            if w > 0.0 {
                total += w * -self.log_probs(&batch.instances[i])?[batch.labels[i]];
                tw += w;
            }
        }
        Ok(if tw > 0.0 { total / tw } else { 0.0 })
    }

    /// Train with default settings; returns the mean loss of the last epoch.
    pub fn fit(
        &mut self,
        batch: &TrainBatch,
        epochs: usize,
        lr: f64,
    ) -> Result<f64, PerceptionError> {
        self.fit_with(
            batch,
            &FitConfig {
                epochs,
                lr,
                ..FitConfig::default()
            },
        )
    }

    pub fn fit_with(
        &mut self,
        batch: &TrainBatch,
        cfg: &FitConfig,
    ) -> Result<f64, PerceptionError> {
        self.validate(batch)?;
        let step = if cfg.minibatch == 0 {
            batch.len()
        } else {
            cfg.minibatch
        };
        let mut order: Vec<usize> = (0..batch.len()).collect();
        let mut grad = vec![0.0; self.params.len()];
        let mut last = 0.0;
        for epoch in 0..cfg.epochs {
            if step < batch.len() {
                order.shuffle(&mut self.rng);
            }
            let mut sum = 0.0;
            let mut n = 0.0;
            for chunk in order.chunks(step) {
                let loss = self.batch_gradient(batch, chunk, &mut grad);
                if !loss.is_finite() {
                    return Err(PerceptionError::NonFiniteLoss {
                        epoch,
                        last_loss: last,
                    });
                }
                if cfg.weight_decay > 0.0 {
                    let mut off = 0;
                    for w in self.dims.windows(2) {
                        let n = w[0] * w[1];
                        for (g, p) in grad[off..off + n]
                            .iter_mut()
                            .zip(&self.params[off..off + n])
                        {
                            *g += cfg.weight_decay * p;
                        }
                        off += w[0] * w[1] + w[1];
                    }
                }
                for ((p, v), g) in self
                    .params
                    .iter_mut()
                    .zip(self.velocity.iter_mut())
                    .zip(&grad)
                {
                    *v = cfg.momentum * *v - cfg.lr * g;
                    *p += *v;
                }
                if self.params.iter().any(|p| !p.is_finite()) {
                    return Err(PerceptionError::NonFiniteLoss {
                        epoch,
                        last_loss: last,
                    });
                }
                sum += loss * chunk.len() as f64;
                n += chunk.len() as f64;
            }
            last = sum / n;
        }
        Ok(last)
    }

    /// Largest relative difference between analytic and central-difference
    /// gradients of the cross-entropy over `samples` randomly chosen
    /// parameters. Differences are relative to `max(|analytic|, |numeric|,
    /// 1e-6)` so that round-off on near-zero gradients does not dominate.
    pub fn grad_check(&self, x: &Instance, label: usize, samples: usize, seed: u64) -> f64 {
        let mut grad = vec![0.0; self.params.len()];
        self.backward(x, label, 1.0, &mut grad);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut probe = self.clone();
        let h = 1e-5;
        let mut worst: f64 = 0.0;
        for _ in 0..samples {
            let i = rng.random_range(0..self.params.len());
            let orig = probe.params[i];
            probe.params[i] = orig + h;
            let up = -probe.log_probs(x).unwrap()[label];
            probe.params[i] = orig - h;
            let down = -probe.log_probs(x).unwrap()[label];
            probe.params[i] = orig;
            let numeric = (up - down) / (2.0 * h);
            let err = (grad[i] - numeric).abs() / grad[i].abs().max(numeric.abs()).max(1e-6);
            worst = worst.max(err);
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_model_is_uniform() {
        let m = Mlp::zeros(&[3, 4, 5]);
        let d = m.predict(&[0.3, 0.1, 0.9]).unwrap();
        for p in d.probs {
            assert!((p - 0.2).abs() < 1e-15);
        }
    }

    #[test]
    fn dimension_mismatch() {
        let m = Mlp::new(&[3, 4, 2], 1);
        assert!(matches!(
            m.predict(&[1.0]),
            Err(PerceptionError::DimensionMismatch {
                expected: 3,
                got: 1
            })
        ));
    }

    #[test]
    fn memorizes_one_example() {
        let mut m = Mlp::new(&[4, 8, 3], 7);
        let batch = TrainBatch::new(vec![vec![0.1, 0.5, 0.2, 0.9]], vec![2]);
        m.fit(&batch, 200, 0.05).unwrap();
        assert!(m.predict(&batch.instances[0]).unwrap().probs[2] > 0.99);
    }

    #[test]
    fn zero_weights_drop_examples_from_the_gradient() {
        let m = Mlp::new(&[2, 5, 2], 3);
        let xs = vec![
            vec![0.1, 0.2],
            vec![0.7, 0.3],
            vec![0.4, 0.9],
            vec![0.5, 0.5],
        ];
        let ls = vec![0, 1, 1, 0];
        let weighted = TrainBatch {
            instances: xs.clone(),
            labels: ls.clone(),
            weights: Some(vec![1.0, 0.0, 1.0, 0.0]),
        };
        let half = TrainBatch::new(vec![xs[0].clone(), xs[2].clone()], vec![ls[0], ls[2]]);
        let (l1, g1) = m.gradient(&weighted).unwrap();
        let (l2, g2) = m.gradient(&half).unwrap();
        assert!((l1 - l2).abs() < 1e-15);
        for (a, b) in g1.iter().zip(&g2) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn grad_check_deep_model() {
        let m = Mlp::new(&[5, 7, 6, 3], 11);
        let x = vec![0.2, 0.8, 0.1, 0.5, 0.3];
        assert!(m.grad_check(&x, 1, 40, 5) < 1e-4);
    }
}
