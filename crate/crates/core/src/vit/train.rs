use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use super::data::{Dataset, Image};
use super::model::VitModel;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub seed: u64,
}

impl TrainConfig {
    pub fn paper() -> Self {
        Self {
            epochs: 30,
            learning_rate: 1e-4,
            batch_size: 32,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            seed: 0,
        }
    }
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self::paper()
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainReport {
    pub epoch_loss: Vec<f64>,
    pub epoch_accuracy: Vec<f64>,
}

/// Cascade of partial sums that adds per-sample gradients pairwise.
struct PairwiseSum {
    stack: Vec<(u32, Vec<f64>)>,
}

impl PairwiseSum {
    fn new() -> Self {
        Self { stack: Vec::new() }
    }

    fn push(&mut self, mut v: Vec<f64>) {
        let mut level = 0;
        while let Some((l, _)) = self.stack.last() {
            if *l != level {
                break;
            }
            let (_, top) = self.stack.pop().expect("non-empty");
            for (a, b) in v.iter_mut().zip(top) {
                *a += b;
            }
            level += 1;
        }
        self.stack.push((level, v));
    }

    fn finish(mut self) -> Option<Vec<f64>> {
        let (_, mut acc) = self.stack.pop()?;
        while let Some((_, v)) = self.stack.pop() {
            for (a, b) in acc.iter_mut().zip(v) {
                *a += b;
            }
        }
        Some(acc)
    }
}

/// Mean cross-entropy over the batch and its gradient for every parameter.
pub fn loss_and_grads(model: &VitModel, images: &[&Image], labels: &[usize]) -> Result<(f64, Vec<f64>)> {
    if images.is_empty() {
        return Err(Error::contract("empty batch"));
    }
    if images.len() != labels.len() {
        return Err(Error::contract("images and labels differ in length"));
    }
    let k = model.config().classes;
    if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
        return Err(Error::contract(format!("label {bad} outside 0..{k}")));
    }
    let inv_b = 1.0 / images.len() as f64;
    let mut losses = Vec::with_capacity(images.len());
    let mut sum = PairwiseSum::new();
    for (img, &y) in images.iter().zip(labels) {
        let trace = model.forward_trace(img)?;
        let probs = &trace.output.probs;
        losses.push(-probs[y].max(f64::MIN_POSITIVE).ln());
        let mut dlogits: Vec<f64> = probs.iter().map(|p| p * inv_b).collect();
        dlogits[y] -= inv_b;
        let mut g = vec![0.0; model.params.len()];
        model.backward(&trace, &dlogits, &mut g);
        sum.push(g);
    }
    Ok((pairwise_sum(&losses) * inv_b, sum.finish().expect("non-empty batch")))
}

pub fn pairwise_sum(v: &[f64]) -> f64 {
    match v.len() {
        0 => 0.0,
        1 => v[0],
        n => pairwise_sum(&v[..n / 2]) + pairwise_sum(&v[n / 2..]),
    }
}

pub struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(len: usize) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64], tc: &TrainConfig) {
        self.t += 1;
        let c1 = 1.0 - tc.beta1.powi(self.t);
        let c2 = 1.0 - tc.beta2.powi(self.t);
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = tc.beta1 * self.m[i] + (1.0 - tc.beta1) * g;
            self.v[i] = tc.beta2 * self.v[i] + (1.0 - tc.beta2) * g * g;
            let mh = self.m[i] / c1;
            let vh = self.v[i] / c2;
            params[i] -= tc.learning_rate * mh / (vh.sqrt() + tc.eps);
        }
    }
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

pub fn accuracy(model: &VitModel, data: &Dataset) -> Result<f64> {
    if data.is_empty() {
        return Ok(0.0);
    }
    let mut correct = 0;
    for (img, &y) in data.images.iter().zip(&data.labels) {
        if argmax(&model.forward(img)?.logits) == y {
            correct += 1;
        }
    }
    Ok(correct as f64 / data.len() as f64)
}

/// Mini-batch Adam on mean cross-entropy. Reports the training-set accuracy after every epoch.
pub fn train_local(model: &mut VitModel, data: &Dataset, tc: &TrainConfig) -> Result<TrainReport> {
    if data.is_empty() {
        return Err(Error::contract("cannot train on an empty dataset"));
    }
    if tc.batch_size == 0 {
        return Err(Error::config("batch size must be positive"));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(tc.seed);
    let mut adam = Adam::new(model.params.len());
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut report = TrainReport::default();
    for epoch in 0..tc.epochs {
        order.shuffle(&mut rng);
        let mut batch_losses = Vec::new();
        for batch in order.chunks(tc.batch_size) {
            let imgs: Vec<&Image> = batch.iter().map(|&i| &data.images[i]).collect();
            let labels: Vec<usize> = batch.iter().map(|&i| data.labels[i]).collect();
            let (loss, grad) = loss_and_grads(model, &imgs, &labels).map_err(|e| match e {
                Error::NonFinite { .. } => Error::Diverged { epoch, loss: f64::NAN },
                other => other,
            })?;
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch, loss });
            }
            batch_losses.push(loss * batch.len() as f64);
            adam.step(&mut model.params, &grad, tc);
        }
        report.epoch_loss.push(pairwise_sum(&batch_losses) / data.len() as f64);
        report.epoch_accuracy.push(accuracy(model, data)?);
    }
    Ok(report)
}
