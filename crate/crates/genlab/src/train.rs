//! SGD training with classical momentum, the DARC1 output regularizer, and
//! the two-phase (standard/freeze) procedure built from a pair of networks.
//!
//! The two-phase model keeps two copies of one architecture: a mask network
//! whose parameters generate the 0/1 activation pattern, and a weight network
//! whose parameters carry the trainable path weights. During the standard
//! phase the copies are tied (trained as one network on a dataset prefix);
//! the freeze phase then unties them, holds the mask network fixed and
//! trains only the weight network on the full dataset. Evaluation always
//! propagates the weight network linearly under the mask network's
//! activations, so the output stays linear in the weight network's path
//! weights once untied.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::distribution::{argmax, DataError, Dataset};
use crate::netdag::{DagNetwork, ForwardTrace, NetError};
use crate::rng::{derive_seed, Rng};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    BadConfig(String),
    #[error("training diverged (non-finite loss) at epoch {epoch}")]
    Diverged { epoch: usize },
    #[error("dataset/network dimension mismatch: {0}")]
    Incompatible(String),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Data(#[from] DataError),
}

/// Training losses. Softmax cross-entropy reads the class off the one-hot
/// target's argmax; the bounds engine always receives raw outputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainLoss {
    Squared,
    SoftmaxCrossEntropy,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub loss: TrainLoss,
    /// DARC1 coefficient (lambda / batch size); 0 disables the penalty.
    pub darc1_coefficient: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            momentum: 0.5,
            batch_size: 64,
            epochs: 50,
            seed: 0,
            loss: TrainLoss::SoftmaxCrossEntropy,
            darc1_coefficient: 0.0,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<(), TrainError> {
        if !self.learning_rate.is_finite() || self.learning_rate < 0.0 {
            return Err(TrainError::BadConfig(format!(
                "learning rate {}",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(TrainError::BadConfig(format!(
                "momentum {} outside [0, 1)",
                self.momentum
            )));
        }
        if self.batch_size == 0 {
            return Err(TrainError::BadConfig("batch size 0".into()));
        }
        if !self.darc1_coefficient.is_finite() || self.darc1_coefficient < 0.0 {
            return Err(TrainError::BadConfig(format!(
                "DARC1 coefficient {}",
                self.darc1_coefficient
            )));
        }
        Ok(())
    }
}

/// Per-epoch training statistics. `darc1_value` is the full-train-set
/// statistic `(1/m) max_k sum_i |z_k(x_i)|`, independent of the coefficient.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub darc1_value: f64,
    pub test_loss: Option<f64>,
    pub test_accuracy: Option<f64>,
}

/// DARC1 penalty of one output batch: `coefficient * max_k sum_i |z_k(x_i)|`.
pub fn darc1_penalty(outputs: &[Vec<f64>], coefficient: f64) -> f64 {
    assert!(!outputs.is_empty(), "DARC1 penalty needs a nonempty batch");
    let d_y = outputs[0].len();
    let mut best = 0.0_f64;
    for k in 0..d_y {
        let col: f64 = outputs.iter().map(|z| z[k].abs()).sum();
        best = best.max(col);
    }
    coefficient * best
}

/// Column index attaining the DARC1 max (lowest index on ties).
fn darc1_argmax(outputs: &[Vec<f64>]) -> usize {
    let d_y = outputs[0].len();
    let mut best_k = 0;
    let mut best = f64::NEG_INFINITY;
    for k in 0..d_y {
        let col: f64 = outputs.iter().map(|z| z[k].abs()).sum();
        if col > best {
            best = col;
            best_k = k;
        }
    }
    best_k
}

fn point_train_loss(output: &[f64], target: &[f64], loss: TrainLoss) -> f64 {
    match loss {
        TrainLoss::Squared => output
            .iter()
            .zip(target)
            .map(|(&o, &t)| (o - t) * (o - t))
            .sum(),
        TrainLoss::SoftmaxCrossEntropy => {
            let label = argmax(target);
            let max = output.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
            let log_sum: f64 = output.iter().map(|&v| (v - max).exp()).sum::<f64>().ln() + max;
            log_sum - output[label]
        }
    }
}

/// Gradient of the per-sample loss with respect to the raw outputs.
fn loss_output_grad(output: &[f64], target: &[f64], loss: TrainLoss) -> Vec<f64> {
    match loss {
        TrainLoss::Squared => output
            .iter()
            .zip(target)
            .map(|(&o, &t)| 2.0 * (o - t))
            .collect(),
        TrainLoss::SoftmaxCrossEntropy => {
            let label = argmax(target);
            let max = output.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
            let exps: Vec<f64> = output.iter().map(|&v| (v - max).exp()).collect();
            let total: f64 = exps.iter().sum();
            exps.iter()
                .enumerate()
                .map(|(k, &e)| e / total - if k == label { 1.0 } else { 0.0 })
                .collect()
        }
    }
}

/// What the SGD loop needs from a trainable object. The freeze-phase target
/// exposes only the weight network's parameters.
trait TrainTarget {
    fn forward_train(&self, x: &[f64]) -> Result<(ForwardTrace, Vec<f64>), NetError>;
    fn backward_train(&self, trace: &ForwardTrace, out_grad: &[f64]) -> Vec<f64>;
    fn trainable_params(&self) -> Vec<f64>;
    fn set_trainable_params(&mut self, params: &[f64]) -> Result<(), NetError>;
    fn predict(&self, x: &[f64]) -> Result<Vec<f64>, NetError>;
}

struct PlainTarget<'a> {
    net: &'a mut DagNetwork,
}

impl TrainTarget for PlainTarget<'_> {
    fn forward_train(&self, x: &[f64]) -> Result<(ForwardTrace, Vec<f64>), NetError> {
        let trace = self.net.forward(x)?;
        let out = trace.output().to_vec();
        Ok((trace, out))
    }

    fn backward_train(&self, trace: &ForwardTrace, out_grad: &[f64]) -> Vec<f64> {
        self.net.backward(trace, out_grad)
    }

    fn trainable_params(&self) -> Vec<f64> {
        self.net.params()
    }

    fn set_trainable_params(&mut self, params: &[f64]) -> Result<(), NetError> {
        self.net.set_params(params)
    }

    fn predict(&self, x: &[f64]) -> Result<Vec<f64>, NetError> {
        Ok(self.net.forward(x)?.output().to_vec())
    }
}

struct FreezeTarget<'a> {
    model: &'a mut TwoPhaseModel,
}

impl TrainTarget for FreezeTarget<'_> {
    fn forward_train(&self, x: &[f64]) -> Result<(ForwardTrace, Vec<f64>), NetError> {
        let mask_trace = self.model.mask_network.forward(x)?;
        let trace = self
            .model
            .weight_network
            .forward_with_masks(x, &mask_trace.masks)?;
        let out = trace.output().to_vec();
        Ok((trace, out))
    }

    fn backward_train(&self, trace: &ForwardTrace, out_grad: &[f64]) -> Vec<f64> {
        // The trace carries the frozen masks; treating them as constants is
        // exactly the piecewise-linear gradient the freeze phase needs.
        self.model.weight_network.backward(trace, out_grad)
    }

    fn trainable_params(&self) -> Vec<f64> {
        self.model.weight_network.params()
    }

    fn set_trainable_params(&mut self, params: &[f64]) -> Result<(), NetError> {
        self.model.weight_network.set_params(params)
    }

    fn predict(&self, x: &[f64]) -> Result<Vec<f64>, NetError> {
        self.model.forward(x)
    }
}

fn run_sgd<T: TrainTarget>(
    target: &mut T,
    s: &Dataset,
    eval: Option<&Dataset>,
    config: &TrainConfig,
) -> Result<Vec<EpochMetrics>, TrainError> {
    config.validate()?;
    let mut velocity = vec![0.0; target.trainable_params().len()];
    let mut metrics = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let mut order: Vec<usize> = (0..s.len()).collect();
        Rng::from_seed(derive_seed(config.seed, "epoch-shuffle", epoch as u64)).shuffle(&mut order);

        for batch in order.chunks(config.batch_size) {
            let mut traces = Vec::with_capacity(batch.len());
            let mut outputs = Vec::with_capacity(batch.len());
            for &i in batch {
                let (trace, out) = target.forward_train(&s.samples()[i].0)?;
                traces.push(trace);
                outputs.push(out);
            }
            let darc1_k = if config.darc1_coefficient > 0.0 {
                Some(darc1_argmax(&outputs))
            } else {
                None
            };

            let inv_batch = 1.0 / batch.len() as f64;
            let mut grad_acc = vec![0.0; velocity.len()];
            for (slot, &i) in batch.iter().enumerate() {
                let target_y = &s.samples()[i].1;
                let mut out_grad = loss_output_grad(&outputs[slot], target_y, config.loss);
                for g in out_grad.iter_mut() {
                    *g *= inv_batch;
                }
                if let Some(k) = darc1_k {
                    // Subgradient of coefficient * sum_i |z_k(x_i)| on the
                    // argmax column; sign(0) = 0.
                    let z = outputs[slot][k];
                    if z != 0.0 {
                        out_grad[k] += config.darc1_coefficient * z.signum();
                    }
                }
                let g = target.backward_train(&traces[slot], &out_grad);
                for (acc, gi) in grad_acc.iter_mut().zip(g) {
                    *acc += gi;
                }
            }

            let mut params = target.trainable_params();
            for ((p, v), g) in params.iter_mut().zip(&mut velocity).zip(&grad_acc) {
                *v = config.momentum * *v - config.learning_rate * g;
                *p += *v;
            }
            target.set_trainable_params(&params)?;
        }

        let em = epoch_metrics(target, s, eval, config, epoch)?;
        if !em.train_loss.is_finite() {
            return Err(TrainError::Diverged { epoch });
        }
        metrics.push(em);
    }
    Ok(metrics)
}

fn epoch_metrics<T: TrainTarget>(
    target: &T,
    s: &Dataset,
    eval: Option<&Dataset>,
    config: &TrainConfig,
    epoch: usize,
) -> Result<EpochMetrics, TrainError> {
    let (train_loss, train_accuracy, darc1_value) = split_metrics(target, s, config.loss, true)?;
    let (test_loss, test_accuracy) = match eval {
        Some(e) => {
            let (l, a, _) = split_metrics(target, e, config.loss, false)?;
            (Some(l), Some(a))
        }
        None => (None, None),
    };
    Ok(EpochMetrics {
        epoch,
        train_loss,
        train_accuracy,
        darc1_value: darc1_value.unwrap_or(0.0),
        test_loss,
        test_accuracy,
    })
}

fn split_metrics<T: TrainTarget>(
    target: &T,
    data: &Dataset,
    loss: TrainLoss,
    with_darc1: bool,
) -> Result<(f64, f64, Option<f64>), TrainError> {
    let m = data.len() as f64;
    let mut total_loss = 0.0;
    let mut correct = 0usize;
    let mut col_sums = vec![0.0; data.target_dim()];
    for (x, y) in data.samples() {
        let out = target.predict(x)?;
        total_loss += point_train_loss(&out, y, loss);
        if argmax(&out) == argmax(y) {
            correct += 1;
        }
        if with_darc1 {
            for (c, &z) in col_sums.iter_mut().zip(&out) {
                *c += z.abs();
            }
        }
    }
    let darc1 = with_darc1.then(|| col_sums.iter().fold(0.0_f64, |a, &b| a.max(b)) / m);
    Ok((total_loss / m, correct as f64 / m, darc1))
}

/// Mini-batch SGD with classical momentum (`v <- mu v - eta g`, `w <- w + v`)
/// on a single network, with epoch-wise seeded shuffling.
pub fn sgd_train(
    net: &mut DagNetwork,
    s: &Dataset,
    eval: Option<&Dataset>,
    config: &TrainConfig,
) -> Result<Vec<EpochMetrics>, TrainError> {
    if s.input_dim() != net.input_dim() || s.target_dim() != net.output_dim() {
        return Err(TrainError::Incompatible(format!(
            "dataset {}->{} vs network {}->{}",
            s.input_dim(),
            s.target_dim(),
            net.input_dim(),
            net.output_dim()
        )));
    }
    let mut target = PlainTarget { net };
    run_sgd(&mut target, s, eval, config)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieState {
    Tied,
    Untied,
}

/// The two-network construction: a frozen mask network and a trainable
/// weight network over one architecture.
#[derive(Debug, Clone)]
pub struct TwoPhaseModel {
    mask_network: DagNetwork,
    weight_network: DagNetwork,
    alpha: f64,
    tie_state: TieState,
}

impl TwoPhaseModel {
    /// Build an untied model from a trained network (both copies start
    /// bit-identical; the mask copy never changes afterwards).
    pub fn from_trained(net: DagNetwork, alpha: f64) -> Self {
        Self {
            mask_network: net.clone(),
            weight_network: net,
            alpha,
            tie_state: TieState::Untied,
        }
    }

    /// Build an untied model from an explicit network pair (architectures
    /// must match).
    pub fn from_pair(
        mask_network: DagNetwork,
        weight_network: DagNetwork,
        alpha: f64,
    ) -> Result<Self, TrainError> {
        if !mask_network.same_architecture(&weight_network) {
            return Err(TrainError::Incompatible(
                "mask and weight networks have different architectures".into(),
            ));
        }
        Ok(Self {
            mask_network,
            weight_network,
            alpha,
            tie_state: TieState::Untied,
        })
    }

    pub fn mask_network(&self) -> &DagNetwork {
        &self.mask_network
    }

    pub fn weight_network(&self) -> &DagNetwork {
        &self.weight_network
    }

    pub fn weight_network_mut(&mut self) -> &mut DagNetwork {
        &mut self.weight_network
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn tie_state(&self) -> TieState {
        self.tie_state
    }

    /// Masks from the mask network, linear propagation through the weight
    /// network under those masks. Equals the plain forward pass while the
    /// two copies hold identical parameters.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>, NetError> {
        let mask_trace = self.mask_network.forward(x)?;
        let trace = self
            .weight_network
            .forward_with_masks(x, &mask_trace.masks)?;
        Ok(trace.output().to_vec())
    }

    pub fn to_json(&self) -> String {
        let doc = TwoPhaseDoc {
            version: 1,
            alpha: self.alpha,
            tie_state: self.tie_state,
            mask_network: self.mask_network.to_doc(),
            weight_network: self.weight_network.to_doc(),
        };
        serde_json::to_string_pretty(&doc).expect("two-phase doc serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, TrainError> {
        let doc: TwoPhaseDoc = serde_json::from_str(s).map_err(NetError::from)?;
        if doc.version != 1 {
            return Err(TrainError::Net(NetError::BadVersion {
                version: doc.version,
            }));
        }
        Ok(Self {
            mask_network: DagNetwork::from_doc(doc.mask_network)?,
            weight_network: DagNetwork::from_doc(doc.weight_network)?,
            alpha: doc.alpha,
            tie_state: doc.tie_state,
        })
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct TwoPhaseDoc {
    version: u32,
    alpha: f64,
    tie_state: TieState,
    mask_network: crate::netdag::NetworkDoc,
    weight_network: crate::netdag::NetworkDoc,
}

/// Everything the two-phase procedure produces besides the model.
#[derive(Debug, Clone)]
pub struct TwoPhaseMetrics {
    pub standard: Vec<EpochMetrics>,
    pub freeze: Vec<EpochMetrics>,
    /// Mask-network parameter hash at freeze start and end; equal by the
    /// freeze invariant.
    pub mask_hash_before: u64,
    pub mask_hash_after: u64,
    pub standard_seconds: f64,
    pub freeze_seconds: f64,
    /// Final loss/accuracy on the held-out tail of the training set (samples
    /// after the prefix), when nonempty.
    pub heldout_loss: Option<f64>,
    pub heldout_accuracy: Option<f64>,
}

/// Standard phase on the first `ceil(alpha m)` samples with tied copies,
/// then freeze the mask network and train only the weight network on all of
/// `s`.
pub fn two_phase_train(
    template: &DagNetwork,
    s: &Dataset,
    eval: Option<&Dataset>,
    alpha: f64,
    standard_config: &TrainConfig,
    freeze_config: &TrainConfig,
) -> Result<(TwoPhaseModel, TwoPhaseMetrics), TrainError> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(TrainError::BadConfig(format!(
            "alpha {alpha} outside (0, 1]"
        )));
    }
    let mut net = template.clone();
    let prefix = s.prefix(alpha);
    let start = Instant::now();
    let standard = sgd_train(&mut net, &prefix, eval, standard_config)?;
    let standard_seconds = start.elapsed().as_secs_f64();

    let mut model = TwoPhaseModel::from_trained(net, alpha);
    let mask_hash_before = model.mask_network.param_hash();
    let start = Instant::now();
    let freeze = freeze_train(&mut model, s, eval, freeze_config)?;
    let freeze_seconds = start.elapsed().as_secs_f64();
    let mask_hash_after = model.mask_network.param_hash();

    let (heldout_loss, heldout_accuracy) = match s.suffix(alpha) {
        Some(tail) => {
            let m = tail.len() as f64;
            let mut loss = 0.0;
            let mut correct = 0usize;
            for (x, y) in tail.samples() {
                let out = model.forward(x)?;
                loss += point_train_loss(&out, y, freeze_config.loss);
                if argmax(&out) == argmax(y) {
                    correct += 1;
                }
            }
            (Some(loss / m), Some(correct as f64 / m))
        }
        None => (None, None),
    };

    Ok((
        model,
        TwoPhaseMetrics {
            standard,
            freeze,
            mask_hash_before,
            mask_hash_after,
            standard_seconds,
            freeze_seconds,
            heldout_loss,
            heldout_accuracy,
        },
    ))
}

/// Freeze-phase training: only the weight network moves.
pub fn freeze_train(
    model: &mut TwoPhaseModel,
    s: &Dataset,
    eval: Option<&Dataset>,
    config: &TrainConfig,
) -> Result<Vec<EpochMetrics>, TrainError> {
    if s.input_dim() != model.weight_network.input_dim()
        || s.target_dim() != model.weight_network.output_dim()
    {
        return Err(TrainError::Incompatible(format!(
            "dataset {}->{} vs network {}->{}",
            s.input_dim(),
            s.target_dim(),
            model.weight_network.input_dim(),
            model.weight_network.output_dim()
        )));
    }
    model.tie_state = TieState::Untied;
    let mut target = FreezeTarget { model };
    run_sgd(&mut target, s, eval, config)
}
