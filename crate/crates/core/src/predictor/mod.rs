//! Observation prediction with a dual real/imaginary LSTM network.
//!
//! Instead of forecasting the high-dimensional channel vector directly,
//! the network forecasts the low-dimensional pilot observations the
//! receiver WOULD have seen, and the Kalman filter turns those imaginary
//! observations into channel estimates. Complex data is handled by two
//! structurally identical sub-networks: the R sub-network consumes and
//! produces real parts, the I sub-network imaginary parts.

mod checkpoint;
mod net;
mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_VERSION};
pub use net::{
    backward, forward, lstm_cell_forward, CellOutput, ForwardCache, Gate, LstmLayerParams,
    NetDims, RMat, SubNetwork,
};
pub use train::{adam_step, train, train_continue, train_val, TrainReport};

use serde::{Deserialize, Serialize};

use crate::error::{CtpError, Result};
use crate::measurement::{measurement_matrix, ObsKind, ObservationBlock, ReferenceMatrix};
use crate::numerics::{C64, CVec, SimRng};

/// Network and training hyper-parameters. `d_in = tau1 * (n + 1)` per
/// step: the tau1 observation values plus the tau1 * n reflected-pattern
/// entries of the measurement matrix (its constant direct-path column is
/// dropped to keep the stated input dimension).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyper {
    pub tau1: usize,
    pub n: usize,
    /// Hidden-dimension expansion factor of the input FC layer.
    pub epsilon: usize,
    /// Number of stacked LSTM layers.
    pub k_layers: usize,
    /// Input window length (time intervals).
    pub l_in: usize,
    /// Prediction length (time intervals).
    pub l_pred: usize,
    pub lr: f64,
    pub batch: usize,
    pub epochs: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub eps_adam: f64,
}

impl Hyper {
    /// Defaults used by the reference experiments: K = 4 LSTM layers,
    /// learning rate 1e-4, batch size 10.
    pub fn defaults(tau1: usize, n: usize, l_in: usize, l_pred: usize) -> Self {
        Self {
            tau1,
            n,
            epsilon: 3,
            k_layers: 4,
            l_in,
            l_pred,
            lr: 1e-4,
            batch: 10,
            epochs: 40,
            beta1: 0.9,
            beta2: 0.999,
            eps_adam: 1e-8,
        }
    }

    pub fn d_in(&self) -> usize {
        self.tau1 * (self.n + 1)
    }

    pub fn hidden(&self) -> usize {
        self.epsilon * self.d_in()
    }

    pub fn d_out(&self) -> usize {
        self.tau1 * self.l_pred
    }

    pub fn dims(&self) -> NetDims {
        NetDims {
            d_in: self.d_in(),
            hidden: self.hidden(),
            k_layers: self.k_layers,
            l_in: self.l_in,
            d_out: self.d_out(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.tau1 == 0 || self.n == 0 || self.epsilon == 0 || self.k_layers == 0 {
            return Err(CtpError::InvalidArgument(
                "tau1, n, epsilon and k_layers must be positive".into(),
            ));
        }
        if self.l_in == 0 || self.l_pred == 0 {
            return Err(CtpError::InvalidArgument(
                "l_in and l_pred must be positive".into(),
            ));
        }
        if self.batch == 0 || self.lr <= 0.0 {
            return Err(CtpError::InvalidArgument(
                "batch must be positive and lr > 0".into(),
            ));
        }
        Ok(())
    }
}

/// Per-feature standardization fitted on the training corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
    pub fitted: bool,
}

impl Normalizer {
    pub fn unfitted(dim: usize) -> Self {
        Self {
            mean: vec![0.0; dim],
            scale: vec![1.0; dim],
            fitted: false,
        }
    }

    /// Fit mean and standard deviation per feature; the scale is floored
    /// at 1e-8 so constant features map to zero.
    pub fn fit<'a>(&mut self, rows: impl Iterator<Item = &'a Vec<f64>> + Clone) {
        let dim = self.mean.len();
        let mut count = 0usize;
        let mut mean = vec![0.0; dim];
        for row in rows.clone() {
            assert_eq!(row.len(), dim, "feature dimension mismatch in fit");
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
            count += 1;
        }
        assert!(count > 0, "cannot fit a normalizer on an empty corpus");
        for m in mean.iter_mut() {
            *m /= count as f64;
        }
        let mut var = vec![0.0; dim];
        for row in rows {
            for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                *s += (v - m).powi(2);
            }
        }
        self.scale = var
            .iter()
            .map(|s| (s / count as f64).sqrt().max(1e-8))
            .collect();
        self.mean = mean;
        self.fitted = true;
    }

    pub fn normalize(&self, v: &[f64]) -> Result<Vec<f64>> {
        if !self.fitted {
            return Err(CtpError::State("normalizer has not been fitted".into()));
        }
        if v.len() != self.mean.len() {
            return Err(CtpError::InvalidArgument(format!(
                "expected {} features, got {}",
                self.mean.len(),
                v.len()
            )));
        }
        Ok(v.iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .map(|((x, m), s)| (x - m) / s)
            .collect())
    }

    pub fn denormalize(&self, v: &[f64]) -> Result<Vec<f64>> {
        if !self.fitted {
            return Err(CtpError::State("normalizer has not been fitted".into()));
        }
        Ok(v.iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .map(|((x, m), s)| x * s + m)
            .collect())
    }
}

/// Adam moment accumulators for both sub-networks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m_r: SubNetwork,
    pub v_r: SubNetwork,
    pub m_i: SubNetwork,
    pub v_i: SubNetwork,
    pub step: usize,
}

/// All trainable parameters of the dual sub-network model, with the
/// optimizer accumulators that travel with them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkParams {
    pub r: SubNetwork,
    pub i: SubNetwork,
    pub adam: AdamState,
}

impl NetworkParams {
    pub fn init(dims: NetDims, rng: &mut SimRng) -> Self {
        let r = SubNetwork::init(dims, rng);
        let i = SubNetwork::init(dims, rng);
        let adam = AdamState {
            m_r: r.zeros_like(),
            v_r: r.zeros_like(),
            m_i: i.zeros_like(),
            v_i: i.zeros_like(),
            step: 0,
        };
        Self { r, i, adam }
    }
}

/// The trained observation predictor: parameters plus the input
/// normalizers and output scales fitted on the training corpus.
///
/// The sub-networks learn in label-RMS units: the raw prediction is the
/// network output multiplied elementwise by a fixed per-coordinate scale
/// fitted at training time. This keeps the learnable parameters at order
/// one even though the received signals are tiny.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObLstm {
    pub hyper: Hyper,
    pub params: NetworkParams,
    pub norm_r: Normalizer,
    pub norm_i: Normalizer,
    pub out_scale_r: Vec<f64>,
    pub out_scale_i: Vec<f64>,
}

/// Per-coordinate RMS of the training labels, floored at 1e-12.
fn fit_output_scale<'a>(labels: impl Iterator<Item = &'a Vec<f64>>) -> Vec<f64> {
    let mut acc: Vec<f64> = Vec::new();
    let mut count = 0usize;
    for row in labels {
        if acc.is_empty() {
            acc = vec![0.0; row.len()];
        }
        for (a, v) in acc.iter_mut().zip(row) {
            *a += v * v;
        }
        count += 1;
    }
    acc.iter()
        .map(|s| (s / count.max(1) as f64).sqrt().max(1e-12))
        .collect()
}

impl ObLstm {
    pub fn new(hyper: Hyper, rng: &mut SimRng) -> Result<Self> {
        hyper.validate()?;
        let dims = hyper.dims();
        let d_in = hyper.d_in();
        let d_out = hyper.d_out();
        Ok(Self {
            hyper,
            params: NetworkParams::init(dims, rng),
            norm_r: Normalizer::unfitted(d_in),
            norm_i: Normalizer::unfitted(d_in),
            out_scale_r: vec![1.0; d_out],
            out_scale_i: vec![1.0; d_out],
        })
    }

    /// Fit the output scales to the label RMS of the training set.
    pub fn fit_output_scales<'a>(
        &mut self,
        labels_re: impl Iterator<Item = &'a Vec<f64>>,
        labels_im: impl Iterator<Item = &'a Vec<f64>>,
    ) {
        self.out_scale_r = fit_output_scale(labels_re);
        self.out_scale_i = fit_output_scale(labels_im);
    }

    fn normalized_inputs(&self, sample_re: &[Vec<f64>], sample_im: &[Vec<f64>]) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
        let re = sample_re
            .iter()
            .map(|v| self.norm_r.normalize(v))
            .collect::<Result<Vec<_>>>()?;
        let im = sample_im
            .iter()
            .map(|v| self.norm_i.normalize(v))
            .collect::<Result<Vec<_>>>()?;
        Ok((re, im))
    }

    /// Forward both sub-networks on raw (un-normalized) feature sequences
    /// and combine into complex predictions of length `tau1 * l_pred`.
    pub fn forward_complex(&self, inputs_re: &[Vec<f64>], inputs_im: &[Vec<f64>]) -> Result<Vec<C64>> {
        let (re, im) = self.normalized_inputs(inputs_re, inputs_im)?;
        let out_r = forward(&self.params.r, &re)?.out;
        let out_i = forward(&self.params.i, &im)?.out;
        Ok(out_r
            .into_iter()
            .zip(out_i)
            .zip(self.out_scale_r.iter().zip(&self.out_scale_i))
            .map(|((r, i), (sr, si))| C64::new(r * sr, i * si))
            .collect())
    }

    /// Loss of one sample under the current parameters.
    pub fn sample_loss(&self, sample: &TrainingSample) -> Result<f64> {
        let pred = self.forward_complex(&sample.inputs_re, &sample.inputs_im)?;
        let labels: Vec<C64> = sample
            .labels_re
            .iter()
            .zip(&sample.labels_im)
            .map(|(r, i)| C64::new(*r, *i))
            .collect();
        Ok(loss(&pred, &labels))
    }

    /// Loss and exact gradients of one sample w.r.t. both sub-networks.
    /// The loss is the squared error of the raw (de-scaled) predictions.
    pub fn sample_gradients(&self, sample: &TrainingSample) -> Result<(SubNetwork, SubNetwork, f64)> {
        let (re, im) = self.normalized_inputs(&sample.inputs_re, &sample.inputs_im)?;
        let cache_r = forward(&self.params.r, &re)?;
        let cache_i = forward(&self.params.i, &im)?;
        let mut loss_val = 0.0;
        let mut d_out_r = vec![0.0; cache_r.out.len()];
        let mut d_out_i = vec![0.0; cache_i.out.len()];
        for k in 0..cache_r.out.len() {
            let err = cache_r.out[k] * self.out_scale_r[k] - sample.labels_re[k];
            loss_val += err * err;
            d_out_r[k] = 2.0 * err * self.out_scale_r[k];
        }
        for k in 0..cache_i.out.len() {
            let err = cache_i.out[k] * self.out_scale_i[k] - sample.labels_im[k];
            loss_val += err * err;
            d_out_i[k] = 2.0 * err * self.out_scale_i[k];
        }
        let grad_r = backward(&self.params.r, &cache_r, &d_out_r);
        let grad_i = backward(&self.params.i, &cache_i, &d_out_i);
        Ok((grad_r, grad_i, loss_val))
    }

    /// Predict the next `l_pred` imaginary observations from a window of
    /// `l_in` observation blocks; the predicted blocks are paired with the
    /// deterministic measurement-matrix continuation.
    pub fn predict_observations(
        &self,
        window: &[ObservationBlock],
        q: &ReferenceMatrix,
    ) -> Result<Vec<ObservationBlock>> {
        if window.len() != self.hyper.l_in {
            return Err(CtpError::InvalidArgument(format!(
                "window must hold {} blocks, got {}",
                self.hyper.l_in,
                window.len()
            )));
        }
        let mut inputs_re = Vec::with_capacity(window.len());
        let mut inputs_im = Vec::with_capacity(window.len());
        for block in window {
            let (re, im) = block_features(block)?;
            if re.len() != self.hyper.d_in() {
                return Err(CtpError::InvalidArgument(format!(
                    "block features have dimension {}, expected {}",
                    re.len(),
                    self.hyper.d_in()
                )));
            }
            inputs_re.push(re);
            inputs_im.push(im);
        }
        let pred = self.forward_complex(&inputs_re, &inputs_im)?;

        let t0 = window.last().unwrap().t;
        let mut blocks = Vec::with_capacity(self.hyper.l_pred);
        for k in 0..self.hyper.l_pred {
            let t = t0 + 1 + k;
            let v = measurement_matrix(t, self.hyper.tau1, q)?;
            let y = CVec::from_vec(pred[k * self.hyper.tau1..(k + 1) * self.hyper.tau1].to_vec());
            blocks.push(ObservationBlock {
                y,
                v,
                t,
                kind: ObsKind::Imaginary,
            });
        }
        Ok(blocks)
    }

    /// Produce imaginary observations for `horizon` future intervals.
    ///
    /// Strategy A emits the whole horizon in one network invocation and
    /// requires `l_pred == horizon`. Strategy B predicts one block at a
    /// time (`l_pred == 1`), feeding each prediction back into the input
    /// window.
    pub fn rollout(
        &self,
        history: &[ObservationBlock],
        strategy: Strategy,
        horizon: usize,
        q: &ReferenceMatrix,
    ) -> Result<Vec<ObservationBlock>> {
        if history.len() < self.hyper.l_in {
            return Err(CtpError::InvalidArgument(format!(
                "need at least {} history blocks, got {}",
                self.hyper.l_in,
                history.len()
            )));
        }
        match strategy {
            Strategy::A => {
                if self.hyper.l_pred != horizon {
                    return Err(CtpError::InvalidArgument(format!(
                        "strategy A requires l_pred == horizon ({} != {horizon})",
                        self.hyper.l_pred
                    )));
                }
                let window = &history[history.len() - self.hyper.l_in..];
                self.predict_observations(window, q)
            }
            Strategy::B => {
                if self.hyper.l_pred != 1 {
                    return Err(CtpError::InvalidArgument(format!(
                        "strategy B requires l_pred == 1, got {}",
                        self.hyper.l_pred
                    )));
                }
                let mut window: Vec<ObservationBlock> =
                    history[history.len() - self.hyper.l_in..].to_vec();
                let mut out = Vec::with_capacity(horizon);
                for _ in 0..horizon {
                    let block = self.predict_observations(&window, q)?.remove(0);
                    window.remove(0);
                    window.push(block.clone());
                    out.push(block);
                }
                Ok(out)
            }
        }
    }
}

/// Prediction strategies for the second stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    /// One shot: `l_in = T1` real observations in, `l_pred = T2` blocks out.
    A,
    /// Sliding window: one block at a time, predictions fed back as inputs.
    B,
}

/// Extract the real/imaginary feature vectors of one observation block:
/// the tau1 observation values followed by the tau1 * n reflected-pattern
/// entries (measurement-matrix columns 2..N+1, row-major).
pub fn block_features(block: &ObservationBlock) -> Result<(Vec<f64>, Vec<f64>)> {
    let tau1 = block.y.len();
    if block.v.rows() != tau1 || block.v.cols() < 2 {
        return Err(CtpError::InvalidArgument(
            "observation block has inconsistent dimensions".into(),
        ));
    }
    let n = block.v.cols() - 1;
    let mut re = Vec::with_capacity(tau1 * (n + 1));
    let mut im = Vec::with_capacity(tau1 * (n + 1));
    for k in 0..tau1 {
        re.push(block.y[k].re);
        im.push(block.y[k].im);
    }
    for i in 0..tau1 {
        for j in 1..=n {
            re.push(block.v.at(i, j).re);
            im.push(block.v.at(i, j).im);
        }
    }
    Ok((re, im))
}

/// One supervised sample: an input window of raw block features and the
/// un-normalized future observations as labels.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSample {
    pub inputs_re: Vec<Vec<f64>>,
    pub inputs_im: Vec<Vec<f64>>,
    pub labels_re: Vec<f64>,
    pub labels_im: Vec<f64>,
}

impl TrainingSample {
    /// Build a sample from `l_in` observed blocks and the `l_pred` blocks
    /// whose observations serve as labels.
    pub fn from_blocks(window: &[ObservationBlock], future: &[ObservationBlock]) -> Result<Self> {
        let mut inputs_re = Vec::with_capacity(window.len());
        let mut inputs_im = Vec::with_capacity(window.len());
        for b in window {
            let (re, im) = block_features(b)?;
            inputs_re.push(re);
            inputs_im.push(im);
        }
        let mut labels_re = Vec::new();
        let mut labels_im = Vec::new();
        for b in future {
            for k in 0..b.y.len() {
                labels_re.push(b.y[k].re);
                labels_im.push(b.y[k].im);
            }
        }
        Ok(Self {
            inputs_re,
            inputs_im,
            labels_re,
            labels_im,
        })
    }
}

/// Squared-error loss of one prediction: `sum_k |pred_k - label_k|^2`.
pub fn loss(pred: &[C64], labels: &[C64]) -> f64 {
    assert_eq!(pred.len(), labels.len(), "prediction/label length mismatch");
    pred.iter()
        .zip(labels)
        .map(|(p, l)| (p - l).norm_sqr())
        .sum()
}
