//! Mini-batch Adam training of the dual sub-network model.

use crate::error::{CtpError, Result};
use crate::numerics::SimRng;

use super::net::{accumulate, scale_in_place, SubNetwork};
use super::{Hyper, NetworkParams, ObLstm, TrainingSample};

/// Loss trajectories recorded during training, one entry per epoch.
#[derive(Debug, Clone)]
pub struct TrainReport {
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
}

/// One bias-corrected Adam update of every parameter in both sub-networks.
pub fn adam_step(
    params: &mut NetworkParams,
    grad_r: &SubNetwork,
    grad_i: &SubNetwork,
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps_adam: f64,
) {
    params.adam.step += 1;
    let t = params.adam.step as i32;
    let bc1 = 1.0 - beta1.powi(t);
    let bc2 = 1.0 - beta2.powi(t);
    let update = |p: &mut SubNetwork, g: &SubNetwork, m: &mut SubNetwork, v: &mut SubNetwork| {
        let mut pt = p.tensors_mut();
        let gt = g.tensors();
        let mut mt = m.tensors_mut();
        let mut vt = v.tensors_mut();
        for k in 0..gt.len() {
            let (pk, gk, mk, vk) = (&mut pt[k], gt[k], &mut mt[k], &mut vt[k]);
            for j in 0..gk.len() {
                mk[j] = beta1 * mk[j] + (1.0 - beta1) * gk[j];
                vk[j] = beta2 * vk[j] + (1.0 - beta2) * gk[j] * gk[j];
                let m_hat = mk[j] / bc1;
                let v_hat = vk[j] / bc2;
                pk[j] -= lr * m_hat / (v_hat.sqrt() + eps_adam);
            }
        }
    };
    let adam = &mut params.adam;
    update(&mut params.r, grad_r, &mut adam.m_r, &mut adam.v_r);
    update(&mut params.i, grad_i, &mut adam.m_i, &mut adam.v_i);
}

fn mean_loss(model: &ObLstm, samples: &[&TrainingSample]) -> Result<f64> {
    let mut acc = 0.0;
    for s in samples {
        acc += model.sample_loss(s)?;
    }
    Ok(acc / samples.len().max(1) as f64)
}

/// Train a fresh model on the corpus by mini-batch Adam minimization of
/// the squared prediction error. 10% of the corpus (at least one sample,
/// when the corpus holds more than one) is held out for validation; the
/// per-epoch training and validation losses are returned.
pub fn train(
    corpus: &[TrainingSample],
    hyper: &Hyper,
    rng: &mut SimRng,
) -> Result<(ObLstm, TrainReport)> {
    if corpus.is_empty() {
        return Err(CtpError::InvalidArgument("empty training corpus".into()));
    }
    hyper.validate()?;
    let mut model = ObLstm::new(hyper.clone(), rng)?;
    let n_val = validation_count(corpus.len());
    model
        .norm_r
        .fit(corpus[n_val..].iter().flat_map(|s| s.inputs_re.iter()));
    model
        .norm_i
        .fit(corpus[n_val..].iter().flat_map(|s| s.inputs_im.iter()));
    model.fit_output_scales(
        corpus[n_val..].iter().map(|s| &s.labels_re),
        corpus[n_val..].iter().map(|s| &s.labels_im),
    );
    let report = train_continue(&mut model, corpus, hyper, rng)?;
    Ok((model, report))
}

fn validation_count(corpus_len: usize) -> usize {
    if corpus_len >= 10 {
        corpus_len / 10
    } else {
        usize::from(corpus_len > 1)
    }
}

/// Continue optimizing an existing model (same shapes, fresh or warm
/// Adam state) with the given hyper-parameters; used by [`train`] and for
/// learning-rate-decay phases or finetuning on new data.
///
/// The first tenth of the corpus is held out for validation. Sliding
/// windows from one trajectory overlap heavily, so a leak-free validation
/// set must come from separate trajectories: either order the corpus that
/// way or use [`train_val`].
pub fn train_continue(
    model: &mut ObLstm,
    corpus: &[TrainingSample],
    hyper: &Hyper,
    rng: &mut SimRng,
) -> Result<TrainReport> {
    if corpus.is_empty() {
        return Err(CtpError::InvalidArgument("empty training corpus".into()));
    }
    let n_val = validation_count(corpus.len());
    let (val, tr) = corpus.split_at(n_val);
    let val_refs: Vec<&TrainingSample> = if val.is_empty() {
        tr.iter().collect()
    } else {
        val.iter().collect()
    };
    train_loop(model, &tr.iter().collect::<Vec<_>>(), &val_refs, hyper, rng)
}

/// Train an existing model on an explicit train/validation pair.
pub fn train_val(
    model: &mut ObLstm,
    train_corpus: &[TrainingSample],
    val_corpus: &[TrainingSample],
    hyper: &Hyper,
    rng: &mut SimRng,
) -> Result<TrainReport> {
    let train_refs: Vec<&TrainingSample> = train_corpus.iter().collect();
    let val_refs: Vec<&TrainingSample> = if val_corpus.is_empty() {
        train_refs.clone()
    } else {
        val_corpus.iter().collect()
    };
    train_loop(model, &train_refs, &val_refs, hyper, rng)
}

fn train_loop(
    model: &mut ObLstm,
    train_set: &[&TrainingSample],
    val_set: &[&TrainingSample],
    hyper: &Hyper,
    rng: &mut SimRng,
) -> Result<TrainReport> {
    if train_set.is_empty() {
        return Err(CtpError::InvalidArgument("empty training corpus".into()));
    }
    hyper.validate()?;
    for s in train_set.iter().chain(val_set.iter()) {
        if s.inputs_re.len() != hyper.l_in
            || s.inputs_re.iter().any(|v| v.len() != hyper.d_in())
            || s.labels_re.len() != hyper.d_out()
        {
            return Err(CtpError::InvalidArgument(
                "corpus sample shape does not match the hyper-parameters".into(),
            ));
        }
    }

    let mut report = TrainReport {
        train_loss: Vec::with_capacity(hyper.epochs),
        val_loss: Vec::with_capacity(hyper.epochs),
    };
    let mut order: Vec<usize> = (0..train_set.len()).collect();

    for epoch in 0..hyper.epochs {
        rng.shuffle(&mut order);
        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(hyper.batch) {
            let mut grad_r = model.params.r.zeros_like();
            let mut grad_i = model.params.i.zeros_like();
            let mut batch_loss = 0.0;
            for &idx in chunk {
                let (gr, gi, l) = model.sample_gradients(train_set[idx])?;
                accumulate(&mut grad_r, &gr);
                accumulate(&mut grad_i, &gi);
                batch_loss += l;
            }
            let inv = 1.0 / chunk.len() as f64;
            scale_in_place(&mut grad_r, inv);
            scale_in_place(&mut grad_i, inv);
            adam_step(
                &mut model.params,
                &grad_r,
                &grad_i,
                hyper.lr,
                hyper.beta1,
                hyper.beta2,
                hyper.eps_adam,
            );
            batch_loss *= inv;
            if !batch_loss.is_finite() {
                return Err(CtpError::Diverged(format!(
                    "loss became {batch_loss} in epoch {epoch}"
                )));
            }
            epoch_loss += batch_loss;
            batches += 1;
        }
        report.train_loss.push(epoch_loss / batches.max(1) as f64);
        report.val_loss.push(mean_loss(model, val_set)?);
        if !model.params.r.all_finite() || !model.params.i.all_finite() {
            return Err(CtpError::Diverged(format!(
                "non-finite parameters after epoch {epoch}"
            )));
        }
    }
    Ok(report)
}
