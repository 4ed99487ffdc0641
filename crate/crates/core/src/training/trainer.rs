use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::data::TrainSample;
use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};
use crate::model::{image_to_dense, loss_and_grads, ModelParameters};
use crate::tensor_ops::{DenseMap, Real};
use crate::training::config::TrainConfig;
use crate::training::schedule::poly_lr;
use crate::training::sgd::sgd_step;
use crate::util::derive_seed;

/// What happened at one optimisation step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub lr: f64,
    /// Mean loss over the batch, before the update.
    pub loss: f64,
    /// Dataset indices in the batch.
    pub samples: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<T> {
    pub params: ModelParameters<T>,
    pub history: Vec<StepRecord>,
}

impl<T> TrainOutcome<T> {
    pub fn final_loss(&self) -> Option<f64> {
        self.history.last().map(|r| r.loss)
    }
}

/// `step,lr,loss` lines with a header.
pub fn history_csv(history: &[StepRecord]) -> String {
    let mut out = String::from("step,lr,loss\n");
    for r in history {
        out.push_str(&format!("{},{},{}\n", r.step, r.lr, r.loss));
    }
    out
}

/// Trains `init` on `dataset` for `cfg.max_steps` steps. The embedding table
/// is only read; label text is never trained.
pub fn train<T: Real>(
    init: ModelParameters<T>,
    table: &EmbeddingTable,
    dataset: &[TrainSample],
    cfg: &TrainConfig,
) -> Result<TrainOutcome<T>> {
    train_with_progress(init, table, dataset, cfg, |_| {})
}

/// [`train`] calling `progress` after every step.
pub fn train_with_progress<T: Real>(
    init: ModelParameters<T>,
    table: &EmbeddingTable,
    dataset: &[TrainSample],
    cfg: &TrainConfig,
    mut progress: impl FnMut(&StepRecord),
) -> Result<TrainOutcome<T>> {
    cfg.validate()?;
    if dataset.is_empty() {
        return Err(Error::Config("training set is empty".into()));
    }
    // Label rows are looked up once per distinct label set.
    let mut rows_by_set: HashMap<String, DenseMap<T>> = HashMap::new();
    let mut prepared = Vec::with_capacity(dataset.len());
    for s in dataset {
        s.validate()?;
        let key = s.label_set.to_string();
        if !rows_by_set.contains_key(&key) {
            rows_by_set.insert(key.clone(), table.embed_labels::<T>(&s.label_set)?);
        }
        params_check(&init, s)?;
        prepared.push((image_to_dense::<T>(&s.image), key));
    }

    let mut params = init;
    let mut velocity: Vec<DenseMap<T>> = params.tensors().iter().map(|t| DenseMap::zeros(t.value.dims())).collect();
    let temperature = T::from_f64_lossy(cfg.temperature);
    let momentum = T::from_f64_lossy(cfg.momentum);
    let mut order: Vec<usize> = Vec::new();
    let mut epoch = 0usize;
    let mut history = Vec::with_capacity(cfg.max_steps);

    for step in 0..cfg.max_steps {
        let mut batch = Vec::with_capacity(cfg.batch_size);
        while batch.len() < cfg.batch_size {
            if order.is_empty() {
                order = (0..dataset.len()).collect();
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &format!("epoch{epoch}")));
                order.shuffle(&mut rng);
                order.reverse();
                epoch += 1;
            }
            batch.push(order.pop().expect("refilled above"));
        }
        let lr = poly_lr(step, cfg)?;
        let results: Vec<_> = batch
            .par_iter()
            .map(|&i| {
                let (image, key) = &prepared[i];
                loss_and_grads(&params, image, &dataset[i].target, &rows_by_set[key], temperature, cfg.ignore_index)
            })
            .collect::<Result<_>>()?;
        let inv = T::one() / T::from_usize(batch.len()).expect("batch size fits");
        let mut loss = 0.0;
        let mut grads: Vec<DenseMap<T>> = velocity.iter().map(|v| DenseMap::zeros(v.dims())).collect();
        for r in &results {
            loss += r.loss.to_f64().unwrap_or(f64::NAN);
            for (acc, g) in grads.iter_mut().zip(&r.grads) {
                acc.add_assign(g);
            }
        }
        let mut scale = inv;
        if let Some(max_norm) = cfg.clip_norm {
            let norm = global_norm(&grads) / batch.len() as f64;
            if norm > max_norm {
                scale = scale * T::from_f64_lossy(max_norm / norm);
            }
        }
        for g in &mut grads {
            g.values_mut().iter_mut().for_each(|v| *v = *v * scale);
        }
        loss /= batch.len() as f64;
        if !loss.is_finite() {
            return Err(Error::Numeric(format!("loss became non-finite at step {step}")));
        }
        let mut refs: Vec<&mut DenseMap<T>> = params.tensors_mut().iter_mut().map(|t| &mut t.value).collect();
        sgd_step(&mut refs, &grads, &mut velocity, T::from_f64_lossy(lr), momentum, cfg.momentum_kind())?;
        let record = StepRecord {
            step,
            lr,
            loss,
            samples: batch,
        };
        progress(&record);
        history.push(record);
    }
    Ok(TrainOutcome { params, history })
}

fn global_norm<T: Real>(grads: &[DenseMap<T>]) -> f64 {
    grads
        .iter()
        .flat_map(|g| g.values())
        .map(|v| v.to_f64().unwrap_or(f64::NAN).powi(2))
        .sum::<f64>()
        .sqrt()
}

fn params_check<T: Real>(params: &ModelParameters<T>, sample: &TrainSample) -> Result<()> {
    params.config().encoder.check_input(sample.height(), sample.width())
}
