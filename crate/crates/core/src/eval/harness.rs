use rayon::prelude::*;

use crate::data::{TrainSample, IGNORE_INDEX};
use crate::embeddings::{EmbeddingTable, LabelSet};
use crate::error::{Error, Result};
use crate::eval::metrics::ConfusionMatrix;
use crate::model::{image_to_dense, predict_with_rows, ModelParameters};
use crate::tensor_ops::Real;

/// Segments every sample against `query` and accumulates a confusion matrix
/// in `query`'s index space. `truth_to_query[k]` gives the query index of
/// ground-truth label `k` of the samples (which must share one label set).
pub fn evaluate_samples<T: Real>(
    params: &ModelParameters<T>,
    samples: &[TrainSample],
    table: &EmbeddingTable,
    query: &LabelSet,
    truth_to_query: &[usize],
) -> Result<ConfusionMatrix> {
    let first = samples
        .first()
        .ok_or_else(|| Error::Config("evaluation set is empty".into()))?;
    if samples.iter().any(|s| s.label_set != first.label_set) {
        return Err(Error::LabelSet("evaluation samples must share one label set".into()));
    }
    if truth_to_query.len() != first.label_set.len() || truth_to_query.iter().any(|&q| q >= query.len()) {
        return Err(Error::LabelSet("ground-truth to query label mapping is malformed".into()));
    }
    let rows = table.embed_labels::<T>(query)?;
    samples
        .par_iter()
        .map(|s| {
            let image = image_to_dense::<T>(&s.image);
            let out = predict_with_rows(params, &image, query, &rows)?;
            let truth: Vec<u8> = s
                .target
                .iter()
                .map(|&y| if y == IGNORE_INDEX { y } else { truth_to_query[y as usize] as u8 })
                .collect();
            ConfusionMatrix::from_maps(query.len(), &truth, &out.label_map, Some(IGNORE_INDEX))
        })
        .try_reduce(
            || ConfusionMatrix::new(query.len()),
            |mut a, b| {
                a.merge(&b)?;
                Ok(a)
            },
        )
}

/// Confusion matrix of the predictor that answers `label` everywhere.
pub fn constant_prediction(
    samples: &[TrainSample],
    classes: usize,
    truth_to_query: &[usize],
    label: usize,
) -> Result<ConfusionMatrix> {
    let mut cm = ConfusionMatrix::new(classes);
    for s in samples {
        for &y in &s.target {
            if y != IGNORE_INDEX {
                cm.record(truth_to_query[y as usize], label)?;
            }
        }
    }
    Ok(cm)
}
