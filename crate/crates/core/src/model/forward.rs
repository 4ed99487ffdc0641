//! The segmentation pipeline:
//! image → dense embeddings `I` → correlation with label rows `T`
//! → spatial regularization → bilinear upsample → per-pixel argmax.

use std::collections::HashMap;

use image::RgbImage;

use crate::embeddings::{EmbeddingTable, LabelSet};
use crate::error::{Error, Result};
use crate::model::config::{BlockKind, ModelConfig};
use crate::model::params::ModelParameters;
use crate::tensor_ops::{self, DenseMap, Dims, NodeId, Real, Tape};

/// Guards the pixel-embedding normalization against zero vectors.
const NORM_EPS: f64 = 1e-8;

/// Largest label set a prediction can report (indices are bytes).
pub const MAX_LABELS: usize = 256;

/// Node handles of one recorded forward pass.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    /// One node per parameter tensor, in [`ModelParameters::tensors`] order.
    pub params: Vec<NodeId>,
    /// Pixel embeddings `I`, `(H/s, W/s, C)`.
    pub embeddings: NodeId,
    /// Raw correlation `F`, `(H/s, W/s, N)`.
    pub correlation: NodeId,
    /// `F` after the regularization blocks.
    pub regularized: NodeId,
    /// Logits at input resolution, `(H, W, N)`.
    pub logits: NodeId,
}

struct ParamNodes<'a> {
    ids: Vec<NodeId>,
    by_name: HashMap<&'a str, usize>,
}

impl ParamNodes<'_> {
    fn get(&self, name: &str) -> Result<NodeId> {
        self.by_name
            .get(name)
            .map(|&i| self.ids[i])
            .ok_or_else(|| Error::Format(format!("missing parameter `{name}`")))
    }
}

fn record_params<'a, T: Real>(
    tape: &mut Tape<T>,
    params: &'a ModelParameters<T>,
    trainable: bool,
) -> ParamNodes<'a> {
    let mut ids = Vec::with_capacity(params.tensors().len());
    let mut by_name = HashMap::new();
    for (i, t) in params.tensors().iter().enumerate() {
        let id = if trainable {
            tape.param(t.value.clone())
        } else {
            tape.constant(t.value.clone())
        };
        ids.push(id);
        by_name.insert(t.name.as_str(), i);
    }
    ParamNodes { ids, by_name }
}

/// Label rows as fed to the correlation, normalized if the config says so.
pub fn prepare_label_rows<T: Real>(config: &ModelConfig, rows: &DenseMap<T>) -> DenseMap<T> {
    if !config.normalize_labels {
        return rows.clone();
    }
    let c = rows.channels();
    let mut out = rows.clone();
    for row in out.values_mut().chunks_mut(c) {
        let n = row
            .iter()
            .map(|v| v.to_f64().unwrap_or(f64::NAN).powi(2))
            .sum::<f64>()
            .sqrt();
        if n > 0.0 {
            for v in row.iter_mut() {
                *v = T::from_f64_lossy(v.to_f64().unwrap_or(f64::NAN) / n);
            }
        }
    }
    out
}

fn encode_on<T: Real>(
    tape: &mut Tape<T>,
    config: &ModelConfig,
    p: &ParamNodes<'_>,
    image: &DenseMap<T>,
) -> Result<NodeId> {
    let e = &config.encoder;
    if image.channels() != 3 {
        return Err(Error::shape(format!("expected an RGB image, got {}", image.dims())));
    }
    e.check_input(image.height(), image.width())
        .map_err(|err| Error::shape(err.to_string()))?;
    let x = tape.constant(image.clone());
    let offset = tape.constant(DenseMap::filled(image.dims(), T::from_f64_lossy(-0.5)));
    let x = tape.add(x, offset)?;
    let x = tape.space_to_depth(x, e.patch_size)?;
    let mut h = tape.linear(x, p.get("encoder.patch.weight")?, Some(p.get("encoder.patch.bias")?))?;
    for l in 0..e.mixing_layers {
        let a = tape.conv_depthwise(
            h,
            p.get(&format!("encoder.mix{l}.dw.kernel"))?,
            p.get(&format!("encoder.mix{l}.dw.bias"))?,
        )?;
        let a = tape.relu(a);
        let a = tape.linear(
            a,
            p.get(&format!("encoder.mix{l}.pw.weight"))?,
            Some(p.get(&format!("encoder.mix{l}.pw.bias"))?),
        )?;
        h = tape.add(h, a)?;
    }
    let h = tape.linear(h, p.get("encoder.proj.weight")?, Some(p.get("encoder.proj.bias")?))?;
    let h = tape.bilinear_upsample(h, e.patch_size / e.downsample)?;
    Ok(if config.normalize_pixels {
        tape.l2_normalize(h, T::from_f64_lossy(NORM_EPS))
    } else {
        h
    })
}

fn regularize_on<T: Real>(
    tape: &mut Tape<T>,
    config: &ModelConfig,
    p: &ParamNodes<'_>,
    scores: NodeId,
) -> Result<NodeId> {
    let n = tape.dims(scores).channels;
    let mut f = scores;
    for b in 0..config.regularizer.depth {
        let kernel = tape.tile_channels(p.get(&format!("head.block{b}.kernel"))?, n)?;
        let bias = tape.tile_channels(p.get(&format!("head.block{b}.bias"))?, n)?;
        let input = match config.regularizer.kind {
            BlockKind::Depthwise => f,
            BlockKind::Bottleneck => {
                let m = tape.channel_max(f)?;
                tape.add(f, m)?
            }
        };
        let conv = tape.conv_depthwise(input, kernel, bias)?;
        f = tape.relu(conv);
    }
    Ok(f)
}

/// Records the full pipeline on `tape`. Parameters become trainable leaves
/// when `trainable` is set; label rows are always constants.
pub fn forward<T: Real>(
    tape: &mut Tape<T>,
    params: &ModelParameters<T>,
    image: &DenseMap<T>,
    label_rows: &DenseMap<T>,
    trainable: bool,
) -> Result<ForwardPass> {
    let config = params.config();
    if label_rows.channels() != config.encoder.embed_dim {
        return Err(Error::DimensionMismatch {
            expected: config.encoder.embed_dim,
            found: label_rows.channels(),
        });
    }
    let p = record_params(tape, params, trainable);
    let embeddings = encode_on(tape, config, &p, image)?;
    let rows = tape.constant(prepare_label_rows(config, label_rows));
    let correlation = tape.correlate(embeddings, rows)?;
    let regularized = regularize_on(tape, config, &p, correlation)?;
    let logits = tape.bilinear_upsample(regularized, config.encoder.downsample)?;
    Ok(ForwardPass {
        params: p.ids,
        embeddings,
        correlation,
        regularized,
        logits,
    })
}

/// Dense pixel embeddings `(H/s, W/s, C)` for an `(H, W, 3)` image in [0, 1].
pub fn encode_image<T: Real>(params: &ModelParameters<T>, image: &DenseMap<T>) -> Result<DenseMap<T>> {
    let mut tape = Tape::new();
    let p = record_params(&mut tape, params, false);
    let id = encode_on(&mut tape, params.config(), &p, image)?;
    Ok(tape.value(id).clone())
}

/// `F(i, j, k) = I(i, j) · T(k)` for label rows of dims `(1, N, C)`.
pub fn correlate<T: Real>(embeddings: &DenseMap<T>, label_rows: &DenseMap<T>) -> Result<DenseMap<T>> {
    tensor_ops::correlate(embeddings, label_rows)
}

/// Applies the configured regularization blocks to a correlation map.
pub fn regularize<T: Real>(params: &ModelParameters<T>, scores: &DenseMap<T>) -> Result<DenseMap<T>> {
    let mut tape = Tape::new();
    let p = record_params(&mut tape, params, false);
    let f = tape.constant(scores.clone());
    let id = regularize_on(&mut tape, params.config(), &p, f)?;
    Ok(tape.value(id).clone())
}

/// Result of segmenting one image with one label set.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentationOutput<T> {
    pub height: usize,
    pub width: usize,
    /// Row-major winning label index per pixel.
    pub label_map: Vec<u8>,
    /// Logits `(H, W, N)` before temperature scaling.
    pub scores: DenseMap<T>,
    pub legend: LabelSet,
}

impl<T: Real> SegmentationOutput<T> {
    pub fn label_at(&self, y: usize, x: usize) -> u8 {
        self.label_map[y * self.width + x]
    }
}

/// Per-pixel argmax over channels, lowest index winning ties.
pub fn argmax_labels<T: Real>(scores: &DenseMap<T>) -> Result<Vec<u8>> {
    if scores.channels() > MAX_LABELS {
        return Err(Error::LabelSet(format!(
            "{} labels exceed the limit of {MAX_LABELS}",
            scores.channels()
        )));
    }
    let (_, argmax) = tensor_ops::channel_max(scores)?;
    Ok(argmax.into_iter().map(|k| k as u8).collect())
}

/// Segments `image` against `labels` resolved through `table`.
pub fn predict<T: Real>(
    params: &ModelParameters<T>,
    image: &DenseMap<T>,
    labels: &LabelSet,
    table: &EmbeddingTable,
) -> Result<SegmentationOutput<T>> {
    if labels.len() > MAX_LABELS {
        return Err(Error::LabelSet(format!(
            "{} labels exceed the limit of {MAX_LABELS}",
            labels.len()
        )));
    }
    let rows = table.embed_labels::<T>(labels)?;
    predict_with_rows(params, image, labels, &rows)
}

/// [`predict`] with label rows that were already looked up.
pub fn predict_with_rows<T: Real>(
    params: &ModelParameters<T>,
    image: &DenseMap<T>,
    labels: &LabelSet,
    rows: &DenseMap<T>,
) -> Result<SegmentationOutput<T>> {
    let mut tape = Tape::new();
    let pass = forward(&mut tape, params, image, rows, false)?;
    let scores = tape.value(pass.logits).clone();
    Ok(SegmentationOutput {
        height: image.height(),
        width: image.width(),
        label_map: argmax_labels(&scores)?,
        scores,
        legend: labels.clone(),
    })
}

/// Like [`predict`] for images of any size: the image is edge-padded up to
/// the encoder's side multiple and the result cropped back.
pub fn predict_padded<T: Real>(
    params: &ModelParameters<T>,
    image: &DenseMap<T>,
    labels: &LabelSet,
    table: &EmbeddingTable,
) -> Result<SegmentationOutput<T>> {
    let m = params.config().encoder.input_multiple();
    let (h, w) = (image.height(), image.width());
    if h == 0 || w == 0 {
        return Err(Error::shape("empty image"));
    }
    let (ph, pw) = (h.div_ceil(m) * m, w.div_ceil(m) * m);
    if (ph, pw) == (h, w) {
        return predict(params, image, labels, table);
    }
    let padded = DenseMap::from_fn(Dims::new(ph, pw, image.channels()), |y, x, c| {
        image.get(y.min(h - 1), x.min(w - 1), c)
    });
    let full = predict(params, &padded, labels, table)?;
    let n = labels.len();
    let scores = DenseMap::from_fn(Dims::new(h, w, n), |y, x, k| full.scores.get(y, x, k));
    let label_map = (0..h)
        .flat_map(|y| (0..w).map(move |x| (y, x)))
        .map(|(y, x)| full.label_at(y, x))
        .collect();
    Ok(SegmentationOutput {
        height: h,
        width: w,
        label_map,
        scores,
        legend: full.legend,
    })
}

/// RGB bytes scaled to [0, 1].
pub fn image_to_dense<T: Real>(image: &RgbImage) -> DenseMap<T> {
    let dims = Dims::new(image.height() as usize, image.width() as usize, 3);
    let values = image
        .as_raw()
        .iter()
        .map(|&b| T::from_f64_lossy(b as f64 / 255.0))
        .collect();
    DenseMap::from_vec(dims, values).expect("RgbImage buffer is h*w*3")
}

/// Loss and per-parameter gradients for one image.
#[derive(Debug, Clone)]
pub struct LossAndGrads<T> {
    pub loss: T,
    /// One gradient per parameter tensor, in [`ModelParameters::tensors`] order.
    pub grads: Vec<DenseMap<T>>,
}

/// Mean temperature-scaled cross-entropy of the full pipeline on one image,
/// with gradients for every parameter tensor.
pub fn loss_and_grads<T: Real>(
    params: &ModelParameters<T>,
    image: &DenseMap<T>,
    targets: &[u8],
    label_rows: &DenseMap<T>,
    temperature: T,
    ignore_index: Option<u8>,
) -> Result<LossAndGrads<T>> {
    let mut tape = Tape::new();
    let pass = forward(&mut tape, params, image, label_rows, true)?;
    let loss = tape.pixel_ce_loss(pass.logits, targets, temperature, ignore_index)?;
    let g = tape.backward(loss)?;
    let grads = pass
        .params
        .iter()
        .zip(params.tensors())
        .map(|(&id, t)| g.get_or_zeros(id, t.value.dims()))
        .collect();
    Ok(LossAndGrads {
        loss: tape.scalar(loss),
        grads,
    })
}
