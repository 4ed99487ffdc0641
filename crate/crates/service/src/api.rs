use std::sync::Arc;
use std::time::Instant;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::header::{HeaderName, HeaderValue};
use axum::response::{IntoResponse, Response};
use axum::Json;
use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;
use serde::{Deserialize, Serialize};

use lseg_core::embeddings::LabelSet;
use lseg_core::model::{image_to_dense, predict_padded, MAX_LABELS};
use lseg_core::tensor_ops::DenseMap;
use lseg_core::util::sha256_hex;

use crate::error::ServiceError;
use crate::state::ServiceState;

/// Largest accepted image side, in pixels.
pub const MAX_IMAGE_SIDE: u32 = 1024;
/// Request bodies above this are refused with 413 before parsing.
pub const MAX_REQUEST_BYTES: usize = 32 * 1024 * 1024;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentOptions {
    /// Softmax temperature of the score summary.
    #[serde(default)]
    pub temperature: Option<f64>,
    #[serde(default)]
    pub return_scores: bool,
    /// Also report elapsed time in the body (which then differs between
    /// otherwise identical requests).
    #[serde(default)]
    pub include_timing: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentRequest {
    /// Base64 of a PNG file.
    pub image: String,
    pub labels: Vec<String>,
    #[serde(default)]
    pub options: SegmentOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LegendEntry {
    pub label: String,
    /// `#rrggbb`, derived from the label text only.
    pub color: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreSummary {
    pub label: String,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentResponse {
    pub width: u32,
    pub height: u32,
    /// Base64 of `height * width` bytes, row-major, each an index into `legend`.
    pub label_map: String,
    pub legend: Vec<LegendEntry>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub scores: Option<Vec<ScoreSummary>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub timing_ms: Option<f64>,
}

/// Display colour of a label: the first three bytes of its SHA-256, so a
/// label keeps its colour whatever its position in the list.
pub fn label_color(label: &str) -> [u8; 3] {
    let hex = sha256_hex(label.as_bytes());
    let byte = |i: usize| u8::from_str_radix(&hex[2 * i..2 * i + 2], 16).expect("hex digest");
    [byte(0), byte(1), byte(2)]
}

fn color_hex(c: [u8; 3]) -> String {
    format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2])
}

fn score_summary(scores: &DenseMap<f32>, labels: &LabelSet, temperature: f64) -> Vec<ScoreSummary> {
    let n = labels.len();
    let mut min = vec![f64::INFINITY; n];
    let mut max = vec![f64::NEG_INFINITY; n];
    let mut sum = vec![0.0f64; n];
    let mut z = vec![0.0f64; n];
    let pixels = scores.dims().pixels();
    for px in scores.values().chunks(n) {
        for (zk, &v) in z.iter_mut().zip(px) {
            *zk = v as f64 / temperature;
        }
        let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let total: f64 = z.iter().map(|v| (v - m).exp()).sum();
        for k in 0..n {
            let p = (z[k] - m).exp() / total;
            min[k] = min[k].min(p);
            max[k] = max[k].max(p);
            sum[k] += p;
        }
    }
    labels
        .iter()
        .enumerate()
        .map(|(k, l)| ScoreSummary {
            label: l.to_string(),
            min: min[k],
            max: max[k],
            mean: sum[k] / pixels as f64,
        })
        .collect()
}

/// Runs one request to completion; blocking.
pub(crate) fn run_segment(state: &ServiceState, req: SegmentRequest) -> Result<SegmentResponse, ServiceError> {
    if req.labels.is_empty() || req.labels.len() > MAX_LABELS {
        return Err(ServiceError::BadRequest(format!(
            "between 1 and {MAX_LABELS} labels are required, got {}",
            req.labels.len()
        )));
    }
    let labels = LabelSet::from_labels(req.labels.iter().map(|l| l.trim().to_string()))
        .map_err(|e| ServiceError::BadRequest(e.to_string()))?;
    for l in labels.iter() {
        if !state.table().contains(l) {
            return Err(ServiceError::UnknownLabel(l.to_string()));
        }
    }
    let temperature = req.options.temperature.unwrap_or(state.default_temperature);
    if !(temperature > 0.0 && temperature.is_finite()) {
        return Err(ServiceError::BadRequest(format!("temperature must be positive, got {temperature}")));
    }
    let png = BASE64
        .decode(req.image.trim())
        .map_err(|e| ServiceError::BadImage(format!("image is not base64: {e}")))?;
    let reader = image::ImageReader::with_format(std::io::Cursor::new(&png), image::ImageFormat::Png);
    let (width, height) = reader
        .into_dimensions()
        .map_err(|e| ServiceError::BadImage(e.to_string()))?;
    if width > MAX_IMAGE_SIDE || height > MAX_IMAGE_SIDE {
        return Err(ServiceError::TooLarge {
            width,
            height,
            limit: MAX_IMAGE_SIDE,
        });
    }
    let decoded = image::load_from_memory_with_format(&png, image::ImageFormat::Png)
        .map_err(|e| ServiceError::BadImage(e.to_string()))?
        .to_rgb8();
    let image = image_to_dense::<f32>(&decoded);
    let out = predict_padded(state.params(), &image, &labels, state.table())?;
    if !out.scores.is_finite() {
        return Err(ServiceError::Numeric("non-finite scores".into()));
    }
    Ok(SegmentResponse {
        width,
        height,
        label_map: BASE64.encode(&out.label_map),
        legend: labels
            .iter()
            .map(|l| LegendEntry {
                label: l.to_string(),
                color: color_hex(label_color(l)),
            })
            .collect(),
        scores: req
            .options
            .return_scores
            .then(|| score_summary(&out.scores, &labels, temperature)),
        timing_ms: None,
    })
}

pub(crate) async fn segment(State(state): State<Arc<ServiceState>>, body: Bytes) -> Response {
    let start = Instant::now();
    let req: SegmentRequest = match serde_json::from_slice(&body) {
        Ok(r) => r,
        Err(e) => return ServiceError::BadRequest(e.to_string()).into_response(),
    };
    let include_timing = req.options.include_timing;
    let result = tokio::task::spawn_blocking(move || run_segment(&state, req))
        .await
        .unwrap_or_else(|e| Err(ServiceError::Internal(e.to_string())));
    let elapsed = start.elapsed().as_secs_f64() * 1e3;
    let mut response = match result {
        Ok(mut r) => {
            if include_timing {
                r.timing_ms = Some(elapsed);
            }
            Json(r).into_response()
        }
        Err(e) => e.into_response(),
    };
    if let Ok(v) = HeaderValue::from_str(&format!("segment;dur={elapsed:.3}")) {
        response.headers_mut().insert(HeaderName::from_static("server-timing"), v);
    }
    response
}

pub(crate) async fn vocabulary(State(state): State<Arc<ServiceState>>) -> impl IntoResponse {
    let mut labels: Vec<&str> = state.table().labels().iter().map(String::as_str).collect();
    labels.sort_unstable();
    Json(serde_json::json!({ "labels": labels }))
}

pub(crate) async fn health(State(state): State<Arc<ServiceState>>) -> impl IntoResponse {
    Json(serde_json::json!({
        "status": "ok",
        "checkpoint_digest": state.checkpoint_digest(),
        "table_digest": state.table_digest(),
        "labels": state.table().len(),
        "embed_dim": state.table().dimension(),
    }))
}
