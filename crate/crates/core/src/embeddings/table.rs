use std::collections::HashMap;

use crate::embeddings::labels::LabelSet;
use crate::error::{Error, Result};
use crate::tensor_ops::{DenseMap, Dims, Real};

/// Tolerance on `|‖v‖ - 1|` for a table to count as normalized.
pub const UNIT_NORM_TOLERANCE: f64 = 1e-5;

/// Frozen label name → `C`-dimensional vector map. Insertion order is kept so
/// that serialization is deterministic.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dimension: usize,
    labels: Vec<String>,
    vectors: Vec<Vec<f32>>,
    index: HashMap<String, usize>,
}

impl EmbeddingTable {
    pub fn new(dimension: usize) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::Config("embedding dimension must be positive".into()));
        }
        Ok(Self {
            dimension,
            labels: Vec::new(),
            vectors: Vec::new(),
            index: HashMap::new(),
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Labels in insertion order.
    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn contains(&self, label: &str) -> bool {
        self.index.contains_key(label)
    }

    pub fn get(&self, label: &str) -> Option<&[f32]> {
        self.index.get(label).map(|&i| self.vectors[i].as_slice())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f32])> {
        self.labels
            .iter()
            .zip(&self.vectors)
            .map(|(l, v)| (l.as_str(), v.as_slice()))
    }

    /// Adds or replaces an entry.
    pub fn insert(&mut self, label: impl Into<String>, vector: Vec<f32>) -> Result<()> {
        let label = label.into();
        if label.is_empty() || label.len() > u16::MAX as usize {
            return Err(Error::Format(format!(
                "label length {} outside 1..=65535 bytes",
                label.len()
            )));
        }
        if vector.len() != self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                found: vector.len(),
            });
        }
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("embedding for `{label}` is not finite")));
        }
        match self.index.get(&label) {
            Some(&i) => self.vectors[i] = vector,
            None => {
                self.index.insert(label.clone(), self.labels.len());
                self.labels.push(label);
                self.vectors.push(vector);
            }
        }
        Ok(())
    }

    /// Whether every vector has unit L2 norm within [`UNIT_NORM_TOLERANCE`].
    pub fn is_normalized(&self) -> bool {
        !self.is_empty()
            && self.vectors.iter().all(|v| {
                let n = v.iter().map(|&x| (x as f64) * (x as f64)).sum::<f64>().sqrt();
                (n - 1.0).abs() <= UNIT_NORM_TOLERANCE
            })
    }

    /// Copy with every vector scaled to unit length.
    pub fn normalized(&self) -> Result<Self> {
        let mut out = Self::new(self.dimension)?;
        for (label, v) in self.iter() {
            out.insert(label, normalize(v))?;
        }
        Ok(out)
    }

    /// Rows `T_1..T_N` for `labels`, as a `(1, N, C)` map whose row `k` is
    /// the vector of label `k`.
    pub fn embed_labels<T: Real>(&self, labels: &LabelSet) -> Result<DenseMap<T>> {
        let mut values = Vec::with_capacity(labels.len() * self.dimension);
        for label in labels.iter() {
            let v = self
                .get(label)
                .ok_or_else(|| Error::UnknownLabel(label.to_string()))?;
            values.extend(v.iter().map(|&x| T::from_f64_lossy(x as f64)));
        }
        DenseMap::from_vec(Dims::new(1, labels.len(), self.dimension), values)
    }

    /// Checks every label resolves, naming the first that does not.
    pub fn resolve(&self, labels: &LabelSet) -> Result<()> {
        match labels.iter().find(|l| !self.contains(l)) {
            Some(missing) => Err(Error::UnknownLabel(missing.to_string())),
            None => Ok(()),
        }
    }

    /// SHA-256 of the canonical binary encoding.
    pub fn digest(&self) -> Result<String> {
        Ok(crate::util::sha256_hex(&super::io::encode_binary(self)?))
    }

    /// Cosine similarity of two stored labels.
    pub fn cosine(&self, a: &str, b: &str) -> Result<f64> {
        let va = self.get(a).ok_or_else(|| Error::UnknownLabel(a.into()))?;
        let vb = self.get(b).ok_or_else(|| Error::UnknownLabel(b.into()))?;
        Ok(cosine(va, vb))
    }
}

pub(crate) fn normalize(v: &[f32]) -> Vec<f32> {
    let n = v.iter().map(|&x| (x as f64) * (x as f64)).sum::<f64>().sqrt();
    if n == 0.0 {
        return v.to_vec();
    }
    v.iter().map(|&x| (x as f64 / n) as f32).collect()
}

pub fn cosine(a: &[f32], b: &[f32]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(&x, &y)| x as f64 * y as f64).sum();
    let na: f64 = a.iter().map(|&x| (x as f64).powi(2)).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|&x| (x as f64).powi(2)).sum::<f64>().sqrt();
    dot / (na * nb)
}
