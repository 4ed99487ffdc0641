use std::fmt;

use crate::error::{Error, Result};

/// The background label name.
pub const OTHER_LABEL: &str = "other";

/// Ordered, duplicate-free list of label names, optionally marking one of
/// them as the background ("other") label.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LabelSet {
    labels: Vec<String>,
    other_index: Option<usize>,
}

impl LabelSet {
    pub fn new(labels: Vec<String>, other_index: Option<usize>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::LabelSet("a label set needs at least one label".into()));
        }
        for (i, label) in labels.iter().enumerate() {
            if label.trim().is_empty() {
                return Err(Error::LabelSet(format!("label {i} is empty")));
            }
            if labels[..i].contains(label) {
                return Err(Error::LabelSet(format!("duplicate label `{label}`")));
            }
        }
        if let Some(o) = other_index {
            if o >= labels.len() {
                return Err(Error::LabelSet(format!(
                    "other index {o} out of range for {} labels",
                    labels.len()
                )));
            }
        }
        Ok(Self {
            labels,
            other_index,
        })
    }

    /// Builds a set and marks a literal `"other"` entry as background.
    pub fn from_labels<S: Into<String>>(labels: impl IntoIterator<Item = S>) -> Result<Self> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        let other = labels.iter().position(|l| l == OTHER_LABEL);
        Self::new(labels, other)
    }

    /// Parses a comma-separated list such as `"sky,road,house,plant"`.
    pub fn parse(list: &str) -> Result<Self> {
        Self::from_labels(list.split(',').map(|s| s.trim().to_string()))
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn get(&self, index: usize) -> Option<&str> {
        self.labels.get(index).map(String::as_str)
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.labels.iter().map(String::as_str)
    }

    pub fn other_index(&self) -> Option<usize> {
        self.other_index
    }

    pub fn with_other_index(mut self, index: Option<usize>) -> Result<Self> {
        self.other_index = index;
        Self::new(self.labels, self.other_index)
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// Set whose entry `k` is `self[perm[k]]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let mut seen = vec![false; self.len()];
        if perm.len() != self.len() || perm.iter().any(|&p| p >= self.len() || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::LabelSet("not a permutation of the label indices".into()));
        }
        let labels = perm.iter().map(|&p| self.labels[p].clone()).collect();
        let other_index = self
            .other_index
            .map(|o| perm.iter().position(|&p| p == o).expect("permutation is total"));
        Self::new(labels, other_index)
    }

    /// Appends a label at the end.
    pub fn extended(&self, label: impl Into<String>) -> Result<Self> {
        let mut labels = self.labels.clone();
        labels.push(label.into());
        Self::new(labels, self.other_index)
    }
}

impl fmt::Display for LabelSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.labels.join(","))
    }
}
