use std::fmt::Debug;
use std::iter::Sum;

use num_traits::{Float, FromPrimitive};

use crate::error::{Error, Result};

/// Floating point element type of a [`DenseMap`].
pub trait Real:
    Float + FromPrimitive + Debug + Default + Sum + Send + Sync + 'static
{
    const PRECISION: Precision;

    fn from_f64_lossy(v: f64) -> Self;
}

impl Real for f32 {
    const PRECISION: Precision = Precision::F32;

    fn from_f64_lossy(v: f64) -> Self {
        v as f32
    }
}

impl Real for f64 {
    const PRECISION: Precision = Precision::F64;

    fn from_f64_lossy(v: f64) -> Self {
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Precision {
    F32,
    F64,
}

/// Shape of a rank-3 `(height, width, channels)` array.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Dims {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
}

impl Dims {
    pub const fn new(height: usize, width: usize, channels: usize) -> Self {
        Self {
            height,
            width,
            channels,
        }
    }

    pub const fn len(&self) -> usize {
        self.height * self.width * self.channels
    }

    pub const fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub const fn pixels(&self) -> usize {
        self.height * self.width
    }
}

impl std::fmt::Display for Dims {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}x{}", self.height, self.width, self.channels)
    }
}

/// Rank-3 real array stored row-major in `(h, w, c)` order, so the channel
/// vector of each pixel is contiguous.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMap<T> {
    dims: Dims,
    values: Vec<T>,
}

impl<T: Real> DenseMap<T> {
    pub fn zeros(dims: Dims) -> Self {
        Self {
            dims,
            values: vec![T::zero(); dims.len()],
        }
    }

    pub fn filled(dims: Dims, value: T) -> Self {
        Self {
            dims,
            values: vec![value; dims.len()],
        }
    }

    pub fn from_vec(dims: Dims, values: Vec<T>) -> Result<Self> {
        if values.len() != dims.len() {
            return Err(Error::shape(format!(
                "{} values cannot fill a {dims} map",
                values.len()
            )));
        }
        Ok(Self { dims, values })
    }

    pub fn from_fn(dims: Dims, mut f: impl FnMut(usize, usize, usize) -> T) -> Self {
        let mut values = Vec::with_capacity(dims.len());
        for y in 0..dims.height {
            for x in 0..dims.width {
                for c in 0..dims.channels {
                    values.push(f(y, x, c));
                }
            }
        }
        Self { dims, values }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn height(&self) -> usize {
        self.dims.height
    }

    pub fn width(&self) -> usize {
        self.dims.width
    }

    pub fn channels(&self) -> usize {
        self.dims.channels
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    #[inline]
    pub fn index(&self, y: usize, x: usize, c: usize) -> usize {
        debug_assert!(y < self.dims.height && x < self.dims.width && c < self.dims.channels);
        (y * self.dims.width + x) * self.dims.channels + c
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize, c: usize) -> T {
        self.values[self.index(y, x, c)]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, c: usize, v: T) {
        let i = self.index(y, x, c);
        self.values[i] = v;
    }

    /// Channel vector of pixel `(y, x)`.
    #[inline]
    pub fn pixel(&self, y: usize, x: usize) -> &[T] {
        let start = (y * self.dims.width + x) * self.dims.channels;
        &self.values[start..start + self.dims.channels]
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            dims: self.dims,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn cast<U: Real>(&self) -> DenseMap<U> {
        DenseMap {
            dims: self.dims,
            values: self
                .values
                .iter()
                .map(|v| U::from_f64_lossy(v.to_f64().unwrap_or(f64::NAN)))
                .collect(),
        }
    }

    pub fn sum(&self) -> T {
        self.values.iter().copied().sum()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Reorders channels so that output channel `k` is input channel `perm[k]`.
    pub fn permute_channels(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.dims.channels {
            return Err(Error::shape(format!(
                "permutation of length {} for {} channels",
                perm.len(),
                self.dims.channels
            )));
        }
        Ok(Self::from_fn(self.dims, |y, x, k| self.get(y, x, perm[k])))
    }

    pub(crate) fn add_assign(&mut self, other: &Self) {
        debug_assert_eq!(self.dims, other.dims);
        for (a, &b) in self.values.iter_mut().zip(&other.values) {
            *a = *a + b;
        }
    }
}
