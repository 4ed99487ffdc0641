use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::model::config::{BlockKind, ModelConfig};
use crate::tensor_ops::{DenseMap, Dims, Real};
use crate::util::derive_seed;

/// Initial bias of a regularization block. The bias is shared by every
/// label channel, so it leaves the softmax untouched and only keeps the
/// activations of the first steps out of the relu's dead zone.
pub(crate) fn block_bias_init(kind: BlockKind) -> f64 {
    match kind {
        BlockKind::Depthwise => 1.0,
        BlockKind::Bottleneck => 2.0,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NamedTensor<T> {
    pub name: String,
    pub value: DenseMap<T>,
}

/// How a tensor is initialized.
#[derive(Debug, Clone, Copy)]
enum Init {
    Zeros,
    Constant(f64),
    Normal(f64),
    /// Centre tap 1, others N(0, std).
    NearIdentity(f64),
}

/// Names, dims and initializers of every trainable tensor for `config`.
fn layout(config: &ModelConfig) -> Vec<(String, Dims, Init)> {
    let e = &config.encoder;
    let c = e.embed_dim;
    let patch_in = 3 * e.patch_size * e.patch_size;
    let mut out = vec![
        ("encoder.patch.weight".to_string(), Dims::new(1, patch_in, c), Init::Normal((1.0 / patch_in as f64).sqrt())),
        ("encoder.patch.bias".to_string(), Dims::new(1, 1, c), Init::Zeros),
    ];
    for l in 0..e.mixing_layers {
        out.push((format!("encoder.mix{l}.dw.kernel"), Dims::new(3, 3, c), Init::Normal((2.0f64 / 9.0).sqrt())));
        out.push((format!("encoder.mix{l}.dw.bias"), Dims::new(1, 1, c), Init::Zeros));
        out.push((format!("encoder.mix{l}.pw.weight"), Dims::new(1, c, c), Init::Normal(0.5 / (c as f64).sqrt())));
        out.push((format!("encoder.mix{l}.pw.bias"), Dims::new(1, 1, c), Init::Zeros));
    }
    out.push(("encoder.proj.weight".to_string(), Dims::new(1, c, c), Init::Normal((1.0 / c as f64).sqrt())));
    out.push(("encoder.proj.bias".to_string(), Dims::new(1, 1, c), Init::Zeros));
    let r = &config.regularizer;
    for b in 0..r.depth {
        out.push((format!("head.block{b}.kernel"), Dims::new(r.kernel, r.kernel, 1), Init::NearIdentity(0.01)));
        out.push((format!("head.block{b}.bias"), Dims::new(1, 1, 1), Init::Constant(block_bias_init(r.kind))));
    }
    out
}

/// Every trainable weight of the model. Each tensor draws from its own
/// random stream keyed by `(seed, name)`, so e.g. the encoder is identical
/// across regularizer configurations that share a seed.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParameters<T> {
    config: ModelConfig,
    seed: u64,
    tensors: Vec<NamedTensor<T>>,
}

impl<T: Real> ModelParameters<T> {
    pub fn init(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let tensors = layout(&config)
            .into_iter()
            .map(|(name, dims, init)| {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &name));
                let value = match init {
                    Init::Zeros => DenseMap::zeros(dims),
                    Init::Constant(v) => DenseMap::filled(dims, T::from_f64_lossy(v)),
                    Init::Normal(std) => {
                        let n = Normal::new(0.0, std).expect("finite std");
                        DenseMap::from_fn(dims, |_, _, _| T::from_f64_lossy(n.sample(&mut rng)))
                    }
                    Init::NearIdentity(std) => {
                        let n = Normal::new(0.0, std).expect("finite std");
                        let r = dims.height / 2;
                        DenseMap::from_fn(dims, |y, x, _| {
                            let centre = if y == r && x == r { 1.0 } else { 0.0 };
                            T::from_f64_lossy(centre + n.sample(&mut rng))
                        })
                    }
                };
                NamedTensor { name, value }
            })
            .collect();
        Ok(Self {
            config,
            seed,
            tensors,
        })
    }

    /// Rebuilds parameters from named tensors, checking them against the
    /// layout `config` implies.
    pub fn from_tensors(config: ModelConfig, seed: u64, tensors: Vec<NamedTensor<T>>) -> Result<Self> {
        config.validate()?;
        let expected = layout(&config);
        if expected.len() != tensors.len() {
            return Err(Error::Format(format!(
                "expected {} tensors for this config, found {}",
                expected.len(),
                tensors.len()
            )));
        }
        for ((name, dims, _), t) in expected.iter().zip(&tensors) {
            if *name != t.name || *dims != t.value.dims() {
                return Err(Error::Format(format!(
                    "tensor `{}` {} does not match expected `{name}` {dims}",
                    t.name,
                    t.value.dims()
                )));
            }
            if !t.value.is_finite() {
                return Err(Error::Numeric(format!("tensor `{name}` is not finite")));
            }
        }
        Ok(Self {
            config,
            seed,
            tensors,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn tensors(&self) -> &[NamedTensor<T>] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [NamedTensor<T>] {
        &mut self.tensors
    }

    pub fn get(&self, name: &str) -> Option<&DenseMap<T>> {
        self.tensors.iter().find(|t| t.name == name).map(|t| &t.value)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut DenseMap<T>> {
        self.tensors.iter_mut().find(|t| t.name == name).map(|t| &mut t.value)
    }

    pub fn num_scalars(&self) -> usize {
        self.tensors.iter().map(|t| t.value.dims().len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.iter().all(|t| t.value.is_finite())
    }

    pub fn cast<U: Real>(&self) -> ModelParameters<U> {
        ModelParameters {
            config: self.config,
            seed: self.seed,
            tensors: self
                .tensors
                .iter()
                .map(|t| NamedTensor {
                    name: t.name.clone(),
                    value: t.value.cast(),
                })
                .collect(),
        }
    }
}
