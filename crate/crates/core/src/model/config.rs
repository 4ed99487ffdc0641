use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::kv::KeyValues;

/// Dense image encoder geometry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EncoderConfig {
    pub input_height: usize,
    pub input_width: usize,
    /// Output embeddings are at `input / downsample` resolution.
    pub downsample: usize,
    pub embed_dim: usize,
    pub mixing_layers: usize,
    pub patch_size: usize,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self {
            input_height: 32,
            input_width: 32,
            downsample: 2,
            embed_dim: 64,
            mixing_layers: 2,
            patch_size: 4,
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.downsample == 0 || self.patch_size == 0 || self.embed_dim == 0 {
            return Err(Error::Config("downsample, patch_size and embed_dim must be positive".into()));
        }
        if self.patch_size % self.downsample != 0 {
            return Err(Error::Config(format!(
                "patch_size {} must be a multiple of downsample {}",
                self.patch_size, self.downsample
            )));
        }
        self.check_input(self.input_height, self.input_width)
    }

    /// Whether an `h x w` image can be encoded.
    pub fn check_input(&self, height: usize, width: usize) -> Result<()> {
        let m = self.patch_size * self.downsample;
        if height == 0 || width == 0 || height % m != 0 || width % m != 0 {
            return Err(Error::Config(format!(
                "image {height}x{width} must have sides that are positive multiples of {m}"
            )));
        }
        Ok(())
    }

    /// Side multiple every input must satisfy.
    pub fn input_multiple(&self) -> usize {
        self.patch_size * self.downsample
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BlockKind {
    /// `relu(depthwise_conv(F))`
    Depthwise,
    /// `relu(depthwise_conv(F + max_over_labels(F)))`
    Bottleneck,
}

impl fmt::Display for BlockKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BlockKind::Depthwise => "depthwise",
            BlockKind::Bottleneck => "bottleneck",
        })
    }
}

impl FromStr for BlockKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "depthwise" => Ok(BlockKind::Depthwise),
            "bottleneck" => Ok(BlockKind::Bottleneck),
            other => Err(Error::Config(format!("unknown block kind `{other}`"))),
        }
    }
}

/// Spatial regularization head applied to the label logits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RegularizerConfig {
    pub kind: BlockKind,
    pub depth: usize,
    pub kernel: usize,
}

impl Default for RegularizerConfig {
    fn default() -> Self {
        Self {
            kind: BlockKind::Bottleneck,
            depth: 2,
            kernel: 3,
        }
    }
}

impl RegularizerConfig {
    pub fn none() -> Self {
        Self {
            depth: 0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.kernel % 2 == 0 {
            return Err(Error::Config(format!("kernel size {} must be odd", self.kernel)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ModelConfig {
    pub encoder: EncoderConfig,
    pub regularizer: RegularizerConfig,
    /// L2-normalize pixel embeddings before correlation.
    pub normalize_pixels: bool,
    /// L2-normalize label embeddings before correlation.
    pub normalize_labels: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            encoder: EncoderConfig::default(),
            regularizer: RegularizerConfig::default(),
            normalize_pixels: true,
            normalize_labels: true,
        }
    }
}

const KEYS: &[&str] = &[
    "input_height",
    "input_width",
    "downsample",
    "embed_dim",
    "mixing_layers",
    "patch_size",
    "block_kind",
    "depth",
    "kernel",
    "normalize_pixels",
    "normalize_labels",
];

impl ModelConfig {
    /// Every key [`Self::from_kv`] understands.
    pub const KEYS: &'static [&'static str] = KEYS;

    pub fn validate(&self) -> Result<()> {
        self.encoder.validate()?;
        self.regularizer.validate()
    }

    pub fn to_kv(&self) -> KeyValues {
        let mut kv = KeyValues::default();
        let e = &self.encoder;
        kv.insert("input_height", e.input_height);
        kv.insert("input_width", e.input_width);
        kv.insert("downsample", e.downsample);
        kv.insert("embed_dim", e.embed_dim);
        kv.insert("mixing_layers", e.mixing_layers);
        kv.insert("patch_size", e.patch_size);
        kv.insert("block_kind", self.regularizer.kind);
        kv.insert("depth", self.regularizer.depth);
        kv.insert("kernel", self.regularizer.kernel);
        kv.insert("normalize_pixels", self.normalize_pixels);
        kv.insert("normalize_labels", self.normalize_labels);
        kv
    }

    /// Reads model keys from `kv`, defaulting missing ones. Keys outside
    /// `extra_known` and the model keys are rejected.
    pub fn from_kv(kv: &KeyValues, extra_known: &[&str]) -> Result<Self> {
        let known: Vec<&str> = KEYS.iter().chain(extra_known).copied().collect();
        kv.check_known(&known)?;
        let d = Self::default();
        let cfg = Self {
            encoder: EncoderConfig {
                input_height: kv.parsed("input_height")?.unwrap_or(d.encoder.input_height),
                input_width: kv.parsed("input_width")?.unwrap_or(d.encoder.input_width),
                downsample: kv.parsed("downsample")?.unwrap_or(d.encoder.downsample),
                embed_dim: kv.parsed("embed_dim")?.unwrap_or(d.encoder.embed_dim),
                mixing_layers: kv.parsed("mixing_layers")?.unwrap_or(d.encoder.mixing_layers),
                patch_size: kv.parsed("patch_size")?.unwrap_or(d.encoder.patch_size),
            },
            regularizer: RegularizerConfig {
                kind: kv.parsed("block_kind")?.unwrap_or(d.regularizer.kind),
                depth: kv.parsed("depth")?.unwrap_or(d.regularizer.depth),
                kernel: kv.parsed("kernel")?.unwrap_or(d.regularizer.kernel),
            },
            normalize_pixels: kv.parsed("normalize_pixels")?.unwrap_or(d.normalize_pixels),
            normalize_labels: kv.parsed("normalize_labels")?.unwrap_or(d.normalize_labels),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kv_round_trip() {
        let cfg = ModelConfig {
            regularizer: RegularizerConfig {
                kind: BlockKind::Depthwise,
                depth: 4,
                kernel: 5,
            },
            normalize_pixels: false,
            ..ModelConfig::default()
        };
        let back = ModelConfig::from_kv(&KeyValues::parse(&cfg.to_kv().to_text()).unwrap(), &[]).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn geometry_validation() {
        let mut e = EncoderConfig::default();
        assert!(e.validate().is_ok());
        e.input_height = 36;
        assert!(e.validate().is_err());
        e.input_height = 32;
        e.patch_size = 3;
        assert!(e.validate().is_err());
        let r = RegularizerConfig { kernel: 4, ..RegularizerConfig::default() };
        assert!(r.validate().is_err());
        assert!("DepthWise".parse::<BlockKind>().is_ok());
        assert!("conv".parse::<BlockKind>().is_err());
    }
}
