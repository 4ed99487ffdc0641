use std::path::Path;

use crate::error::{Error, Result};
use crate::kv::KeyValues;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MomentumKind {
    /// `v <- m v + g; p <- p - lr v`
    Classical,
    /// `v <- m v + g; p <- p - lr (g + m v)`
    Nesterov,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub base_lr: f64,
    pub momentum: f64,
    pub poly_power: f64,
    pub temperature: f64,
    pub max_steps: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub ignore_index: Option<u8>,
    pub nesterov: bool,
    /// Rescale the batch gradient to at most this global L2 norm.
    pub clip_norm: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            base_lr: 0.004,
            momentum: 0.9,
            poly_power: 0.9,
            temperature: 0.07,
            max_steps: 240,
            batch_size: 6,
            seed: 0,
            ignore_index: Some(crate::data::IGNORE_INDEX),
            nesterov: false,
            clip_norm: None,
        }
    }
}

const KEYS: &[&str] = &[
    "base_lr",
    "momentum",
    "poly_power",
    "temperature",
    "max_steps",
    "batch_size",
    "seed",
    "ignore_index",
    "nesterov",
    "clip_norm",
];

impl TrainConfig {
    /// Every key [`Self::from_kv`] understands.
    pub const KEYS: &'static [&'static str] = KEYS;

    pub fn validate(&self) -> Result<()> {
        if !(self.temperature > 0.0) {
            return Err(Error::Config(format!("temperature must be > 0, got {}", self.temperature)));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config(format!("momentum must be in [0, 1), got {}", self.momentum)));
        }
        if !(self.base_lr > 0.0) {
            return Err(Error::Config(format!("base_lr must be > 0, got {}", self.base_lr)));
        }
        if !(self.poly_power >= 0.0) {
            return Err(Error::Config("poly_power must be non-negative".into()));
        }
        if let Some(c) = self.clip_norm {
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::Config(format!("clip_norm must be positive, got {c}")));
            }
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        Ok(())
    }

    pub fn momentum_kind(&self) -> MomentumKind {
        if self.nesterov {
            MomentumKind::Nesterov
        } else {
            MomentumKind::Classical
        }
    }

    pub fn to_kv(&self) -> KeyValues {
        let mut kv = KeyValues::default();
        kv.insert("base_lr", self.base_lr);
        kv.insert("momentum", self.momentum);
        kv.insert("poly_power", self.poly_power);
        kv.insert("temperature", self.temperature);
        kv.insert("max_steps", self.max_steps);
        kv.insert("batch_size", self.batch_size);
        kv.insert("seed", self.seed);
        kv.insert(
            "ignore_index",
            self.ignore_index.map_or("none".to_string(), |i| i.to_string()),
        );
        kv.insert("nesterov", self.nesterov);
        kv.insert("clip_norm", self.clip_norm.map_or("none".to_string(), |c| c.to_string()));
        kv
    }

    /// Reads training keys, defaulting missing ones. `extra_known` keys are
    /// tolerated (e.g. model keys sharing the same file).
    pub fn from_kv(kv: &KeyValues, extra_known: &[&str]) -> Result<Self> {
        let known: Vec<&str> = KEYS.iter().chain(extra_known).copied().collect();
        kv.check_known(&known)?;
        let d = Self::default();
        let ignore_index = match kv.get("ignore_index") {
            None => d.ignore_index,
            Some("none") => None,
            Some(_) => Some(kv.required::<u8>("ignore_index")?),
        };
        let clip_norm = match kv.get("clip_norm") {
            None => d.clip_norm,
            Some("none") => None,
            Some(_) => Some(kv.required::<f64>("clip_norm")?),
        };
        let cfg = Self {
            base_lr: kv.parsed("base_lr")?.unwrap_or(d.base_lr),
            momentum: kv.parsed("momentum")?.unwrap_or(d.momentum),
            poly_power: kv.parsed("poly_power")?.unwrap_or(d.poly_power),
            temperature: kv.parsed("temperature")?.unwrap_or(d.temperature),
            max_steps: kv.parsed("max_steps")?.unwrap_or(d.max_steps),
            batch_size: kv.parsed("batch_size")?.unwrap_or(d.batch_size),
            seed: kv.parsed("seed")?.unwrap_or(d.seed),
            ignore_index,
            nesterov: kv.parsed("nesterov")?.unwrap_or(d.nesterov),
            clip_norm,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_kv(&KeyValues::parse(&text)?, &[])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_the_recipe() {
        let c = TrainConfig::default();
        assert_eq!((c.momentum, c.poly_power, c.temperature), (0.9, 0.9, 0.07));
        assert!(c.validate().is_ok());
    }

    #[test]
    fn kv_round_trip_and_validation() {
        let c = TrainConfig {
            ignore_index: None,
            max_steps: 17,
            nesterov: true,
            ..TrainConfig::default()
        };
        let back = TrainConfig::from_kv(&KeyValues::parse(&c.to_kv().to_text()).unwrap(), &[]).unwrap();
        assert_eq!(back, c);
        for bad in ["temperature = 0", "momentum = 1", "base_lr = -1", "batch_size = 0", "lr = 3"] {
            assert!(TrainConfig::from_kv(&KeyValues::parse(bad).unwrap(), &[]).is_err(), "{bad}");
        }
    }
}
