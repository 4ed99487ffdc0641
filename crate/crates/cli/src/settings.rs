//! One `key = value` file configures every command: model keys, training
//! keys and the synthetic scene/vocabulary keys below all live side by side.

use std::path::Path;

use lseg_core::data::{embedding_classes, SceneSpec};
use lseg_core::embeddings::{low_rank_vocab, EmbeddingTable, OTHER_LABEL};
use lseg_core::kv::KeyValues;
use lseg_core::model::ModelConfig;
use lseg_core::training::TrainConfig;
use lseg_core::util::derive_seed;
use lseg_core::{Error, Result};

pub const SCENE_KEYS: &[&str] = &[
    "classes",
    "count",
    "shapes_min",
    "shapes_max",
    "jitter",
    "vocab_seed",
    "vocab_rank",
    "synonyms",
];

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSettings {
    pub classes: Vec<String>,
    pub count: usize,
    pub shapes: (usize, usize),
    pub jitter: f64,
    pub vocab_seed: u64,
    pub vocab_rank: usize,
    /// `(alias, base)` pairs added to the vocabulary with the base's vector.
    pub synonyms: Vec<(String, String)>,
}

impl Default for SceneSettings {
    fn default() -> Self {
        Self {
            classes: ["cat", "grass", "sky", "road"].iter().map(|s| s.to_string()).collect(),
            count: 48,
            shapes: (1, 3),
            jitter: 0.0,
            vocab_seed: 0,
            vocab_rank: 8,
            synonyms: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub scene: SceneSettings,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            scene: SceneSettings::default(),
        }
    }
}

fn list(value: &str) -> Vec<String> {
    value
        .split(',')
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect()
}

impl Settings {
    pub fn from_kv(kv: &KeyValues) -> Result<Self> {
        let model_extra: Vec<&str> = TrainConfig::KEYS.iter().chain(SCENE_KEYS).copied().collect();
        let train_extra: Vec<&str> = ModelConfig::KEYS.iter().chain(SCENE_KEYS).copied().collect();
        let model = ModelConfig::from_kv(kv, &model_extra)?;
        let train = TrainConfig::from_kv(kv, &train_extra)?;
        let d = SceneSettings::default();
        let synonyms = match kv.get("synonyms") {
            None => Vec::new(),
            Some(v) => list(v)
                .into_iter()
                .map(|pair| {
                    pair.split_once(':')
                        .map(|(a, b)| (a.trim().to_string(), b.trim().to_string()))
                        .ok_or_else(|| Error::Config(format!("synonym `{pair}` is not `alias:base`")))
                })
                .collect::<Result<_>>()?,
        };
        let scene = SceneSettings {
            classes: kv.get("classes").map(list).unwrap_or(d.classes),
            count: kv.parsed("count")?.unwrap_or(d.count),
            shapes: (
                kv.parsed("shapes_min")?.unwrap_or(d.shapes.0),
                kv.parsed("shapes_max")?.unwrap_or(d.shapes.1),
            ),
            jitter: kv.parsed("jitter")?.unwrap_or(d.jitter),
            vocab_seed: kv.parsed("vocab_seed")?.unwrap_or(d.vocab_seed),
            vocab_rank: kv.parsed("vocab_rank")?.unwrap_or(d.vocab_rank),
            synonyms,
        };
        if scene.classes.is_empty() {
            return Err(Error::Config("`classes` must name at least one class".into()));
        }
        Ok(Self { model, train, scene })
    }

    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|source| Error::Io {
                    path: p.to_path_buf(),
                    source,
                })?;
                Self::from_kv(&KeyValues::parse(&text)?)
            }
        }
    }

    /// "other", every class, then any extra words.
    pub fn vocabulary_words(&self, extra: &[String]) -> Vec<String> {
        let mut words = vec![OTHER_LABEL.to_string()];
        for w in self.scene.classes.iter().chain(extra) {
            if !words.contains(w) {
                words.push(w.clone());
            }
        }
        words
    }

    /// The vocabulary: a low-rank synthetic table over
    /// [`Self::vocabulary_words`], plus synonyms sharing their base vector.
    pub fn vocabulary(&self, extra: &[String]) -> Result<EmbeddingTable> {
        let words = self.vocabulary_words(extra);
        let dim = self.model.encoder.embed_dim;
        let rank = self.scene.vocab_rank.min(dim);
        let mut table = low_rank_vocab(&words, dim, rank, derive_seed(self.scene.vocab_seed, "vocabulary"))?;
        for (alias, base) in &self.scene.synonyms {
            let v = table
                .get(base)
                .ok_or_else(|| Error::UnknownLabel(base.clone()))?
                .to_vec();
            if table.contains(alias) {
                return Err(Error::Config(format!("synonym `{alias}` is already a word")));
            }
            table.insert(alias.clone(), v)?;
        }
        Ok(table)
    }

    /// Scene recipe for images of the configured input size. Textures come
    /// from `table`, so data and vocabulary stay consistent.
    pub fn scene(&self, table: &EmbeddingTable, seed: u64) -> Result<SceneSpec> {
        let e = &self.model.encoder;
        let side = e.input_height.min(e.input_width);
        let (classes, background) = embedding_classes(
            &self.scene.classes,
            table,
            side,
            e.patch_size,
            derive_seed(self.scene.vocab_seed, "appearance"),
        )?;
        Ok(SceneSpec {
            height: e.input_height,
            width: e.input_width,
            classes,
            background,
            shapes_per_image: self.scene.shapes,
            jitter: self.scene.jitter,
            seed,
        })
    }
}
