//! Regularizer-depth ablation: one model per block kind and depth, all
//! else fixed. Depth 0 applies no block, so both kinds share that row.
//!
//! ```text
//! cargo run --release -p lseg-core --example ablation -- [steps]
//! ```

use lseg_core::data::{embedding_classes, SceneSpec};
use lseg_core::embeddings::{low_rank_vocab, SyntheticVocabulary};
use lseg_core::eval::{ablation_depth, AblationSetup};
use lseg_core::model::{BlockKind, EncoderConfig, ModelConfig};
use lseg_core::training::TrainConfig;

fn main() -> lseg_core::Result<()> {
    let steps = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(120);
    let words = ["other", "cat", "grass", "sky", "road"];
    let names: Vec<String> = words[1..].iter().map(|s| s.to_string()).collect();
    let textures = low_rank_vocab(words, 16, 6, 5)?;
    let (classes, background) = embedding_classes(&names, &textures, 32, 4, 5)?;
    let setup = AblationSetup {
        scene: SceneSpec {
            height: 32,
            width: 32,
            classes,
            background,
            shapes_per_image: (1, 3),
            jitter: 0.0,
            seed: 0,
        },
        vocabulary: SyntheticVocabulary::roots(words, 16, 5),
        model: ModelConfig {
            encoder: EncoderConfig {
                embed_dim: 16,
                ..EncoderConfig::default()
            },
            ..ModelConfig::default()
        },
        train: TrainConfig {
            max_steps: steps,
            base_lr: 0.01,
            clip_norm: Some(1.0),
            ..TrainConfig::default()
        },
        train_images: 48,
        eval_images: 24,
        seed: 0,
    };
    let table = ablation_depth(&setup, &[BlockKind::Depthwise, BlockKind::Bottleneck], &[0, 1, 2, 4])?;
    print!("{}", table.to_table());
    Ok(())
}
