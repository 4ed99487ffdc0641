//! Trains a small model on synthetic scenes, saves a checkpoint and reports
//! held-out metrics.
//!
//! ```text
//! cargo run --release -p lseg-core --example train -- [steps]
//! ```

use lseg_core::data::{embedding_classes, generate, SceneSpec};
use lseg_core::embeddings::low_rank_vocab;
use lseg_core::eval::{evaluate_samples, miou, pixacc};
use lseg_core::model::{load_checkpoint, save_checkpoint, EncoderConfig, ModelConfig, ModelParameters};
use lseg_core::training::{train_with_progress, TrainConfig};

fn main() -> lseg_core::Result<()> {
    let steps = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(200);
    let names: Vec<String> = ["cat", "grass", "sky"].iter().map(|s| s.to_string()).collect();
    let table = low_rank_vocab(["other", "cat", "grass", "sky"], 16, 4, 2)?;
    let (classes, background) = embedding_classes(&names, &table, 32, 4, 2)?;
    let mut spec = SceneSpec {
        height: 32,
        width: 32,
        classes,
        background,
        shapes_per_image: (1, 3),
        jitter: 0.0,
        seed: 10,
    };
    let train_set = generate(&spec, 48)?;
    spec.seed = 11;
    let eval_set = generate(&spec, 16)?;

    let config = ModelConfig {
        encoder: EncoderConfig {
            embed_dim: 16,
            ..EncoderConfig::default()
        },
        ..ModelConfig::default()
    };
    let cfg = TrainConfig {
        max_steps: steps,
        base_lr: 0.01,
        clip_norm: Some(1.0),
        ..TrainConfig::default()
    };
    let init = ModelParameters::<f32>::init(config, 0)?;
    let outcome = train_with_progress(init, &table, &train_set, &cfg, |r| {
        if r.step % 25 == 0 {
            println!("step {:>4}  lr {:.5}  loss {:.4}", r.step, r.lr, r.loss);
        }
    })?;

    let dir = tempfile::tempdir().map_err(|e| lseg_core::Error::io("tempdir", e))?;
    let path = dir.path().join("model.ckpt");
    save_checkpoint(&outcome.params, &path)?;
    let params = load_checkpoint(&path)?;

    let labels = &eval_set[0].label_set;
    let identity: Vec<usize> = (0..labels.len()).collect();
    let cm = evaluate_samples(&params, &eval_set, &table, labels, &identity)?;
    println!("held-out pixAcc {:.2}%  mIoU {:.2}%", 100.0 * pixacc(&cm)?, 100.0 * miou(&cm)?.mean);
    Ok(())
}
