use crate::data::{generate, SceneSpec};
use crate::embeddings::{synth_vocab, EmbeddingTable, SyntheticVocabulary};
use crate::error::{Error, Result};
use crate::eval::harness::evaluate_samples;
use crate::eval::metrics::{miou, pixacc};
use crate::model::{BlockKind, ModelConfig, ModelParameters, RegularizerConfig};
use crate::training::{train, TrainConfig};
use crate::util::derive_seed;

/// Shared recipe of an ablation: every run sees the same data, seed and
/// training settings; only the swept field changes.
#[derive(Debug, Clone)]
pub struct AblationSetup {
    pub scene: SceneSpec,
    pub vocabulary: SyntheticVocabulary,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub train_images: usize,
    pub eval_images: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub kind: BlockKind,
    pub depth: usize,
    pub embed_dim: usize,
    pub pixacc: f64,
    pub miou: f64,
    pub final_loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationTable {
    pub rows: Vec<AblationRow>,
}

impl AblationSetup {
    fn run(&self, model: ModelConfig, table: &EmbeddingTable) -> Result<(f64, f64, f64)> {
        let mut train_scene = self.scene.clone();
        train_scene.seed = derive_seed(self.seed, "ablation-train");
        let mut eval_scene = self.scene.clone();
        eval_scene.seed = derive_seed(self.seed, "ablation-eval");
        let train_set = generate(&train_scene, self.train_images)?;
        let eval_set = generate(&eval_scene, self.eval_images)?;
        let init = ModelParameters::<f32>::init(model, derive_seed(self.seed, "model"))?;
        let outcome = train(init, table, &train_set, &self.train)?;
        let labels = &eval_set[0].label_set;
        let identity: Vec<usize> = (0..labels.len()).collect();
        let cm = evaluate_samples(&outcome.params, &eval_set, table, labels, &identity)?;
        Ok((pixacc(&cm)?, miou(&cm)?.mean, outcome.final_loss().unwrap_or(f64::NAN)))
    }
}

/// Trains one model per (kind, depth) pair with everything else fixed.
pub fn ablation_depth(setup: &AblationSetup, kinds: &[BlockKind], depths: &[usize]) -> Result<AblationTable> {
    let table = synth_vocab(&setup.vocabulary)?;
    if table.dimension() != setup.model.encoder.embed_dim {
        return Err(Error::DimensionMismatch {
            expected: setup.model.encoder.embed_dim,
            found: table.dimension(),
        });
    }
    let mut rows = Vec::new();
    for &kind in kinds {
        for &depth in depths {
            let model = ModelConfig {
                regularizer: RegularizerConfig {
                    kind,
                    depth,
                    ..setup.model.regularizer
                },
                ..setup.model
            };
            let (pixacc, miou, final_loss) = setup.run(model, &table)?;
            rows.push(AblationRow {
                kind,
                depth,
                embed_dim: model.encoder.embed_dim,
                pixacc,
                miou,
                final_loss,
            });
        }
    }
    Ok(AblationTable { rows })
}

/// Sweeps the text/pixel embedding dimension; the vocabulary is regenerated
/// at each size and the encoder's output width follows it.
pub fn ablation_embed_dim(setup: &AblationSetup, dims: &[usize]) -> Result<AblationTable> {
    let mut rows = Vec::new();
    for &dim in dims {
        let vocabulary = SyntheticVocabulary {
            dimension: dim,
            ..setup.vocabulary.clone()
        };
        let table = synth_vocab(&vocabulary)?;
        let mut model = setup.model;
        model.encoder.embed_dim = dim;
        let (pixacc, miou, final_loss) = setup.run(model, &table)?;
        rows.push(AblationRow {
            kind: model.regularizer.kind,
            depth: model.regularizer.depth,
            embed_dim: dim,
            pixacc,
            miou,
            final_loss,
        });
    }
    Ok(AblationTable { rows })
}

impl AblationTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("block,depth,embed_dim,pixacc,miou,final_loss\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{:.6},{:.6},{:.6}\n",
                r.kind, r.depth, r.embed_dim, r.pixacc, r.miou, r.final_loss
            ));
        }
        out
    }

    pub fn get(&self, kind: BlockKind, depth: usize) -> Option<&AblationRow> {
        self.rows.iter().find(|r| r.kind == kind && r.depth == depth)
    }

    /// Depth down the side, one pixAcc/mIoU column pair per block kind (in
    /// percent).
    pub fn to_table(&self) -> String {
        let mut kinds: Vec<BlockKind> = Vec::new();
        let mut depths: Vec<(usize, usize)> = Vec::new();
        for r in &self.rows {
            if !kinds.contains(&r.kind) {
                kinds.push(r.kind);
            }
            if !depths.contains(&(r.depth, r.embed_dim)) {
                depths.push((r.depth, r.embed_dim));
            }
        }
        let mut out = format!("{:>6}{:>6}", "depth", "dim");
        for k in &kinds {
            out.push_str(&format!("{:>24}", format!("{k} pixAcc / mIoU")));
        }
        out.push('\n');
        for &(depth, dim) in &depths {
            out.push_str(&format!("{depth:>6}{dim:>6}"));
            for &k in &kinds {
                match self.rows.iter().find(|r| r.kind == k && r.depth == depth && r.embed_dim == dim) {
                    Some(r) => out.push_str(&format!(
                        "{:>24}",
                        format!("{:.2} / {:.2}", 100.0 * r.pixacc, 100.0 * r.miou)
                    )),
                    None => out.push_str(&format!("{:>24}", "-")),
                }
            }
            out.push('\n');
        }
        out
    }
}
