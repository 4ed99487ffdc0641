//! Checks every parameter gradient of the full pipeline (encoder,
//! correlation, regularization blocks, upsampling and loss) against
//! central finite differences in f64.
//!
//! ```text
//! cargo run --release -p lseg-core --example gradcheck
//! ```

use lseg_core::embeddings::{synth_vocab, LabelSet, SyntheticVocabulary};
use lseg_core::model::{loss_and_grads, BlockKind, EncoderConfig, ModelConfig, ModelParameters, RegularizerConfig};
use lseg_core::tensor_ops::{grad_check, DenseMap, Dims};

fn main() -> lseg_core::Result<()> {
    let table = synth_vocab(&SyntheticVocabulary::roots(["other", "cat", "sky"], 8, 0))?;
    let rows = table.embed_labels::<f64>(&LabelSet::parse("other,cat,sky")?)?;
    let image = DenseMap::from_fn(Dims::new(8, 8, 3), |y, x, c| ((y * 31 + x * 17 + c * 7) % 23) as f64 / 23.0);
    let targets: Vec<u8> = (0..64).map(|i| ((i / 5) % 3) as u8).collect();

    for kind in [BlockKind::Depthwise, BlockKind::Bottleneck] {
        let config = ModelConfig {
            encoder: EncoderConfig {
                input_height: 8,
                input_width: 8,
                embed_dim: 8,
                mixing_layers: 1,
                ..EncoderConfig::default()
            },
            regularizer: RegularizerConfig { kind, depth: 2, kernel: 3 },
            ..ModelConfig::default()
        };
        let params = ModelParameters::<f64>::init(config, 3)?;
        let values: Vec<_> = params.tensors().iter().map(|t| t.value.clone()).collect();
        let report = grad_check(
            |vals| {
                let mut p = params.clone();
                for (t, v) in p.tensors_mut().iter_mut().zip(vals) {
                    t.value = v.clone();
                }
                let r = loss_and_grads(&p, &image, &targets, &rows, 0.07, None)?;
                Ok((r.loss, r.grads))
            },
            &values,
            1e-6,
        )?;
        let (tensor, index) = report.worst;
        println!(
            "{kind:>10}: {} entries, max relative error {:.2e} (worst: {}[{index}])",
            report.entries_checked,
            report.max_rel_error,
            params.tensors()[tensor].name
        );
    }
    Ok(())
}
