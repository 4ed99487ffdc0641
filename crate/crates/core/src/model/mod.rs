//! Dense encoder, word-pixel correlation, label-equivariant regularization
//! head and prediction.

mod checkpoint;
mod config;
mod forward;
mod params;

pub use checkpoint::{
    checkpoint_digest, decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint,
    CHECKPOINT_MAGIC,
};
pub use config::{BlockKind, EncoderConfig, ModelConfig, RegularizerConfig};
pub use forward::{
    argmax_labels, correlate, encode_image, forward, image_to_dense, loss_and_grads,
    predict, predict_padded, predict_with_rows, prepare_label_rows, regularize, ForwardPass,
    LossAndGrads, SegmentationOutput, MAX_LABELS,
};
pub use params::{ModelParameters, NamedTensor};

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::embeddings::{synth_vocab, LabelSet, SyntheticVocabulary};
    use crate::tensor_ops::{grad_check, relu, DenseMap, Dims};

    fn random_map(dims: Dims, seed: u64) -> DenseMap<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DenseMap::from_fn(dims, |_, _, _| rng.random_range(0.0..1.0))
    }

    fn small_config(kind: BlockKind, depth: usize, dim: usize) -> ModelConfig {
        ModelConfig {
            encoder: EncoderConfig {
                input_height: 16,
                input_width: 16,
                embed_dim: dim,
                mixing_layers: 1,
                ..EncoderConfig::default()
            },
            regularizer: RegularizerConfig { kind, depth, kernel: 3 },
            ..ModelConfig::default()
        }
    }

    #[test]
    fn encoder_output_shape() {
        let params = ModelParameters::<f32>::init(ModelConfig::default(), 0).unwrap();
        let image = random_map(Dims::new(32, 32, 3), 1).cast::<f32>();
        let emb = encode_image(&params, &image).unwrap();
        assert_eq!(emb.dims(), Dims::new(16, 16, 64));
        assert_eq!(encode_image(&params, &image.clone()).unwrap(), emb);
        let wrong = random_map(Dims::new(30, 32, 3), 1).cast::<f32>();
        assert!(encode_image(&params, &wrong).is_err());
    }

    #[test]
    fn correlate_examples() {
        let i = DenseMap::from_vec(Dims::new(1, 1, 2), vec![1.0f64, 2.0]).unwrap();
        let t = DenseMap::from_vec(Dims::new(1, 2, 2), vec![1.0, 0.0, 0.0, 3.0]).unwrap();
        assert_eq!(correlate(&i, &t).unwrap().values(), &[1.0, 6.0]);

        // Orthonormal rows; pixel equal to row 2 gives a one-hot response.
        let eye = DenseMap::from_fn(Dims::new(1, 3, 3), |_, k, c| if k == c { 1.0f64 } else { 0.0 });
        let px = DenseMap::from_vec(Dims::new(1, 1, 3), vec![0.0, 0.0, 1.0]).unwrap();
        assert_eq!(correlate(&px, &eye).unwrap().values(), &[0.0, 0.0, 1.0]);

        let bad = DenseMap::zeros(Dims::new(1, 2, 3));
        assert!(matches!(correlate(&i, &bad), Err(crate::Error::DimensionMismatch { .. })));
    }

    #[test]
    fn correlate_commutes_with_label_permutation() {
        let i = random_map(Dims::new(3, 3, 4), 2);
        let t = random_map(Dims::new(1, 3, 4), 3);
        let perm = [2, 0, 1];
        let tp = DenseMap::from_fn(Dims::new(1, 3, 4), |_, k, c| t.get(0, perm[k], c));
        let f = correlate(&i, &t).unwrap();
        assert_eq!(correlate(&i, &tp).unwrap(), f.permute_channels(&perm).unwrap());
    }

    #[test]
    fn depth_zero_regularizer_is_identity() {
        let params = ModelParameters::<f32>::init(small_config(BlockKind::Bottleneck, 0, 8), 0).unwrap();
        let f = random_map(Dims::new(4, 4, 3), 4).cast::<f32>();
        assert_eq!(regularize(&params, &f).unwrap(), f);
    }

    #[test]
    fn identity_depthwise_block_is_relu() {
        let mut params = ModelParameters::<f64>::init(small_config(BlockKind::Depthwise, 1, 8), 0).unwrap();
        *params.get_mut("head.block0.kernel").unwrap() =
            DenseMap::from_fn(Dims::new(3, 3, 1), |y, x, _| if (y, x) == (1, 1) { 1.0 } else { 0.0 });
        *params.get_mut("head.block0.bias").unwrap() = DenseMap::zeros(Dims::new(1, 1, 1));
        let f = random_map(Dims::new(4, 5, 3), 5).map(|v| v - 0.5);
        assert_eq!(regularize(&params, &f).unwrap(), relu(&f));
    }

    #[test]
    fn regularizer_is_label_equivariant() {
        for kind in [BlockKind::Depthwise, BlockKind::Bottleneck] {
            let params = ModelParameters::<f32>::init(small_config(kind, 2, 8), 6).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(7);
            for _ in 0..20 {
                let f = DenseMap::from_fn(Dims::new(6, 6, 5), |_, _, _| rng.random_range(-1.0f32..1.0));
                let mut perm: Vec<usize> = (0..5).collect();
                for i in (1..5).rev() {
                    perm.swap(i, rng.random_range(0..=i));
                }
                let a = regularize(&params, &f.permute_channels(&perm).unwrap()).unwrap();
                let b = regularize(&params, &f).unwrap().permute_channels(&perm).unwrap();
                for (x, y) in a.values().iter().zip(b.values()) {
                    assert!((x - y).abs() <= 1e-6);
                }
            }
        }
    }

    fn table() -> crate::embeddings::EmbeddingTable {
        synth_vocab(&SyntheticVocabulary::roots(["other", "cat", "grass", "sky", "zebra"], 8, 1)).unwrap()
    }

    #[test]
    fn single_label_predicts_zeros_everywhere() {
        let params = ModelParameters::<f32>::init(small_config(BlockKind::Bottleneck, 2, 8), 1).unwrap();
        let image = random_map(Dims::new(16, 16, 3), 8).cast::<f32>();
        let out = predict(&params, &image, &LabelSet::parse("other").unwrap(), &table()).unwrap();
        assert_eq!(out.label_map, vec![0u8; 256]);
        assert_eq!(out.scores.dims(), Dims::new(16, 16, 1));
    }

    #[test]
    fn swapped_labels_swap_the_map() {
        let params = ModelParameters::<f32>::init(small_config(BlockKind::Bottleneck, 2, 8), 2).unwrap();
        let image = random_map(Dims::new(16, 16, 3), 9).cast::<f32>();
        let t = table();
        let a = predict(&params, &image, &LabelSet::parse("cat,grass").unwrap(), &t).unwrap();
        let b = predict(&params, &image, &LabelSet::parse("grass,cat").unwrap(), &t).unwrap();
        for (i, (x, y)) in a.label_map.iter().zip(&b.label_map).enumerate() {
            let px = a.scores.pixel(i / 16, i % 16);
            if px[0] != px[1] {
                assert_eq!(*x, 1 - *y);
            }
        }
    }

    #[test]
    fn unknown_label_is_rejected() {
        let params = ModelParameters::<f32>::init(small_config(BlockKind::Depthwise, 1, 8), 2).unwrap();
        let image = random_map(Dims::new(16, 16, 3), 9).cast::<f32>();
        let err = predict(&params, &image, &LabelSet::parse("cat,dog").unwrap(), &table()).unwrap_err();
        assert!(matches!(err, crate::Error::UnknownLabel(l) if l == "dog"));
    }

    #[test]
    fn appended_label_keeps_existing_scores() {
        for depth in [0, 2] {
            let params = ModelParameters::<f32>::init(small_config(BlockKind::Depthwise, depth, 8), 3).unwrap();
            let image = random_map(Dims::new(16, 16, 3), 10).cast::<f32>();
            let t = table();
            let base = LabelSet::parse("other,cat,grass").unwrap();
            let a = predict(&params, &image, &base, &t).unwrap();
            let b = predict(&params, &image, &base.extended("zebra").unwrap(), &t).unwrap();
            for y in 0..16 {
                for x in 0..16 {
                    for k in 0..3 {
                        assert_eq!(a.scores.get(y, x, k), b.scores.get(y, x, k));
                    }
                    // Pixels won by a margin above the new label's score keep their label.
                    let won = a.label_at(y, x) as usize;
                    let new = b.scores.get(y, x, 3);
                    if a.scores.get(y, x, won) > new {
                        assert_eq!(b.label_at(y, x) as usize, won);
                    }
                }
            }
        }
    }

    #[test]
    fn padded_prediction_matches_on_aligned_images() {
        let params = ModelParameters::<f32>::init(small_config(BlockKind::Bottleneck, 1, 8), 4).unwrap();
        let labels = LabelSet::parse("other,sky").unwrap();
        let image = random_map(Dims::new(16, 16, 3), 11).cast::<f32>();
        let a = predict(&params, &image, &labels, &table()).unwrap();
        let b = predict_padded(&params, &image, &labels, &table()).unwrap();
        assert_eq!(a, b);
        let odd = random_map(Dims::new(13, 10, 3), 12).cast::<f32>();
        let c = predict_padded(&params, &odd, &labels, &table()).unwrap();
        assert_eq!((c.height, c.width, c.label_map.len()), (13, 10, 130));
    }

    #[test]
    fn encoder_gradients_match_finite_differences() {
        let cfg = ModelConfig {
            encoder: EncoderConfig {
                input_height: 8,
                input_width: 8,
                embed_dim: 8,
                mixing_layers: 1,
                ..EncoderConfig::default()
            },
            regularizer: RegularizerConfig::none(),
            ..ModelConfig::default()
        };
        let params = ModelParameters::<f64>::init(cfg, 5).unwrap();
        let image = random_map(Dims::new(8, 8, 3), 13);
        let rows = table().embed_labels::<f64>(&LabelSet::parse("other,cat,sky").unwrap()).unwrap();
        let targets: Vec<u8> = (0..64).map(|i| (i % 3) as u8).collect();
        let values: Vec<_> = params.tensors().iter().map(|t| t.value.clone()).collect();
        let f = |vals: &[DenseMap<f64>]| {
            let mut p = params.clone();
            for (t, v) in p.tensors_mut().iter_mut().zip(vals) {
                t.value = v.clone();
            }
            let r = loss_and_grads(&p, &image, &targets, &rows, 0.07, None)?;
            Ok((r.loss, r.grads))
        };
        let report = grad_check(f, &values, 1e-5).unwrap();
        assert!(report.max_rel_error < 1e-4, "{report:?}");
    }
}
