//! Label sets are chosen at inference time: reordering them relabels the
//! map, and appending a label leaves existing scores untouched.
//!
//! ```text
//! cargo run -p lseg-core --example predict
//! ```

use image::RgbImage;
use lseg_core::embeddings::{synth_vocab, LabelSet, SyntheticVocabulary};
use lseg_core::model::{
    image_to_dense, predict_padded, BlockKind, EncoderConfig, ModelConfig, ModelParameters, RegularizerConfig,
};

fn main() -> lseg_core::Result<()> {
    let table = synth_vocab(&SyntheticVocabulary::roots(["other", "cat", "grass", "sky", "zebra"], 16, 4))?;
    let params = ModelParameters::<f32>::init(
        ModelConfig {
            encoder: EncoderConfig {
                embed_dim: 16,
                ..EncoderConfig::default()
            },
            regularizer: RegularizerConfig {
                kind: BlockKind::Depthwise,
                depth: 2,
                kernel: 3,
            },
            ..ModelConfig::default()
        },
        1,
    )?;
    // Any size works; the input is padded to the encoder's multiple.
    let image = RgbImage::from_fn(45, 30, |x, y| image::Rgb([(x * 5) as u8, (y * 8) as u8, ((x + y) * 3) as u8]));
    let dense = image_to_dense::<f32>(&image);

    let forward = LabelSet::parse("other,cat,grass,sky")?;
    let reversed = LabelSet::parse("sky,grass,cat,other")?;
    let a = predict_padded(&params, &dense, &forward, &table)?;
    let b = predict_padded(&params, &dense, &reversed, &table)?;
    let agree = a.label_map.iter().zip(&b.label_map).filter(|(x, y)| 3 - **x == **y).count();
    println!("{}x{} map; reversed labels give the mirrored map at {agree}/{} pixels", a.width, a.height, a.label_map.len());

    let extended = predict_padded(&params, &dense, &forward.extended("zebra")?, &table)?;
    let unchanged = (0..forward.len()).all(|k| {
        (0..a.height).all(|y| (0..a.width).all(|x| a.scores.get(y, x, k) == extended.scores.get(y, x, k)))
    });
    println!("appending `zebra` keeps existing scores: {unchanged}");

    let share = |k: u8| a.label_map.iter().filter(|&&v| v == k).count() as f64 / a.label_map.len() as f64;
    for (k, label) in forward.iter().enumerate() {
        println!("{label:>6}: {:5.1}% of pixels", 100.0 * share(k as u8));
    }
    Ok(())
}
