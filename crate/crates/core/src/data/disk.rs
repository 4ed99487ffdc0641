//! On-disk datasets: a directory with `manifest.txt`, RGB image PNGs and
//! single-channel target PNGs.
//!
//! The manifest's first line is the comma-separated label list (order =
//! index); each further line is `image_path,target_path`, relative to the
//! directory.

use std::path::{Path, PathBuf};

use image::{GrayImage, RgbImage};

use crate::data::scene::{TrainSample, IGNORE_INDEX};
use crate::embeddings::LabelSet;
use crate::error::{Error, Result};

pub const MANIFEST: &str = "manifest.txt";

/// Writes `samples` under `dir`. All samples must share one label set.
pub fn save_dataset(samples: &[TrainSample], dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    let first = samples
        .first()
        .ok_or_else(|| Error::Config("cannot save an empty dataset".into()))?;
    let labels = &first.label_set;
    if labels.iter().any(|l| l.contains([',', '\n'])) {
        return Err(Error::LabelSet("labels written to a manifest cannot contain commas".into()));
    }
    if samples.iter().any(|s| &s.label_set != labels) {
        return Err(Error::LabelSet("all samples of a saved dataset must share one label set".into()));
    }
    for sub in ["images", "targets"] {
        let p = dir.join(sub);
        std::fs::create_dir_all(&p).map_err(|e| Error::io(&p, e))?;
    }
    let mut manifest = format!("{labels}\n");
    for (i, s) in samples.iter().enumerate() {
        s.validate()?;
        let image_rel = format!("images/{i:05}.png");
        let target_rel = format!("targets/{i:05}.png");
        let image_path = dir.join(&image_rel);
        s.image.save(&image_path).map_err(|source| Error::Image {
            path: image_path.clone(),
            source,
        })?;
        let target = GrayImage::from_raw(s.width() as u32, s.height() as u32, s.target.clone())
            .expect("validated target length");
        let target_path = dir.join(&target_rel);
        target.save(&target_path).map_err(|source| Error::Image {
            path: target_path.clone(),
            source,
        })?;
        manifest.push_str(&format!("{image_rel},{target_rel}\n"));
    }
    let p = dir.join(MANIFEST);
    std::fs::write(&p, manifest).map_err(|e| Error::io(&p, e))
}

fn read_manifest(dir: &Path) -> Result<(LabelSet, Vec<(PathBuf, PathBuf)>)> {
    let path = dir.join(MANIFEST);
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| Error::Validation {
        path: path.clone(),
        reason: "manifest is empty".into(),
    })?;
    let labels = LabelSet::parse(header).map_err(|e| Error::Validation {
        path: path.clone(),
        reason: e.to_string(),
    })?;
    let pairs = lines
        .map(|line| {
            let (img, tgt) = line.split_once(',').ok_or_else(|| Error::Validation {
                path: path.clone(),
                reason: format!("expected `image,target` but found `{line}`"),
            })?;
            Ok((dir.join(img.trim()), dir.join(tgt.trim())))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((labels, pairs))
}

fn read_image(path: &Path) -> Result<image::DynamicImage> {
    image::open(path).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })
}

/// Loads a dataset with the label order given by its manifest.
pub fn load_dataset(dir: impl AsRef<Path>) -> Result<Vec<TrainSample>> {
    let dir = dir.as_ref();
    let (labels, pairs) = read_manifest(dir)?;
    load_pairs(&labels, &pairs)
}

/// Loads a dataset whose targets are re-indexed to `expected`. The manifest
/// must name the same labels; if their order differs the targets are
/// remapped, or, with `strict`, a validation error is returned.
pub fn load_dataset_as(dir: impl AsRef<Path>, expected: &LabelSet, strict: bool) -> Result<Vec<TrainSample>> {
    let dir = dir.as_ref();
    let (labels, pairs) = read_manifest(dir)?;
    let manifest = dir.join(MANIFEST);
    if labels.labels() == expected.labels() {
        return load_pairs(expected, &pairs);
    }
    let mut remap = Vec::with_capacity(labels.len());
    for l in labels.iter() {
        let idx = expected.index_of(l).ok_or_else(|| Error::Validation {
            path: manifest.clone(),
            reason: format!("label `{l}` is not in the expected label set"),
        })?;
        remap.push(idx as u8);
    }
    if labels.len() != expected.len() {
        return Err(Error::Validation {
            path: manifest,
            reason: format!("manifest has {} labels, expected {}", labels.len(), expected.len()),
        });
    }
    if strict {
        return Err(Error::Validation {
            path: manifest,
            reason: format!("label order `{labels}` differs from expected `{expected}`"),
        });
    }
    let samples = load_pairs(&labels, &pairs)?;
    samples
        .into_iter()
        .map(|s| {
            let target = s
                .target
                .iter()
                .map(|&y| if y == IGNORE_INDEX { y } else { remap[y as usize] })
                .collect();
            TrainSample::new(s.image, target, expected.clone())
        })
        .collect()
}

fn load_pairs(labels: &LabelSet, pairs: &[(PathBuf, PathBuf)]) -> Result<Vec<TrainSample>> {
    pairs
        .iter()
        .map(|(img_path, tgt_path)| {
            let image: RgbImage = read_image(img_path)?.to_rgb8();
            let target = read_image(tgt_path)?;
            if target.color() != image::ColorType::L8 {
                return Err(Error::Validation {
                    path: tgt_path.clone(),
                    reason: format!("target must be 8-bit single channel, found {:?}", target.color()),
                });
            }
            let target = target.to_luma8();
            if target.dimensions() != image.dimensions() {
                return Err(Error::Validation {
                    path: tgt_path.clone(),
                    reason: format!(
                        "target is {:?} but image is {:?}",
                        target.dimensions(),
                        image.dimensions()
                    ),
                });
            }
            let target = target.into_raw();
            if let Some(&bad) = target.iter().find(|&&y| y != IGNORE_INDEX && y as usize >= labels.len()) {
                return Err(Error::Validation {
                    path: tgt_path.clone(),
                    reason: format!("label index {bad} out of range for {} labels", labels.len()),
                });
            }
            TrainSample::new(image, target, labels.clone())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::scene::{generate, Appearance, Geometry, SceneSpec, ShapeClass};

    fn spec() -> SceneSpec {
        SceneSpec {
            height: 16,
            width: 24,
            classes: ["cat", "grass"]
                .iter()
                .enumerate()
                .map(|(i, n)| ShapeClass {
                    concept: n.to_string(),
                    geometry: Geometry::Rect { min_side: 3, max_side: 8 },
                    appearance: Appearance::Flat([50 * i as u8, 100, 200]),
                })
                .collect(),
            background: Appearance::Stripes { a: [1, 2, 3], b: [9, 9, 9], period: 3 },
            shapes_per_image: (1, 3),
            jitter: 0.0,
            seed: 5,
        }
    }

    #[test]
    fn save_then_load_is_lossless() {
        let dir = tempfile::tempdir().unwrap();
        let mut samples = generate(&spec(), 4).unwrap();
        samples[1].target[7] = IGNORE_INDEX;
        save_dataset(&samples, dir.path()).unwrap();
        assert_eq!(load_dataset(dir.path()).unwrap(), samples);
    }

    #[test]
    fn out_of_range_target_names_the_file() {
        let dir = tempfile::tempdir().unwrap();
        let samples = generate(&spec(), 2).unwrap();
        save_dataset(&samples, dir.path()).unwrap();
        let bad = dir.path().join("targets/00001.png");
        let mut t = image::open(&bad).unwrap().to_luma8();
        t.put_pixel(0, 0, image::Luma([3]));
        t.save(&bad).unwrap();
        let err = load_dataset(dir.path()).unwrap_err();
        assert!(matches!(&err, Error::Validation { path, .. } if path == &bad), "{err}");
        assert!(err.to_string().contains("00001.png"));
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        save_dataset(&generate(&spec(), 1).unwrap(), dir.path()).unwrap();
        let p = dir.path().join("targets/00000.png");
        GrayImage::new(5, 5).save(&p).unwrap();
        assert!(matches!(load_dataset(dir.path()), Err(Error::Validation { .. })));
    }

    #[test]
    fn permuted_manifest_is_remapped_or_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let samples = generate(&spec(), 3).unwrap();
        save_dataset(&samples, dir.path()).unwrap();
        // Rewrite the manifest and targets as if authored with a different order.
        let perm = ["grass", "other", "cat"];
        let manifest_path = dir.path().join(MANIFEST);
        let text = std::fs::read_to_string(&manifest_path).unwrap();
        let body: Vec<&str> = text.lines().skip(1).collect();
        std::fs::write(&manifest_path, format!("{}\n{}\n", perm.join(","), body.join("\n"))).unwrap();
        let original = samples[0].label_set.clone();
        for i in 0..3 {
            let p = dir.path().join(format!("targets/{i:05}.png"));
            let mut t = image::open(&p).unwrap().to_luma8();
            for px in t.pixels_mut() {
                let name = original.get(px.0[0] as usize).unwrap();
                px.0[0] = perm.iter().position(|&l| l == name).unwrap() as u8;
            }
            t.save(&p).unwrap();
        }
        let loaded = load_dataset_as(dir.path(), &original, false).unwrap();
        assert_eq!(loaded, samples);
        assert!(matches!(load_dataset_as(dir.path(), &original, true), Err(Error::Validation { .. })));
        let unrelated = LabelSet::parse("other,cat,dog").unwrap();
        assert!(load_dataset_as(dir.path(), &unrelated, false).is_err());
    }
}
