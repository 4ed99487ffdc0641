use crate::error::{Error, Result};

/// Pixel counts indexed by (ground truth, prediction).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> Self {
        Self {
            classes,
            counts: vec![0; classes * classes],
        }
    }

    pub fn num_classes(&self) -> usize {
        self.classes
    }

    pub fn get(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth * self.classes + predicted]
    }

    /// Number of counted pixels.
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Adds one pixel.
    pub fn record(&mut self, truth: usize, predicted: usize) -> Result<()> {
        if truth >= self.classes || predicted >= self.classes {
            return Err(Error::shape(format!(
                "pair ({truth}, {predicted}) out of range for {} classes",
                self.classes
            )));
        }
        self.counts[truth * self.classes + predicted] += 1;
        Ok(())
    }

    /// Adds a whole map. Pixels whose ground truth equals `ignore` are skipped.
    pub fn accumulate(&mut self, truth: &[u8], predicted: &[u8], ignore: Option<u8>) -> Result<()> {
        if truth.len() != predicted.len() {
            return Err(Error::shape(format!(
                "{} ground-truth pixels vs {} predicted",
                truth.len(),
                predicted.len()
            )));
        }
        for (&t, &p) in truth.iter().zip(predicted) {
            if Some(t) == ignore {
                continue;
            }
            self.record(t as usize, p as usize)?;
        }
        Ok(())
    }

    pub fn from_maps(classes: usize, truth: &[u8], predicted: &[u8], ignore: Option<u8>) -> Result<Self> {
        let mut cm = Self::new(classes);
        cm.accumulate(truth, predicted, ignore)?;
        Ok(cm)
    }

    /// Element-wise sum; the operation is associative, so partial matrices
    /// from parallel workers can be reduced in any grouping.
    pub fn merge(&mut self, other: &Self) -> Result<()> {
        if other.classes != self.classes {
            return Err(Error::shape(format!(
                "cannot merge {}-class and {}-class matrices",
                self.classes, other.classes
            )));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        Ok(())
    }

    /// Collapses to background (0) / foreground (1).
    pub fn binarize(&self, foreground: &[usize]) -> Result<Self> {
        let mut is_fg = vec![false; self.classes];
        for &k in foreground {
            *is_fg.get_mut(k).ok_or_else(|| {
                Error::shape(format!("foreground class {k} out of range for {} classes", self.classes))
            })? = true;
        }
        let mut out = Self::new(2);
        for t in 0..self.classes {
            for p in 0..self.classes {
                out.counts[is_fg[t] as usize * 2 + is_fg[p] as usize] += self.get(t, p);
            }
        }
        Ok(out)
    }

    fn true_positives(&self, k: usize) -> u64 {
        self.get(k, k)
    }

    /// `tp + fp + fn` for class `k`.
    fn union(&self, k: usize) -> u64 {
        let row: u64 = (0..self.classes).map(|p| self.get(k, p)).sum();
        let col: u64 = (0..self.classes).map(|t| self.get(t, k)).sum();
        row + col - self.get(k, k)
    }
}

/// Per-class IoUs; `None` for classes absent from both maps.
#[derive(Debug, Clone, PartialEq)]
pub struct IouReport {
    pub per_class: Vec<Option<f64>>,
    pub mean: f64,
}

impl IouReport {
    /// Mean over the listed classes, skipping zero-union ones.
    pub fn mean_over(&self, classes: &[usize]) -> Result<f64> {
        let picked: Vec<f64> = classes
            .iter()
            .map(|&k| {
                self.per_class
                    .get(k)
                    .copied()
                    .ok_or_else(|| Error::shape(format!("class {k} out of range")))
            })
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .flatten()
            .collect();
        mean_of(&picked)
    }
}

fn mean_of(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::UndefinedMetric("every class has an empty union".into()));
    }
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

/// Mean intersection over union. Classes with zero union are left out of
/// the mean.
pub fn miou(cm: &ConfusionMatrix) -> Result<IouReport> {
    let per_class: Vec<Option<f64>> = (0..cm.classes)
        .map(|k| {
            let u = cm.union(k);
            (u > 0).then(|| cm.true_positives(k) as f64 / u as f64)
        })
        .collect();
    let present: Vec<f64> = per_class.iter().flatten().copied().collect();
    let mean = mean_of(&present)?;
    Ok(IouReport { per_class, mean })
}

/// Mean of the background and foreground IoUs after collapsing every class
/// in `foreground` to one foreground class. An empty side (e.g. no
/// foreground anywhere) is left out, as in [`miou`].
pub fn fb_iou(cm: &ConfusionMatrix, foreground: &[usize]) -> Result<f64> {
    Ok(miou(&cm.binarize(foreground)?)?.mean)
}

/// Fraction of counted pixels predicted correctly.
pub fn pixacc(cm: &ConfusionMatrix) -> Result<f64> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::UndefinedMetric("no pixels counted".into()));
    }
    let correct: u64 = (0..cm.classes).map(|k| cm.true_positives(k)).sum();
    Ok(correct as f64 / total as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_counted_two_class_case() {
        let cm = ConfusionMatrix::from_maps(2, &[0, 0, 1, 1], &[0, 1, 1, 1], None).unwrap();
        let r = miou(&cm).unwrap();
        assert_eq!(r.per_class, vec![Some(0.5), Some(2.0 / 3.0)]);
        assert_eq!(r.mean, (0.5 + 2.0 / 3.0) / 2.0);
        assert!((r.mean - 7.0 / 12.0).abs() < 1e-15);
        assert_eq!(pixacc(&cm).unwrap(), 0.75);
    }

    #[test]
    fn perfect_prediction() {
        let m = [0u8, 2, 2, 1, 0];
        let cm = ConfusionMatrix::from_maps(4, &m, &m, None).unwrap();
        assert_eq!(miou(&cm).unwrap().mean, 1.0);
        assert_eq!(miou(&cm).unwrap().per_class[3], None);
        assert_eq!(pixacc(&cm).unwrap(), 1.0);
    }

    #[test]
    fn fb_iou_examples() {
        let bg = [0u8; 8];
        let cm = ConfusionMatrix::from_maps(3, &bg, &bg, None).unwrap();
        assert_eq!(fb_iou(&cm, &[1, 2]).unwrap(), 1.0);

        let truth = [0u8, 0, 1, 1];
        let swapped = [1u8, 1, 0, 0];
        let cm = ConfusionMatrix::from_maps(2, &truth, &swapped, None).unwrap();
        assert_eq!(fb_iou(&cm, &[1]).unwrap(), 0.0);
    }

    #[test]
    fn ignored_pixels_are_not_counted() {
        let cm = ConfusionMatrix::from_maps(2, &[0, 255, 1], &[0, 1, 0], Some(255)).unwrap();
        assert_eq!(cm.total(), 2);
        assert!(ConfusionMatrix::from_maps(2, &[0, 255], &[0, 1], None).is_err());
    }

    #[test]
    fn empty_matrix_is_undefined() {
        let cm = ConfusionMatrix::new(3);
        assert!(matches!(miou(&cm), Err(Error::UndefinedMetric(_))));
        assert!(matches!(pixacc(&cm), Err(Error::UndefinedMetric(_))));
    }

    #[test]
    fn merge_is_a_sum() {
        let a = ConfusionMatrix::from_maps(3, &[0, 1, 2], &[0, 2, 2], None).unwrap();
        let b = ConfusionMatrix::from_maps(3, &[2, 2], &[1, 2], None).unwrap();
        let mut ab = a.clone();
        ab.merge(&b).unwrap();
        assert_eq!(ab, ConfusionMatrix::from_maps(3, &[0, 1, 2, 2, 2], &[0, 2, 2, 1, 2], None).unwrap());
        assert!(ab.merge(&ConfusionMatrix::new(2)).is_err());
    }

    #[test]
    fn uniform_random_two_class_pixacc_is_about_half() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let t: Vec<u8> = (0..10_000).map(|_| rng.random_range(0..2)).collect();
        let p: Vec<u8> = (0..10_000).map(|_| rng.random_range(0..2)).collect();
        let acc = pixacc(&ConfusionMatrix::from_maps(2, &t, &p, None).unwrap()).unwrap();
        assert!((acc - 0.5).abs() < 0.02, "{acc}");
    }

    #[test]
    fn metrics_are_invariant_under_class_relabelling() {
        let t = [0u8, 1, 2, 2, 1, 0, 2];
        let p = [0u8, 2, 2, 1, 1, 0, 0];
        let perm = [2u8, 0, 1];
        let tp: Vec<u8> = t.iter().map(|&k| perm[k as usize]).collect();
        let pp: Vec<u8> = p.iter().map(|&k| perm[k as usize]).collect();
        let a = ConfusionMatrix::from_maps(3, &t, &p, None).unwrap();
        let b = ConfusionMatrix::from_maps(3, &tp, &pp, None).unwrap();
        let (ra, rb) = (miou(&a).unwrap(), miou(&b).unwrap());
        for k in 0..3 {
            assert_eq!(ra.per_class[k], rb.per_class[perm[k] as usize]);
        }
        assert_eq!(pixacc(&a).unwrap(), pixacc(&b).unwrap());
        assert_eq!(fb_iou(&a, &[1, 2]).unwrap(), fb_iou(&b, &[0, 1]).unwrap());
    }
}
