use crate::error::{Error, Result};
use crate::tensor_ops::{DenseMap, Real};

/// Mean per-pixel cross-entropy of `softmax(logits / temperature)` against
/// `targets`, skipping pixels equal to `ignore_index`.
///
/// Returns the loss and its gradient with respect to `logits`. Accumulation
/// is done in `f64` whatever the element type.
pub fn pixel_ce_loss<T: Real>(
    logits: &DenseMap<T>,
    targets: &[u8],
    temperature: T,
    ignore_index: Option<u8>,
) -> Result<(T, DenseMap<T>)> {
    let d = logits.dims();
    let t = temperature.to_f64().unwrap_or(f64::NAN);
    if !(t > 0.0) {
        return Err(Error::Config(format!("temperature must be positive, got {t}")));
    }
    if targets.len() != d.pixels() {
        return Err(Error::shape(format!(
            "{} targets for a {}x{} logit map",
            targets.len(),
            d.height,
            d.width
        )));
    }
    if !logits.is_finite() {
        return Err(Error::Numeric("non-finite logits".into()));
    }
    let n = d.channels;
    let counted = targets.iter().filter(|&&y| Some(y) != ignore_index).count();
    if counted == 0 {
        return Err(Error::Numeric("every pixel is ignored; loss is undefined".into()));
    }
    let inv_count = 1.0 / counted as f64;
    let mut grad = DenseMap::zeros(d);
    let mut total = 0.0f64;
    let mut z = vec![0.0f64; n];
    for ((px, &y), gp) in logits
        .values()
        .chunks(n)
        .zip(targets)
        .zip(grad.values_mut().chunks_mut(n))
    {
        if Some(y) == ignore_index {
            continue;
        }
        let y = y as usize;
        if y >= n {
            return Err(Error::shape(format!("target {y} out of range for {n} labels")));
        }
        for (zk, &v) in z.iter_mut().zip(px) {
            *zk = v.to_f64().unwrap_or(f64::NAN) / t;
        }
        let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = z.iter().map(|&v| (v - m).exp()).sum();
        let lse = m + sum.ln();
        total += lse - z[y];
        for (k, g) in gp.iter_mut().enumerate() {
            let p = (z[k] - lse).exp();
            let onehot = if k == y { 1.0 } else { 0.0 };
            *g = T::from_f64_lossy((p - onehot) * inv_count / t);
        }
    }
    Ok((T::from_f64_lossy(total * inv_count), grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor_ops::{grad_check, Dims};
    use rand::{Rng, SeedableRng};

    #[test]
    fn uniform_logits_give_ln_n() {
        for n in [2usize, 4, 5, 150] {
            let logits = DenseMap::filled(Dims::new(3, 2, n), 0.25f64);
            let targets: Vec<u8> = (0..6).map(|i| (i % n) as u8).collect();
            let (loss, _) = pixel_ce_loss(&logits, &targets, 0.07, None).unwrap();
            assert!((loss - (n as f64).ln()).abs() < 1e-9, "N={n}: {loss}");
        }
        let logits = DenseMap::filled(Dims::new(1, 1, 4), 0.0f64);
        let (loss, _) = pixel_ce_loss(&logits, &[0], 1.0, None).unwrap();
        assert!((loss - 1.386294361).abs() < 1e-9);
    }

    #[test]
    fn one_pixel_hand_case() {
        let logits = DenseMap::from_vec(Dims::new(1, 1, 2), vec![2.0f64, 0.0]).unwrap();
        let (loss, _) = pixel_ce_loss(&logits, &[0], 1.0, None).unwrap();
        let expected = (1.0f64 + (-2.0f64).exp()).ln();
        assert!((loss - expected).abs() < 1e-12);
        assert!((loss - 0.126928).abs() < 1e-6);
    }

    #[test]
    fn sharper_temperature_lowers_loss_when_correct_class_leads() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let targets: Vec<u8> = (0..16).map(|_| rng.random_range(0..3)).collect();
        let logits = DenseMap::from_fn(Dims::new(4, 4, 3), |y, x, k| {
            let base = rng.random_range(-1.0..0.5);
            if k as u8 == targets[y * 4 + x] { 1.0 } else { base }
        });
        let mut prev = f64::INFINITY;
        for t in [1.0, 0.5, 0.25, 0.125, 0.07, 0.035] {
            let (loss, _) = pixel_ce_loss(&logits, &targets, t, None).unwrap();
            assert!(loss < prev, "t={t}: {loss} !< {prev}");
            assert!(loss >= 0.0);
            prev = loss;
        }
    }

    #[test]
    fn ignored_pixels_do_not_count() {
        let logits = DenseMap::from_vec(Dims::new(1, 2, 2), vec![2.0f64, 0.0, -5.0, 9.0]).unwrap();
        let (with_ignore, grad) = pixel_ce_loss(&logits, &[0, 255], 1.0, Some(255)).unwrap();
        let single = DenseMap::from_vec(Dims::new(1, 1, 2), vec![2.0f64, 0.0]).unwrap();
        let (alone, _) = pixel_ce_loss(&single, &[0], 1.0, None).unwrap();
        assert_eq!(with_ignore, alone);
        assert_eq!(&grad.values()[2..], &[0.0, 0.0]);
    }

    #[test]
    fn error_cases() {
        let logits = DenseMap::filled(Dims::new(1, 2, 2), 0.0f64);
        assert!(matches!(pixel_ce_loss(&logits, &[255, 255], 1.0, Some(255)), Err(Error::Numeric(_))));
        assert!(pixel_ce_loss(&logits, &[0, 0], 0.0, None).is_err());
        assert!(pixel_ce_loss(&logits, &[0, 2], 1.0, None).is_err());
        assert!(pixel_ce_loss(&logits, &[0], 1.0, None).is_err());
        let bad = DenseMap::from_vec(Dims::new(1, 1, 2), vec![f64::NAN, 0.0]).unwrap();
        assert!(matches!(pixel_ce_loss(&bad, &[0], 1.0, None), Err(Error::Numeric(_))));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        let logits = DenseMap::from_fn(Dims::new(3, 3, 4), |_, _, _| rng.random_range(-0.5..0.5));
        let targets: Vec<u8> = (0..9).map(|i| if i == 4 { 255 } else { (i % 4) as u8 }).collect();
        let f = |ps: &[DenseMap<f64>]| {
            let (l, g) = pixel_ce_loss(&ps[0], &targets, 0.07, Some(255))?;
            Ok((l, vec![g]))
        };
        let r = grad_check(f, &[logits], 1e-6).unwrap();
        assert!(r.max_rel_error < 1e-4, "{r:?}");
    }
}
