use crate::error::{Error, Result};
use crate::training::config::TrainConfig;

/// Polynomial decay: `base_lr * (1 - step / max_steps) ^ poly_power`.
pub fn poly_lr(step: usize, cfg: &TrainConfig) -> Result<f64> {
    if step > cfg.max_steps {
        return Err(Error::Config(format!(
            "step {step} is past max_steps {}",
            cfg.max_steps
        )));
    }
    if cfg.max_steps == 0 {
        return Ok(cfg.base_lr);
    }
    let remaining = 1.0 - step as f64 / cfg.max_steps as f64;
    Ok(cfg.base_lr * remaining.powf(cfg.poly_power))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> TrainConfig {
        TrainConfig {
            base_lr: 0.004,
            poly_power: 0.9,
            max_steps: 1000,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn endpoints_and_midpoint() {
        let c = cfg();
        assert_eq!(poly_lr(0, &c).unwrap(), 0.004);
        assert_eq!(poly_lr(1000, &c).unwrap(), 0.0);
        let mid = poly_lr(500, &c).unwrap();
        assert!((mid - 0.004 * 0.5f64.powf(0.9)).abs() < 1e-15);
        assert!((mid - 0.0021435).abs() < 1e-7);
        assert!(poly_lr(1001, &c).is_err());
    }

    #[test]
    fn monotone_non_increasing() {
        let c = cfg();
        let lrs: Vec<f64> = (0..=1000).map(|s| poly_lr(s, &c).unwrap()).collect();
        assert!(lrs.windows(2).all(|w| w[1] <= w[0]));
    }
}
