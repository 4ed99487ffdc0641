use crate::error::{Error, Result};
use crate::tensor_ops::dense::DenseMap;

/// Outcome of a finite-difference comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    /// `max |analytic - numeric| / max(1, |numeric|)` over all entries.
    pub max_rel_error: f64,
    /// `(parameter, flat index)` of the worst entry.
    pub worst: (usize, usize),
    pub entries_checked: usize,
}

impl GradCheckReport {
    pub fn passes(&self, tolerance: f64) -> bool {
        self.max_rel_error < tolerance
    }
}

/// Compares the analytic gradient returned by `f` with central differences.
///
/// `f` maps parameter values to `(value, gradients)`, one gradient per
/// parameter with matching dims. Each entry is perturbed by
/// `eps * max(1, |p|)`.
pub fn grad_check<F>(f: F, params: &[DenseMap<f64>], eps: f64) -> Result<GradCheckReport>
where
    F: Fn(&[DenseMap<f64>]) -> Result<(f64, Vec<DenseMap<f64>>)>,
{
    let (value, analytic) = f(params)?;
    if !value.is_finite() {
        return Err(Error::Numeric(format!("objective is {value} at the check point")));
    }
    if analytic.len() != params.len() {
        return Err(Error::shape(format!(
            "{} gradients for {} parameters",
            analytic.len(),
            params.len()
        )));
    }
    let mut work = params.to_vec();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: (0, 0),
        entries_checked: 0,
    };
    for p in 0..params.len() {
        if analytic[p].dims() != params[p].dims() {
            return Err(Error::shape(format!(
                "gradient {p} has dims {}, parameter has {}",
                analytic[p].dims(),
                params[p].dims()
            )));
        }
        for i in 0..params[p].values().len() {
            let orig = params[p].values()[i];
            let h = eps * orig.abs().max(1.0);
            work[p].values_mut()[i] = orig + h;
            let (plus, _) = f(&work)?;
            work[p].values_mut()[i] = orig - h;
            let (minus, _) = f(&work)?;
            work[p].values_mut()[i] = orig;
            if !plus.is_finite() || !minus.is_finite() {
                return Err(Error::Numeric(format!(
                    "objective not finite when perturbing parameter {p} entry {i}"
                )));
            }
            let numeric = (plus - minus) / (2.0 * h);
            let err = (analytic[p].values()[i] - numeric).abs() / numeric.abs().max(1.0);
            if err > report.max_rel_error {
                report.max_rel_error = err;
                report.worst = (p, i);
            }
            report.entries_checked += 1;
        }
    }
    Ok(report)
}
