use crate::error::{Error, Result};
use crate::tensor_ops::{DenseMap, Real};
use crate::training::config::MomentumKind;

/// One SGD-with-momentum update of every tensor in place.
///
/// Nothing is modified if any gradient is non-finite.
pub fn sgd_step<T: Real>(
    params: &mut [&mut DenseMap<T>],
    grads: &[DenseMap<T>],
    velocity: &mut [DenseMap<T>],
    lr: T,
    momentum: T,
    kind: MomentumKind,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != velocity.len() {
        return Err(Error::shape(format!(
            "{} params, {} grads, {} velocities",
            params.len(),
            grads.len(),
            velocity.len()
        )));
    }
    for (i, ((p, g), v)) in params.iter().zip(grads).zip(velocity.iter()).enumerate() {
        if p.dims() != g.dims() || p.dims() != v.dims() {
            return Err(Error::shape(format!(
                "tensor {i}: param {}, grad {}, velocity {}",
                p.dims(),
                g.dims(),
                v.dims()
            )));
        }
        if !g.is_finite() {
            return Err(Error::Numeric(format!("gradient of tensor {i} is not finite; step aborted")));
        }
    }
    for ((p, g), v) in params.iter_mut().zip(grads).zip(velocity.iter_mut()) {
        for ((pv, &gv), vv) in p.values_mut().iter_mut().zip(g.values()).zip(v.values_mut()) {
            *vv = momentum * *vv + gv;
            let dir = match kind {
                MomentumKind::Classical => *vv,
                MomentumKind::Nesterov => gv + momentum * *vv,
            };
            *pv = *pv - lr * dir;
        }
    }
    Ok(())
}
