//! Dense rank-3 arrays and the differentiable operators the model is made of.

mod dense;
mod gradcheck;
mod tape;

pub use dense::{DenseMap, Dims, Precision, Real};
pub use gradcheck::{grad_check, GradCheckReport};
pub use tape::{
    bilinear_upsample, channel_max, conv_depthwise, correlate, linear, pointwise_add, relu, scale,
    space_to_depth, Gradients, NodeId, Tape,
};

#[cfg(test)]
mod tests;
