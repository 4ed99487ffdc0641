//! Reverse-mode differentiation over [`DenseMap`] values.
//!
//! A [`Tape`] records every operation of one forward pass together with the
//! values its backward rule needs. [`Tape::backward`] walks the record in
//! reverse and returns a [`Gradients`] table keyed by [`NodeId`].
//!
//! The operator set is deliberately small: it covers exactly what the
//! segmentation model is built from.

use crate::error::{Error, Result};
use crate::tensor_ops::dense::{DenseMap, Dims, Real};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op<T> {
    Leaf,
    ConvDepthwise { x: NodeId, kernel: NodeId, bias: NodeId },
    Linear { x: NodeId, weight: NodeId, bias: Option<NodeId> },
    SpaceToDepth { x: NodeId, patch: usize },
    Relu { x: NodeId },
    Add { a: NodeId, b: NodeId },
    Scale { x: NodeId, factor: T },
    ChannelMax { x: NodeId, argmax: Vec<usize> },
    TileChannels { x: NodeId },
    Upsample { x: NodeId, factor: usize },
    Correlate { x: NodeId, labels: NodeId },
    L2Normalize { x: NodeId, norms: Vec<T> },
    WeightedSum { x: NodeId, weights: DenseMap<T> },
    CrossEntropy { logits: NodeId, dlogits: DenseMap<T> },
}

#[derive(Debug)]
struct Node<T> {
    value: DenseMap<T>,
    op: Op<T>,
    requires_grad: bool,
}

/// Record of one forward pass.
#[derive(Debug)]
pub struct Tape<T> {
    nodes: Vec<Node<T>>,
}

impl<T: Real> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> Tape<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &DenseMap<T> {
        &self.nodes[id.0].value
    }

    pub fn dims(&self, id: NodeId) -> Dims {
        self.nodes[id.0].value.dims()
    }

    /// Scalar value of a `1x1x1` node.
    pub fn scalar(&self, id: NodeId) -> T {
        self.nodes[id.0].value.values()[0]
    }

    fn push(&mut self, value: DenseMap<T>, op: Op<T>, inputs: &[NodeId]) -> NodeId {
        let requires_grad = inputs.iter().any(|i| self.nodes[i.0].requires_grad);
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        NodeId(self.nodes.len() - 1)
    }

    /// Trainable leaf; receives a gradient.
    pub fn param(&mut self, value: DenseMap<T>) -> NodeId {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            requires_grad: true,
        });
        NodeId(self.nodes.len() - 1)
    }

    /// Constant leaf; no gradient is propagated into it.
    pub fn constant(&mut self, value: DenseMap<T>) -> NodeId {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            requires_grad: false,
        });
        NodeId(self.nodes.len() - 1)
    }

    /// Same-padded depthwise convolution with an odd `k x k` kernel per
    /// channel. `kernel` has dims `(k, k, C)` and `bias` `(1, 1, C)`.
    pub fn conv_depthwise(&mut self, x: NodeId, kernel: NodeId, bias: NodeId) -> Result<NodeId> {
        let value = conv_depthwise(self.value(x), self.value(kernel), self.value(bias))?;
        Ok(self.push(value, Op::ConvDepthwise { x, kernel, bias }, &[x, kernel, bias]))
    }

    /// Per-pixel affine map: `weight` has dims `(1, C_in, C_out)`, `bias`
    /// `(1, 1, C_out)`.
    pub fn linear(&mut self, x: NodeId, weight: NodeId, bias: Option<NodeId>) -> Result<NodeId> {
        let value = linear(self.value(x), self.value(weight), bias.map(|b| self.value(b)))?;
        let mut inputs = vec![x, weight];
        inputs.extend(bias);
        Ok(self.push(value, Op::Linear { x, weight, bias }, &inputs))
    }

    /// Folds non-overlapping `patch x patch` blocks into the channel axis.
    pub fn space_to_depth(&mut self, x: NodeId, patch: usize) -> Result<NodeId> {
        let value = space_to_depth(self.value(x), patch)?;
        Ok(self.push(value, Op::SpaceToDepth { x, patch }, &[x]))
    }

    pub fn relu(&mut self, x: NodeId) -> NodeId {
        let value = self.value(x).map(|v| v.max(T::zero()));
        self.push(value, Op::Relu { x }, &[x])
    }

    /// Elementwise sum. `b` may have a single channel, in which case it is
    /// broadcast over every channel of `a`.
    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let value = pointwise_add(self.value(a), self.value(b))?;
        Ok(self.push(value, Op::Add { a, b }, &[a, b]))
    }

    pub fn scale(&mut self, x: NodeId, factor: T) -> NodeId {
        let value = self.value(x).map(|v| v * factor);
        self.push(value, Op::Scale { x, factor }, &[x])
    }

    /// Maximum over channels. Ties resolve to the lowest channel index.
    pub fn channel_max(&mut self, x: NodeId) -> Result<NodeId> {
        let (value, argmax) = channel_max(self.value(x))?;
        Ok(self.push(value, Op::ChannelMax { x, argmax }, &[x]))
    }

    /// Repeats a single-channel map `channels` times.
    pub fn tile_channels(&mut self, x: NodeId, channels: usize) -> Result<NodeId> {
        let src = self.value(x);
        if src.channels() != 1 {
            return Err(Error::shape(format!(
                "tile_channels expects one channel, got {}",
                src.dims()
            )));
        }
        let d = src.dims();
        let value = DenseMap::from_fn(Dims::new(d.height, d.width, channels), |y, x, _| {
            src.get(y, x, 0)
        });
        Ok(self.push(value, Op::TileChannels { x }, &[x]))
    }

    pub fn bilinear_upsample(&mut self, x: NodeId, factor: usize) -> Result<NodeId> {
        let value = bilinear_upsample(self.value(x), factor)?;
        Ok(self.push(value, Op::Upsample { x, factor }, &[x]))
    }

    /// Inner product of every pixel vector with every label row. `labels`
    /// has dims `(1, N, C)`; the result has `N` channels.
    pub fn correlate(&mut self, x: NodeId, labels: NodeId) -> Result<NodeId> {
        let value = correlate(self.value(x), self.value(labels))?;
        Ok(self.push(value, Op::Correlate { x, labels }, &[x, labels]))
    }

    /// Scales each pixel vector to unit L2 norm (`eps` guards zero vectors).
    pub fn l2_normalize(&mut self, x: NodeId, eps: T) -> NodeId {
        let src = self.value(x);
        let c = src.channels();
        let mut out = src.clone();
        let mut norms = Vec::with_capacity(src.dims().pixels());
        for px in out.values_mut().chunks_mut(c) {
            let n = (px.iter().map(|&v| v * v).sum::<T>() + eps).sqrt();
            px.iter_mut().for_each(|v| *v = *v / n);
            norms.push(n);
        }
        self.push(out, Op::L2Normalize { x, norms }, &[x])
    }

    pub fn sum(&mut self, x: NodeId) -> NodeId {
        let weights = DenseMap::filled(self.dims(x), T::one());
        self.weighted_sum(x, weights)
    }

    /// `sum(x * weights)` for a constant weight map.
    pub fn weighted_sum(&mut self, x: NodeId, weights: DenseMap<T>) -> NodeId {
        let total = self
            .value(x)
            .values()
            .iter()
            .zip(weights.values())
            .map(|(&a, &w)| a * w)
            .sum();
        let value = DenseMap::filled(Dims::new(1, 1, 1), total);
        self.push(value, Op::WeightedSum { x, weights }, &[x])
    }

    /// Mean temperature-scaled softmax cross-entropy; see
    /// [`crate::training::pixel_ce_loss`].
    pub fn pixel_ce_loss(
        &mut self,
        logits: NodeId,
        targets: &[u8],
        temperature: T,
        ignore_index: Option<u8>,
    ) -> Result<NodeId> {
        let (loss, dlogits) = crate::training::pixel_ce_loss(
            self.value(logits),
            targets,
            temperature,
            ignore_index,
        )?;
        let value = DenseMap::filled(Dims::new(1, 1, 1), loss);
        Ok(self.push(value, Op::CrossEntropy { logits, dlogits }, &[logits]))
    }

    /// Propagates `d output / d node` for every node from a scalar output.
    pub fn backward(&self, output: NodeId) -> Result<Gradients<T>> {
        if self.dims(output) != Dims::new(1, 1, 1) {
            return Err(Error::shape(format!(
                "backward needs a scalar output, got {}",
                self.dims(output)
            )));
        }
        let mut grads: Vec<Option<DenseMap<T>>> = Vec::with_capacity(self.nodes.len());
        grads.resize_with(self.nodes.len(), || None);
        grads[output.0] = Some(DenseMap::filled(Dims::new(1, 1, 1), T::one()));

        for id in (0..=output.0).rev() {
            let node = &self.nodes[id];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[id].take() else { continue };
            self.backprop_node(node, &g, &mut grads);
            grads[id] = Some(g);
        }
        Ok(Gradients { grads })
    }

    fn backprop_node(&self, node: &Node<T>, g: &DenseMap<T>, grads: &mut [Option<DenseMap<T>>]) {
        let wants = |id: NodeId| self.nodes[id.0].requires_grad;
        match &node.op {
            Op::Leaf => {}
            Op::ConvDepthwise { x, kernel, bias } => {
                let (dx, dk, db) =
                    conv_depthwise_backward(self.value(*x), self.value(*kernel), g);
                accumulate(grads, *x, dx, wants(*x));
                accumulate(grads, *kernel, dk, wants(*kernel));
                accumulate(grads, *bias, db, wants(*bias));
            }
            Op::Linear { x, weight, bias } => {
                let (dx, dw, db) = linear_backward(self.value(*x), self.value(*weight), g);
                accumulate(grads, *x, dx, wants(*x));
                accumulate(grads, *weight, dw, wants(*weight));
                if let Some(b) = bias {
                    accumulate(grads, *b, db, wants(*b));
                }
            }
            Op::SpaceToDepth { x, patch } => {
                let dx = depth_to_space(g, *patch, self.dims(*x));
                accumulate(grads, *x, dx, wants(*x));
            }
            Op::Relu { x } => {
                let xv = self.value(*x);
                let mut dx = g.clone();
                for (d, &v) in dx.values_mut().iter_mut().zip(xv.values()) {
                    if v <= T::zero() {
                        *d = T::zero();
                    }
                }
                accumulate(grads, *x, dx, wants(*x));
            }
            Op::Add { a, b } => {
                accumulate(grads, *a, g.clone(), wants(*a));
                if wants(*b) {
                    let bd = self.dims(*b);
                    let db = if bd == g.dims() {
                        g.clone()
                    } else {
                        sum_channels(g)
                    };
                    accumulate(grads, *b, db, true);
                }
            }
            Op::Scale { x, factor } => {
                let f = *factor;
                accumulate(grads, *x, g.map(|v| v * f), wants(*x));
            }
            Op::ChannelMax { x, argmax } => {
                let xd = self.dims(*x);
                let mut dx = DenseMap::zeros(xd);
                for (p, &k) in argmax.iter().enumerate() {
                    dx.values_mut()[p * xd.channels + k] = g.values()[p];
                }
                accumulate(grads, *x, dx, wants(*x));
            }
            Op::TileChannels { x } => {
                accumulate(grads, *x, sum_channels(g), wants(*x));
            }
            Op::Upsample { x, factor } => {
                let dx = bilinear_upsample_backward(g, *factor, self.dims(*x));
                accumulate(grads, *x, dx, wants(*x));
            }
            Op::Correlate { x, labels } => {
                let xv = self.value(*x);
                let tv = self.value(*labels);
                if wants(*x) {
                    accumulate(grads, *x, correlate_backward_input(g, tv), true);
                }
                if wants(*labels) {
                    accumulate(grads, *labels, correlate_backward_labels(g, xv, tv.dims()), true);
                }
            }
            Op::L2Normalize { x, norms } => {
                let y = &node.value;
                let c = y.channels();
                let mut dx = DenseMap::zeros(y.dims());
                for (p, &n) in norms.iter().enumerate() {
                    let ys = &y.values()[p * c..(p + 1) * c];
                    let gs = &g.values()[p * c..(p + 1) * c];
                    let dot: T = ys.iter().zip(gs).map(|(&a, &b)| a * b).sum();
                    for k in 0..c {
                        dx.values_mut()[p * c + k] = (gs[k] - ys[k] * dot) / n;
                    }
                }
                accumulate(grads, *x, dx, wants(*x));
            }
            Op::WeightedSum { x, weights } => {
                let s = g.values()[0];
                accumulate(grads, *x, weights.map(|w| w * s), wants(*x));
            }
            Op::CrossEntropy { logits, dlogits } => {
                let s = g.values()[0];
                accumulate(grads, *logits, dlogits.map(|d| d * s), wants(*logits));
            }
        }
    }
}

fn accumulate<T: Real>(
    grads: &mut [Option<DenseMap<T>>],
    id: NodeId,
    contribution: DenseMap<T>,
    wanted: bool,
) {
    if !wanted {
        return;
    }
    match &mut grads[id.0] {
        Some(existing) => existing.add_assign(&contribution),
        slot @ None => *slot = Some(contribution),
    }
}

/// Gradients produced by [`Tape::backward`].
#[derive(Debug)]
pub struct Gradients<T> {
    grads: Vec<Option<DenseMap<T>>>,
}

impl<T: Real> Gradients<T> {
    /// Gradient of a node, or `None` if nothing flowed into it.
    pub fn get(&self, id: NodeId) -> Option<&DenseMap<T>> {
        self.grads.get(id.0).and_then(Option::as_ref)
    }

    /// Gradient of a node, with exact zeros where nothing flowed.
    pub fn get_or_zeros(&self, id: NodeId, dims: Dims) -> DenseMap<T> {
        self.get(id).cloned().unwrap_or_else(|| DenseMap::zeros(dims))
    }
}

// Forward and backward kernels. These are usable without a tape.

pub fn conv_depthwise<T: Real>(
    x: &DenseMap<T>,
    kernel: &DenseMap<T>,
    bias: &DenseMap<T>,
) -> Result<DenseMap<T>> {
    let xd = x.dims();
    let kd = kernel.dims();
    if kd.height != kd.width || kd.height % 2 == 0 {
        return Err(Error::shape(format!("kernel must be odd and square, got {kd}")));
    }
    if kd.channels != xd.channels {
        return Err(Error::shape(format!(
            "depthwise kernel has {} channels, input has {}",
            kd.channels, xd.channels
        )));
    }
    if bias.dims() != Dims::new(1, 1, xd.channels) {
        return Err(Error::shape(format!("bias dims {} for {} channels", bias.dims(), xd.channels)));
    }
    let c = xd.channels;
    let r = kd.height / 2;
    let mut out = DenseMap::zeros(xd);
    let (xs, ks, bs) = (x.values(), kernel.values(), bias.values());
    let os = out.values_mut();
    for y in 0..xd.height {
        for xx in 0..xd.width {
            let o = (y * xd.width + xx) * c;
            os[o..o + c].copy_from_slice(bs);
            for dy in 0..kd.height {
                let sy = y as isize + dy as isize - r as isize;
                if sy < 0 || sy >= xd.height as isize {
                    continue;
                }
                for dx in 0..kd.width {
                    let sx = xx as isize + dx as isize - r as isize;
                    if sx < 0 || sx >= xd.width as isize {
                        continue;
                    }
                    let i = (sy as usize * xd.width + sx as usize) * c;
                    let k = (dy * kd.width + dx) * c;
                    for ch in 0..c {
                        os[o + ch] = os[o + ch] + ks[k + ch] * xs[i + ch];
                    }
                }
            }
        }
    }
    Ok(out)
}

fn conv_depthwise_backward<T: Real>(
    x: &DenseMap<T>,
    kernel: &DenseMap<T>,
    g: &DenseMap<T>,
) -> (DenseMap<T>, DenseMap<T>, DenseMap<T>) {
    let xd = x.dims();
    let kd = kernel.dims();
    let c = xd.channels;
    let r = kd.height / 2;
    let mut dx = DenseMap::zeros(xd);
    let mut dk = DenseMap::zeros(kd);
    let mut db = DenseMap::zeros(Dims::new(1, 1, c));
    let (xs, ks, gs) = (x.values(), kernel.values(), g.values());
    for y in 0..xd.height {
        for xx in 0..xd.width {
            let o = (y * xd.width + xx) * c;
            for ch in 0..c {
                let v = db.values()[ch] + gs[o + ch];
                db.values_mut()[ch] = v;
            }
            for dy in 0..kd.height {
                let sy = y as isize + dy as isize - r as isize;
                if sy < 0 || sy >= xd.height as isize {
                    continue;
                }
                for dxk in 0..kd.width {
                    let sx = xx as isize + dxk as isize - r as isize;
                    if sx < 0 || sx >= xd.width as isize {
                        continue;
                    }
                    let i = (sy as usize * xd.width + sx as usize) * c;
                    let k = (dy * kd.width + dxk) * c;
                    let dxs = dx.values_mut();
                    for ch in 0..c {
                        dxs[i + ch] = dxs[i + ch] + ks[k + ch] * gs[o + ch];
                    }
                    let dks = dk.values_mut();
                    for ch in 0..c {
                        dks[k + ch] = dks[k + ch] + xs[i + ch] * gs[o + ch];
                    }
                }
            }
        }
    }
    (dx, dk, db)
}

pub fn linear<T: Real>(
    x: &DenseMap<T>,
    weight: &DenseMap<T>,
    bias: Option<&DenseMap<T>>,
) -> Result<DenseMap<T>> {
    let xd = x.dims();
    let wd = weight.dims();
    if wd.height != 1 || wd.width != xd.channels {
        return Err(Error::shape(format!(
            "linear weight {wd} does not accept {} input channels",
            xd.channels
        )));
    }
    let cout = wd.channels;
    if let Some(b) = bias {
        if b.dims() != Dims::new(1, 1, cout) {
            return Err(Error::shape(format!("linear bias {} for {cout} outputs", b.dims())));
        }
    }
    let cin = xd.channels;
    let mut out = DenseMap::zeros(Dims::new(xd.height, xd.width, cout));
    let ws = weight.values();
    for (xp, op) in x.values().chunks(cin).zip(out.values_mut().chunks_mut(cout)) {
        if let Some(b) = bias {
            op.copy_from_slice(b.values());
        }
        for (i, &xv) in xp.iter().enumerate() {
            let wr = &ws[i * cout..(i + 1) * cout];
            for (o, &w) in op.iter_mut().zip(wr) {
                *o = *o + xv * w;
            }
        }
    }
    Ok(out)
}

fn linear_backward<T: Real>(
    x: &DenseMap<T>,
    weight: &DenseMap<T>,
    g: &DenseMap<T>,
) -> (DenseMap<T>, DenseMap<T>, DenseMap<T>) {
    let cin = x.channels();
    let cout = weight.channels();
    let mut dx = DenseMap::zeros(x.dims());
    let mut dw = DenseMap::zeros(weight.dims());
    let mut db = DenseMap::zeros(Dims::new(1, 1, cout));
    let ws = weight.values();
    for ((xp, gp), dxp) in x
        .values()
        .chunks(cin)
        .zip(g.values().chunks(cout))
        .zip(dx.values_mut().chunks_mut(cin))
    {
        for (b, &gv) in db.values_mut().iter_mut().zip(gp) {
            *b = *b + gv;
        }
        for i in 0..cin {
            let wr = &ws[i * cout..(i + 1) * cout];
            dxp[i] = wr.iter().zip(gp).map(|(&w, &gv)| w * gv).sum();
            let xv = xp[i];
            let dwr = &mut dw.values_mut()[i * cout..(i + 1) * cout];
            for (d, &gv) in dwr.iter_mut().zip(gp) {
                *d = *d + xv * gv;
            }
        }
    }
    (dx, dw, db)
}

pub fn space_to_depth<T: Real>(x: &DenseMap<T>, patch: usize) -> Result<DenseMap<T>> {
    let d = x.dims();
    if patch == 0 || d.height % patch != 0 || d.width % patch != 0 {
        return Err(Error::shape(format!("{d} is not divisible into {patch}x{patch} patches")));
    }
    let c = d.channels;
    let out = Dims::new(d.height / patch, d.width / patch, patch * patch * c);
    Ok(DenseMap::from_fn(out, |py, px, k| {
        let ch = k % c;
        let off = k / c;
        x.get(py * patch + off / patch, px * patch + off % patch, ch)
    }))
}

fn depth_to_space<T: Real>(g: &DenseMap<T>, patch: usize, dims: Dims) -> DenseMap<T> {
    let c = dims.channels;
    DenseMap::from_fn(dims, |y, x, ch| {
        let off = (y % patch) * patch + x % patch;
        g.get(y / patch, x / patch, off * c + ch)
    })
}

pub fn pointwise_add<T: Real>(a: &DenseMap<T>, b: &DenseMap<T>) -> Result<DenseMap<T>> {
    let ad = a.dims();
    let bd = b.dims();
    if ad == bd {
        let mut out = a.clone();
        out.add_assign(b);
        return Ok(out);
    }
    if bd.channels == 1 && bd.height == ad.height && bd.width == ad.width {
        return Ok(DenseMap::from_fn(ad, |y, x, c| a.get(y, x, c) + b.get(y, x, 0)));
    }
    Err(Error::shape(format!("cannot add {bd} to {ad}")))
}

pub fn relu<T: Real>(x: &DenseMap<T>) -> DenseMap<T> {
    x.map(|v| v.max(T::zero()))
}

pub fn scale<T: Real>(x: &DenseMap<T>, factor: T) -> DenseMap<T> {
    x.map(|v| v * factor)
}

/// Per-pixel channel maximum plus the winning channel (lowest index on ties).
pub fn channel_max<T: Real>(x: &DenseMap<T>) -> Result<(DenseMap<T>, Vec<usize>)> {
    let d = x.dims();
    if d.channels == 0 {
        return Err(Error::shape("channel_max of a map with no channels"));
    }
    let mut out = Vec::with_capacity(d.pixels());
    let mut argmax = Vec::with_capacity(d.pixels());
    for px in x.values().chunks(d.channels) {
        let mut best = 0;
        for (k, &v) in px.iter().enumerate().skip(1) {
            if v > px[best] {
                best = k;
            }
        }
        out.push(px[best]);
        argmax.push(best);
    }
    Ok((DenseMap::from_vec(Dims::new(d.height, d.width, 1), out)?, argmax))
}

fn sum_channels<T: Real>(g: &DenseMap<T>) -> DenseMap<T> {
    let d = g.dims();
    let values = g.values().chunks(d.channels).map(|px| px.iter().copied().sum()).collect();
    DenseMap::from_vec(Dims::new(d.height, d.width, 1), values).expect("dims consistent")
}

/// Source taps `(i0, i1, w1)` for each output coordinate along one axis,
/// half-pixel centres, clamped at the borders.
fn upsample_taps(len: usize, factor: usize) -> Vec<(usize, usize, f64)> {
    (0..len * factor)
        .map(|o| {
            let src = ((o as f64 + 0.5) / factor as f64 - 0.5).max(0.0);
            let i0 = (src.floor() as usize).min(len - 1);
            let i1 = (i0 + 1).min(len - 1);
            (i0, i1, src - i0 as f64)
        })
        .collect()
}

pub fn bilinear_upsample<T: Real>(x: &DenseMap<T>, factor: usize) -> Result<DenseMap<T>> {
    if factor == 0 {
        return Err(Error::shape("upsample factor must be at least 1"));
    }
    if factor == 1 {
        return Ok(x.clone());
    }
    let d = x.dims();
    let c = d.channels;
    let rows = upsample_taps(d.height, factor);
    let cols = upsample_taps(d.width, factor);
    let od = Dims::new(d.height * factor, d.width * factor, c);
    let mut out = DenseMap::zeros(od);
    let xs = x.values();
    let os = out.values_mut();
    for (oy, &(y0, y1, wy)) in rows.iter().enumerate() {
        let wy1 = T::from_f64_lossy(wy);
        let wy0 = T::from_f64_lossy(1.0 - wy);
        for (ox, &(x0, x1, wx)) in cols.iter().enumerate() {
            let wx1 = T::from_f64_lossy(wx);
            let wx0 = T::from_f64_lossy(1.0 - wx);
            let o = (oy * od.width + ox) * c;
            let i00 = (y0 * d.width + x0) * c;
            let i01 = (y0 * d.width + x1) * c;
            let i10 = (y1 * d.width + x0) * c;
            let i11 = (y1 * d.width + x1) * c;
            for ch in 0..c {
                let top = wx0 * xs[i00 + ch] + wx1 * xs[i01 + ch];
                let bottom = wx0 * xs[i10 + ch] + wx1 * xs[i11 + ch];
                os[o + ch] = wy0 * top + wy1 * bottom;
            }
        }
    }
    Ok(out)
}

fn bilinear_upsample_backward<T: Real>(g: &DenseMap<T>, factor: usize, dims: Dims) -> DenseMap<T> {
    if factor == 1 {
        return g.clone();
    }
    let c = dims.channels;
    let rows = upsample_taps(dims.height, factor);
    let cols = upsample_taps(dims.width, factor);
    let gd = g.dims();
    let mut dx = DenseMap::zeros(dims);
    let gs = g.values();
    let ds = dx.values_mut();
    for (oy, &(y0, y1, wy)) in rows.iter().enumerate() {
        let wy1 = T::from_f64_lossy(wy);
        let wy0 = T::from_f64_lossy(1.0 - wy);
        for (ox, &(x0, x1, wx)) in cols.iter().enumerate() {
            let wx1 = T::from_f64_lossy(wx);
            let wx0 = T::from_f64_lossy(1.0 - wx);
            let o = (oy * gd.width + ox) * c;
            let taps = [
                ((y0 * dims.width + x0) * c, wy0 * wx0),
                ((y0 * dims.width + x1) * c, wy0 * wx1),
                ((y1 * dims.width + x0) * c, wy1 * wx0),
                ((y1 * dims.width + x1) * c, wy1 * wx1),
            ];
            for (i, w) in taps {
                for ch in 0..c {
                    ds[i + ch] = ds[i + ch] + w * gs[o + ch];
                }
            }
        }
    }
    dx
}

pub fn correlate<T: Real>(x: &DenseMap<T>, labels: &DenseMap<T>) -> Result<DenseMap<T>> {
    let ld = labels.dims();
    let c = x.channels();
    if ld.height != 1 || ld.channels != c {
        return Err(Error::DimensionMismatch {
            expected: c,
            found: ld.channels,
        });
    }
    let n = ld.width;
    let d = x.dims();
    let ts = labels.values();
    let mut out = DenseMap::zeros(Dims::new(d.height, d.width, n));
    for (xp, op) in x.values().chunks(c).zip(out.values_mut().chunks_mut(n)) {
        for (k, o) in op.iter_mut().enumerate() {
            *o = xp.iter().zip(&ts[k * c..(k + 1) * c]).map(|(&a, &b)| a * b).sum();
        }
    }
    Ok(out)
}

fn correlate_backward_input<T: Real>(g: &DenseMap<T>, labels: &DenseMap<T>) -> DenseMap<T> {
    let ld = labels.dims();
    let (n, c) = (ld.width, ld.channels);
    let gd = g.dims();
    let ts = labels.values();
    let mut dx = DenseMap::zeros(Dims::new(gd.height, gd.width, c));
    for (gp, dp) in g.values().chunks(n).zip(dx.values_mut().chunks_mut(c)) {
        for (k, &gv) in gp.iter().enumerate() {
            for (d, &t) in dp.iter_mut().zip(&ts[k * c..(k + 1) * c]) {
                *d = *d + gv * t;
            }
        }
    }
    dx
}

fn correlate_backward_labels<T: Real>(g: &DenseMap<T>, x: &DenseMap<T>, dims: Dims) -> DenseMap<T> {
    let (n, c) = (dims.width, dims.channels);
    let mut dt = DenseMap::zeros(dims);
    let ds = dt.values_mut();
    for (gp, xp) in g.values().chunks(n).zip(x.values().chunks(c)) {
        for (k, &gv) in gp.iter().enumerate() {
            for (d, &xv) in ds[k * c..(k + 1) * c].iter_mut().zip(xp) {
                *d = *d + gv * xv;
            }
        }
    }
    dt
}
