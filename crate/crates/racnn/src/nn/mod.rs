//! Minimal layer graph: enough of a network runner to train small image
//! classifiers and compare standard convolutions against their
//! radius-adaptive replacements under identical conditions.
//!
//! A [`Graph`] is an ordered list of [`Layer`]s ending in a softmax
//! cross-entropy head. Three execution paths share the same parameters:
//! `forward` (plain inference), `forward_cached` (keeps per-layer state
//! for [`Graph::backward`]), and `forward_sparse` (adaptive layers take
//! their row-skipping path and report work statistics).

pub mod adam;
pub mod dataset;
pub mod train;

use crate::conv::{
    conv2d, racnn_backward, racnn_forward_dense_cached, racnn_forward_sparse, DenseCache,
    RacnnGrads, RacnnParams, SparseStats,
};
use crate::gemm::matmul;
use crate::lowering::{col2im, im2col, ColMatrix};
use crate::tensor::random_mat;
use crate::{Error, Mat, Result, Rng, Scalar, Tensor3};

/// Activation flowing between layers: an image until `Flatten`, a plain
/// vector after it.
#[derive(Debug, Clone, PartialEq)]
pub enum Value<T> {
    Image(Tensor3<T>),
    Vector(Vec<T>),
}

impl<T: Scalar> Value<T> {
    pub fn data(&self) -> &[T] {
        match self {
            Value::Image(t) => &t.data,
            Value::Vector(v) => v,
        }
    }

    fn as_image(&self) -> Result<&Tensor3<T>> {
        match self {
            Value::Image(t) => Ok(t),
            Value::Vector(_) => Err(Error::Shape("expected an image activation".into())),
        }
    }

    fn as_vector(&self) -> Result<&[T]> {
        match self {
            Value::Vector(v) => Ok(v),
            Value::Image(_) => Err(Error::Shape("expected a vector activation".into())),
        }
    }

    fn into_vector(self) -> Result<Vec<T>> {
        match self {
            Value::Vector(v) => Ok(v),
            Value::Image(_) => Err(Error::Shape("expected a vector activation".into())),
        }
    }
}

/// One node of the graph. Convolutions are stride-1 zero-padded; the pool
/// is a 2x2 max with stride 2.
#[derive(Debug, Clone, PartialEq)]
pub enum Layer<T> {
    /// Standard 3x3 convolution, kernel `9d x f`.
    Conv3 {
        w: Mat<T>,
    },
    /// Standard 1x1 convolution, kernel `d x f`.
    Conv1 {
        w: Mat<T>,
    },
    /// Radius-adaptive convolution.
    Racnn(RacnnParams<T>),
    Relu,
    MaxPool2,
    Flatten,
    Dense {
        w: Mat<T>,
        b: Vec<T>,
    },
    /// Loss head: identity at forward time, fused softmax cross-entropy
    /// in the backward pass. Must be the last layer.
    SoftmaxXent,
}

impl<T: Scalar> Layer<T> {
    pub fn name(&self) -> &'static str {
        match self {
            Layer::Conv3 { .. } => "conv3",
            Layer::Conv1 { .. } => "conv1",
            Layer::Racnn(_) => "racnn",
            Layer::Relu => "relu",
            Layer::MaxPool2 => "maxpool2",
            Layer::Flatten => "flatten",
            Layer::Dense { .. } => "dense",
            Layer::SoftmaxXent => "softmax_xent",
        }
    }

    pub fn param_count(&self) -> usize {
        match self {
            Layer::Conv3 { w } | Layer::Conv1 { w } => w.data.len(),
            Layer::Racnn(p) => p.param_count(),
            Layer::Dense { w, b } => w.data.len() + b.len(),
            _ => 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Layer::Conv3 { w } => {
                if w.rows % 9 != 0 || w.rows == 0 {
                    return Err(Error::Shape(format!(
                        "conv3 kernel rows {} not a positive multiple of 9",
                        w.rows
                    )));
                }
                finite_mat(w)
            }
            Layer::Conv1 { w } => {
                if w.rows == 0 {
                    return Err(Error::Shape("conv1 kernel has zero rows".into()));
                }
                finite_mat(w)
            }
            Layer::Racnn(p) => p.validate(),
            Layer::Dense { w, b } => {
                if b.len() != w.cols {
                    return Err(Error::Shape(format!(
                        "dense bias length {} does not match {} outputs",
                        b.len(),
                        w.cols
                    )));
                }
                finite_mat(w)?;
                if b.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite("dense bias"));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    fn forward(&self, v: &Value<T>) -> Result<Value<T>> {
        match self {
            Layer::Conv3 { w } => Ok(Value::Image(conv2d(v.as_image()?, w, 3)?)),
            Layer::Conv1 { w } => Ok(Value::Image(conv2d(v.as_image()?, w, 1)?)),
            Layer::Racnn(p) => {
                let (y, _) = crate::conv::racnn_forward_dense(v.as_image()?, p)?;
                Ok(Value::Image(y))
            }
            Layer::Relu => Ok(relu_value(v)),
            Layer::MaxPool2 => {
                let (y, _) = maxpool2(v.as_image()?)?;
                Ok(Value::Image(y))
            }
            Layer::Flatten => Ok(Value::Vector(v.as_image()?.data.clone())),
            Layer::Dense { w, b } => Ok(Value::Vector(dense_forward(v.as_vector()?, w, b)?)),
            Layer::SoftmaxXent => Ok(Value::Vector(v.as_vector()?.to_vec())),
        }
    }

    fn forward_cached(&self, v: &Value<T>) -> Result<(Value<T>, LayerCache<T>)> {
        match self {
            Layer::Conv3 { w } => {
                let x = v.as_image()?;
                let i3 = im2col(x, 3)?;
                let y = matmul(&i3.mat, w)?;
                let y = Tensor3::from_pixel_matrix(&y, x.h, x.c)?;
                Ok((Value::Image(y), LayerCache::Conv3 { i3 }))
            }
            Layer::Conv1 { w } => {
                let x = v.as_image()?;
                let i1 = im2col(x, 1)?;
                let y = matmul(&i1.mat, w)?;
                let y = Tensor3::from_pixel_matrix(&y, x.h, x.c)?;
                Ok((Value::Image(y), LayerCache::Conv1 { i1 }))
            }
            Layer::Racnn(p) => {
                let (y, cache) = racnn_forward_dense_cached(v.as_image()?, p, 1)?;
                Ok((Value::Image(y), LayerCache::Racnn(Box::new(cache))))
            }
            Layer::Relu => Ok((relu_value(v), LayerCache::Relu { input: v.clone() })),
            Layer::MaxPool2 => {
                let x = v.as_image()?;
                let (y, argmax) = maxpool2(x)?;
                let cache = LayerCache::MaxPool2 { argmax, h: x.h, c: x.c, d: x.d };
                Ok((Value::Image(y), cache))
            }
            Layer::Flatten => {
                let x = v.as_image()?;
                let cache = LayerCache::Flatten { h: x.h, c: x.c, d: x.d };
                Ok((Value::Vector(x.data.clone()), cache))
            }
            Layer::Dense { w, b } => {
                let x = v.as_vector()?;
                let y = dense_forward(x, w, b)?;
                Ok((Value::Vector(y), LayerCache::Dense { x: x.to_vec() }))
            }
            Layer::SoftmaxXent => {
                let logits = v.as_vector()?.to_vec();
                Ok((Value::Vector(logits.clone()), LayerCache::SoftmaxXent { logits }))
            }
        }
    }

    fn forward_sparse(&self, v: &Value<T>, tau: f64) -> Result<(Value<T>, Option<SparseStats>)> {
        if let Layer::Racnn(p) = self {
            let (y, _, stats) = racnn_forward_sparse(v.as_image()?, p, tau)?;
            Ok((Value::Image(y), Some(stats)))
        } else {
            Ok((self.forward(v)?, None))
        }
    }

    fn backward(&self, cache: &LayerCache<T>, cot: Value<T>) -> Result<(LayerGrads<T>, Value<T>)> {
        match (self, cache) {
            (Layer::Conv3 { w }, LayerCache::Conv3 { i3 }) => {
                let g = cot.as_image()?.as_pixel_matrix();
                let grad_w = matmul(&i3.mat.transpose(), &g)?;
                let gx = matmul(&g, &w.transpose())?;
                let gx = col2im(&gx, i3.h, i3.c, w.rows / 9, 3)?;
                Ok((LayerGrads::Conv3 { w: grad_w }, Value::Image(gx)))
            }
            (Layer::Conv1 { w }, LayerCache::Conv1 { i1 }) => {
                let g = cot.as_image()?.as_pixel_matrix();
                let grad_w = matmul(&i1.mat.transpose(), &g)?;
                let gx = matmul(&g, &w.transpose())?;
                let gx = Tensor3::from_pixel_matrix(&gx, i1.h, i1.c)?;
                Ok((LayerGrads::Conv1 { w: grad_w }, Value::Image(gx)))
            }
            (Layer::Racnn(p), LayerCache::Racnn(dc)) => {
                let g = cot.as_image()?.as_pixel_matrix();
                let (grads, gx) = racnn_backward(p, dc, &g)?;
                Ok((LayerGrads::Racnn(grads), Value::Image(gx)))
            }
            (Layer::Relu, LayerCache::Relu { input }) => {
                let mut cot = cot;
                let data = match &mut cot {
                    Value::Image(t) => &mut t.data,
                    Value::Vector(v) => v,
                };
                let pre = input.data();
                if pre.len() != data.len() {
                    return Err(Error::Shape("relu cotangent does not match cache".into()));
                }
                for (g, &x) in data.iter_mut().zip(pre) {
                    if x <= T::zero() {
                        *g = T::zero();
                    }
                }
                Ok((LayerGrads::None, cot))
            }
            (Layer::MaxPool2, LayerCache::MaxPool2 { argmax, h, c, d }) => {
                let g = cot.as_image()?;
                if g.data.len() != argmax.len() {
                    return Err(Error::Shape("pool cotangent does not match cache".into()));
                }
                let mut gx = Tensor3::zeros(*h, *c, *d)?;
                for (k, &src) in argmax.iter().enumerate() {
                    gx.data[src] = gx.data[src] + g.data[k];
                }
                Ok((LayerGrads::None, Value::Image(gx)))
            }
            (Layer::Flatten, LayerCache::Flatten { h, c, d }) => {
                let g = cot.into_vector()?;
                if g.len() != h * c * d {
                    return Err(Error::Shape("flatten cotangent does not match cache".into()));
                }
                Ok((LayerGrads::None, Value::Image(Tensor3::from_vec(*h, *c, *d, g)?)))
            }
            (Layer::Dense { w, .. }, LayerCache::Dense { x }) => {
                let g = cot.into_vector()?;
                if g.len() != w.cols || x.len() != w.rows {
                    return Err(Error::Shape("dense cotangent does not match cache".into()));
                }
                let x_col = Mat { rows: x.len(), cols: 1, data: x.clone() };
                let g_row = Mat { rows: 1, cols: g.len(), data: g.clone() };
                let grad_w = matmul(&x_col, &g_row)?;
                let g_col = Mat { rows: g.len(), cols: 1, data: g.clone() };
                let gx = matmul(w, &g_col)?;
                Ok((LayerGrads::Dense { w: grad_w, b: g }, Value::Vector(gx.data)))
            }
            (Layer::SoftmaxXent, LayerCache::SoftmaxXent { .. }) => Err(Error::InvalidArgument(
                "loss head backward requires a label; use Graph::backward".into(),
            )),
            _ => Err(Error::InvalidArgument(format!(
                "cache does not belong to a {} layer",
                self.name()
            ))),
        }
    }
}

fn finite_mat<T: Scalar>(w: &Mat<T>) -> Result<()> {
    if w.all_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite("layer weights"))
    }
}

fn relu_value<T: Scalar>(v: &Value<T>) -> Value<T> {
    let mut out = v.clone();
    let data = match &mut out {
        Value::Image(t) => &mut t.data,
        Value::Vector(v) => v,
    };
    for x in data.iter_mut() {
        if *x < T::zero() {
            *x = T::zero();
        }
    }
    out
}

fn dense_forward<T: Scalar>(x: &[T], w: &Mat<T>, b: &[T]) -> Result<Vec<T>> {
    if x.len() != w.rows {
        return Err(Error::Shape(format!(
            "dense input length {} does not match {} weight rows",
            x.len(),
            w.rows
        )));
    }
    let x_row = Mat { rows: 1, cols: x.len(), data: x.to_vec() };
    let y = matmul(&x_row, w)?;
    Ok(y.data.iter().zip(b).map(|(&v, &bv)| v + bv).collect())
}

/// 2x2 stride-2 max pool. Ties keep the first element in scan order, so
/// the backward routing is deterministic.
fn maxpool2<T: Scalar>(x: &Tensor3<T>) -> Result<(Tensor3<T>, Vec<usize>)> {
    if !x.h.is_multiple_of(2) || !x.c.is_multiple_of(2) {
        return Err(Error::Shape(format!("maxpool2 needs even spatial dims, got {}x{}", x.h, x.c)));
    }
    let (oh, oc, d) = (x.h / 2, x.c / 2, x.d);
    let mut out = Tensor3::zeros(oh, oc, d)?;
    let mut argmax = vec![0usize; oh * oc * d];
    for oi in 0..oh {
        for oj in 0..oc {
            for t in 0..d {
                let mut best_idx = ((2 * oi) * x.c + 2 * oj) * d + t;
                let mut best = x.data[best_idx];
                for (di, dj) in [(0, 1), (1, 0), (1, 1)] {
                    let idx = ((2 * oi + di) * x.c + 2 * oj + dj) * d + t;
                    if x.data[idx] > best {
                        best = x.data[idx];
                        best_idx = idx;
                    }
                }
                let k = (oi * oc + oj) * d + t;
                out.data[k] = best;
                argmax[k] = best_idx;
            }
        }
    }
    Ok((out, argmax))
}

/// Fused softmax cross-entropy with max subtraction. Returns the loss and
/// the logit cotangent `softmax - onehot(label)`.
pub fn softmax_xent<T: Scalar>(logits: &[T], label: usize) -> Result<(T, Vec<T>)> {
    if logits.is_empty() {
        return Err(Error::InvalidArgument("empty logits".into()));
    }
    if label >= logits.len() {
        return Err(Error::IndexOutOfRange { index: label, len: logits.len() });
    }
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("logits"));
    }
    let m = logits.iter().cloned().fold(logits[0], T::max);
    let exps: Vec<T> = logits.iter().map(|&z| (z - m).exp()).collect();
    let sum: T = exps.iter().cloned().sum();
    let loss = sum.ln() - (logits[label] - m);
    let mut d: Vec<T> = exps.iter().map(|&e| e / sum).collect();
    d[label] = d[label] - T::one();
    Ok((loss, d))
}

/// Per-layer state retained by a cached forward for the backward pass.
#[derive(Debug, Clone)]
pub enum LayerCache<T> {
    Conv3 { i3: ColMatrix<T> },
    Conv1 { i1: ColMatrix<T> },
    Racnn(Box<DenseCache<T>>),
    Relu { input: Value<T> },
    MaxPool2 { argmax: Vec<usize>, h: usize, c: usize, d: usize },
    Flatten { h: usize, c: usize, d: usize },
    Dense { x: Vec<T> },
    SoftmaxXent { logits: Vec<T> },
}

/// Row-skipping statistics keyed by the index of the layer they came from.
pub type SparseLayerStats = Vec<(usize, SparseStats)>;

/// Parameter gradients, one entry per layer, `None` for stateless layers.
#[derive(Debug, Clone, PartialEq)]
pub enum LayerGrads<T> {
    Conv3 { w: Mat<T> },
    Conv1 { w: Mat<T> },
    Racnn(RacnnGrads<T>),
    Dense { w: Mat<T>, b: Vec<T> },
    None,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Graph<T> {
    pub layers: Vec<Layer<T>>,
}

impl<T: Scalar> Graph<T> {
    pub fn new(layers: Vec<Layer<T>>) -> Result<Self> {
        let g = Graph { layers };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        for (i, layer) in self.layers.iter().enumerate() {
            layer.validate()?;
            if matches!(layer, Layer::SoftmaxXent) && i + 1 != self.layers.len() {
                return Err(Error::InvalidArgument("softmax_xent must be the last layer".into()));
            }
        }
        Ok(())
    }

    /// Logical parameter count; adaptive layers count their shared center
    /// kernel once.
    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Layer::param_count).sum()
    }

    /// Length of the physical vector [`Graph::params_flat`] produces. For
    /// adaptive layers this exceeds [`Graph::param_count`] by `d*f`: the
    /// center kernel is stored separately and its structurally-zero slot
    /// inside the hollow kernel is stored too.
    pub fn flat_len(&self) -> usize {
        self.layers
            .iter()
            .map(|l| match l {
                Layer::Racnn(p) => 10 * p.d * p.f + p.d + 1,
                other => other.param_count(),
            })
            .sum()
    }

    pub fn has_adaptive(&self) -> bool {
        self.layers.iter().any(|l| matches!(l, Layer::Racnn(_)))
    }

    /// Plain forward to logits; adaptive layers run their dense path.
    pub fn forward(&self, x: &Tensor3<T>) -> Result<Vec<T>> {
        let mut v = Value::Image(x.clone());
        for layer in &self.layers {
            v = layer.forward(&v)?;
        }
        v.into_vector()
    }

    pub fn forward_batch(&self, xs: &[Tensor3<T>]) -> Result<Vec<Vec<T>>> {
        xs.iter().map(|x| self.forward(x)).collect()
    }

    /// Forward that retains per-layer caches for [`Graph::backward`].
    pub fn forward_cached(&self, x: &Tensor3<T>) -> Result<(Vec<T>, Vec<LayerCache<T>>)> {
        let mut v = Value::Image(x.clone());
        let mut caches = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let (next, cache) = layer.forward_cached(&v)?;
            caches.push(cache);
            v = next;
        }
        Ok((v.into_vector()?, caches))
    }

    /// Forward with adaptive layers on their row-skipping path. Returns
    /// the logits and `(layer index, stats)` for each adaptive layer.
    pub fn forward_sparse(&self, x: &Tensor3<T>, tau: f64) -> Result<(Vec<T>, SparseLayerStats)> {
        let mut v = Value::Image(x.clone());
        let mut all = Vec::new();
        for (i, layer) in self.layers.iter().enumerate() {
            let (next, stats) = layer.forward_sparse(&v, tau)?;
            if let Some(s) = stats {
                all.push((i, s));
            }
            v = next;
        }
        Ok((v.into_vector()?, all))
    }

    /// Backward from the loss head. Returns the sample loss and one
    /// gradient entry per layer.
    pub fn backward(
        &self,
        caches: &[LayerCache<T>],
        label: usize,
    ) -> Result<(T, Vec<LayerGrads<T>>)> {
        if caches.len() != self.layers.len() {
            return Err(Error::InvalidArgument(format!(
                "{} caches for {} layers; reuse the matching forward",
                caches.len(),
                self.layers.len()
            )));
        }
        let logits = match (self.layers.last(), caches.last()) {
            (Some(Layer::SoftmaxXent), Some(LayerCache::SoftmaxXent { logits })) => logits,
            _ => {
                return Err(Error::InvalidArgument(
                    "graph must end in a softmax_xent head to backpropagate".into(),
                ))
            }
        };
        let (loss, dlogits) = softmax_xent(logits, label)?;
        let mut grads = vec![LayerGrads::None; self.layers.len()];
        let mut cot = Value::Vector(dlogits);
        for i in (0..self.layers.len() - 1).rev() {
            let (g, next) = self.layers[i].backward(&caches[i], cot)?;
            grads[i] = g;
            cot = next;
        }
        Ok((loss, grads))
    }

    /// Zero gradients shaped like this graph's parameters.
    pub fn zero_grads(&self) -> Vec<LayerGrads<T>> {
        self.layers
            .iter()
            .map(|layer| match layer {
                Layer::Conv3 { w } => LayerGrads::Conv3 { w: Mat::zeros(w.rows, w.cols) },
                Layer::Conv1 { w } => LayerGrads::Conv1 { w: Mat::zeros(w.rows, w.cols) },
                Layer::Racnn(p) => LayerGrads::Racnn(RacnnGrads {
                    w1: Mat::zeros(p.d, p.f),
                    w3_hollow: Mat::zeros(9 * p.d, p.f),
                    w_alpha: vec![T::zero(); p.d],
                    b_alpha: T::zero(),
                }),
                Layer::Dense { w, b } => {
                    LayerGrads::Dense { w: Mat::zeros(w.rows, w.cols), b: vec![T::zero(); b.len()] }
                }
                _ => LayerGrads::None,
            })
            .collect()
    }

    /// All parameters as one flat vector, in layer order; per layer the
    /// order is kernel(s) first, then selector or bias.
    pub fn params_flat(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.flat_len());
        for layer in &self.layers {
            match layer {
                Layer::Conv3 { w } | Layer::Conv1 { w } => out.extend_from_slice(&w.data),
                Layer::Racnn(p) => {
                    out.extend_from_slice(&p.w1.data);
                    out.extend_from_slice(&p.w3_hollow.data);
                    out.extend_from_slice(&p.w_alpha);
                    out.push(p.b_alpha);
                }
                Layer::Dense { w, b } => {
                    out.extend_from_slice(&w.data);
                    out.extend_from_slice(b);
                }
                _ => {}
            }
        }
        out
    }

    /// Writes a flat vector produced by [`Graph::params_flat`] back into
    /// the layers. Hollow centers are re-zeroed to hold the structural
    /// invariant regardless of what the optimizer did to those slots.
    pub fn set_params_flat(&mut self, flat: &[T]) -> Result<()> {
        if flat.len() != self.flat_len() {
            return Err(Error::Shape(format!(
                "flat parameter vector has {} entries, graph needs {}",
                flat.len(),
                self.flat_len()
            )));
        }
        let mut pos = 0usize;
        for layer in &mut self.layers {
            match layer {
                Layer::Conv3 { w } | Layer::Conv1 { w } => {
                    let n = w.data.len();
                    w.data.copy_from_slice(&flat[pos..pos + n]);
                    pos += n;
                }
                Layer::Racnn(p) => {
                    let n1 = p.w1.data.len();
                    p.w1.data.copy_from_slice(&flat[pos..pos + n1]);
                    pos += n1;
                    let n3 = p.w3_hollow.data.len();
                    p.w3_hollow.data.copy_from_slice(&flat[pos..pos + n3]);
                    pos += n3;
                    let (d, f) = (p.d, p.f);
                    for v in &mut p.w3_hollow.data[4 * d * f..5 * d * f] {
                        *v = T::zero();
                    }
                    p.w_alpha.copy_from_slice(&flat[pos..pos + d]);
                    pos += d;
                    p.b_alpha = flat[pos];
                    pos += 1;
                }
                Layer::Dense { w, b } => {
                    let n = w.data.len();
                    w.data.copy_from_slice(&flat[pos..pos + n]);
                    pos += n;
                    let nb = b.len();
                    b.copy_from_slice(&flat[pos..pos + nb]);
                    pos += nb;
                }
                _ => {}
            }
        }
        Ok(())
    }
}

/// `acc += scale * g`, entry by entry. Shapes must match.
pub fn accumulate_grads<T: Scalar>(
    acc: &mut [LayerGrads<T>],
    g: &[LayerGrads<T>],
    scale: T,
) -> Result<()> {
    if acc.len() != g.len() {
        return Err(Error::Shape("gradient lists differ in length".into()));
    }
    for (a, b) in acc.iter_mut().zip(g) {
        match (a, b) {
            (LayerGrads::Conv3 { w: aw }, LayerGrads::Conv3 { w: bw })
            | (LayerGrads::Conv1 { w: aw }, LayerGrads::Conv1 { w: bw }) => {
                axpy(&mut aw.data, &bw.data, scale)?;
            }
            (LayerGrads::Racnn(ag), LayerGrads::Racnn(bg)) => {
                axpy(&mut ag.w1.data, &bg.w1.data, scale)?;
                axpy(&mut ag.w3_hollow.data, &bg.w3_hollow.data, scale)?;
                axpy(&mut ag.w_alpha, &bg.w_alpha, scale)?;
                ag.b_alpha = ag.b_alpha + scale * bg.b_alpha;
            }
            (LayerGrads::Dense { w: aw, b: ab }, LayerGrads::Dense { w: bw, b: bb }) => {
                axpy(&mut aw.data, &bw.data, scale)?;
                axpy(ab, bb, scale)?;
            }
            (LayerGrads::None, LayerGrads::None) => {}
            _ => return Err(Error::Shape("gradient lists differ in layer kinds".into())),
        }
    }
    Ok(())
}

fn axpy<T: Scalar>(a: &mut [T], b: &[T], s: T) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::Shape("gradient buffers differ in length".into()));
    }
    for (av, &bv) in a.iter_mut().zip(b) {
        *av = *av + s * bv;
    }
    Ok(())
}

/// Gradients flattened in the order of [`Graph::params_flat`].
pub fn grads_flat<T: Scalar>(grads: &[LayerGrads<T>]) -> Vec<T> {
    let mut out = Vec::new();
    for g in grads {
        match g {
            LayerGrads::Conv3 { w } | LayerGrads::Conv1 { w } => out.extend_from_slice(&w.data),
            LayerGrads::Racnn(r) => {
                out.extend_from_slice(&r.w1.data);
                out.extend_from_slice(&r.w3_hollow.data);
                out.extend_from_slice(&r.w_alpha);
                out.push(r.b_alpha);
            }
            LayerGrads::Dense { w, b } => {
                out.extend_from_slice(&w.data);
                out.extend_from_slice(b);
            }
            LayerGrads::None => {}
        }
    }
    out
}

/// Classifier used by the comparison experiments: three conv/relu/pool
/// stages over channels 1 -> 8 -> 12 -> 16, then a dense head. Spatial
/// dims must be divisible by 8. `adaptive` picks the conv kind per stage.
pub fn build_toy_net<T: Scalar>(
    rng: &mut Rng,
    input_h: usize,
    input_c: usize,
    classes: usize,
    adaptive: &[bool; 3],
    alpha_bias: bool,
) -> Result<Graph<T>> {
    if !input_h.is_multiple_of(8) || !input_c.is_multiple_of(8) || input_h == 0 || input_c == 0 {
        return Err(Error::InvalidArgument(format!(
            "toy net needs spatial dims divisible by 8, got {input_h}x{input_c}"
        )));
    }
    if classes < 2 {
        return Err(Error::InvalidArgument("need at least 2 classes".into()));
    }
    let channels = [1usize, 8, 12, 16];
    let mut layers = Vec::new();
    for s in 0..3 {
        let (d, f) = (channels[s], channels[s + 1]);
        if adaptive[s] {
            layers.push(Layer::Racnn(RacnnParams::random(rng, d, f, alpha_bias)));
        } else {
            let scale = (6.0 / (9 * d) as f64).sqrt();
            layers.push(Layer::Conv3 { w: random_mat(rng, 9 * d, f, -scale, scale) });
        }
        layers.push(Layer::Relu);
        layers.push(Layer::MaxPool2);
    }
    layers.push(Layer::Flatten);
    let feat = (input_h / 8) * (input_c / 8) * channels[3];
    let scale = (6.0 / feat as f64).sqrt();
    layers.push(Layer::Dense {
        w: random_mat(rng, feat, classes, -scale, scale),
        b: vec![T::zero(); classes],
    });
    layers.push(Layer::SoftmaxXent);
    Graph::new(layers)
}

/// The standard/adaptive pair under test: same architecture, same seed,
/// only the convolution kind differs.
pub fn build_toy_pair<T: Scalar>(
    seed: u64,
    input_h: usize,
    input_c: usize,
    classes: usize,
    alpha_bias: bool,
) -> Result<(Graph<T>, Graph<T>)> {
    let standard = build_toy_net(
        &mut Rng::new(seed),
        input_h,
        input_c,
        classes,
        &[false, false, false],
        alpha_bias,
    )?;
    let adaptive = build_toy_net(
        &mut Rng::new(seed),
        input_h,
        input_c,
        classes,
        &[true, true, true],
        alpha_bias,
    )?;
    Ok((standard, adaptive))
}

/// Rewrites every standard 3x3 convolution as an adaptive layer with the
/// same dense kernel and alpha pinned to 1, leaving behavior unchanged.
pub fn adaptive_from_standard<T: Scalar>(g: &Graph<T>) -> Result<Graph<T>> {
    let layers = g
        .layers
        .iter()
        .map(|l| match l {
            Layer::Conv3 { w } => Ok(Layer::Racnn(RacnnParams::from_dense(w)?)),
            other => Ok(other.clone()),
        })
        .collect::<Result<Vec<_>>>()?;
    Graph::new(layers)
}

/// Rewrites every adaptive layer as a standard 3x3 convolution with the
/// center kernel embedded. Matches the adaptive layer wherever alpha
/// saturated at 1.
pub fn standard_from_adaptive<T: Scalar>(g: &Graph<T>) -> Result<Graph<T>> {
    let layers = g
        .layers
        .iter()
        .map(|l| match l {
            Layer::Racnn(p) => Layer::Conv3 { w: crate::conv::embed_center(p) },
            other => other.clone(),
        })
        .collect();
    Graph::new(layers)
}
