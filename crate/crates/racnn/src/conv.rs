//! Radius-adaptive convolution.
//!
//! A layer owns a 1x1 kernel `w1`, a hollow 3x3 kernel `w3_hollow` whose
//! center taps are structurally zero, and a per-pixel selector
//! (`w_alpha`, `b_alpha`). The full 3x3 kernel is recovered by embedding
//! `w1` at the center, so the soft blend
//!
//! ```text
//! out[p] = (1x1 conv)[p] + alpha[p] * (hollow 3x3 conv)[p]
//! ```
//!
//! interpolates exactly between a 1x1 convolution (`alpha = 0`) and a
//! standard 3x3 convolution (`alpha = 1`). `alpha` is a clipped 1x1
//! convolution of the input and is computed in the same GEMM as the 1x1
//! output by concatenating the selector column onto `w1`.
//!
//! Two forward paths compute the same function:
//!
//! - the dense path evaluates every pixel's blend and caches what the
//!   backward pass needs (training);
//! - the sparse path gathers only the rows with `alpha > tau` for the
//!   hollow GEMM and scatter-adds the scaled result back (inference).
//!   Gathered rows drop the center offset, so a fully active layer costs
//!   8/9 of a standard convolution in that GEMM plus the fused 1x1.

use serde::Serialize;

use crate::gemm::{matmul, matmul_ex};
use crate::lowering::{col2im, im2col, im2col_rows_hollow, ColMatrix};
use crate::tensor::scatter_add_scaled_rows;
use crate::{lit, to_f64, Error, Mat, Result, Rng, Scalar, Tensor3};

/// Parameters of one radius-adaptive layer.
///
/// Parameter count is `9*d*f + d + 1`: exactly a standard 3x3 kernel plus
/// the alpha selector.
#[derive(Debug, Clone, PartialEq)]
pub struct RacnnParams<T> {
    /// Input channels.
    pub d: usize,
    /// Filters (output channels).
    pub f: usize,
    /// 1x1 kernel, `d x f`. Doubles as the center of the 3x3 kernel.
    pub w1: Mat<T>,
    /// Hollow 3x3 kernel, `9d x f`, rows `[4d, 5d)` zero.
    pub w3_hollow: Mat<T>,
    /// Selector weights, length `d`.
    pub w_alpha: Vec<T>,
    /// Selector bias. Zero recovers the plain clipped 1x1 selector.
    pub b_alpha: T,
}

impl<T: Scalar> RacnnParams<T> {
    pub fn new(w1: Mat<T>, w3_hollow: Mat<T>, w_alpha: Vec<T>, b_alpha: T) -> Result<Self> {
        let d = w1.rows;
        let f = w1.cols;
        let p = Self { d, f, w1, w3_hollow, w_alpha, b_alpha };
        p.validate()?;
        Ok(p)
    }

    /// Seeded initialization: the 3x3 kernel is drawn fan-in scaled and then
    /// split into its center (`w1`) and hollow part; the selector starts
    /// near-dead with `b_alpha = 1` when `alpha_bias` is on, so the layer
    /// behaves as a standard 3x3 convolution and learns to prune. With
    /// `alpha_bias` off the bias is zero.
    pub fn random(rng: &mut Rng, d: usize, f: usize, alpha_bias: bool) -> Self {
        let scale = (6.0 / (9 * d) as f64).sqrt();
        let w3_dense = crate::tensor::random_mat(rng, 9 * d, f, -scale, scale);
        let mut w1 = Mat::zeros(d, f);
        w1.data.copy_from_slice(&w3_dense.data[4 * d * f..5 * d * f]);
        let w3_hollow = make_hollow(&w3_dense, &w1).expect("shapes match by construction");
        let a_scale = 0.1 / (d as f64).sqrt();
        let w_alpha = (0..d).map(|_| rng.uniform(-a_scale, a_scale)).collect();
        let b_alpha = if alpha_bias { T::one() } else { T::zero() };
        Self { d, f, w1, w3_hollow, w_alpha, b_alpha }
    }

    /// Pins alpha to a constant by zeroing the selector weights.
    pub fn force_alpha(&mut self, value: T) {
        self.w_alpha = vec![T::zero(); self.d];
        self.b_alpha = value;
    }

    /// Splits a dense 3x3 kernel into center and hollow parts, with alpha
    /// pinned to 1 so the layer computes exactly the dense convolution.
    pub fn from_dense(w3_dense: &Mat<T>) -> Result<Self> {
        if !w3_dense.rows.is_multiple_of(9) || w3_dense.rows == 0 {
            return Err(Error::Shape(format!(
                "dense 3x3 kernel must have rows divisible by 9, got {}",
                w3_dense.rows
            )));
        }
        let d = w3_dense.rows / 9;
        let f = w3_dense.cols;
        let mut w1 = Mat::zeros(d, f);
        w1.data.copy_from_slice(&w3_dense.data[4 * d * f..5 * d * f]);
        let w3_hollow = make_hollow(w3_dense, &w1)?;
        Self::new(w1, w3_hollow, vec![T::zero(); d], T::one())
    }

    pub fn param_count(&self) -> usize {
        9 * self.d * self.f + self.d + 1
    }

    pub fn validate(&self) -> Result<()> {
        let (d, f) = (self.d, self.f);
        if self.w1.rows != d || self.w1.cols != f {
            return Err(Error::Shape(format!(
                "w1 is {}x{}, expected {}x{}",
                self.w1.rows, self.w1.cols, d, f
            )));
        }
        if self.w3_hollow.rows != 9 * d || self.w3_hollow.cols != f {
            return Err(Error::Shape(format!(
                "w3_hollow is {}x{}, expected {}x{}",
                self.w3_hollow.rows,
                self.w3_hollow.cols,
                9 * d,
                f
            )));
        }
        if self.w_alpha.len() != d {
            return Err(Error::Shape(format!(
                "w_alpha has {} entries, expected {}",
                self.w_alpha.len(),
                d
            )));
        }
        for r in 4 * d..5 * d {
            if self.w3_hollow.row(r).iter().any(|&v| v != T::zero()) {
                return Err(Error::InvariantViolation(format!(
                    "hollow kernel center row {r} is nonzero"
                )));
            }
        }
        let finite = self.w1.all_finite()
            && self.w3_hollow.all_finite()
            && self.w_alpha.iter().all(|v| v.is_finite())
            && self.b_alpha.is_finite();
        if !finite {
            return Err(Error::NonFinite("layer parameters"));
        }
        Ok(())
    }
}

/// Dense 3x3 kernel with `w1` embedded at the center offset.
pub fn embed_center<T: Scalar>(params: &RacnnParams<T>) -> Mat<T> {
    let (d, f) = (params.d, params.f);
    let mut w3 = params.w3_hollow.clone();
    w3.data[4 * d * f..5 * d * f].copy_from_slice(&params.w1.data);
    w3
}

/// Hollow kernel from a dense 3x3 kernel: center rows zeroed. Under the
/// center-sharing constraint (`w3[center] == w1`) this equals subtracting
/// the zero-padded `w1` from `w3`.
pub fn make_hollow<T: Scalar>(w3_dense: &Mat<T>, w1: &Mat<T>) -> Result<Mat<T>> {
    let d = w1.rows;
    let f = w1.cols;
    if w3_dense.rows != 9 * d || w3_dense.cols != f {
        return Err(Error::Shape(format!(
            "w3_dense is {}x{}, expected {}x{}",
            w3_dense.rows,
            w3_dense.cols,
            9 * d,
            f
        )));
    }
    let mut hollow = w3_dense.clone();
    for v in &mut hollow.data[4 * d * f..5 * d * f] {
        *v = T::zero();
    }
    Ok(hollow)
}

/// Hollow kernel with the structurally-zero center rows removed: `8d x f`.
/// The sparse path multiplies gathered center-free rows against this.
pub fn hollow_compact<T: Scalar>(params: &RacnnParams<T>) -> Mat<T> {
    let (d, f) = (params.d, params.f);
    let mut m = Mat::zeros(8 * d, f);
    m.data[..4 * d * f].copy_from_slice(&params.w3_hollow.data[..4 * d * f]);
    m.data[4 * d * f..].copy_from_slice(&params.w3_hollow.data[5 * d * f..]);
    m
}

/// Standard convolution by lowering: `reshape(im2col(x, k) x w)`.
pub fn conv2d<T: Scalar>(x: &Tensor3<T>, w: &Mat<T>, k: usize) -> Result<Tensor3<T>> {
    conv2d_ex(x, w, k, 1)
}

pub fn conv2d_ex<T: Scalar>(
    x: &Tensor3<T>,
    w: &Mat<T>,
    k: usize,
    threads: usize,
) -> Result<Tensor3<T>> {
    let cm = im2col(x, k)?;
    if w.rows != k * k * x.d {
        return Err(Error::Shape(format!("kernel has {} rows, expected {}", w.rows, k * k * x.d)));
    }
    let out = matmul_ex(&cm.mat, w, threads)?;
    Tensor3::from_pixel_matrix(&out, x.h, x.c)
}

/// Per-pixel alpha field: the raw selector response and its clip to [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaMap<T> {
    pub raw: Vec<T>,
    pub clipped: Vec<T>,
}

/// Clips the raw selector response to [0, 1], keeping the raw values for
/// the backward pass. Rejects non-finite input.
pub fn clip01<T: Scalar>(raw: Vec<T>) -> Result<AlphaMap<T>> {
    let mut clipped = Vec::with_capacity(raw.len());
    for &v in &raw {
        if !v.is_finite() {
            return Err(Error::NonFinite("alpha selector response"));
        }
        clipped.push(if v <= T::zero() {
            T::zero()
        } else if v >= T::one() {
            T::one()
        } else {
            v
        });
    }
    Ok(AlphaMap { raw, clipped })
}

/// Row partition of the hard (binary-radius) path: which pixels take the
/// 3x3 branch, the complement, and the per-pixel index into whichever
/// split output holds that pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitPlan {
    pub rhat: Vec<bool>,
    pub mapping: Vec<usize>,
    pub idx_active: Vec<usize>,
    pub idx_rest: Vec<usize>,
}

/// Splits the two column matrices by per-pixel radius, producing the
/// mapping table in the same pass: row `p` of `i3` lands at `mapping[p]`
/// in the active output when `rhat[p]` holds, otherwise row `p` of `i1`
/// lands at `mapping[p]` in the rest output.
pub fn hard_split<T: Scalar>(
    i3: &ColMatrix<T>,
    i1: &ColMatrix<T>,
    rhat: &[bool],
) -> Result<(Mat<T>, Mat<T>, SplitPlan)> {
    if i3.rows() != rhat.len() || i1.rows() != rhat.len() {
        return Err(Error::Shape(format!(
            "split length mismatch: {} vs {} vs {}",
            i3.rows(),
            i1.rows(),
            rhat.len()
        )));
    }
    let mut mapping = vec![0usize; rhat.len()];
    let mut idx_active = Vec::new();
    let mut idx_rest = Vec::new();
    for (p, &r) in rhat.iter().enumerate() {
        if r {
            mapping[p] = idx_active.len();
            idx_active.push(p);
        } else {
            mapping[p] = idx_rest.len();
            idx_rest.push(p);
        }
    }
    let i3_hat = crate::tensor::gather_rows(&i3.mat, &idx_active)?;
    let i1_hat = crate::tensor::gather_rows(&i1.mat, &idx_rest)?;
    let plan = SplitPlan { rhat: rhat.to_vec(), mapping, idx_active, idx_rest };
    Ok((i3_hat, i1_hat, plan))
}

/// Inverse of [`hard_split`] on the outputs: row `p` of the result comes
/// from `o3[mapping[p]]` or `o1[mapping[p]]` depending on the branch.
pub fn hard_merge<T: Scalar>(o3: &Mat<T>, o1: &Mat<T>, plan: &SplitPlan) -> Result<Mat<T>> {
    if o3.rows != plan.idx_active.len() || o1.rows != plan.idx_rest.len() {
        return Err(Error::Shape(format!(
            "merge row mismatch: {} vs {} active, {} vs {} rest",
            o3.rows,
            plan.idx_active.len(),
            o1.rows,
            plan.idx_rest.len()
        )));
    }
    let cols = if plan.idx_active.is_empty() { o1.cols } else { o3.cols };
    if !plan.idx_active.is_empty() && !plan.idx_rest.is_empty() && o3.cols != o1.cols {
        return Err(Error::Shape(format!("merge column mismatch: {} vs {}", o3.cols, o1.cols)));
    }
    let mut out = Mat::zeros(plan.rhat.len(), cols);
    for (p, &r) in plan.rhat.iter().enumerate() {
        let src = if r { o3.row(plan.mapping[p]) } else { o1.row(plan.mapping[p]) };
        out.row_mut(p).copy_from_slice(src);
    }
    Ok(out)
}

/// One GEMM against the column-concatenated `(w_alpha | w1)` computes the
/// raw selector response and the 1x1 output together. Returns
/// `(alpha_raw, o1_prime)` where `alpha_raw` already includes `b_alpha`.
pub fn alpha_merged_gemm<T: Scalar>(
    i1: &ColMatrix<T>,
    params: &RacnnParams<T>,
) -> Result<(Vec<T>, Mat<T>)> {
    alpha_merged_gemm_ex(i1, params, 1)
}

pub fn alpha_merged_gemm_ex<T: Scalar>(
    i1: &ColMatrix<T>,
    params: &RacnnParams<T>,
    threads: usize,
) -> Result<(Vec<T>, Mat<T>)> {
    let (d, f) = (params.d, params.f);
    if i1.mat.cols != d {
        return Err(Error::Shape(format!(
            "1x1 columns {} do not match layer depth {}",
            i1.mat.cols, d
        )));
    }
    let mut concat = Mat::zeros(d, 1 + f);
    for t in 0..d {
        concat.data[t * (1 + f)] = params.w_alpha[t];
        concat.data[t * (1 + f) + 1..(t + 1) * (1 + f)].copy_from_slice(params.w1.row(t));
    }
    let fused = matmul_ex(&i1.mat, &concat, threads)?;
    let rows = fused.rows;
    let mut alpha_raw = Vec::with_capacity(rows);
    let mut o1p = Mat::zeros(rows, f);
    for p in 0..rows {
        let row = fused.row(p);
        alpha_raw.push(row[0] + params.b_alpha);
        o1p.row_mut(p).copy_from_slice(&row[1..]);
    }
    Ok((alpha_raw, o1p))
}

/// Everything the backward pass needs from a dense forward.
#[derive(Debug, Clone)]
pub struct DenseCache<T> {
    pub alpha: AlphaMap<T>,
    /// `I_3 x w3_hollow`, `h*c x f`.
    pub hollow_out: Mat<T>,
    pub i1: ColMatrix<T>,
    pub i3: ColMatrix<T>,
}

/// Reference no-skip forward: every pixel's blend is evaluated. This is
/// the trainability-preserving path; use [`racnn_forward_sparse`] for
/// inference.
pub fn racnn_forward_dense<T: Scalar>(
    x: &Tensor3<T>,
    params: &RacnnParams<T>,
) -> Result<(Tensor3<T>, AlphaMap<T>)> {
    let (out, cache) = racnn_forward_dense_cached(x, params, 1)?;
    Ok((out, cache.alpha))
}

pub fn racnn_forward_dense_cached<T: Scalar>(
    x: &Tensor3<T>,
    params: &RacnnParams<T>,
    threads: usize,
) -> Result<(Tensor3<T>, DenseCache<T>)> {
    if x.d != params.d {
        return Err(Error::Shape(format!(
            "input depth {} does not match layer depth {}",
            x.d, params.d
        )));
    }
    let i1 = im2col(x, 1)?;
    let i3 = im2col(x, 3)?;
    let (raw, o1p) = alpha_merged_gemm_ex(&i1, params, threads)?;
    let alpha = clip01(raw)?;
    let hollow_out = matmul_ex(&i3.mat, &params.w3_hollow, threads)?;
    let f = params.f;
    let mut out = o1p;
    for p in 0..out.rows {
        let a = alpha.clipped[p];
        let srow = hollow_out.row(p);
        let orow = out.row_mut(p);
        for j in 0..f {
            orow[j] = orow[j] + a * srow[j];
        }
    }
    let out = Tensor3::from_pixel_matrix(&out, x.h, x.c)?;
    Ok((out, DenseCache { alpha, hollow_out, i1, i3 }))
}

/// Alpha histogram and executed-work counters from one sparse forward.
/// Counts are kept alongside the derived fractions so stats from many
/// forwards can be pooled without rounding.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SparseStats {
    pub total_pixels: usize,
    /// Pixels with `alpha > tau`, whose rows were gathered.
    pub active_pixels: usize,
    pub skipped_pixels: usize,
    pub zero_pixels: usize,
    pub one_pixels: usize,
    pub mid_pixels: usize,
    pub fraction_alpha_zero: f64,
    pub fraction_alpha_one: f64,
    pub fraction_alpha_mid: f64,
    /// Multiply-accumulates the sparse path executed (both GEMMs).
    pub mac_count: u64,
    /// Multiply-accumulates of a standard 3x3 convolution at these dims.
    pub mac_standard: u64,
}

impl SparseStats {
    fn from_alpha<T: Scalar>(alpha: &AlphaMap<T>, tau: T, d: usize, f: usize) -> Self {
        let total = alpha.clipped.len();
        let mut zeros = 0usize;
        let mut ones = 0usize;
        let mut active = 0usize;
        for &a in &alpha.clipped {
            if a == T::zero() {
                zeros += 1;
            } else if a == T::one() {
                ones += 1;
            }
            if a > tau {
                active += 1;
            }
        }
        let mut s = SparseStats {
            total_pixels: total,
            active_pixels: active,
            skipped_pixels: total - active,
            zero_pixels: zeros,
            one_pixels: ones,
            mid_pixels: total - zeros - ones,
            fraction_alpha_zero: 0.0,
            fraction_alpha_one: 0.0,
            fraction_alpha_mid: 0.0,
            mac_count: (total * d * (1 + f)) as u64 + (active * 8 * d * f) as u64,
            mac_standard: (total * 9 * d * f) as u64,
        };
        s.refresh_fractions();
        s
    }

    pub fn empty() -> Self {
        SparseStats {
            total_pixels: 0,
            active_pixels: 0,
            skipped_pixels: 0,
            zero_pixels: 0,
            one_pixels: 0,
            mid_pixels: 0,
            fraction_alpha_zero: 0.0,
            fraction_alpha_one: 0.0,
            fraction_alpha_mid: 0.0,
            mac_count: 0,
            mac_standard: 0,
        }
    }

    /// Pools counts from another forward and rederives the fractions.
    pub fn merge(&mut self, other: &SparseStats) {
        self.total_pixels += other.total_pixels;
        self.active_pixels += other.active_pixels;
        self.skipped_pixels += other.skipped_pixels;
        self.zero_pixels += other.zero_pixels;
        self.one_pixels += other.one_pixels;
        self.mid_pixels += other.mid_pixels;
        self.mac_count += other.mac_count;
        self.mac_standard += other.mac_standard;
        self.refresh_fractions();
    }

    fn refresh_fractions(&mut self) {
        if self.total_pixels == 0 {
            return;
        }
        let n = self.total_pixels as f64;
        self.fraction_alpha_zero = self.zero_pixels as f64 / n;
        self.fraction_alpha_one = self.one_pixels as f64 / n;
        self.fraction_alpha_mid = self.mid_pixels as f64 / n;
    }
}

/// Optimized forward: after the fused selector/1x1 GEMM, only rows with
/// `alpha > tau` are gathered (center offset dropped) for the hollow GEMM,
/// and the scaled products are scatter-added into the 1x1 output. With
/// `tau = 0` this equals the dense path to within float reassociation.
pub fn racnn_forward_sparse<T: Scalar>(
    x: &Tensor3<T>,
    params: &RacnnParams<T>,
    tau: f64,
) -> Result<(Tensor3<T>, AlphaMap<T>, SparseStats)> {
    racnn_forward_sparse_ex(x, params, tau, 1)
}

pub fn racnn_forward_sparse_ex<T: Scalar>(
    x: &Tensor3<T>,
    params: &RacnnParams<T>,
    tau: f64,
    threads: usize,
) -> Result<(Tensor3<T>, AlphaMap<T>, SparseStats)> {
    if !(0.0..1.0).contains(&tau) {
        return Err(Error::InvalidArgument(format!("tau must be in [0, 1), got {tau}")));
    }
    if x.d != params.d {
        return Err(Error::Shape(format!(
            "input depth {} does not match layer depth {}",
            x.d, params.d
        )));
    }
    let tau_t: T = lit(tau);
    let i1 = im2col(x, 1)?;
    let (raw, mut o1p) = alpha_merged_gemm_ex(&i1, params, threads)?;
    let alpha = clip01(raw)?;
    let active: Vec<usize> =
        alpha.clipped.iter().enumerate().filter(|(_, &a)| a > tau_t).map(|(p, _)| p).collect();
    let stats = SparseStats::from_alpha(&alpha, tau_t, params.d, params.f);
    if !active.is_empty() {
        let gathered = im2col_rows_hollow(x, &active)?;
        let compact = hollow_compact(params);
        let prod = matmul_ex(&gathered, &compact, threads)?;
        let scales: Vec<T> = active.iter().map(|&p| alpha.clipped[p]).collect();
        scatter_add_scaled_rows(&mut o1p, &prod, &active, &scales)?;
    }
    let out = Tensor3::from_pixel_matrix(&o1p, x.h, x.c)?;
    Ok((out, alpha, stats))
}

/// Gradients shaped like [`RacnnParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct RacnnGrads<T> {
    pub w1: Mat<T>,
    pub w3_hollow: Mat<T>,
    pub w_alpha: Vec<T>,
    pub b_alpha: T,
}

/// Backward pass for the dense forward. `g` is the cotangent of the layer
/// output as an `h*c x f` matrix.
///
/// The clip contributes the subgradient `1` strictly inside `(0, 1)` and
/// `0` elsewhere, including exactly at the boundaries. The hollow center
/// rows of the kernel gradient are re-zeroed so updates stay on the
/// constraint surface.
pub fn racnn_backward<T: Scalar>(
    params: &RacnnParams<T>,
    cache: &DenseCache<T>,
    g: &Mat<T>,
) -> Result<(RacnnGrads<T>, Tensor3<T>)> {
    let (d, f) = (params.d, params.f);
    let pixels = cache.i1.rows();
    if g.rows != pixels || g.cols != f {
        return Err(Error::Shape(format!(
            "cotangent is {}x{}, expected {}x{}",
            g.rows, g.cols, pixels, f
        )));
    }
    if cache.hollow_out.rows != pixels || cache.hollow_out.cols != f {
        return Err(Error::Shape("forward cache does not match cotangent".into()));
    }

    // d(loss)/d(alpha_raw[p]) through the blend and the clip.
    let mut dalpha = Mat::zeros(pixels, 1);
    for p in 0..pixels {
        let raw = cache.alpha.raw[p];
        if raw > T::zero() && raw < T::one() {
            let mut acc = T::zero();
            let grow = g.row(p);
            let srow = cache.hollow_out.row(p);
            for j in 0..f {
                acc = acc + grow[j] * srow[j];
            }
            dalpha.data[p] = acc;
        }
    }

    // alpha-scaled cotangent feeding the hollow branch.
    let mut ag = g.clone();
    for p in 0..pixels {
        let a = cache.alpha.clipped[p];
        for v in ag.row_mut(p) {
            *v = *v * a;
        }
    }

    let i1_t = cache.i1.mat.transpose();
    let i3_t = cache.i3.mat.transpose();
    let grad_w1 = matmul(&i1_t, g)?;
    let mut grad_w3 = matmul(&i3_t, &ag)?;
    for v in &mut grad_w3.data[4 * d * f..5 * d * f] {
        *v = T::zero();
    }
    let grad_w_alpha_mat = matmul(&i1_t, &dalpha)?;
    let grad_b_alpha = dalpha.data.iter().fold(T::zero(), |s, &v| s + v);

    // Input gradient: 1x1 branch + hollow branch (through im2col's
    // adjoint) + selector branch.
    let g_w1t = matmul(g, &params.w1.transpose())?;
    let ag_w3t = matmul(&ag, &params.w3_hollow.transpose())?;
    let w_alpha_row = Mat { rows: 1, cols: d, data: params.w_alpha.clone() };
    let da_wat = matmul(&dalpha, &w_alpha_row)?;
    let (h, c) = (cache.i3.h, cache.i3.c);
    let hollow_x = col2im(&ag_w3t, h, c, d, 3)?;
    let mut grad_x = Tensor3::from_pixel_matrix(&g_w1t, h, c)?;
    for (gv, (hv, sv)) in grad_x.data.iter_mut().zip(hollow_x.data.iter().zip(&da_wat.data)) {
        *gv = *gv + *hv + *sv;
    }

    let grads = RacnnGrads {
        w1: grad_w1,
        w3_hollow: grad_w3,
        w_alpha: grad_w_alpha_mat.data,
        b_alpha: grad_b_alpha,
    };
    Ok((grads, grad_x))
}

/// Arithmetic-cost model: a layer where a fraction `p_zero` of pixels has
/// `alpha == 0` costs `1/9 + (1 - p_zero) * 8/9` of a standard 3x3
/// convolution. Written as one division so the halfway point is exactly
/// `5/9`.
pub fn predict_time_factor(p_zero: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p_zero) {
        return Err(Error::InvalidArgument(format!("fraction must be in [0, 1], got {p_zero}")));
    }
    Ok((1.0 + (1.0 - p_zero) * 8.0) / 9.0)
}

/// Selector weights that zero out approximately `frac` of the pixels:
/// `alpha'` becomes `x[p, 0] - threshold` with the threshold placed at the
/// requested quantile of channel 0 (midpoint between order statistics, so
/// ties aside the split is exact). Used to make the cost model's
/// independent variable directly adjustable on synthetic inputs.
pub fn selector_for_zero_fraction<T: Scalar>(x: &Tensor3<T>, frac: f64) -> Result<(Vec<T>, T)> {
    if !(0.0..=1.0).contains(&frac) {
        return Err(Error::InvalidArgument(format!("fraction must be in [0, 1], got {frac}")));
    }
    let n = x.pixels();
    let mut channel0: Vec<f64> = (0..n).map(|p| to_f64(x.pixel(p)[0])).collect();
    channel0.sort_by(|a, b| a.partial_cmp(b).expect("finite tensor"));
    let z = (frac * n as f64).round() as usize;
    let threshold = if z == 0 {
        channel0[0] - 1.0
    } else if z >= n {
        channel0[n - 1] + 1.0
    } else {
        0.5 * (channel0[z - 1] + channel0[z])
    };
    let mut w_alpha = vec![T::zero(); x.d];
    w_alpha[0] = T::one();
    Ok((w_alpha, lit(-threshold)))
}
