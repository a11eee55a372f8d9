//! Dense tensors, matrices, deterministic RNG, and row gather/scatter.
//!
//! Layout conventions used everywhere:
//!
//! - [`Tensor3`] is pixel-major with channels innermost: element
//!   `(i, j, ch)` lives at `(i * c + j) * d + ch`. A pixel's channels are
//!   one contiguous block, which makes image-to-column rows (and therefore
//!   row gather/scatter) contiguous copies.
//! - [`Mat`] is row-major.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::{lit, Error, Result, Scalar};

/// An `h x c x d` feature map: `h * c` pixels of `d` channels each.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3<T> {
    pub h: usize,
    pub c: usize,
    pub d: usize,
    pub data: Vec<T>,
}

impl<T: Scalar> Tensor3<T> {
    pub fn zeros(h: usize, c: usize, d: usize) -> Result<Self> {
        check_dims(h, c, d)?;
        Ok(Self { h, c, d, data: vec![T::zero(); h * c * d] })
    }

    pub fn from_vec(h: usize, c: usize, d: usize, data: Vec<T>) -> Result<Self> {
        check_dims(h, c, d)?;
        if data.len() != h * c * d {
            return Err(Error::Shape(format!(
                "tensor data length {} != {}x{}x{}",
                data.len(),
                h,
                c,
                d
            )));
        }
        Ok(Self { h, c, d, data })
    }

    /// Number of pixels (`h * c`).
    #[inline]
    pub fn pixels(&self) -> usize {
        self.h * self.c
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, ch: usize) -> T {
        self.data[(i * self.c + j) * self.d + ch]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, ch: usize, v: T) {
        self.data[(i * self.c + j) * self.d + ch] = v;
    }

    /// Channel block of one pixel.
    #[inline]
    pub fn pixel(&self, p: usize) -> &[T] {
        &self.data[p * self.d..(p + 1) * self.d]
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Views the tensor as an `(h*c) x d` matrix. No data movement: the
    /// pixel-major layout already is that matrix.
    pub fn as_pixel_matrix(&self) -> Mat<T> {
        Mat { rows: self.h * self.c, cols: self.d, data: self.data.clone() }
    }

    /// Inverse of [`as_pixel_matrix`](Self::as_pixel_matrix) for a matrix
    /// with `h*c` rows.
    pub fn from_pixel_matrix(m: &Mat<T>, h: usize, c: usize) -> Result<Self> {
        if m.rows != h * c {
            return Err(Error::Shape(format!(
                "pixel matrix has {} rows, expected {}x{}={}",
                m.rows,
                h,
                c,
                h * c
            )));
        }
        Self::from_vec(h, c, m.cols, m.data.clone())
    }
}

fn check_dims(h: usize, c: usize, d: usize) -> Result<()> {
    if h == 0 || c == 0 || d == 0 {
        return Err(Error::InvalidArgument(format!(
            "tensor dimensions must be >= 1, got {}x{}x{}",
            h, c, d
        )));
    }
    Ok(())
}

/// Row-major 2-D matrix. Zero rows are allowed (empty gather results).
#[derive(Debug, Clone, PartialEq)]
pub struct Mat<T> {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<T>,
}

impl<T: Scalar> Mat<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "matrix data length {} != {}x{}",
                data.len(),
                rows,
                cols
            )));
        }
        Ok(Self { rows, cols, data })
    }

    /// Identity matrix of order `n`.
    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = T::one();
        }
        m
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.cols + j] = v;
    }

    pub fn transpose(&self) -> Mat<T> {
        let mut t = Mat::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        t
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Largest absolute element-wise difference. Shapes must match.
    pub fn max_abs_diff(&self, other: &Mat<T>) -> f64 {
        assert_eq!(self.rows, other.rows);
        assert_eq!(self.cols, other.cols);
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| crate::to_f64((*a - *b).abs()))
            .fold(0.0, f64::max)
    }
}

/// Deterministic random number generator.
///
/// A fixed seed yields a bit-exact stream across runs and platforms. Floats
/// are derived from the raw 64-bit output as `(x >> 11) * 2^-53`, so the
/// stream does not depend on any distribution library internals.
#[derive(Debug, Clone)]
pub struct Rng {
    seed: u64,
    state: ChaCha8Rng,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self { seed, state: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state.next_u64()
    }

    /// Uniform in `[0, 1)` with 53 random mantissa bits.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[lo, hi)`.
    #[inline]
    pub fn uniform<T: Scalar>(&mut self, lo: f64, hi: f64) -> T {
        lit(lo + (hi - lo) * self.next_f64())
    }

    /// Uniform integer in `[0, n)` by rejection, bias-free.
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0);
        let n = n as u64;
        let zone = u64::MAX - (u64::MAX % n);
        loop {
            let v = self.next_u64();
            if v < zone {
                return (v % n) as usize;
            }
        }
    }

    /// In-place Fisher-Yates shuffle.
    pub fn shuffle<E>(&mut self, xs: &mut [E]) {
        for i in (1..xs.len()).rev() {
            let j = self.below(i + 1);
            xs.swap(i, j);
        }
    }
}

/// A fresh tensor with elements uniform in `[-1, 1)`, deterministic per seed.
pub fn random_tensor<T: Scalar>(rng: &mut Rng, h: usize, c: usize, d: usize) -> Result<Tensor3<T>> {
    check_dims(h, c, d)?;
    let data = (0..h * c * d).map(|_| rng.uniform(-1.0, 1.0)).collect();
    Tensor3::from_vec(h, c, d, data)
}

/// Matrix with elements uniform in `[lo, hi)`.
pub fn random_mat<T: Scalar>(rng: &mut Rng, rows: usize, cols: usize, lo: f64, hi: f64) -> Mat<T> {
    let data = (0..rows * cols).map(|_| rng.uniform(lo, hi)).collect();
    Mat { rows, cols, data }
}

/// Copies the selected rows of `a`, in `idx` order, into a new matrix.
pub fn gather_rows<T: Scalar>(a: &Mat<T>, idx: &[usize]) -> Result<Mat<T>> {
    let mut out = Mat::zeros(idx.len(), a.cols);
    for (i, &p) in idx.iter().enumerate() {
        if p >= a.rows {
            return Err(Error::IndexOutOfRange { index: p, len: a.rows });
        }
        out.row_mut(i).copy_from_slice(a.row(p));
    }
    Ok(out)
}

/// For each `i`, adds `scale[i] * src[i, :]` into `dst[idx[i], :]`.
/// Indices must be unique and in range; other rows are untouched.
pub fn scatter_add_scaled_rows<T: Scalar>(
    dst: &mut Mat<T>,
    src: &Mat<T>,
    idx: &[usize],
    scale: &[T],
) -> Result<()> {
    if idx.len() != src.rows || scale.len() != src.rows {
        return Err(Error::Shape(format!(
            "scatter lengths disagree: {} indices, {} scales, {} source rows",
            idx.len(),
            scale.len(),
            src.rows
        )));
    }
    if src.cols != dst.cols {
        return Err(Error::Shape(format!(
            "scatter column mismatch: src {} vs dst {}",
            src.cols, dst.cols
        )));
    }
    let mut seen = vec![false; dst.rows];
    for (i, &p) in idx.iter().enumerate() {
        if p >= dst.rows {
            return Err(Error::IndexOutOfRange { index: p, len: dst.rows });
        }
        if seen[p] {
            return Err(Error::DuplicateIndex(p));
        }
        seen[p] = true;
        let s = scale[i];
        let drow = dst.row_mut(p);
        for (dv, &sv) in drow.iter_mut().zip(src.row(i)) {
            *dv = *dv + s * sv;
        }
    }
    Ok(())
}
