//! Image-to-column transform and its adjoint.
//!
//! `im2col` copies each pixel's `k x k x d` neighborhood into one matrix
//! row so convolution becomes a single GEMM. The fixed ordering contract,
//! which kernel matrices must match:
//!
//! - pixel `(i, j)` maps to row `p = i * c + j`;
//! - within a row, kernel offsets are scanned row-major (`dy` outer, `dx`
//!   inner, both from `-r` to `r`), with the `d` channels innermost per
//!   offset;
//! - taps outside the image are zero (same padding, stride 1), so output
//!   resolution always equals input resolution.
//!
//! Only `k = 1` and `k = 3` are accepted; those are the two radii the
//! adaptive convolution selects between.

use crate::{Error, Mat, Result, Scalar, Tensor3};

/// Column matrix produced by [`im2col`]: `h*c` rows of `k*k*d` values,
/// carrying its source dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct ColMatrix<T> {
    pub mat: Mat<T>,
    pub h: usize,
    pub c: usize,
    pub d: usize,
    pub k: usize,
}

impl<T: Scalar> ColMatrix<T> {
    #[inline]
    pub fn rows(&self) -> usize {
        self.mat.rows
    }

    #[inline]
    pub fn row(&self, p: usize) -> &[T] {
        self.mat.row(p)
    }
}

fn check_kernel(k: usize) -> Result<()> {
    if k.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!("kernel size {k} is even")));
    }
    if k != 1 && k != 3 {
        return Err(Error::InvalidArgument(format!("kernel size {k} unsupported (only 1 and 3)")));
    }
    Ok(())
}

/// Lowers a feature map to its column matrix. For `k = 1` this is a pure
/// reshape: the pixel-major layout already has one pixel per row.
pub fn im2col<T: Scalar>(x: &Tensor3<T>, k: usize) -> Result<ColMatrix<T>> {
    check_kernel(k)?;
    let (h, c, d) = (x.h, x.c, x.d);
    if k == 1 {
        return Ok(ColMatrix { mat: x.as_pixel_matrix(), h, c, d, k });
    }
    let r = (k / 2) as isize;
    let cols = k * k * d;
    let mut mat = Mat::zeros(h * c, cols);
    for i in 0..h {
        for j in 0..c {
            let row = mat.row_mut(i * c + j);
            let mut base = 0;
            for dy in -r..=r {
                for dx in -r..=r {
                    let (si, sj) = (i as isize + dy, j as isize + dx);
                    if si >= 0 && si < h as isize && sj >= 0 && sj < c as isize {
                        let src = (si as usize * c + sj as usize) * d;
                        row[base..base + d].copy_from_slice(&x.data[src..src + d]);
                    }
                    base += d;
                }
            }
        }
    }
    Ok(ColMatrix { mat, h, c, d, k })
}

/// Adjoint of [`im2col`]: each input element accumulates every column-matrix
/// entry it was copied into; padding taps are discarded.
pub fn col2im<T: Scalar>(g: &Mat<T>, h: usize, c: usize, d: usize, k: usize) -> Result<Tensor3<T>> {
    check_kernel(k)?;
    if g.rows != h * c || g.cols != k * k * d {
        return Err(Error::Shape(format!(
            "col2im expects {}x{} input, got {}x{}",
            h * c,
            k * k * d,
            g.rows,
            g.cols
        )));
    }
    if k == 1 {
        return Tensor3::from_vec(h, c, d, g.data.clone());
    }
    let r = (k / 2) as isize;
    let mut x = Tensor3::zeros(h, c, d)?;
    for i in 0..h {
        for j in 0..c {
            let row = g.row(i * c + j);
            let mut base = 0;
            for dy in -r..=r {
                for dx in -r..=r {
                    let (si, sj) = (i as isize + dy, j as isize + dx);
                    if si >= 0 && si < h as isize && sj >= 0 && sj < c as isize {
                        let dst = (si as usize * c + sj as usize) * d;
                        for ch in 0..d {
                            x.data[dst + ch] = x.data[dst + ch] + row[base + ch];
                        }
                    }
                    base += d;
                }
            }
        }
    }
    Ok(x)
}

/// Builds rows of the 3x3 column matrix for the selected pixels only, with
/// the center offset dropped: `len(idx)` rows of `8 * d` values.
///
/// This is the gather the sparse path runs against the hollow kernel; it
/// reads straight from the source tensor so inactive pixels cost nothing.
/// Row `i` equals row `idx[i]` of `im2col(x, 3)` minus its center block.
pub fn im2col_rows_hollow<T: Scalar>(x: &Tensor3<T>, idx: &[usize]) -> Result<Mat<T>> {
    let (h, c, d) = (x.h, x.c, x.d);
    let pixels = h * c;
    let mut mat = Mat::zeros(idx.len(), 8 * d);
    for (out_i, &p) in idx.iter().enumerate() {
        if p >= pixels {
            return Err(Error::IndexOutOfRange { index: p, len: pixels });
        }
        let (i, j) = ((p / c) as isize, (p % c) as isize);
        let row = mat.row_mut(out_i);
        let mut base = 0;
        for dy in -1isize..=1 {
            for dx in -1isize..=1 {
                if dy == 0 && dx == 0 {
                    continue;
                }
                let (si, sj) = (i + dy, j + dx);
                if si >= 0 && si < h as isize && sj >= 0 && sj < c as isize {
                    let src = (si as usize * c + sj as usize) * d;
                    row[base..base + d].copy_from_slice(&x.data[src..src + d]);
                }
                base += d;
            }
        }
    }
    Ok(mat)
}

/// Number of input-element copies `im2col(x, k)` performs, i.e. `k*k` per
/// element minus the taps clipped at borders.
pub fn copy_count(h: usize, c: usize, k: usize) -> usize {
    let r = (k / 2) as isize;
    let mut total = 0usize;
    for i in 0..h as isize {
        for j in 0..c as isize {
            let dys = (i.min(r) - (-r).max(i - (h as isize - 1)) + 1).max(0);
            let dxs = (j.min(r) - (-r).max(j - (c as isize - 1)) + 1).max(0);
            total += (dys * dxs) as usize;
        }
    }
    total
}
