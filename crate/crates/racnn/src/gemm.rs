//! Matrix multiplication kernels.
//!
//! Two kernels with the same accumulation order over the inner dimension:
//!
//! - [`matmul_naive`]: the reference triple loop, kept as the oracle every
//!   faster path is checked against.
//! - [`matmul`]: register-blocked rows with an axpy inner loop that streams
//!   rows of `b`. Summation still runs over `t` in increasing order, so the
//!   two kernels agree to within floating-point reassociation and runs are
//!   bit-reproducible single-threaded.
//!
//! [`matmul_threaded`] partitions output rows across workers; each row is
//! computed by the same blocked kernel, so the result is identical to the
//! single-threaded one.

use crate::{Error, Mat, Result, Scalar};

/// Rows of `a` processed together so each loaded row of `b` is reused.
const ROW_BLOCK: usize = 4;

fn check_dims<T: Scalar>(a: &Mat<T>, b: &Mat<T>) -> Result<()> {
    if a.cols != b.rows {
        return Err(Error::Shape(format!("matmul {}x{} by {}x{}", a.rows, a.cols, b.rows, b.cols)));
    }
    Ok(())
}

/// Reference kernel: `c[i,j] = sum_t a[i,t] * b[t,j]`, `t` ascending.
pub fn matmul_naive<T: Scalar>(a: &Mat<T>, b: &Mat<T>) -> Result<Mat<T>> {
    check_dims(a, b)?;
    let (m, k, n) = (a.rows, a.cols, b.cols);
    let mut c = Mat::zeros(m, n);
    for i in 0..m {
        for j in 0..n {
            let mut acc = T::zero();
            for t in 0..k {
                acc = acc + a.data[i * k + t] * b.data[t * n + j];
            }
            c.data[i * n + j] = acc;
        }
    }
    Ok(c)
}

/// Production kernel. See module docs for the ordering contract.
pub fn matmul<T: Scalar>(a: &Mat<T>, b: &Mat<T>) -> Result<Mat<T>> {
    check_dims(a, b)?;
    let mut c = Mat::zeros(a.rows, b.cols);
    gemm_band(&a.data, a.rows, a.cols, &b.data, b.cols, &mut c.data);
    Ok(c)
}

/// Blocked kernel over a row band: `a` is `m x k`, `b` is `k x n`, `out` a
/// preallocated zeroed `m * n` buffer.
fn gemm_band<T: Scalar>(a: &[T], m: usize, k: usize, b: &[T], n: usize, out: &mut [T]) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(out.len(), m * n);
    if n == 0 || k == 0 {
        return;
    }
    let mut i0 = 0;
    while i0 < m {
        let ib = ROW_BLOCK.min(m - i0);
        let c_block = &mut out[i0 * n..(i0 + ib) * n];
        for t in 0..k {
            let b_row = &b[t * n..t * n + n];
            for (ii, c_row) in c_block.chunks_exact_mut(n).enumerate() {
                let a_it = a[(i0 + ii) * k + t];
                for (cv, &bv) in c_row.iter_mut().zip(b_row) {
                    *cv = *cv + a_it * bv;
                }
            }
        }
        i0 += ib;
    }
}

/// Blocked kernel with output rows partitioned over `threads` workers.
/// Bit-identical to [`matmul`] for any worker count.
pub fn matmul_threaded<T: Scalar>(a: &Mat<T>, b: &Mat<T>, threads: usize) -> Result<Mat<T>> {
    check_dims(a, b)?;
    let threads = threads.max(1).min(a.rows.max(1));
    if threads == 1 {
        return matmul(a, b);
    }
    let (m, k, n) = (a.rows, a.cols, b.cols);
    let mut c = Mat::zeros(m, n);
    // Chunk rows so every thread gets a contiguous band.
    let rows_per = m.div_ceil(threads);
    std::thread::scope(|scope| {
        let mut rest = c.data.as_mut_slice();
        let mut row0 = 0;
        while row0 < m {
            let band = rows_per.min(m - row0);
            let (mine, tail) = rest.split_at_mut(band * n);
            rest = tail;
            let a_band = &a.data[row0 * k..(row0 + band) * k];
            scope.spawn(move || gemm_band(a_band, band, k, &b.data, n, mine));
            row0 += band;
        }
    });
    Ok(c)
}

/// Entry point the convolution paths use: single-threaded unless asked.
pub fn matmul_ex<T: Scalar>(a: &Mat<T>, b: &Mat<T>, threads: usize) -> Result<Mat<T>> {
    if threads <= 1 {
        matmul(a, b)
    } else {
        matmul_threaded(a, b, threads)
    }
}
