//! CPU engine for radius-adaptive convolution.
//!
//! A radius-adaptive layer blends a 1x1 and a 3x3 convolution per pixel
//! through a learned selector `alpha` in [0, 1]. Because the 3x3 kernel
//! shares its center tap with the 1x1 kernel, the blend reduces to a 1x1
//! convolution plus an alpha-scaled *hollow* 3x3 convolution, and pixels
//! with `alpha == 0` skip the 3x3 work entirely. Everything lowers to
//! image-to-column transforms and GEMM, so the skip is a row gather before
//! the second multiplication and a scaled scatter-add after it.
//!
//! The crate is organized as:
//!
//! - [`tensor`]: dense rank-3 tensors, matrices, deterministic RNG, row
//!   gather/scatter.
//! - [`gemm`]: reference and cache-blocked matrix multiplication kernels.
//! - [`lowering`]: image-to-column and its adjoint.
//! - [`conv`]: standard convolution, hard split/merge, the soft
//!   radius-adaptive forward (dense and sparse) and its backward pass.
//! - [`nn`]: a minimal layer zoo, graph runner, Adam trainer, and dataset
//!   loaders for toy-scale experiments.
//! - [`io`]: deterministic binary serialization of graphs.
//!
//! All numeric code is generic over [`Scalar`] (`f32` for production,
//! `f64` for gradient checking).

pub mod conv;
mod error;
pub mod gemm;
pub mod io;
pub mod lowering;
pub mod nn;
mod scalar;
pub mod tensor;

pub use error::{Error, Result};
pub use scalar::{lit, to_f64, Scalar};

pub use conv::{
    alpha_merged_gemm, clip01, conv2d, embed_center, hard_merge, hard_split, make_hollow,
    predict_time_factor, racnn_backward, racnn_forward_dense, racnn_forward_sparse, AlphaMap,
    RacnnGrads, RacnnParams, SparseStats, SplitPlan,
};
pub use gemm::{matmul, matmul_naive};
pub use lowering::{col2im, im2col, ColMatrix};
pub use tensor::{gather_rows, random_tensor, scatter_add_scaled_rows, Mat, Rng, Tensor3};
