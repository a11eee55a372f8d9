//! Self-contained correctness suites runnable on any install: each one
//! re-derives an expected result from an independent oracle and compares
//! against the optimized path. `corrupt_hollow` deliberately breaks a
//! kernel so the invariant suite can demonstrate that it catches damage.

use racnn::conv::{racnn_forward_dense_cached, DenseCache};
use racnn::lowering::im2col_rows_hollow;
use racnn::tensor::random_mat;
use racnn::{
    col2im, conv2d, embed_center, hard_merge, hard_split, im2col, lit, matmul, matmul_naive,
    racnn_backward, racnn_forward_dense, racnn_forward_sparse, random_tensor, to_f64, Mat,
    RacnnParams, Rng, Scalar, Tensor3,
};
use serde::Serialize;

#[derive(Debug, Clone, Copy)]
pub struct SelfcheckConfig {
    /// Run the numeric suites in f64 and tighten the gradient tolerance.
    pub fp64: bool,
    /// Test hook: leave a nonzero center weight in place so the
    /// hollow-invariant suite fails.
    pub corrupt_hollow: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteResult {
    pub suite: &'static str,
    pub pass: bool,
    pub detail: String,
}

type Suite = fn(&SelfcheckConfig) -> Result<String, String>;

pub fn run_selfcheck(cfg: &SelfcheckConfig) -> Vec<SuiteResult> {
    let suites: [(&'static str, Suite); 7] = [
        ("gemm-vs-naive", gemm_vs_naive),
        ("im2col-adjoint", im2col_adjoint),
        ("split-merge-roundtrip", split_merge_roundtrip),
        ("alpha-equivalence", alpha_equivalence),
        ("sparse-vs-dense", sparse_vs_dense),
        ("gradient-check", gradient_check),
        ("hollow-invariant", hollow_invariant),
    ];
    suites
        .iter()
        .map(|&(suite, f)| match f(cfg) {
            Ok(detail) => SuiteResult { suite, pass: true, detail },
            Err(detail) => SuiteResult { suite, pass: false, detail },
        })
        .collect()
}

fn max_abs<T: Scalar>(a: &[T], b: &[T]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| (to_f64(x) - to_f64(y)).abs()).fold(0.0, f64::max)
}

fn gemm_vs_naive(cfg: &SelfcheckConfig) -> Result<String, String> {
    fn go<T: Scalar>() -> Result<String, String> {
        let mut rng = Rng::new(101);
        for case in 0..8 {
            let (m, k, n) = (1 + rng.below(24), 1 + rng.below(24), 1 + rng.below(24));
            let a = random_mat::<T>(&mut rng, m, k, -1.0, 1.0);
            let b = random_mat::<T>(&mut rng, k, n, -1.0, 1.0);
            let fast = matmul(&a, &b).map_err(|e| e.to_string())?;
            let slow = matmul_naive(&a, &b).map_err(|e| e.to_string())?;
            if fast != slow {
                return Err(format!(
                    "case {case} ({m}x{k}x{n}): blocked and naive products disagree"
                ));
            }
        }
        Ok("8 shapes, bit-identical".into())
    }
    if cfg.fp64 {
        go::<f64>()
    } else {
        go::<f32>()
    }
}

fn im2col_adjoint(_cfg: &SelfcheckConfig) -> Result<String, String> {
    let mut rng = Rng::new(102);
    let mut worst: f64 = 0.0;
    for case in 0..8 {
        let (h, c, d) = (1 + rng.below(7), 1 + rng.below(7), 1 + rng.below(4));
        for k in [1usize, 3] {
            let x: Tensor3<f64> = random_tensor(&mut rng, h, c, d).unwrap();
            let cols = im2col(&x, k).map_err(|e| e.to_string())?;
            let g = random_mat::<f64>(&mut rng, h * c, k * k * d, -1.0, 1.0);
            let back = col2im(&g, h, c, d, k).map_err(|e| e.to_string())?;
            let lhs: f64 = cols.mat.data.iter().zip(&g.data).map(|(a, b)| a * b).sum();
            let rhs: f64 = x.data.iter().zip(&back.data).map(|(a, b)| a * b).sum();
            let rel = (lhs - rhs).abs() / lhs.abs().max(rhs.abs()).max(1.0);
            worst = worst.max(rel);
            if rel > 1e-12 {
                return Err(format!(
                    "case {case} k={k}: <im2col(x),G> != <x,col2im(G)>, rel {rel:.3e}"
                ));
            }
        }
    }
    Ok(format!("8 shapes x 2 kernels, worst rel {worst:.3e}"))
}

fn split_merge_roundtrip(_cfg: &SelfcheckConfig) -> Result<String, String> {
    let mut rng = Rng::new(103);
    for case in 0..8 {
        let (h, c, d) = (1 + rng.below(6), 1 + rng.below(6), 1 + rng.below(3));
        let x: Tensor3<f32> = random_tensor(&mut rng, h, c, d).unwrap();
        let i3 = im2col(&x, 3).map_err(|e| e.to_string())?;
        let i1 = im2col(&x, 1).map_err(|e| e.to_string())?;
        let rhat: Vec<bool> = (0..h * c).map(|_| rng.below(2) == 1).collect();
        let (i3h, i1h, plan) = hard_split(&i3, &i1, &rhat).map_err(|e| e.to_string())?;
        let o3 = matmul(&i3h, &Mat::identity(9 * d)).map_err(|e| e.to_string())?;
        let o1 = matmul(&i1h, &Mat::identity(d)).map_err(|e| e.to_string())?;
        let m3 = hard_merge(&o3, &Mat::zeros(i1h.rows, 9 * d), &plan).map_err(|e| e.to_string())?;
        let m1 = hard_merge(&Mat::zeros(i3h.rows, d), &o1, &plan).map_err(|e| e.to_string())?;
        for (p, &r) in rhat.iter().enumerate() {
            let ok = if r { m3.row(p) == i3.mat.row(p) } else { m1.row(p) == i1.mat.row(p) };
            if !ok {
                return Err(format!("case {case}: row {p} not restored"));
            }
        }
    }
    Ok("8 random masks restored exactly".into())
}

fn alpha_equivalence(cfg: &SelfcheckConfig) -> Result<String, String> {
    fn go<T: Scalar>(tol: f64) -> Result<String, String> {
        let mut rng = Rng::new(104);
        let mut worst: f64 = 0.0;
        for case in 0..6 {
            let (h, c) = (2 + rng.below(15), 2 + rng.below(15));
            let (d, f) = (1 + rng.below(8), 1 + rng.below(8));
            let x: Tensor3<T> = random_tensor(&mut rng, h, c, d).unwrap();
            let mut p = RacnnParams::<T>::random(&mut rng, d, f, true);

            p.force_alpha(T::one());
            let (y1, _) = racnn_forward_dense(&x, &p).map_err(|e| e.to_string())?;
            let w3 = conv2d(&x, &embed_center(&p), 3).map_err(|e| e.to_string())?;
            let d1 = max_abs(&y1.data, &w3.data);

            p.force_alpha(T::zero());
            let (y0, _) = racnn_forward_dense(&x, &p).map_err(|e| e.to_string())?;
            let w1 = conv2d(&x, &p.w1, 1).map_err(|e| e.to_string())?;
            let d0 = max_abs(&y0.data, &w1.data);

            worst = worst.max(d1).max(d0);
            if d1 > tol || d0 > tol {
                return Err(format!(
                    "case {case}: alpha=1 diff {d1:.3e}, alpha=0 diff {d0:.3e}, tol {tol:.0e}"
                ));
            }
        }
        Ok(format!("6 layers, worst abs diff {worst:.3e}"))
    }
    if cfg.fp64 {
        go::<f64>(1e-12)
    } else {
        go::<f32>(1e-5)
    }
}

fn sparse_vs_dense(cfg: &SelfcheckConfig) -> Result<String, String> {
    fn go<T: Scalar>(tol: f64) -> Result<String, String> {
        let mut rng = Rng::new(105);
        let mut worst: f64 = 0.0;
        for case in 0..6 {
            let (h, c) = (2 + rng.below(10), 2 + rng.below(10));
            let (d, f) = (1 + rng.below(6), 1 + rng.below(6));
            let x: Tensor3<T> = random_tensor(&mut rng, h, c, d).unwrap();
            let mut p = RacnnParams::<T>::random(&mut rng, d, f, true);
            p.w_alpha = (0..d).map(|_| lit(rng.uniform(-1.5, 1.5))).collect();
            p.b_alpha = lit(rng.uniform(-0.5, 0.8));
            let (dense, _) = racnn_forward_dense(&x, &p).map_err(|e| e.to_string())?;
            let (sparse, _, _) = racnn_forward_sparse(&x, &p, 0.0).map_err(|e| e.to_string())?;
            let diff = max_abs(&dense.data, &sparse.data);
            worst = worst.max(diff);
            if diff > tol {
                return Err(format!("case {case}: paths diverge by {diff:.3e}, tol {tol:.0e}"));
            }
        }
        Ok(format!("6 layers, worst abs diff {worst:.3e}"))
    }
    if cfg.fp64 {
        go::<f64>(1e-12)
    } else {
        go::<f32>(1e-5)
    }
}

fn gradient_check(cfg: &SelfcheckConfig) -> Result<String, String> {
    fn go<T: Scalar>(eps: f64, tol: f64) -> Result<String, String> {
        let mut rng = Rng::new(106);
        let (h, c, d, f) = (5, 5, 2, 3);
        let x: Tensor3<T> = random_tensor(&mut rng, h, c, d).unwrap();
        let mut p = RacnnParams::<T>::random(&mut rng, d, f, true);
        p.w_alpha = (0..d).map(|_| lit(rng.uniform(-0.3, 0.3))).collect();
        p.b_alpha = lit(0.5);
        let g = random_mat::<T>(&mut rng, h * c, f, -1.0, 1.0);

        let (_, cache): (_, DenseCache<T>) =
            racnn_forward_dense_cached(&x, &p, 1).map_err(|e| e.to_string())?;
        if cache.alpha.raw.iter().any(|&r| to_f64(r).abs() < 1e-2 || (to_f64(r) - 1.0).abs() < 1e-2)
        {
            return Err("selector response too close to a clip corner for differencing".into());
        }
        let (grads, _) = racnn_backward(&p, &cache, &g).map_err(|e| e.to_string())?;

        let loss = |p: &RacnnParams<T>| -> f64 {
            let (out, _) = racnn_forward_dense(&x, p).unwrap();
            out.data.iter().zip(&g.data).map(|(&o, &gv)| to_f64(o) * to_f64(gv)).sum()
        };

        let mut worst: f64 = 0.0;
        let mut check = |analytic: f64, fd: f64| {
            let denom = analytic.abs().max(fd.abs()).max(1e-6);
            worst = worst.max((analytic - fd).abs() / denom);
        };
        for r in 0..d {
            for j in 0..f {
                let mut pp = p.clone();
                pp.w1.set(r, j, p.w1.get(r, j) + lit(eps));
                let mut pm = p.clone();
                pm.w1.set(r, j, p.w1.get(r, j) - lit(eps));
                check(to_f64(grads.w1.get(r, j)), (loss(&pp) - loss(&pm)) / (2.0 * eps));
            }
        }
        for t in 0..d {
            let mut pp = p.clone();
            pp.w_alpha[t] = pp.w_alpha[t] + lit(eps);
            let mut pm = p.clone();
            pm.w_alpha[t] = pm.w_alpha[t] - lit(eps);
            check(to_f64(grads.w_alpha[t]), (loss(&pp) - loss(&pm)) / (2.0 * eps));
        }
        {
            let mut pp = p.clone();
            pp.b_alpha = pp.b_alpha + lit(eps);
            let mut pm = p.clone();
            pm.b_alpha = pm.b_alpha - lit(eps);
            check(to_f64(grads.b_alpha), (loss(&pp) - loss(&pm)) / (2.0 * eps));
        }
        // a sample of hollow rows keeps the suite fast
        for r in [0usize, d, 7 * d] {
            for j in 0..f {
                let mut pp = p.clone();
                pp.w3_hollow.set(r, j, p.w3_hollow.get(r, j) + lit(eps));
                let mut pm = p.clone();
                pm.w3_hollow.set(r, j, p.w3_hollow.get(r, j) - lit(eps));
                check(to_f64(grads.w3_hollow.get(r, j)), (loss(&pp) - loss(&pm)) / (2.0 * eps));
            }
        }
        if worst > tol {
            return Err(format!("worst relative error {worst:.3e} exceeds {tol:.0e}"));
        }
        Ok(format!("worst relative error {worst:.3e} (tol {tol:.0e})"))
    }
    if cfg.fp64 {
        go::<f64>(1e-6, 1e-6)
    } else {
        go::<f32>(1e-2, 5e-2)
    }
}

fn hollow_invariant(cfg: &SelfcheckConfig) -> Result<String, String> {
    let mut rng = Rng::new(107);
    let mut p = RacnnParams::<f32>::random(&mut rng, 3, 4, true);
    if cfg.corrupt_hollow {
        p.w3_hollow.set(4 * 3, 0, 0.3);
    }
    p.validate().map_err(|e| format!("center rows are not hollow: {e}"))?;

    // detection must trip on a deliberately dirtied copy
    let mut bad = p.clone();
    bad.w3_hollow.set(4 * 3 + 1, 1, -0.5);
    if bad.validate().is_ok() {
        return Err("a corrupted center passed validation".into());
    }
    // and the compact hollow weights must really be center-free
    let compact = racnn::conv::hollow_compact(&p);
    if compact.rows != 8 * 3 || compact.cols != 4 {
        return Err("compact hollow weights have the wrong shape".into());
    }
    let idx: Vec<usize> = vec![0, 3];
    let x: Tensor3<f32> = random_tensor(&mut rng, 4, 4, 3).unwrap();
    let rows = im2col_rows_hollow(&x, &idx).map_err(|e| e.to_string())?;
    if rows.cols != 8 * 3 {
        return Err("gathered hollow rows have the wrong width".into());
    }
    Ok("center stays zero and corruption is detected".into())
}

pub fn render_text(results: &[SuiteResult]) -> String {
    let mut out = String::new();
    for r in results {
        if r.pass {
            out.push_str(&format!("ok   {} ({})\n", r.suite, r.detail));
        } else {
            out.push_str(&format!("FAIL {}: {}\n", r.suite, r.detail));
        }
    }
    let failed: Vec<&str> = results.iter().filter(|r| !r.pass).map(|r| r.suite).collect();
    if failed.is_empty() {
        out.push_str(&format!("all {} suites passed\n", results.len()));
    } else {
        out.push_str(&format!("failed: {}\n", failed.join(", ")));
    }
    out
}
