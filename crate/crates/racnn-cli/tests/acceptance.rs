//! The acceptance gate: one test per shipping criterion, each printing a
//! single pass/fail line with its measured numbers. Criteria run one at
//! a time behind a shared lock so wall-clock measurements stay honest.
//! Run with `cargo test --test acceptance -- --nocapture` to see the
//! lines for passing criteria as well.

use std::process::Command;
use std::sync::Mutex;
use std::time::Instant;

use racnn::conv::{racnn_forward_dense_cached, selector_for_zero_fraction};
use racnn::io::{load_model, model_from_bytes, model_to_bytes, save_model};
use racnn::nn::dataset::Dataset;
use racnn::nn::train::{alpha_stats, train, TrainConfig};
use racnn::nn::{build_toy_net, softmax_xent, Graph, Layer};
use racnn::tensor::random_mat;
use racnn::{
    conv2d, embed_center, hard_merge, hard_split, im2col, matmul, predict_time_factor,
    racnn_backward, racnn_forward_dense, racnn_forward_sparse, random_tensor, to_f64, Mat,
    RacnnParams, Rng, Scalar, Tensor3,
};
use racnn_cli::bench::{run_bench, BenchConfig};
use racnn_cli::run::{run_train, TrainOpts};
use racnn_cli::{make_synthetic, split_synthetic, SyntheticKind};

static GATE: Mutex<()> = Mutex::new(());

/// Runs one criterion under the lock, enforces its wall-clock budget,
/// and prints exactly one line for it.
fn criterion(n: u32, name: &str, budget_s: f64, body: impl FnOnce() -> Result<String, String>) {
    let _g = GATE.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let outcome = body();
    let elapsed = start.elapsed().as_secs_f64();
    match outcome {
        Ok(detail) if elapsed < budget_s => {
            println!("criterion {n:02} ({name}): PASS [{elapsed:.1}s] {detail}");
        }
        Ok(detail) => {
            println!(
                "criterion {n:02} ({name}): FAIL [{elapsed:.1}s over {budget_s}s budget] {detail}"
            );
            panic!("criterion {n} exceeded its {budget_s}s budget ({elapsed:.1}s)");
        }
        Err(detail) => {
            println!("criterion {n:02} ({name}): FAIL [{elapsed:.1}s] {detail}");
            panic!("criterion {n} ({name}) failed: {detail}");
        }
    }
}

fn max_abs<T: Scalar>(a: &[T], b: &[T]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| (to_f64(x) - to_f64(y)).abs()).fold(0.0, f64::max)
}

#[test]
fn criterion_01_extreme_alpha_equivalence() {
    criterion(1, "alpha extremes match standard convolutions", 10.0, || {
        let mut worst: f64 = 0.0;
        for seed in 0..20u64 {
            let mut rng = Rng::new(4000 + seed);
            let h = 1 + rng.below(32);
            let c = 1 + rng.below(32);
            let d = 1 + rng.below(32);
            let f = 1 + rng.below(32);
            let x: Tensor3<f32> = random_tensor(&mut rng, h, c, d).unwrap();
            let mut p = RacnnParams::<f32>::random(&mut rng, d, f, true);

            p.force_alpha(1.0);
            let (dense1, _) = racnn_forward_dense(&x, &p).map_err(|e| e.to_string())?;
            let (sparse1, _, _) = racnn_forward_sparse(&x, &p, 0.0).map_err(|e| e.to_string())?;
            let want3 = conv2d(&x, &embed_center(&p), 3).map_err(|e| e.to_string())?;
            worst = worst
                .max(max_abs(&dense1.data, &want3.data))
                .max(max_abs(&sparse1.data, &want3.data));

            p.force_alpha(0.0);
            let (dense0, _) = racnn_forward_dense(&x, &p).map_err(|e| e.to_string())?;
            let (sparse0, _, _) = racnn_forward_sparse(&x, &p, 0.0).map_err(|e| e.to_string())?;
            let want1 = conv2d(&x, &p.w1, 1).map_err(|e| e.to_string())?;
            worst = worst
                .max(max_abs(&dense0.data, &want1.data))
                .max(max_abs(&sparse0.data, &want1.data));

            if worst > 1e-5 {
                return Err(format!("seed {seed} ({h}x{c}x{d}->{f}): max abs diff {worst:.3e}"));
            }
        }
        Ok(format!("20 layers, worst abs diff {worst:.3e} (tol 1e-5)"))
    });
}

#[test]
fn criterion_02_sparse_dense_agreement() {
    criterion(2, "sparse path equals dense blend at tau 0", 10.0, || {
        let mut worst: f64 = 0.0;
        for seed in 0..20u64 {
            let mut rng = Rng::new(4100 + seed);
            let h = 2 + rng.below(15);
            let c = 2 + rng.below(15);
            let d = 1 + rng.below(8);
            let f = 1 + rng.below(8);
            let x: Tensor3<f32> = random_tensor(&mut rng, h, c, d).unwrap();
            let mut p = RacnnParams::<f32>::random(&mut rng, d, f, true);
            p.w_alpha = (0..d).map(|_| rng.uniform(-1.5, 1.5)).collect();
            p.b_alpha = rng.uniform(-0.5, 0.8);

            let (dense, alpha) = racnn_forward_dense(&x, &p).map_err(|e| e.to_string())?;
            let (sparse, _, stats) =
                racnn_forward_sparse(&x, &p, 0.0).map_err(|e| e.to_string())?;
            let mixed = alpha.clipped.iter().any(|&a| a > 0.0 && a < 1.0);
            if !mixed && stats.mid_pixels == 0 && seed == 0 {
                return Err("selector produced no mid-range alpha at all".into());
            }
            worst = worst.max(max_abs(&dense.data, &sparse.data));
            if worst > 1e-5 {
                return Err(format!("seed {seed}: max abs diff {worst:.3e}"));
            }
        }
        Ok(format!("20 seeds, worst abs diff {worst:.3e} (tol 1e-5)"))
    });
}

/// Per-row dispatch: each pixel row gets multiplied by whichever kernel
/// its radius picked, accumulating over the shared dimension in
/// ascending order, exactly like the GEMM kernels do.
fn dispatch_oracle<T: Scalar>(
    i3: &Mat<T>,
    i1: &Mat<T>,
    w3: &Mat<T>,
    w1: &Mat<T>,
    rhat: &[bool],
) -> Mat<T> {
    let f = w3.cols;
    let mut out = Mat::zeros(rhat.len(), f);
    for (p, &r) in rhat.iter().enumerate() {
        let (row, w) = if r { (i3.row(p), w3) } else { (i1.row(p), w1) };
        for j in 0..f {
            let mut acc = T::zero();
            for (t, &v) in row.iter().enumerate() {
                acc = acc + v * w.get(t, j);
            }
            out.set(p, j, acc);
        }
    }
    out
}

#[test]
fn criterion_03_hard_path_exactness() {
    criterion(3, "split/GEMM/merge equals per-row dispatch exactly", 5.0, || {
        for seed in 0..10u64 {
            let mut rng = Rng::new(4200 + seed);
            let h = 2 + rng.below(10);
            let c = 2 + rng.below(10);
            let d = 1 + rng.below(6);
            let f = 1 + rng.below(6);
            let x: Tensor3<f32> = random_tensor(&mut rng, h, c, d).unwrap();
            let w3 = random_mat(&mut rng, 9 * d, f, -1.0, 1.0);
            let w1 = random_mat(&mut rng, d, f, -1.0, 1.0);
            let rhat: Vec<bool> = (0..h * c).map(|_| rng.below(2) == 1).collect();

            let i3 = im2col(&x, 3).map_err(|e| e.to_string())?;
            let i1 = im2col(&x, 1).map_err(|e| e.to_string())?;
            let (i3h, i1h, plan) = hard_split(&i3, &i1, &rhat).map_err(|e| e.to_string())?;
            let o3 = matmul(&i3h, &w3).map_err(|e| e.to_string())?;
            let o1 = matmul(&i1h, &w1).map_err(|e| e.to_string())?;
            let merged = hard_merge(&o3, &o1, &plan).map_err(|e| e.to_string())?;

            let want = dispatch_oracle(&i3.mat, &i1.mat, &w3, &w1, &rhat);
            if merged != want {
                return Err(format!("seed {seed}: hard path differs from dispatch oracle"));
            }
        }
        Ok("10 instances bit-identical".into())
    });
}

/// Central finite differences over every parameter and input element of
/// one adaptive layer, in f64. Returns None when the draw puts a
/// selector response too close to a clip corner for differencing.
fn fd_layer_worst_rel(seed: u64) -> Option<f64> {
    let mut rng = Rng::new(seed);
    let (h, c, d, f) = (5, 5, 3, 4);
    let x: Tensor3<f64> = random_tensor(&mut rng, h, c, d).unwrap();
    let mut p = RacnnParams::<f64>::random(&mut rng, d, f, true);
    p.w_alpha = (0..d).map(|_| rng.uniform(-0.4, 0.4)).collect();
    p.b_alpha = rng.uniform(0.2, 0.8);
    let g = random_mat::<f64>(&mut rng, h * c, f, -1.0, 1.0);

    let (_, cache) = racnn_forward_dense_cached(&x, &p, 1).unwrap();
    if cache.alpha.raw.iter().any(|&r| r.abs() < 1e-3 || (r - 1.0).abs() < 1e-3) {
        return None;
    }
    let (grads, gx) = racnn_backward(&p, &cache, &g).unwrap();

    let loss = |x: &Tensor3<f64>, p: &RacnnParams<f64>| -> f64 {
        let (out, _) = racnn_forward_dense(x, p).unwrap();
        out.data.iter().zip(&g.data).map(|(&o, &gv)| o * gv).sum()
    };
    let eps = 1e-6;
    let mut worst: f64 = 0.0;
    let mut check = |analytic: f64, fd: f64| {
        let denom = analytic.abs().max(fd.abs()).max(1e-8);
        worst = worst.max((analytic - fd).abs() / denom);
    };

    for r in 0..d {
        for j in 0..f {
            let (mut pp, mut pm) = (p.clone(), p.clone());
            pp.w1.set(r, j, p.w1.get(r, j) + eps);
            pm.w1.set(r, j, p.w1.get(r, j) - eps);
            check(grads.w1.get(r, j), (loss(&x, &pp) - loss(&x, &pm)) / (2.0 * eps));
        }
    }
    for r in (0..9 * d).filter(|r| !(4 * d..5 * d).contains(r)) {
        for j in 0..f {
            let (mut pp, mut pm) = (p.clone(), p.clone());
            pp.w3_hollow.set(r, j, p.w3_hollow.get(r, j) + eps);
            pm.w3_hollow.set(r, j, p.w3_hollow.get(r, j) - eps);
            check(grads.w3_hollow.get(r, j), (loss(&x, &pp) - loss(&x, &pm)) / (2.0 * eps));
        }
    }
    for t in 0..d {
        let (mut pp, mut pm) = (p.clone(), p.clone());
        pp.w_alpha[t] += eps;
        pm.w_alpha[t] -= eps;
        check(grads.w_alpha[t], (loss(&x, &pp) - loss(&x, &pm)) / (2.0 * eps));
    }
    {
        let (mut pp, mut pm) = (p.clone(), p.clone());
        pp.b_alpha += eps;
        pm.b_alpha -= eps;
        check(grads.b_alpha, (loss(&x, &pp) - loss(&x, &pm)) / (2.0 * eps));
    }
    for i in 0..x.data.len() {
        let (mut xp, mut xm) = (x.clone(), x.clone());
        xp.data[i] += eps;
        xm.data[i] -= eps;
        check(gx.data[i], (loss(&xp, &p) - loss(&xm, &p)) / (2.0 * eps));
    }
    Some(worst)
}

/// Finite differences over the flat parameter vector of a small
/// classifier net against the fused backward pass, in f64.
fn fd_net_worst_rel(seed: u64) -> Option<f64> {
    let mut rng = Rng::new(seed);
    let x: Tensor3<f64> = random_tensor(&mut rng, 4, 4, 1).unwrap();
    let label = rng.below(2);
    let mut p = RacnnParams::<f64>::random(&mut rng, 1, 3, true);
    p.w_alpha = vec![rng.uniform(-0.2, 0.2)];
    p.b_alpha = rng.uniform(0.3, 0.7);
    let dense_scale = (6.0 / 12.0f64).sqrt();
    let g = Graph::new(vec![
        Layer::Racnn(p),
        Layer::Relu,
        Layer::MaxPool2,
        Layer::Flatten,
        Layer::Dense {
            w: random_mat(&mut rng, 12, 2, -dense_scale, dense_scale),
            b: vec![0.1, -0.2],
        },
        Layer::SoftmaxXent,
    ])
    .unwrap();

    let (_, caches) = g.forward_cached(&x).unwrap();
    if let racnn::nn::LayerCache::Racnn(cache) = &caches[0] {
        if cache.alpha.raw.iter().any(|&r| r.abs() < 1e-3 || (r - 1.0).abs() < 1e-3) {
            return None;
        }
    }
    let (_, grads) = g.backward(&caches, label).unwrap();
    let analytic = racnn::nn::grads_flat(&grads);

    let loss_at = |flat: &[f64]| -> f64 {
        let mut gg = g.clone();
        gg.set_params_flat(flat).unwrap();
        let logits = gg.forward(&x).unwrap();
        to_f64(softmax_xent(&logits, label).unwrap().0)
    };
    let theta = g.params_flat();
    let eps = 1e-5;
    let mut worst: f64 = 0.0;
    for i in 0..theta.len() {
        let mut tp = theta.clone();
        tp[i] += eps;
        let mut tm = theta.clone();
        tm[i] -= eps;
        let fd = (loss_at(&tp) - loss_at(&tm)) / (2.0 * eps);
        let denom = analytic[i].abs().max(fd.abs()).max(1e-6);
        worst = worst.max((analytic[i] - fd).abs() / denom);
    }
    Some(worst)
}

#[test]
fn criterion_04_gradients_match_finite_differences() {
    criterion(4, "backward pass matches fp64 finite differences", 60.0, || {
        let mut layer_worst: f64 = 0.0;
        let mut checked = 0;
        let mut seed = 4300u64;
        while checked < 10 && seed < 4400 {
            if let Some(w) = fd_layer_worst_rel(seed) {
                layer_worst = layer_worst.max(w);
                if w > 1e-5 {
                    return Err(format!("layer seed {seed}: worst rel {w:.3e} (tol 1e-5)"));
                }
                checked += 1;
            }
            seed += 1;
        }
        if checked < 10 {
            return Err("fewer than 10 margin-safe layer draws".into());
        }

        let mut net_worst: f64 = 0.0;
        let mut checked = 0;
        let mut seed = 4400u64;
        while checked < 10 && seed < 4500 {
            if let Some(w) = fd_net_worst_rel(seed) {
                net_worst = net_worst.max(w);
                if w > 1e-4 {
                    return Err(format!("net seed {seed}: worst rel {w:.3e} (tol 1e-4)"));
                }
                checked += 1;
            }
            seed += 1;
        }
        if checked < 10 {
            return Err("fewer than 10 margin-safe net draws".into());
        }
        Ok(format!(
            "10 layer seeds (worst rel {layer_worst:.3e}, tol 1e-5), \
             10 net seeds (worst rel {net_worst:.3e}, tol 1e-4)"
        ))
    });
}

#[test]
fn criterion_05_cost_model() {
    criterion(5, "cost model is exact at 5/9 and tracks counted work", 10.0, || {
        let predicted = predict_time_factor(0.5).map_err(|e| e.to_string())?;
        if predicted != 5.0 / 9.0 {
            return Err(format!("predict_time_factor(0.5) = {predicted}, want exactly 5/9"));
        }

        let mut rng = Rng::new(4500);
        let x: Tensor3<f32> = random_tensor(&mut rng, 32, 32, 16).unwrap();
        let mut p = RacnnParams::<f32>::random(&mut rng, 16, 64, true);
        let (w_alpha, b_alpha) = selector_for_zero_fraction(&x, 0.5).map_err(|e| e.to_string())?;
        p.w_alpha = w_alpha;
        p.b_alpha = b_alpha;
        let (_, _, stats) = racnn_forward_sparse(&x, &p, 0.0).map_err(|e| e.to_string())?;
        if stats.fraction_alpha_zero != 0.5 {
            return Err(format!("skip fraction {} is not 0.5", stats.fraction_alpha_zero));
        }
        let measured = stats.mac_count as f64 / stats.mac_standard as f64;
        let rel = (measured - predicted).abs() / predicted;
        if rel > 0.02 {
            return Err(format!(
                "counted MAC ratio {measured:.5} vs model {predicted:.5}, rel {rel:.4}"
            ));
        }
        Ok(format!(
            "factor exactly 5/9; counted ratio {measured:.5} within {:.2}% of model",
            rel * 100.0
        ))
    });
}

#[test]
fn criterion_06_measured_speedup() {
    criterion(6, "sparse wall time at 50% skipping", 120.0, || {
        let cfg = BenchConfig {
            h: 128,
            c: 128,
            d: 64,
            f: 64,
            alpha_zero: 0.5,
            reps: 7,
            warmup: 3,
            threads: 1,
            tau: 0.0,
            seed: 0,
            fp64: false,
            alpha_bias: true,
        };
        let r = run_bench(&cfg).map_err(|e| e.to_string())?;
        if (r.fraction_alpha_zero - 0.5).abs() > 1e-12 {
            return Err(format!("skip fraction {} is not 0.5", r.fraction_alpha_zero));
        }
        let ratio = r.racnn_sparse.median_ms / r.standard.median_ms;
        if ratio > 0.80 {
            return Err(format!(
                "sparse median {:.2}ms vs standard {:.2}ms, ratio {ratio:.3} exceeds 0.80",
                r.racnn_sparse.median_ms, r.standard.median_ms
            ));
        }
        Ok(format!(
            "sparse {:.2}ms vs standard {:.2}ms, ratio {ratio:.3} (bound 0.80)",
            r.racnn_sparse.median_ms, r.standard.median_ms
        ))
    });
}

#[test]
fn criterion_07_accuracy_parity() {
    criterion(7, "paired toy nets reach parity on 4-class data", 600.0, || {
        let mut details = Vec::new();
        for seed in 1..=3u64 {
            let opts = TrainOpts { pair: true, seed, ..TrainOpts::default() };
            let report = run_train(&opts).map_err(|e| e.to_string())?;
            let p = report.parity.as_ref().expect("pair mode reports parity");
            if p.standard_val_acc < 0.85 || p.adaptive_val_acc < 0.85 {
                return Err(format!(
                    "seed {seed}: standard {:.3}, adaptive {:.3}, need both >= 0.85",
                    p.standard_val_acc, p.adaptive_val_acc
                ));
            }
            if p.abs_diff_points > 3.0 {
                return Err(format!(
                    "seed {seed}: accuracies {:.3} vs {:.3} differ by {:.2} points",
                    p.standard_val_acc, p.adaptive_val_acc, p.abs_diff_points
                ));
            }
            details
                .push(format!("seed {seed}: {:.3}/{:.3}", p.standard_val_acc, p.adaptive_val_acc));
        }
        Ok(format!("std/adaptive val acc {} (tol 3 points)", details.join(", ")))
    });
}

#[test]
fn criterion_08_first_layer_swap() {
    criterion(8, "swapping the first adaptive layer barely moves accuracy", 600.0, || {
        let seed = 1u64;
        let ds: Dataset<f32> = make_synthetic(SyntheticKind::FourClass, 320, 16, 16, seed)
            .map_err(|e| e.to_string())?;
        let (train_set, val_set) = split_synthetic(ds, 0.75, seed).map_err(|e| e.to_string())?;
        let cfg =
            TrainConfig { lr: 2e-3, epochs: 30, batch_size: 16, seed, ..TrainConfig::default() };

        let mut accs = Vec::new();
        for adaptive in [[true, true, true], [false, true, true]] {
            let mut g: Graph<f32> = build_toy_net(&mut Rng::new(seed), 16, 16, 4, &adaptive, true)
                .map_err(|e| e.to_string())?;
            let history = train(&mut g, &train_set, &val_set, &cfg).map_err(|e| e.to_string())?;
            accs.push(history.last().unwrap().val_acc);
        }
        let diff_points = (accs[0] - accs[1]).abs() * 100.0;
        if diff_points > 3.0 {
            return Err(format!(
                "all-adaptive {:.3} vs first-layer-standard {:.3}: {diff_points:.2} points apart",
                accs[0], accs[1]
            ));
        }
        Ok(format!(
            "val acc {:.3} vs {:.3}, {diff_points:.2} points apart (tol 3)",
            accs[0], accs[1]
        ))
    });
}

#[test]
fn criterion_09_stats_command_exactness() {
    criterion(9, "stats command agrees with the sparse path exactly", 600.0, || {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let model_path = dir.path().join("toy.racn");
        let opts = TrainOpts {
            seed: 1,
            epochs: 8,
            alpha_bias: false,
            checkpoint: Some(model_path.clone()),
            ..TrainOpts::default()
        };
        run_train(&opts).map_err(|e| e.to_string())?;

        let tau = 0.25;
        let out = Command::new(env!("CARGO_BIN_EXE_racnn"))
            .args([
                "stats",
                "--model",
                model_path.to_str().unwrap(),
                "--synthetic",
                "4class",
                "--n",
                "16",
                "--seed",
                "5",
                "--tau",
                "0.25",
                "--json",
            ])
            .output()
            .map_err(|e| e.to_string())?;
        if !out.status.success() {
            return Err(format!("stats command failed: {}", String::from_utf8_lossy(&out.stderr)));
        }
        let v: serde_json::Value =
            serde_json::from_slice(&out.stdout).map_err(|e| e.to_string())?;
        let layers = v["layers"].as_array().ok_or("no layers array")?;

        let g: Graph<f32> = load_model(&model_path).map_err(|e| e.to_string())?;
        let images = make_synthetic::<f32>(SyntheticKind::FourClass, 16, 16, 16, 5)
            .map_err(|e| e.to_string())?
            .images;
        let pooled = alpha_stats(&g, &images, tau).map_err(|e| e.to_string())?;
        if layers.len() != pooled.len() || layers.is_empty() {
            return Err(format!(
                "stats lists {} layers, sparse path saw {}",
                layers.len(),
                pooled.len()
            ));
        }

        for (l, entry) in layers.iter().zip(&pooled) {
            let sum = l["percent_zero"].as_f64().unwrap()
                + l["percent_mid"].as_f64().unwrap()
                + l["percent_one"].as_f64().unwrap();
            if (sum - 100.0).abs() > 1e-6 {
                return Err(format!("{}: bins sum to {sum}, not 100", l["layer"]));
            }
            let s = &entry.stats;
            let want_skip = s.skipped_pixels as f64 / s.total_pixels as f64;
            let got_skip = l["skip_fraction"].as_f64().unwrap();
            if got_skip != want_skip {
                return Err(format!(
                    "{}: command skip fraction {got_skip} != sparse path {want_skip}",
                    l["layer"]
                ));
            }
            if l["skipped_pixels"].as_u64().unwrap() as usize != s.skipped_pixels
                || l["total_pixels"].as_u64().unwrap() as usize != s.total_pixels
            {
                return Err(format!("{}: pixel counts disagree", l["layer"]));
            }
        }
        Ok(format!(
            "{} layers: bins sum to 100, skip fractions bit-identical at tau {tau}",
            layers.len()
        ))
    });
}

#[test]
fn criterion_10_serialization() {
    criterion(10, "save/load is bit-exact and corruption is rejected", 10.0, || {
        let mut rng = Rng::new(4900);
        let g: Graph<f32> = Graph::new(vec![
            Layer::Racnn(RacnnParams::random(&mut rng, 1, 6, true)),
            Layer::Relu,
            Layer::MaxPool2,
            Layer::Conv3 { w: random_mat(&mut rng, 54, 8, -0.3, 0.3) },
            Layer::Relu,
            Layer::MaxPool2,
            Layer::Conv1 { w: random_mat(&mut rng, 8, 8, -0.5, 0.5) },
            Layer::Flatten,
            Layer::Dense { w: random_mat(&mut rng, 128, 4, -0.2, 0.2), b: vec![0.0; 4] },
            Layer::SoftmaxXent,
        ])
        .map_err(|e| e.to_string())?;

        let reference = model_to_bytes(&g).map_err(|e| e.to_string())?;
        let mut bytes = reference.clone();
        for round in 0..100 {
            let g2: Graph<f32> = model_from_bytes(&bytes).map_err(|e| e.to_string())?;
            bytes = model_to_bytes(&g2).map_err(|e| e.to_string())?;
            if bytes != reference {
                return Err(format!("round {round}: bytes drifted"));
            }
        }

        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let path = dir.path().join("m.racn");
        save_model(&g, &path).map_err(|e| e.to_string())?;
        let loaded: Graph<f32> = load_model(&path).map_err(|e| e.to_string())?;
        if model_to_bytes(&loaded).map_err(|e| e.to_string())? != reference {
            return Err("file round trip is not bit-exact".into());
        }

        for trial in 0..100u64 {
            let mut corrupted = reference.clone();
            let byte = rng.below(corrupted.len());
            let bit = rng.below(8) as u32;
            corrupted[byte] ^= 1 << bit;
            if model_from_bytes::<f32>(&corrupted).is_ok() {
                return Err(format!(
                    "trial {trial}: flipped bit {bit} of byte {byte} went undetected"
                ));
            }
        }
        Ok("100 bit-exact rounds, 100/100 single-bit corruptions rejected".into())
    });
}
