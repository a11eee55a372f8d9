//! Wall-clock benchmark of one layer's three variants: standard 3x3
//! convolution, the row-skipping adaptive path, and the dense adaptive
//! path. The skip fraction of the input is dialed in through the
//! selector weights so it acts as the independent variable.

use std::hint::black_box;
use std::time::Instant;

use racnn::conv::{
    conv2d_ex, racnn_forward_dense_cached, racnn_forward_sparse_ex, selector_for_zero_fraction,
};
use racnn::{embed_center, predict_time_factor, random_tensor, RacnnParams, Rng, Scalar, Tensor3};
use serde::Serialize;

use crate::{usage, CliResult};

#[derive(Debug, Clone, Copy)]
pub struct BenchConfig {
    pub h: usize,
    pub c: usize,
    pub d: usize,
    pub f: usize,
    pub alpha_zero: f64,
    pub reps: usize,
    pub warmup: usize,
    pub threads: usize,
    pub tau: f64,
    pub seed: u64,
    pub fp64: bool,
    pub alpha_bias: bool,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            h: 64,
            c: 64,
            d: 16,
            f: 16,
            alpha_zero: 0.5,
            reps: 20,
            warmup: 3,
            threads: 1,
            tau: 0.0,
            seed: 0,
            fp64: false,
            alpha_bias: true,
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> CliResult<()> {
        if self.h == 0 || self.c == 0 || self.d == 0 || self.f == 0 {
            return Err(usage("bench dims must all be positive"));
        }
        if self.reps < 3 {
            return Err(usage(format!("need at least 3 reps, got {}", self.reps)));
        }
        if self.warmup < 3 {
            return Err(usage(format!("need at least 3 warmup reps, got {}", self.warmup)));
        }
        if !(0.0..=1.0).contains(&self.alpha_zero) {
            return Err(usage(format!("--alpha-zero must be in [0, 1], got {}", self.alpha_zero)));
        }
        if !(0.0..1.0).contains(&self.tau) {
            return Err(usage(format!("--tau must be in [0, 1), got {}", self.tau)));
        }
        if self.threads == 0 {
            return Err(usage("--threads must be positive"));
        }
        Ok(())
    }
}

/// Millisecond summary over the timed reps of one variant.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct VariantTiming {
    pub median_ms: f64,
    pub min_ms: f64,
    pub mean_ms: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    pub h: usize,
    pub c: usize,
    pub d: usize,
    pub f: usize,
    pub reps: usize,
    pub warmup: usize,
    pub threads: usize,
    pub scalar: &'static str,
    /// Fraction of pixels whose selector output clipped to exactly 0,
    /// measured on the benchmark input.
    pub fraction_alpha_zero: f64,
    /// Cost-model prediction for that fraction, as a ratio to standard.
    pub predicted_factor: f64,
    pub standard: VariantTiming,
    pub racnn_sparse: VariantTiming,
    pub racnn_dense: VariantTiming,
    /// standard median over sparse median; above 1 means the skipping
    /// path was faster.
    pub speedup: f64,
}

/// Runs `f` for `warmup` discarded reps, then `reps` timed ones.
pub fn time_reps<F: FnMut()>(reps: usize, warmup: usize, mut f: F) -> VariantTiming {
    for _ in 0..warmup {
        f();
    }
    let mut samples = Vec::with_capacity(reps);
    for _ in 0..reps {
        let t = Instant::now();
        f();
        samples.push(t.elapsed().as_secs_f64() * 1e3);
    }
    summarize(&mut samples)
}

fn summarize(samples: &mut [f64]) -> VariantTiming {
    samples.sort_by(f64::total_cmp);
    let n = samples.len();
    let median_ms =
        if n % 2 == 1 { samples[n / 2] } else { (samples[n / 2 - 1] + samples[n / 2]) / 2.0 };
    VariantTiming { median_ms, min_ms: samples[0], mean_ms: samples.iter().sum::<f64>() / n as f64 }
}

pub fn run_bench(cfg: &BenchConfig) -> CliResult<BenchReport> {
    cfg.validate()?;
    if cfg.fp64 {
        bench_typed::<f64>(cfg, "f64")
    } else {
        bench_typed::<f32>(cfg, "f32")
    }
}

fn bench_typed<T: Scalar>(cfg: &BenchConfig, scalar: &'static str) -> CliResult<BenchReport> {
    let mut rng = Rng::new(cfg.seed);
    let x: Tensor3<T> = random_tensor(&mut rng, cfg.h, cfg.c, cfg.d)?;
    let mut params = RacnnParams::<T>::random(&mut rng, cfg.d, cfg.f, cfg.alpha_bias);
    let (w_alpha, b_alpha) = selector_for_zero_fraction(&x, cfg.alpha_zero)?;
    params.w_alpha = w_alpha;
    params.b_alpha = b_alpha;
    let w3 = embed_center(&params);

    let (_, _, stats) = racnn_forward_sparse_ex(&x, &params, cfg.tau, cfg.threads)?;
    let fraction_alpha_zero = stats.fraction_alpha_zero;
    let predicted_factor = predict_time_factor(fraction_alpha_zero)?;

    let standard = time_reps(cfg.reps, cfg.warmup, || {
        black_box(conv2d_ex(black_box(&x), &w3, 3, cfg.threads).unwrap());
    });
    let racnn_sparse = time_reps(cfg.reps, cfg.warmup, || {
        black_box(racnn_forward_sparse_ex(black_box(&x), &params, cfg.tau, cfg.threads).unwrap());
    });
    let racnn_dense = time_reps(cfg.reps, cfg.warmup, || {
        black_box(racnn_forward_dense_cached(black_box(&x), &params, cfg.threads).unwrap());
    });

    Ok(BenchReport {
        h: cfg.h,
        c: cfg.c,
        d: cfg.d,
        f: cfg.f,
        reps: cfg.reps,
        warmup: cfg.warmup,
        threads: cfg.threads,
        scalar,
        fraction_alpha_zero,
        predicted_factor,
        standard,
        racnn_sparse,
        racnn_dense,
        speedup: standard.median_ms / racnn_sparse.median_ms,
    })
}

/// Flat single-row CSV mirror of the JSON report, for spreadsheets.
pub fn report_csv(r: &BenchReport) -> String {
    let mut out = String::from(
        "h,c,d,f,reps,warmup,threads,scalar,fraction_alpha_zero,predicted_factor,\
         standard_median_ms,standard_min_ms,standard_mean_ms,\
         sparse_median_ms,sparse_min_ms,sparse_mean_ms,\
         dense_median_ms,dense_min_ms,dense_mean_ms,speedup\n",
    );
    out.push_str(&format!(
        "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
        r.h,
        r.c,
        r.d,
        r.f,
        r.reps,
        r.warmup,
        r.threads,
        r.scalar,
        r.fraction_alpha_zero,
        r.predicted_factor,
        r.standard.median_ms,
        r.standard.min_ms,
        r.standard.mean_ms,
        r.racnn_sparse.median_ms,
        r.racnn_sparse.min_ms,
        r.racnn_sparse.mean_ms,
        r.racnn_dense.median_ms,
        r.racnn_dense.min_ms,
        r.racnn_dense.mean_ms,
        r.speedup,
    ));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> BenchConfig {
        BenchConfig {
            h: 8,
            c: 8,
            d: 2,
            f: 2,
            alpha_zero: 0.5,
            reps: 3,
            warmup: 3,
            ..BenchConfig::default()
        }
    }

    #[test]
    fn median_sits_between_min_and_mean_times_reps() {
        let r = run_bench(&tiny()).unwrap();
        for v in [r.standard, r.racnn_sparse, r.racnn_dense] {
            assert!(v.min_ms <= v.median_ms);
            assert!(v.median_ms <= v.mean_ms * r.reps as f64);
        }
        assert!((r.speedup - r.standard.median_ms / r.racnn_sparse.median_ms).abs() < 1e-12);
    }

    #[test]
    fn skip_fraction_tracks_the_requested_value() {
        for want in [0.0, 0.25, 0.5, 1.0] {
            let cfg = BenchConfig { alpha_zero: want, ..tiny() };
            let r = run_bench(&cfg).unwrap();
            assert!(
                (r.fraction_alpha_zero - want).abs() <= 1.0 / 64.0,
                "want {want}, got {}",
                r.fraction_alpha_zero
            );
            assert!(
                (r.predicted_factor - predict_time_factor(r.fraction_alpha_zero).unwrap()).abs()
                    < 1e-15
            );
        }
    }

    #[test]
    fn summarize_handles_even_and_odd_counts() {
        let odd = summarize(&mut [3.0, 1.0, 2.0]);
        assert_eq!(odd.median_ms, 2.0);
        assert_eq!(odd.min_ms, 1.0);
        let even = summarize(&mut [4.0, 1.0, 2.0, 3.0]);
        assert_eq!(even.median_ms, 2.5);
        assert_eq!(even.mean_ms, 2.5);
    }

    #[test]
    fn bad_flags_are_usage_errors() {
        for bad in [
            BenchConfig { reps: 2, ..tiny() },
            BenchConfig { warmup: 0, ..tiny() },
            BenchConfig { alpha_zero: 1.5, ..tiny() },
            BenchConfig { tau: 1.0, ..tiny() },
            BenchConfig { d: 0, ..tiny() },
            BenchConfig { threads: 0, ..tiny() },
        ] {
            assert!(matches!(run_bench(&bad), Err(crate::CliError::Usage(_))));
        }
    }

    #[test]
    fn csv_has_one_header_and_one_row() {
        let r = run_bench(&tiny()).unwrap();
        let csv = report_csv(&r);
        let lines: Vec<&str> = csv.trim_end().lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0].split(',').count(), lines[1].split(',').count());
    }
}
