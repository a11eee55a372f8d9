//! Training and evaluation drivers over the synthetic datasets or IDX
//! files. `--pair` trains the standard and adaptive builds of the same
//! toy network from one seed and reports how far apart they land.

use std::path::PathBuf;

use racnn::io::{load_idx_dataset, load_model};
use racnn::nn::dataset::Dataset;
use racnn::nn::train::{evaluate_sparse, train, TrainConfig, TrainRecord};
use racnn::nn::{build_toy_net, Graph};
use racnn::{Rng, Scalar};
use serde::Serialize;

use crate::{make_synthetic, split_synthetic, usage, CliResult, SyntheticKind};

#[derive(Debug, Clone)]
pub struct TrainOpts {
    pub kind: SyntheticKind,
    pub n: usize,
    pub h: usize,
    pub c: usize,
    pub train_frac: f64,
    pub epochs: usize,
    pub batch: usize,
    pub lr: f64,
    pub seed: u64,
    pub tau: f64,
    pub alpha_bias: bool,
    pub fp64: bool,
    /// Train both builds and compare; otherwise `adaptive` picks one.
    pub pair: bool,
    pub adaptive: bool,
    pub checkpoint: Option<PathBuf>,
}

impl Default for TrainOpts {
    fn default() -> Self {
        TrainOpts {
            kind: SyntheticKind::FourClass,
            n: 320,
            h: 16,
            c: 16,
            train_frac: 0.75,
            epochs: 30,
            batch: 16,
            lr: 2e-3,
            seed: 0,
            tau: 0.0,
            alpha_bias: true,
            fp64: false,
            pair: false,
            adaptive: true,
            checkpoint: None,
        }
    }
}

impl TrainOpts {
    fn validate(&self) -> CliResult<()> {
        if self.n < 8 {
            return Err(usage(format!("--n must be at least 8, got {}", self.n)));
        }
        if !self.h.is_multiple_of(8) || !self.c.is_multiple_of(8) || self.h == 0 || self.c == 0 {
            return Err(usage(format!(
                "image dims must be positive multiples of 8, got {}x{}",
                self.h, self.c
            )));
        }
        if !(0.0 < self.train_frac && self.train_frac < 1.0) {
            return Err(usage(format!("--train-frac must be in (0, 1), got {}", self.train_frac)));
        }
        if self.epochs == 0 || self.batch == 0 {
            return Err(usage("--epochs and --batch must be positive"));
        }
        if !self.lr.is_finite() || self.lr < 0.0 {
            return Err(usage(format!("--lr must be finite and non-negative, got {}", self.lr)));
        }
        if !(0.0..1.0).contains(&self.tau) {
            return Err(usage(format!("--tau must be in [0, 1), got {}", self.tau)));
        }
        Ok(())
    }
}

/// History and final numbers for one trained network.
#[derive(Debug, Clone, Serialize)]
pub struct RunHistory {
    pub arch: &'static str,
    pub final_val_acc: f64,
    pub final_val_loss: f64,
    pub history: Vec<TrainRecord>,
}

/// How far apart the paired builds finished, in accuracy points.
#[derive(Debug, Clone, Serialize)]
pub struct Parity {
    pub standard_val_acc: f64,
    pub adaptive_val_acc: f64,
    pub abs_diff_points: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrainReport {
    pub dataset: String,
    pub samples: usize,
    pub train_samples: usize,
    pub val_samples: usize,
    pub epochs: usize,
    pub batch: usize,
    pub lr: f64,
    pub seed: u64,
    pub tau: f64,
    pub scalar: &'static str,
    pub runs: Vec<RunHistory>,
    pub parity: Option<Parity>,
}

pub fn run_train(opts: &TrainOpts) -> CliResult<TrainReport> {
    opts.validate()?;
    if opts.fp64 {
        train_typed::<f64>(opts, "f64")
    } else {
        train_typed::<f32>(opts, "f32")
    }
}

fn train_typed<T: Scalar>(opts: &TrainOpts, scalar: &'static str) -> CliResult<TrainReport> {
    let ds = make_synthetic::<T>(opts.kind, opts.n, opts.h, opts.c, opts.seed)?;
    let classes = ds.classes;
    let (train_set, val_set) = split_synthetic(ds, opts.train_frac, opts.seed)?;

    let mut cfg = TrainConfig {
        lr: opts.lr,
        epochs: opts.epochs,
        batch_size: opts.batch,
        seed: opts.seed,
        tau: opts.tau,
        checkpoint: None,
        ..TrainConfig::default()
    };

    let mut runs = Vec::new();
    let specs: Vec<(&'static str, bool)> = if opts.pair {
        vec![("standard", false), ("adaptive", true)]
    } else if opts.adaptive {
        vec![("adaptive", true)]
    } else {
        vec![("standard", false)]
    };

    for &(arch, adaptive) in &specs {
        // the checkpoint belongs to the adaptive build in pair mode
        cfg.checkpoint = if adaptive || !opts.pair { opts.checkpoint.clone() } else { None };
        let mut g: Graph<T> = build_toy_net(
            &mut Rng::new(opts.seed),
            opts.h,
            opts.c,
            classes,
            &[adaptive; 3],
            opts.alpha_bias,
        )?;
        let history = train(&mut g, &train_set, &val_set, &cfg)?;
        let last = history.last().expect("at least one epoch");
        runs.push(RunHistory {
            arch,
            final_val_acc: last.val_acc,
            final_val_loss: last.val_loss,
            history,
        });
    }

    let parity = if opts.pair {
        let std_acc = runs[0].final_val_acc;
        let ada_acc = runs[1].final_val_acc;
        Some(Parity {
            standard_val_acc: std_acc,
            adaptive_val_acc: ada_acc,
            abs_diff_points: (std_acc - ada_acc).abs() * 100.0,
        })
    } else {
        None
    };

    Ok(TrainReport {
        dataset: format!("synthetic:{:?}", opts.kind).to_lowercase(),
        samples: opts.n,
        train_samples: train_set.len(),
        val_samples: val_set.len(),
        epochs: opts.epochs,
        batch: opts.batch,
        lr: opts.lr,
        seed: opts.seed,
        tau: opts.tau,
        scalar,
        runs,
        parity,
    })
}

pub fn render_train_text(r: &TrainReport) -> String {
    let mut out = format!(
        "{} | {} train / {} val | {} epochs, batch {}, lr {}, seed {}\n",
        r.dataset, r.train_samples, r.val_samples, r.epochs, r.batch, r.lr, r.seed
    );
    for run in &r.runs {
        out.push_str(&format!(
            "{}: final val acc {:.4}, val loss {:.4}\n",
            run.arch, run.final_val_acc, run.final_val_loss
        ));
    }
    if let Some(p) = &r.parity {
        out.push_str(&format!(
            "parity: standard {:.4} vs adaptive {:.4} ({:.2} points apart)\n",
            p.standard_val_acc, p.adaptive_val_acc, p.abs_diff_points
        ));
    }
    out
}

#[derive(Debug, Clone)]
pub enum DataSource {
    Idx { images: PathBuf, labels: PathBuf },
    Synthetic { kind: SyntheticKind, n: usize, h: usize, c: usize, seed: u64 },
}

#[derive(Debug, Clone)]
pub struct EvalOpts {
    pub model: PathBuf,
    pub source: DataSource,
    pub tau: f64,
    pub fp64: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub accuracy: f64,
    pub loss: f64,
    pub samples: usize,
    pub tau: f64,
}

pub fn run_eval(opts: &EvalOpts) -> CliResult<EvalReport> {
    if !(0.0..1.0).contains(&opts.tau) {
        return Err(usage(format!("--tau must be in [0, 1), got {}", opts.tau)));
    }
    if opts.fp64 {
        eval_typed::<f64>(opts)
    } else {
        eval_typed::<f32>(opts)
    }
}

fn eval_typed<T: Scalar>(opts: &EvalOpts) -> CliResult<EvalReport> {
    let g: Graph<T> = load_model(&opts.model)?;
    let ds: Dataset<T> = match &opts.source {
        DataSource::Idx { images, labels } => load_idx_dataset(images, labels)?,
        DataSource::Synthetic { kind, n, h, c, seed } => make_synthetic(*kind, *n, *h, *c, *seed)?,
    };
    let (metrics, _) = evaluate_sparse(&g, &ds, opts.tau)?;
    Ok(EvalReport {
        accuracy: metrics.accuracy,
        loss: metrics.loss,
        samples: ds.len(),
        tau: opts.tau,
    })
}
