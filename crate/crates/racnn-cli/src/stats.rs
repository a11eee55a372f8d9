//! Per-layer alpha histograms for a saved model over a set of images,
//! plus the revert recommendation: layers that rarely produce alpha = 0
//! gain nothing from row skipping and may as well be standard 3x3
//! convolutions.

use std::path::Path;

use racnn::io::load_model;
use racnn::nn::train::alpha_stats;
use racnn::nn::Graph;
use racnn::{Scalar, Tensor3};
use serde::Serialize;

use crate::{usage, CliError, CliResult};

/// Histogram of one adaptive layer's alpha map over the whole image set,
/// split into the bins {0}, (0,1), {1}.
#[derive(Debug, Clone, Serialize)]
pub struct AlphaLayerStats {
    pub layer: String,
    pub percent_zero: f64,
    pub percent_mid: f64,
    pub percent_one: f64,
    /// Fraction of pixels the sparse path skipped at the report's tau.
    pub skip_fraction: f64,
    pub total_pixels: usize,
    pub skipped_pixels: usize,
    /// True when the alpha = 0 share fell below the revert threshold.
    pub revert_candidate: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct StatsReport {
    pub tau: f64,
    /// Layers whose alpha = 0 percentage is below this are flagged.
    pub revert_threshold_percent: f64,
    pub images: usize,
    pub layers: Vec<AlphaLayerStats>,
    pub revert_candidates: Vec<String>,
}

pub fn run_stats<T: Scalar>(
    g: &Graph<T>,
    images: &[Tensor3<T>],
    tau: f64,
    revert_threshold_percent: f64,
) -> CliResult<StatsReport> {
    if !(0.0..1.0).contains(&tau) {
        return Err(usage(format!("--tau must be in [0, 1), got {tau}")));
    }
    if !(0.0..=100.0).contains(&revert_threshold_percent) {
        return Err(usage(format!(
            "--revert-threshold is a percentage, got {revert_threshold_percent}"
        )));
    }
    if images.is_empty() {
        return Err(CliError::Check("no images to run statistics over".into()));
    }
    if !g.has_adaptive() {
        return Err(CliError::Check("nothing to report: the model has no adaptive layers".into()));
    }

    let pooled = alpha_stats(g, images, tau)?;
    let mut layers = Vec::with_capacity(pooled.len());
    let mut revert_candidates = Vec::new();
    for entry in &pooled {
        let s = &entry.stats;
        let name = format!("layer{}:{}", entry.layer, g.layers[entry.layer].name());
        let percent_zero = s.fraction_alpha_zero * 100.0;
        let revert = percent_zero < revert_threshold_percent;
        if revert {
            revert_candidates.push(name.clone());
        }
        layers.push(AlphaLayerStats {
            layer: name,
            percent_zero,
            percent_mid: s.fraction_alpha_mid * 100.0,
            percent_one: s.fraction_alpha_one * 100.0,
            skip_fraction: s.skipped_pixels as f64 / s.total_pixels as f64,
            total_pixels: s.total_pixels,
            skipped_pixels: s.skipped_pixels,
            revert_candidate: revert,
        });
    }
    Ok(StatsReport {
        tau,
        revert_threshold_percent,
        images: images.len(),
        layers,
        revert_candidates,
    })
}

pub fn run_stats_from_files<T: Scalar>(
    model: &Path,
    images: &[Tensor3<T>],
    tau: f64,
    revert_threshold_percent: f64,
) -> CliResult<StatsReport> {
    let g: Graph<T> = load_model(model)?;
    run_stats(&g, images, tau, revert_threshold_percent)
}

pub fn render_text(r: &StatsReport) -> String {
    let mut out = format!("alpha statistics over {} images (tau {}):\n", r.images, r.tau);
    for l in &r.layers {
        out.push_str(&format!(
            "  {:<16} alpha=0 {:6.2}%  0<alpha<1 {:6.2}%  alpha=1 {:6.2}%  skip {:.4}{}\n",
            l.layer,
            l.percent_zero,
            l.percent_mid,
            l.percent_one,
            l.skip_fraction,
            if l.revert_candidate { "  [revert candidate]" } else { "" },
        ));
    }
    if r.revert_candidates.is_empty() {
        out.push_str("no revert candidates: every layer skips enough pixels to pay off\n");
    } else {
        out.push_str(&format!(
            "consider standard 3x3 convolutions for: {}\n",
            r.revert_candidates.join(", ")
        ));
    }
    out
}
