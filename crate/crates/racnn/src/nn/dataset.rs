//! Labeled image sets: procedural generators for hermetic experiments and
//! a deterministic train/validation split. Real files come in through the
//! IDX loaders in the io module.

use crate::{lit, Error, Result, Rng, Scalar, Tensor3};

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    pub images: Vec<Tensor3<T>>,
    pub labels: Vec<usize>,
    pub classes: usize,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(images: Vec<Tensor3<T>>, labels: Vec<usize>, classes: usize) -> Result<Self> {
        if images.len() != labels.len() {
            return Err(Error::Shape(format!(
                "{} images but {} labels",
                images.len(),
                labels.len()
            )));
        }
        if classes == 0 {
            return Err(Error::InvalidArgument("need at least one class".into()));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
            return Err(Error::IndexOutOfRange { index: bad, len: classes });
        }
        Ok(Dataset { images, labels, classes })
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    /// Shuffles (seeded) and splits off the first `train_frac` as the
    /// training set, remainder as validation.
    pub fn split(self, train_frac: f64, rng: &mut Rng) -> Result<(Dataset<T>, Dataset<T>)> {
        if !(0.0..=1.0).contains(&train_frac) {
            return Err(Error::InvalidArgument(format!(
                "split fraction must be in [0, 1], got {train_frac}"
            )));
        }
        let mut order: Vec<usize> = (0..self.len()).collect();
        rng.shuffle(&mut order);
        let cut = (train_frac * self.len() as f64).round() as usize;
        let mut train = Dataset { images: Vec::new(), labels: Vec::new(), classes: self.classes };
        let mut val = Dataset { images: Vec::new(), labels: Vec::new(), classes: self.classes };
        for (rank, &i) in order.iter().enumerate() {
            let dst = if rank < cut { &mut train } else { &mut val };
            dst.images.push(self.images[i].clone());
            dst.labels.push(self.labels[i]);
        }
        Ok((train, val))
    }
}

/// Four visually distinct single-channel classes on an `h x c` grid:
/// horizontal stripes, vertical stripes, checkerboard, centered blob.
/// Each sample gets a random phase/position, amplitude and pixel noise;
/// values stay in [0, 1]. Labels cycle 0,1,2,3 so classes are balanced.
pub fn synthetic_4class<T: Scalar>(
    rng: &mut Rng,
    n: usize,
    h: usize,
    c: usize,
) -> Result<Dataset<T>> {
    if n == 0 {
        return Err(Error::InvalidArgument("empty dataset requested".into()));
    }
    let mut images = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for s in 0..n {
        let label = s % 4;
        let amp = rng.next_f64() * 0.3 + 0.6;
        let phase = rng.below(4);
        let (bi, bj) =
            (h as f64 * (0.35 + 0.3 * rng.next_f64()), c as f64 * (0.35 + 0.3 * rng.next_f64()));
        let sigma = (h.min(c)) as f64 * 0.18;
        let mut img = Tensor3::zeros(h, c, 1)?;
        for i in 0..h {
            for j in 0..c {
                let signal = match label {
                    0 => ((i + phase) / 2).is_multiple_of(2) as usize as f64,
                    1 => ((j + phase) / 2).is_multiple_of(2) as usize as f64,
                    2 => ((i + phase) / 2 % 2 == (j + phase) / 2 % 2) as usize as f64,
                    _ => {
                        let r2 = (i as f64 - bi).powi(2) + (j as f64 - bj).powi(2);
                        (-r2 / (2.0 * sigma * sigma)).exp()
                    }
                };
                let noise = rng.next_f64() * 0.2 - 0.1;
                let v = (amp * signal + 0.05 + noise).clamp(0.0, 1.0);
                img.set(i, j, 0, lit(v));
            }
        }
        images.push(img);
        labels.push(label);
    }
    Dataset::new(images, labels, 4)
}

/// Two classes separated by mean intensity (dark vs bright), linearly
/// separable through a flatten + dense head.
pub fn synthetic_linear<T: Scalar>(
    rng: &mut Rng,
    n: usize,
    h: usize,
    c: usize,
) -> Result<Dataset<T>> {
    if n == 0 {
        return Err(Error::InvalidArgument("empty dataset requested".into()));
    }
    let mut images = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for s in 0..n {
        let label = s % 2;
        let base = if label == 0 { 0.2 } else { 0.8 };
        let mut img = Tensor3::zeros(h, c, 1)?;
        for i in 0..h {
            for j in 0..c {
                let v = (base + rng.next_f64() * 0.1 - 0.05).clamp(0.0, 1.0);
                img.set(i, j, 0, lit(v));
            }
        }
        images.push(img);
        labels.push(label);
    }
    Dataset::new(images, labels, 2)
}
