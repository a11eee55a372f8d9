//! Implementation of the `racnn` command line: benchmark runs, alpha
//! statistics, training and evaluation drivers, and the self-check
//! suites. The binary in `main.rs` only parses flags and dispatches.

pub mod bench;
pub mod run;
pub mod selfcheck;
pub mod stats;

use racnn::nn::dataset::{synthetic_4class, synthetic_linear, Dataset};
use racnn::{Rng, Scalar};

/// Failures split by exit code: usage errors (2) cover flag values that
/// never make sense, check errors (1) cover everything discovered while
/// actually doing the work.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Check(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Check(m) => write!(f, "{m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<racnn::Error> for CliError {
    fn from(e: racnn::Error) -> Self {
        CliError::Check(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Check(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Check(e.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

pub fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// Which generator backs `--synthetic`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SyntheticKind {
    FourClass,
    Linear,
}

impl SyntheticKind {
    pub fn parse(s: &str) -> CliResult<Self> {
        match s {
            "4class" => Ok(SyntheticKind::FourClass),
            "linear" => Ok(SyntheticKind::Linear),
            other => Err(usage(format!(
                "unknown synthetic dataset {other:?}, expected 4class or linear"
            ))),
        }
    }

    pub fn classes(self) -> usize {
        match self {
            SyntheticKind::FourClass => 4,
            SyntheticKind::Linear => 2,
        }
    }
}

pub fn make_synthetic<T: Scalar>(
    kind: SyntheticKind,
    n: usize,
    h: usize,
    c: usize,
    seed: u64,
) -> CliResult<Dataset<T>> {
    let mut rng = Rng::new(seed);
    let ds = match kind {
        SyntheticKind::FourClass => synthetic_4class(&mut rng, n, h, c)?,
        SyntheticKind::Linear => synthetic_linear(&mut rng, n, h, c)?,
    };
    Ok(ds)
}

/// Splits a freshly generated dataset the same way for every command
/// that derives train/validation parts from one seed.
pub fn split_synthetic<T: Scalar>(
    ds: Dataset<T>,
    train_frac: f64,
    seed: u64,
) -> CliResult<(Dataset<T>, Dataset<T>)> {
    let mut rng = Rng::new(seed ^ 0x5851_f42d_4c95_7f2d);
    Ok(ds.split(train_frac, &mut rng)?)
}

pub fn write_text(path: &std::path::Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text)
        .map_err(|e| CliError::Check(format!("cannot write {}: {e}", path.display())))
}
