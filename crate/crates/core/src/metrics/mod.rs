//! Disentanglement metrics against the toy dataset's ground-truth factors,
//! plus the analytic attribute read-out used to score factor swaps.

mod attributes;
mod dci;
mod factorvae;
mod mig;
mod representation;
mod swap;

use std::fmt::Write as _;

pub use attributes::extract_attributes;
pub use dci::{dci_disentanglement, dci_from_importance, lasso};
pub use factorvae::{factorvae_score, FactorVaeConfig, FactorVaeResult};
pub use mig::{mig, quantile_bins};
pub use representation::{principal_projection, Representation};
pub use swap::{swap_fidelity, swap_fidelity_attrs, SwapReport, SwapSummary};

use crate::data::{FACTOR_NAMES, NUM_FACTORS};
use crate::rng::Rng;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum MetricsError {
    #[error("no object")]
    NoObject,
    #[error("expected a 32x32x3 image, got {0} values")]
    ImageSize(usize),
    #[error("collapsed representation: every dimension has standard deviation below {0}")]
    CollapsedRepresentation(f64),
    #[error("importance matrix is all zero")]
    DegenerateImportance,
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("representation has {rows} rows but {factors} factor tuples were given")]
    RowMismatch { rows: usize, factors: usize },
}

pub type Result<T> = std::result::Result<T, MetricsError>;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricsConfig {
    pub factorvae: FactorVaeConfig,
    pub l1_strength: f64,
    pub bins: usize,
    /// Scenes drawn for the DCI and MIG estimates.
    pub samples: usize,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self {
            factorvae: FactorVaeConfig::default(),
            l1_strength: 0.01,
            bins: 20,
            samples: 10_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricsReport {
    pub factorvae_score: f64,
    pub dci_disentanglement: f64,
    pub mig: f64,
    /// `[dims × factors]` DCI importances.
    pub importance: Vec<Vec<f64>>,
    /// `[dims × factors]` FactorVAE training vote counts.
    pub votes: Vec<Vec<usize>>,
    /// `[dims × factors]` mutual information in nats.
    pub mutual_information: Vec<Vec<f64>>,
}

fn csv_block<T: std::fmt::Display>(out: &mut String, title: &str, rows: &[Vec<T>]) {
    writeln!(out, "\n[{title}]").unwrap();
    writeln!(out, "dim,{}", FACTOR_NAMES.join(",")).unwrap();
    for (d, row) in rows.iter().enumerate() {
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        writeln!(out, "{d},{}", cells.join(",")).unwrap();
    }
}

impl MetricsReport {
    /// `key: value` lines followed by CSV blocks for the three matrices.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "factorvae_score: {}", self.factorvae_score).unwrap();
        writeln!(out, "dci_disentanglement: {}", self.dci_disentanglement).unwrap();
        writeln!(out, "mig: {}", self.mig).unwrap();
        csv_block(&mut out, "importance", &self.importance);
        csv_block(&mut out, "votes", &self.votes);
        csv_block(&mut out, "mutual_information", &self.mutual_information);
        out
    }

    /// Reads the three headline scores back from [`Self::to_text`] output.
    pub fn parse_scores(text: &str) -> Option<(f64, f64, f64)> {
        let value = |key: &str| {
            text.lines()
                .find_map(|l| l.strip_prefix(key)?.strip_prefix(": ")?.parse::<f64>().ok())
        };
        Some((value("factorvae_score")?, value("dci_disentanglement")?, value("mig")?))
    }
}

/// Runs all three metrics on a full-dataset representation.
pub fn evaluate(rep: &Representation, cfg: &MetricsConfig, seed: u64) -> Result<MetricsReport> {
    let mut rng = Rng::new(seed);
    let fv = factorvae_score(rep, &cfg.factorvae, &mut rng)?;
    let (rows, factors) = rep.sample_rows(cfg.samples, &mut rng);
    let (dci, importance) = dci_disentanglement(&rows, rep.dims(), &factors, cfg.l1_strength)?;
    let (mig, mi) = mig(&rows, rep.dims(), &factors, cfg.bins)?;
    Ok(MetricsReport {
        factorvae_score: fv.score,
        dci_disentanglement: dci,
        mig,
        importance,
        votes: fv.votes,
        mutual_information: mi,
    })
}

pub(crate) fn check_rows(data: &[f64], dims: usize, factors: usize) -> Result<usize> {
    let rows = if dims == 0 { 0 } else { data.len() / dims };
    if rows * dims != data.len() || rows != factors {
        return Err(MetricsError::RowMismatch { rows, factors });
    }
    Ok(rows)
}

pub(crate) const K: usize = NUM_FACTORS;
