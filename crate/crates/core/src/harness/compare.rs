use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::train::{prepare, train_prepared};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::model::Variant;
use crate::rng::derive_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantSummary {
    pub variant: Variant,
    /// Validation accuracy per seed, percent.
    pub accuracies: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation (0 for a single seed).
    pub std: f64,
}

impl VariantSummary {
    fn new(variant: Variant, accuracies: Vec<f64>) -> Self {
        let n = accuracies.len() as f64;
        let mean = accuracies.iter().sum::<f64>() / n;
        let std = if accuracies.len() > 1 {
            (accuracies.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Self { variant, accuracies, mean, std }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub rows: Vec<VariantSummary>,
    /// `rows[1].mean − rows[0].mean`.
    pub difference: f64,
}

impl ComparisonTable {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("variant,mean_val_acc,std_val_acc,per_seed\n");
        for r in &self.rows {
            let per: Vec<String> = r.accuracies.iter().map(|a| a.to_string()).collect();
            s += &format!("{},{},{},{}\n", r.variant, r.mean, r.std, per.join(";"));
        }
        s
    }
}

/// Seed used for run `i` of a comparison based on `base`.
pub fn run_seed(base: u64, i: usize) -> u64 {
    derive_seed(base, 1000 + i as u64)
}

/// Trains two configurations on identical data and seeds.
pub fn compare_configs(
    train: &Dataset,
    val: &Dataset,
    a: &ExperimentConfig,
    b: &ExperimentConfig,
    n_seeds: usize,
) -> Result<ComparisonTable> {
    if n_seeds == 0 {
        return Err(Error::Config("n_seeds must be at least 1".into()));
    }
    let mut rows = Vec::with_capacity(2);
    for cfg in [a, b] {
        let (tr, va) = (prepare(train, cfg)?, prepare(val, cfg)?);
        let accs = (0..n_seeds)
            .map(|i| {
                let run = ExperimentConfig { seed: run_seed(a.seed, i), ..cfg.clone() };
                train_prepared(&tr, &va, &run).map(|(_, r)| r.accuracy)
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(VariantSummary::new(cfg.variant, accs));
    }
    let difference = rows[1].mean - rows[0].mean;
    Ok(ComparisonTable { rows, difference })
}

/// Mono (first row) against Bi (second row).
pub fn compare_variants(train: &Dataset, val: &Dataset, base: &ExperimentConfig, n_seeds: usize) -> Result<ComparisonTable> {
    let mono = ExperimentConfig { variant: Variant::Mono, ..base.clone() };
    let bi = ExperimentConfig { variant: Variant::Bi, ..base.clone() };
    compare_configs(train, val, &mono, &bi, n_seeds)
}
