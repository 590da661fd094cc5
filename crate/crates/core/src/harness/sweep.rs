use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ConfigFile, ExperimentConfig};
use super::run::{run_single, RunSummary};
use crate::error::{Error, Result};

/// Aggregates for one axis value across its replicates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub axis: String,
    pub value: f64,
    pub replicates: usize,
    pub mean_regret: f64,
    pub max_regret: f64,
    pub mean_regret_clean: f64,
    pub mean_c0: f64,
    pub mean_c1: f64,
    pub mean_d_log_scale: f64,
    /// Runs whose closed-form bound held; empty when no bound applies.
    pub bounds_satisfied: Option<usize>,
    pub all_passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub axis: String,
    pub cells: Vec<SweepCell>,
    pub runs: Vec<RunSummary>,
}

/// Runs `values × replicates`; replicate `r` uses seed `seeds[0] + r`.
///
/// Every cell is validated before any run starts.
pub fn sweep(base: &ConfigFile, axis: &str, values: &[f64], replicates: usize) -> Result<SweepTable> {
    if values.is_empty() {
        return Err(Error::Config("sweep needs at least one value".into()));
    }
    if replicates == 0 {
        return Err(Error::Config("sweep needs at least one replicate".into()));
    }
    let first = *base
        .seeds
        .first()
        .ok_or_else(|| Error::Config("seeds must list at least one seed".into()))?;
    let configs: Vec<ExperimentConfig> = values
        .iter()
        .map(|&v| {
            let mut f = base.with_value(axis, v)?;
            f.seeds = (0..replicates as u64).map(|r| first.wrapping_add(r)).collect();
            f.resolve()
        })
        .collect::<Result<_>>()?;
    let jobs: Vec<(usize, u64)> = configs
        .iter()
        .enumerate()
        .flat_map(|(i, c)| c.seeds.iter().map(move |&s| (i, s)))
        .collect();
    let runs: Vec<RunSummary> = jobs
        .par_iter()
        .map(|&(i, s)| {
            let mut r = run_single(&configs[i], s)?.summary;
            r.run_id = format!("{axis}={}_{}", values[i], r.run_id);
            Ok(r)
        })
        .collect::<Result<_>>()?;
    let cells = values
        .iter()
        .enumerate()
        .map(|(i, &value)| {
            let rs = &runs[i * replicates..(i + 1) * replicates];
            let n = rs.len() as f64;
            let mean = |f: &dyn Fn(&RunSummary) -> f64| rs.iter().map(f).sum::<f64>() / n;
            let applicable: Vec<bool> = rs.iter().filter_map(|r| r.bound_holds).collect();
            SweepCell {
                axis: axis.to_string(),
                value,
                replicates,
                mean_regret: mean(&|r| r.regret_corrupt),
                max_regret: rs.iter().map(|r| r.regret_corrupt).fold(f64::NEG_INFINITY, f64::max),
                mean_regret_clean: mean(&|r| r.regret_clean),
                mean_c0: mean(&|r| r.c0 as f64),
                mean_c1: mean(&|r| r.c1),
                mean_d_log_scale: mean(&|r| r.d_log_scale),
                bounds_satisfied: (!applicable.is_empty()).then(|| applicable.iter().filter(|b| **b).count()),
                all_passed: rs.iter().all(RunSummary::passed),
            }
        })
        .collect();
    Ok(SweepTable {
        axis: axis.to_string(),
        cells,
        runs,
    })
}
