//! Recall as a function of the number of prompt examples.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{evaluate, to_tsv, topk_recall, EvalError};
use crate::env::{Benchmark, Split, TaskSpec};
use crate::lm::TrainingPair;
use crate::pipeline::{PipelineError, Planner};

/// `n` pool demonstrations per task type, drawn with `seed`. Types are
/// visited in name order.
pub fn sample_prompt_pairs(bench: &Benchmark, n: usize, seed: u64) -> Result<Vec<TrainingPair>, EvalError> {
    let mut by_type: BTreeMap<String, Vec<TrainingPair>> = BTreeMap::new();
    for (ty, pair) in bench.pairs(Split::Pool) {
        by_type.entry(ty).or_default().push(pair);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for (ty, pairs) in &by_type {
        if pairs.len() < n {
            return Err(EvalError::InsufficientPool {
                task_type: ty.clone(),
                available: pairs.len(),
                wanted: n,
            });
        }
        out.extend(pairs.choose_multiple(&mut rng, n).cloned());
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AblationConfig {
    /// Examples per task type. With eleven task types, four per type
    /// exceeds the default 1024-token context budget.
    pub n_values: Vec<usize>,
    pub seeds: Vec<u64>,
}

impl Default for AblationConfig {
    fn default() -> Self {
        AblationConfig {
            n_values: vec![0, 1, 2, 3],
            seeds: vec![1, 2, 3, 4, 5],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AblationRow {
    pub n: usize,
    pub runs: usize,
    pub top1_mean: f64,
    pub top1_std: f64,
    pub top10_mean: f64,
    pub top10_std: f64,
}

/// Mean and population standard deviation.
fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// For each `n` and seed, samples a prompt set, builds a planner with
/// `make_planner`, and measures recall on `tasks`.
pub fn ablation_sweep(
    bench: &Benchmark,
    tasks: &[&TaskSpec],
    cfg: &AblationConfig,
    make_planner: &dyn Fn(Vec<TrainingPair>) -> Result<Planner, PipelineError>,
) -> Result<Vec<AblationRow>, EvalError> {
    if cfg.seeds.is_empty() {
        return Err(EvalError::NoSeeds);
    }
    let mut rows = Vec::new();
    for &n in &cfg.n_values {
        let (mut top1, mut top10) = (Vec::new(), Vec::new());
        for &seed in &cfg.seeds {
            let planner = make_planner(sample_prompt_pairs(bench, n, seed)?)?;
            let records = evaluate(&planner, tasks)?;
            top1.push(topk_recall(&records, 1)?);
            top10.push(topk_recall(&records, 10)?);
        }
        let (top1_mean, top1_std) = mean_std(&top1);
        let (top10_mean, top10_std) = mean_std(&top10);
        rows.push(AblationRow {
            n,
            runs: cfg.seeds.len(),
            top1_mean,
            top1_std,
            top10_mean,
            top10_std,
        });
    }
    Ok(rows)
}

pub fn ablation_tsv(rows: &[AblationRow]) -> String {
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.n.to_string(),
                r.runs.to_string(),
                format!("{:.4}", r.top1_mean),
                format!("{:.4}", r.top1_std),
                format!("{:.4}", r.top10_mean),
                format!("{:.4}", r.top10_std),
            ]
        })
        .collect();
    to_tsv(&["n_per_type", "seeds", "top1_mean", "top1_std", "top10_mean", "top10_std"], &body)
}
