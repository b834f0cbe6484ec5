//! Metrics and experiment drivers: recall at k, criterion comparison,
//! confusion counts, and prompt-size ablations.

mod ablation;
mod confusion;

use rayon::prelude::*;
use serde::Serialize;

pub use ablation::{ablation_sweep, ablation_tsv, sample_prompt_pairs, AblationConfig, AblationRow};
pub use confusion::{confusion, ConfusionMatrix, Slot, NULL_LABEL};

use crate::decode::Hypothesis;
use crate::env::TaskSpec;
use crate::grammar::SubgoalSequence;
use crate::pipeline::{PipelineError, Planner};
use crate::rerank::{rank, RankCriterion, RerankError};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("k must be at least 1")]
    InvalidK,
    #[error(transparent)]
    MissingScore(#[from] RerankError),
    #[error("task type `{task_type}` has {available} pool examples, {wanted} requested")]
    InsufficientPool {
        task_type: String,
        available: usize,
        wanted: usize,
    },
    #[error("task `{0}` has no oracle plan to compare against")]
    NoGold(String),
    #[error("no seeds given")]
    NoSeeds,
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
}

/// One instruction's gold plan and decoded hypotheses.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalRecord {
    pub task: String,
    pub instruction: String,
    pub gold: SubgoalSequence,
    /// In forward order, with reverse scores.
    pub hypotheses: Vec<Hypothesis>,
    /// Plans ranked by the criterion the records were produced with.
    pub predicted: Vec<SubgoalSequence>,
}

/// Decodes every task (in parallel, order kept) and ranks by the planner's
/// criterion.
pub fn evaluate(planner: &Planner, tasks: &[&TaskSpec]) -> Result<Vec<EvalRecord>, EvalError> {
    tasks
        .par_iter()
        .map(|t| {
            let gold = t.oracle_plan.clone().ok_or_else(|| EvalError::NoGold(t.id.clone()))?;
            let hypotheses = planner.decode(&t.instruction)?;
            let predicted = rank(&hypotheses, planner.cfg.criterion)?.into_iter().map(|h| h.plan).collect();
            Ok(EvalRecord {
                task: t.id.clone(),
                instruction: t.instruction.clone(),
                gold,
                hypotheses,
                predicted,
            })
        })
        .collect()
}

fn recall_of(ranked: impl Iterator<Item = (SubgoalSequence, Vec<SubgoalSequence>)>, k: usize) -> f64 {
    let (mut hit, mut n) = (0usize, 0usize);
    for (gold, preds) in ranked {
        n += 1;
        if preds.iter().take(k).any(|p| *p == gold) {
            hit += 1;
        }
    }
    if n == 0 {
        0.0
    } else {
        hit as f64 / n as f64
    }
}

/// Share of records whose gold plan is among the first `k` predictions.
/// Zero for no records.
pub fn topk_recall(records: &[EvalRecord], k: usize) -> Result<f64, EvalError> {
    if k == 0 {
        return Err(EvalError::InvalidK);
    }
    Ok(recall_of(records.iter().map(|r| (r.gold.clone(), r.predicted.clone())), k))
}

/// Top-1 recall of each criterion over the same hypothesis sets.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriteriaRow {
    pub criterion: String,
    pub top1: f64,
}

pub fn compare_criteria(records: &[EvalRecord], criteria: &[RankCriterion]) -> Result<Vec<CriteriaRow>, EvalError> {
    criteria
        .iter()
        .map(|&c| {
            let ranked = records
                .iter()
                .map(|r| Ok((r.gold.clone(), rank(&r.hypotheses, c)?.into_iter().map(|h| h.plan).collect())))
                .collect::<Result<Vec<_>, RerankError>>()?;
            Ok(CriteriaRow {
                criterion: c.to_string(),
                top1: recall_of(ranked.into_iter(), 1),
            })
        })
        .collect()
}

/// Tab-separated table with a header row.
pub fn to_tsv<R: AsRef<[String]>>(header: &[&str], rows: &[R]) -> String {
    let mut s = header.join("\t");
    s.push('\n');
    for r in rows {
        s.push_str(&r.as_ref().join("\t"));
        s.push('\n');
    }
    s
}

pub fn criteria_tsv(rows: &[CriteriaRow]) -> String {
    let body: Vec<Vec<String>> = rows.iter().map(|r| vec![r.criterion.clone(), format!("{:.4}", r.top1)]).collect();
    to_tsv(&["criterion", "top1_recall"], &body)
}
