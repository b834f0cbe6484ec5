//! Plan ranking from execution feedback: a linear model over state and text
//! features, trained with a softmax loss on plans that succeeded, and the
//! rollout policy that uses it.

mod features;
mod feedback;
mod params;
mod rollout;
mod train;

use std::path::Path;

pub use features::{dot, FeatureConfig, Featurizer, HashedNgrams, Sparse, TextFeaturizer, SEP};
pub use feedback::{
    collect_feedback, collect_from_candidates, decode_all, load_dataset, parse_dataset, save_dataset,
    scored_candidates, task_feedback, FeedbackConfig, FeedbackExample, ScoredPlan,
};
pub use params::{f_score, RankerParams};
pub use rollout::{
    oracle_candidates, policy_success_rate, rollout_candidates, run_policy, success_rates, Episode,
    RolloutConfig, StepRecord, StopReason, SuccessRates,
};
pub use train::{featurize, loss_and_grad, train, train_instances, Instance, TrainConfig, TrainReport};

use crate::env::EnvError;
use crate::pipeline::PipelineError;
use crate::rerank::RerankError;

#[derive(Debug, thiserror::Error)]
pub enum RankerError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("feedback dataset is empty; no instruction had a plan that earned reward")]
    EmptyDataset,
    #[error("invalid ranker config: {0}")]
    Config(String),
    #[error("ranker params: {0}")]
    Params(String),
    #[error("feedback dataset line {line}: {msg}")]
    Dataset { line: usize, msg: String },
    #[error(transparent)]
    Env(EnvError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Rerank(#[from] RerankError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl RankerError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        RankerError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

impl From<EnvError> for RankerError {
    fn from(e: EnvError) -> Self {
        match e {
            EnvError::DimensionMismatch { expected, got } => RankerError::DimensionMismatch { expected, got },
            other => RankerError::Env(other),
        }
    }
}
