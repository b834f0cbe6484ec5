//! Instruction to ranked plans: prompt, constrained decoding, re-ranking.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::decode::{beam_search, BeamConfig, DecodeError, Hypothesis};
use crate::grammar::{build_prefix_trie, ActionType, Catalog, GrammarError, PrefixTrie, Subgoal, SubgoalSequence};
use crate::lm::{
    build_prompt_forward, fit_slot_model, normalize_instruction, LmError, SlotConfig,
    SlotModel, TokenModel, TrainingPair,
};
use crate::rerank::{fill_scores, rank, RankCriterion, RerankError};

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Grammar(#[from] GrammarError),
    #[error(transparent)]
    Lm(#[from] LmError),
    #[error(transparent)]
    Decode(#[from] DecodeError),
    #[error(transparent)]
    Rerank(#[from] RerankError),
}

/// Default settings for the in-context reference model.
pub fn default_reference() -> SlotConfig {
    SlotConfig::default()
}

/// Fits the reference model "in context": on the demonstration pairs in both
/// directions. Without pairs it falls back to one verbalized subgoal per
/// (action, object) so the model still covers the plan language.
pub fn in_context_model(
    pairs: &[TrainingPair],
    catalog: &Catalog,
    cfg: &SlotConfig,
) -> Result<SlotModel, LmError> {
    let mut corpus: Vec<String> = Vec::new();
    for p in pairs {
        corpus.push(format!("{} = {}", p.instruction, p.plan));
        corpus.push(format!("{} = {}", p.plan, p.instruction));
    }
    if corpus.is_empty() {
        for &a in &ActionType::ALL {
            for o in catalog.iter() {
                corpus.push(SubgoalSequence::new(vec![Subgoal::new(a, o.clone())]).to_string());
            }
        }
    }
    fit_slot_model(&corpus, catalog, cfg)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlannerConfig {
    pub beam: BeamConfig,
    pub criterion: RankCriterion,
}

/// A prompt set bound to a scorer and a grammar.
#[derive(Clone)]
pub struct Planner {
    pub model: Arc<dyn TokenModel>,
    pub pairs: Vec<TrainingPair>,
    pub trie: Arc<PrefixTrie>,
    pub cfg: PlannerConfig,
}

impl std::fmt::Debug for Planner {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Planner")
            .field("pairs", &self.pairs.len())
            .field("trie_nodes", &self.trie.node_count())
            .field("cfg", &self.cfg)
            .finish()
    }
}

impl Planner {
    pub fn new(
        model: Arc<dyn TokenModel>,
        pairs: Vec<TrainingPair>,
        catalog: &Catalog,
        cfg: PlannerConfig,
    ) -> Result<Self, PipelineError> {
        cfg.beam.validate()?;
        cfg.criterion.validate()?;
        let trie = build_prefix_trie(catalog, &ActionType::ALL, model.tokenizer())?;
        Ok(Planner {
            model,
            pairs,
            trie: Arc::new(trie),
            cfg,
        })
    }

    /// Planner over the in-context reference n-gram model.
    pub fn reference(
        pairs: Vec<TrainingPair>,
        catalog: &Catalog,
        reference: &SlotConfig,
        cfg: PlannerConfig,
    ) -> Result<Self, PipelineError> {
        let model = in_context_model(&pairs, catalog, reference)?;
        Self::new(Arc::new(model), pairs, catalog, cfg)
    }

    pub fn prompt(&self, instruction: &str) -> String {
        build_prompt_forward(&self.pairs, &normalize_instruction(instruction))
    }

    /// Decodes the top hypotheses with forward and reverse scores filled in,
    /// in forward order.
    pub fn decode(&self, instruction: &str) -> Result<Vec<Hypothesis>, PipelineError> {
        let query = normalize_instruction(instruction);
        let prompt = build_prompt_forward(&self.pairs, &query);
        let mut hyps = beam_search(self.model.as_ref(), &prompt, &self.trie, &self.cfg.beam)?;
        let lambda = match self.cfg.criterion {
            RankCriterion::WeightedMI { lambda } => lambda,
            RankCriterion::Reverse => 1.0,
            RankCriterion::Forward => 0.0,
        };
        fill_scores(self.model.as_ref(), &self.pairs, &query, &mut hyps, lambda)?;
        Ok(hyps)
    }

    /// Decodes and ranks by the configured criterion.
    pub fn predict(&self, instruction: &str) -> Result<Vec<Hypothesis>, PipelineError> {
        let hyps = self.decode(instruction)?;
        Ok(rank(&hyps, self.cfg.criterion)?)
    }
}
