//! Few-shot prompt construction and the training-pair file.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::LmError;
use crate::grammar::{parse, Catalog, GrammarError, SubgoalSequence};

/// A demonstration `(instruction, plan)` used to build prompts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingPair {
    pub instruction: String,
    pub plan: SubgoalSequence,
}

impl TrainingPair {
    pub fn new(instruction: impl Into<String>, plan: SubgoalSequence) -> Result<Self, GrammarError> {
        if plan.is_empty() {
            return Err(GrammarError::EmptyPlan);
        }
        Ok(TrainingPair {
            instruction: normalize_instruction(&instruction.into()),
            plan,
        })
    }

    /// Same pair with instruction and plan text exchanged, for reverse prompts.
    fn swapped(&self) -> (String, String) {
        (self.plan.to_string(), self.instruction.clone())
    }
}

/// Lowercases and strips the characters the prompt format reserves
/// (`.`, `,`, `=`), collapsing whitespace.
pub fn normalize_instruction(text: &str) -> String {
    text.to_lowercase()
        .replace(['.', ',', '='], " ")
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}

fn join_prompt(examples: impl Iterator<Item = (String, String)>, query: &str) -> String {
    let mut parts: Vec<String> = examples.map(|(x, y)| format!("{x} = {y}")).collect();
    parts.push(format!("{query} = "));
    parts.join(", ")
}

/// `"t1 = s(g1), ..., tn = s(gn), q = "`.
pub fn build_prompt_forward(pairs: &[TrainingPair], query: &str) -> String {
    join_prompt(
        pairs.iter().map(|p| (p.instruction.clone(), p.plan.to_string())),
        query,
    )
}

/// `"s(g1) = t1, ..., s(gn) = tn, s(h) = "`.
pub fn build_prompt_reverse(pairs: &[TrainingPair], hypothesis: &SubgoalSequence) -> String {
    join_prompt(pairs.iter().map(TrainingPair::swapped), &hypothesis.to_string())
}

/// Parses `instruction<TAB>serialized-plan` records (one per line, `#` comments).
pub fn parse_pairs(text: &str, catalog: &Catalog) -> Result<Vec<TrainingPair>, LmError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            continue;
        }
        let bad = |msg: String| LmError::PairFile { line: i + 1, msg };
        let (instr, plan) = line
            .split_once('\t')
            .ok_or_else(|| bad("expected `instruction<TAB>plan`".into()))?;
        let plan = parse(plan.trim(), catalog).map_err(|e| bad(e.to_string()))?;
        out.push(TrainingPair::new(instr.trim(), plan).map_err(|e| bad(e.to_string()))?);
    }
    Ok(out)
}

pub fn load_pairs(path: &Path, catalog: &Catalog) -> Result<Vec<TrainingPair>, LmError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| LmError::Transport(format!("reading {}: {e}", path.display())))?;
    parse_pairs(&text, catalog)
}

pub fn format_pairs(pairs: &[TrainingPair]) -> String {
    pairs
        .iter()
        .map(|p| format!("{}\t{}\n", p.instruction, p.plan))
        .collect()
}
