//! The high-level policy: pick, act, prune.
//!
//! The candidate with the highest score in the current state supplies the
//! next subgoal. After it executes, only candidates whose subgoal at that
//! position matches stay. A candidate whose subgoal fails is dropped and the
//! state is left as it was.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::features::{dot, Featurizer};
use super::feedback::ScoredPlan;
use super::params::RankerParams;
use super::RankerError;
use crate::env::{goal_condition_fraction, pooled_counts, reward, AgentState, Benchmark, ExecOutcome, Simulator, TaskSpec};
use crate::grammar::{PlanStep, Subgoal, SubgoalSequence};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RolloutConfig {
    /// Most subgoals executed per episode.
    pub i_thresh: usize,
}

impl Default for RolloutConfig {
    fn default() -> Self {
        RolloutConfig { i_thresh: 10 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// The chosen plan emitted its stop marker.
    Stop,
    /// The chosen plan ran out of subgoals without a stop marker.
    PlanEnded,
    NoCandidates,
    Threshold,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub subgoal: Subgoal,
    /// Rank of the chosen candidate in the input order.
    pub candidate: usize,
    pub outcome: ExecOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Episode {
    pub task: String,
    pub steps: Vec<StepRecord>,
    pub stop: StopReason,
    pub reward: u8,
    pub goal_conditions: f64,
}

impl Episode {
    /// Subgoals that executed.
    pub fn executed(&self) -> usize {
        self.steps.iter().filter(|s| s.outcome.success).count()
    }
}

/// Runs the policy over `candidates` (in rank order, which breaks score
/// ties). Returns the executed plan, the final state and the record.
pub fn rollout_candidates(
    task: &TaskSpec,
    candidates: &[SubgoalSequence],
    params: &RankerParams,
    featurizer: &Featurizer,
    bench: &Benchmark,
    sim: &Simulator,
    cfg: &RolloutConfig,
) -> Result<(SubgoalSequence, AgentState, Episode), RankerError> {
    params.check(featurizer)?;
    let mut state = sim.reset(bench.scene_of(task), task)?;
    let mut live: Vec<usize> = (0..candidates.len()).collect();
    let mut done: Vec<Subgoal> = Vec::new();
    let mut steps = Vec::new();
    let stop = loop {
        if done.len() >= cfg.i_thresh {
            break StopReason::Threshold;
        }
        let counts = pooled_counts(&state, &featurizer.catalog);
        let mut best: Option<(usize, f64)> = None;
        for &c in &live {
            let s = dot(&params.theta, &featurizer.features(&task.instruction, &candidates[c], &counts)?);
            if best.is_none_or(|(_, b)| s > b) {
                best = Some((c, s));
            }
        }
        let Some((chosen, _)) = best else { break StopReason::NoCandidates };
        let i = done.len();
        let g = match candidates[chosen].step(i) {
            PlanStep::Act(g) => g,
            PlanStep::Stop => break StopReason::Stop,
            PlanStep::Exhausted => break StopReason::PlanEnded,
        };
        let (next, outcome) = sim.execute_subgoal(&state, g);
        steps.push(StepRecord {
            subgoal: g.clone(),
            candidate: chosen,
            outcome,
        });
        if !outcome.success {
            live.retain(|&c| c != chosen);
            continue;
        }
        state = next;
        done.push(g.clone());
        live.retain(|&c| candidates[c].step(i) == PlanStep::Act(g));
    };
    let episode = Episode {
        task: task.id.clone(),
        steps,
        stop,
        reward: reward(task, &state),
        goal_conditions: goal_condition_fraction(task, &state),
    };
    let plan = SubgoalSequence {
        steps: done,
        terminated: stop == StopReason::Stop,
    };
    Ok((plan, state, episode))
}

/// Task and goal-condition success over a set of episodes. `None` when
/// there were no episodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuccessRates {
    pub episodes: usize,
    pub task: Option<f64>,
    pub goal_conditions: Option<f64>,
}

pub fn success_rates(episodes: &[Episode]) -> SuccessRates {
    let n = episodes.len();
    let mean = |f: &dyn Fn(&Episode) -> f64| (n > 0).then(|| episodes.iter().map(f).sum::<f64>() / n as f64);
    SuccessRates {
        episodes: n,
        task: mean(&|e| f64::from(e.reward)),
        goal_conditions: mean(&|e| e.goal_conditions),
    }
}

/// Rolls out every task over its candidates, in parallel, order kept.
pub fn run_policy(
    tasks: &[&TaskSpec],
    candidates: &[Vec<ScoredPlan>],
    params: &RankerParams,
    featurizer: &Featurizer,
    bench: &Benchmark,
    sim: &Simulator,
    cfg: &RolloutConfig,
) -> Result<Vec<Episode>, RankerError> {
    tasks
        .par_iter()
        .zip(candidates)
        .map(|(t, c)| {
            let plans: Vec<SubgoalSequence> = c.iter().map(|p| p.plan.clone()).collect();
            rollout_candidates(t, &plans, params, featurizer, bench, sim, cfg).map(|r| r.2)
        })
        .collect()
}

/// Rates for rollouts of the given candidates.
pub fn policy_success_rate(
    tasks: &[&TaskSpec],
    candidates: &[Vec<ScoredPlan>],
    params: &RankerParams,
    featurizer: &Featurizer,
    bench: &Benchmark,
    sim: &Simulator,
    cfg: &RolloutConfig,
) -> Result<SuccessRates, RankerError> {
    Ok(success_rates(&run_policy(tasks, candidates, params, featurizer, bench, sim, cfg)?))
}

/// Each task's oracle plan as its only candidate.
pub fn oracle_candidates(tasks: &[&TaskSpec]) -> Vec<Vec<ScoredPlan>> {
    tasks
        .iter()
        .map(|t| {
            t.oracle_plan
                .iter()
                .map(|p| ScoredPlan {
                    plan: p.clone(),
                    score: 0.0,
                })
                .collect()
        })
        .collect()
}
