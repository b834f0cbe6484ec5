//! Training data from execution feedback.
//!
//! For each instruction the decoded plans are executed in rank order; the
//! first one that earns reward is paired with every state its episode
//! visited.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::RankerError;
use crate::decode::Hypothesis;
use crate::env::{pooled_counts, reward, Benchmark, Simulator, TaskSpec};
use crate::grammar::{parse, Catalog, SubgoalSequence};
use crate::io::write_atomic;
use crate::pipeline::Planner;
use crate::rerank::RankCriterion;

/// A candidate plan with the ranking score it was decoded with.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredPlan {
    pub plan: SubgoalSequence,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeedbackExample {
    pub instruction: String,
    pub candidates: Vec<ScoredPlan>,
    /// Index of the successful plan among `candidates`.
    pub success: usize,
    /// Pooled per-category counts of the state.
    pub state: Vec<f64>,
}

impl FeedbackExample {
    pub fn plan(&self) -> &SubgoalSequence {
        &self.candidates[self.success].plan
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CandidateRecord {
    plan: String,
    score: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExampleRecord {
    instruction: String,
    candidates: Vec<CandidateRecord>,
    success: usize,
    state: Vec<f64>,
}

/// One JSON object per line.
pub fn save_dataset(path: &Path, data: &[FeedbackExample]) -> Result<(), RankerError> {
    let mut out = String::new();
    for ex in data {
        let rec = ExampleRecord {
            instruction: ex.instruction.clone(),
            candidates: ex
                .candidates
                .iter()
                .map(|c| CandidateRecord {
                    plan: c.plan.to_string(),
                    score: c.score,
                })
                .collect(),
            success: ex.success,
            state: ex.state.clone(),
        };
        out.push_str(&serde_json::to_string(&rec).expect("records serialize"));
        out.push('\n');
    }
    write_atomic(path, out.as_bytes()).map_err(|e| RankerError::io(path, e))
}

pub fn load_dataset(path: &Path, catalog: &Catalog) -> Result<Vec<FeedbackExample>, RankerError> {
    let text = std::fs::read_to_string(path).map_err(|e| RankerError::io(path, e))?;
    parse_dataset(&text, catalog)
}

pub fn parse_dataset(text: &str, catalog: &Catalog) -> Result<Vec<FeedbackExample>, RankerError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |msg: String| RankerError::Dataset { line: i + 1, msg };
        let rec: ExampleRecord = serde_json::from_str(line).map_err(|e| bad(e.to_string()))?;
        let candidates = rec
            .candidates
            .into_iter()
            .map(|c| {
                let plan = parse(&c.plan, catalog).map_err(|e| bad(e.to_string()))?;
                Ok(ScoredPlan { plan, score: c.score })
            })
            .collect::<Result<Vec<_>, RankerError>>()?;
        if rec.success >= candidates.len() {
            return Err(bad(format!("success index {} out of {} candidates", rec.success, candidates.len())));
        }
        if rec.state.len() != catalog.len() {
            return Err(bad(format!("state has {} entries, catalog {}", rec.state.len(), catalog.len())));
        }
        out.push(FeedbackExample {
            instruction: rec.instruction,
            candidates,
            success: rec.success,
            state: rec.state,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FeedbackConfig {
    /// Candidates kept per instruction.
    pub k: usize,
    /// Instructions used at most.
    pub budget: usize,
}

impl Default for FeedbackConfig {
    fn default() -> Self {
        FeedbackConfig { k: 10, budget: 1000 }
    }
}

/// Ranked candidates with their ranking scores, truncated to `k`.
pub fn scored_candidates(ranked: &[Hypothesis], criterion: RankCriterion, k: usize) -> Result<Vec<ScoredPlan>, RankerError> {
    ranked
        .iter()
        .take(k)
        .map(|h| {
            Ok(ScoredPlan {
                plan: h.plan.clone(),
                score: criterion.score(h)?,
            })
        })
        .collect()
}

/// Decodes and ranks every task's instruction, in parallel, order kept.
pub fn decode_all(planner: &Planner, tasks: &[&TaskSpec], k: usize) -> Result<Vec<Vec<ScoredPlan>>, RankerError> {
    tasks
        .par_iter()
        .map(|t| {
            let ranked = planner.predict(&t.instruction)?;
            scored_candidates(&ranked, planner.cfg.criterion, k)
        })
        .collect()
}

/// Examples for one task given its ranked candidates.
pub fn task_feedback(
    task: &TaskSpec,
    candidates: &[ScoredPlan],
    bench: &Benchmark,
    sim: &Simulator,
) -> Result<Vec<FeedbackExample>, RankerError> {
    let scene = bench.scene_of(task);
    for (idx, cand) in candidates.iter().enumerate() {
        let mut state = sim.reset(scene, task)?;
        let mut visited = vec![pooled_counts(&state, &sim.catalog)];
        for g in &cand.plan.steps {
            let (next, out) = sim.execute_subgoal(&state, g);
            if !out.success {
                break;
            }
            state = next;
            visited.push(pooled_counts(&state, &sim.catalog));
        }
        if reward(task, &state) > 0 {
            return Ok(visited
                .into_iter()
                .map(|s| FeedbackExample {
                    instruction: task.instruction.clone(),
                    candidates: candidates.to_vec(),
                    success: idx,
                    state: s,
                })
                .collect());
        }
    }
    Ok(Vec::new())
}

/// Collects examples for the first `cfg.budget` tasks.
pub fn collect_feedback(
    tasks: &[&TaskSpec],
    planner: &Planner,
    bench: &Benchmark,
    sim: &Simulator,
    cfg: &FeedbackConfig,
) -> Result<Vec<FeedbackExample>, RankerError> {
    let tasks = &tasks[..tasks.len().min(cfg.budget)];
    let decoded = decode_all(planner, tasks, cfg.k)?;
    collect_from_candidates(tasks, &decoded, bench, sim)
}

pub fn collect_from_candidates(
    tasks: &[&TaskSpec],
    decoded: &[Vec<ScoredPlan>],
    bench: &Benchmark,
    sim: &Simulator,
) -> Result<Vec<FeedbackExample>, RankerError> {
    let per_task = tasks
        .par_iter()
        .zip(decoded)
        .map(|(t, c)| task_feedback(t, c, bench, sim))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(per_task.into_iter().flatten().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{GoalCondition, ObjectInstance, RoomKind, Scene, Split};

    fn fixture() -> (Benchmark, Simulator) {
        let scene = Scene {
            id: "s0".into(),
            room: RoomKind::Kitchen,
            width: 4,
            height: 4,
            objects: vec![
                ObjectInstance::new("apple", (0, 0)),
                ObjectInstance::new("fridge", (1, 1)),
                ObjectInstance::new("countertop", (2, 2)),
            ],
        };
        let sim = Simulator::builtin();
        let task = TaskSpec {
            id: "t0".into(),
            scene: "s0".into(),
            instruction: "put the apple in the fridge".into(),
            task_type: "pick_place".into(),
            split: Split::Train,
            conditions: vec![GoalCondition::new("apple").inside("fridge")],
            oracle_plan: Some(plan("pick up apple, put in fridge.")),
            ambiguous: None,
        };
        (Benchmark::new(vec![scene], vec![task]).unwrap(), sim)
    }

    fn plan(s: &str) -> SubgoalSequence {
        parse(s, &Catalog::builtin()).unwrap()
    }

    fn cands(texts: &[&str]) -> Vec<ScoredPlan> {
        texts
            .iter()
            .enumerate()
            .map(|(i, t)| ScoredPlan {
                plan: plan(t),
                score: -(i as f64),
            })
            .collect()
    }

    #[test]
    fn clean_top_plan_gives_len_plus_one() {
        let (b, sim) = fixture();
        let c = cands(&["pick up apple, put in fridge.", "pick up apple, put in countertop."]);
        let ex = task_feedback(&b.tasks[0], &c, &b, &sim).unwrap();
        assert_eq!(ex.len(), 3);
        assert!(ex.iter().all(|e| e.success == 0 && e.candidates == c));
        assert!(ex.iter().all(|e| e.state.len() == sim.catalog.len()));
    }

    #[test]
    fn later_plan_is_recorded_when_earlier_fail() {
        let (b, sim) = fixture();
        let c = cands(&["pick up apple, put in countertop.", "pick up apple, put in fridge."]);
        let ex = task_feedback(&b.tasks[0], &c, &b, &sim).unwrap();
        assert_eq!(ex.len(), 3);
        assert!(ex.iter().all(|e| e.success == 1));
        assert_eq!(ex[0].plan(), &c[1].plan);
    }

    #[test]
    fn no_success_no_examples() {
        let (b, sim) = fixture();
        let c = cands(&["pick up apple, put in countertop.", "pick up egg, put in fridge."]);
        assert!(task_feedback(&b.tasks[0], &c, &b, &sim).unwrap().is_empty());
        // With k = 1 only the failing top plan is tried.
        let c = cands(&["pick up apple, put in countertop.", "pick up apple, put in fridge."]);
        assert!(task_feedback(&b.tasks[0], &c[..1], &b, &sim).unwrap().is_empty());
    }

    #[test]
    fn dataset_file_round_trip() {
        let (b, sim) = fixture();
        let c = cands(&["pick up apple, put in fridge."]);
        let ex = task_feedback(&b.tasks[0], &c, &b, &sim).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("feedback.jsonl");
        save_dataset(&p, &ex).unwrap();
        assert_eq!(load_dataset(&p, &sim.catalog).unwrap(), ex);
        let bad = r#"{"instruction":"x","candidates":[{"plan":"pick up apple.","score":0}],"success":3,"state":[]}"#;
        assert!(matches!(parse_dataset(bad, &sim.catalog), Err(RankerError::Dataset { line: 1, .. })));
    }
}
