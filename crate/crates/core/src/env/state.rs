//! Agent state and the subgoal transition function.

use std::collections::BTreeMap;
use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::affordance::{Affordances, Tag};
use super::scene::{Flag, Scene};
use super::task::{reward, TaskSpec};
use super::EnvError;
use crate::grammar::{ActionType, Catalog, Subgoal};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgentState {
    pub scene: Scene,
    pub holding: Option<usize>,
    pub executed: Vec<Subgoal>,
    /// Times each instance has been picked up.
    pub handled: Vec<u32>,
    pub semantic_grid: BTreeMap<((u32, u32), String), u32>,
}

impl AgentState {
    /// Whether the stored grid matches the scene.
    pub fn grid_consistent(&self) -> bool {
        self.semantic_grid == self.scene.semantic_grid()
    }

    pub fn held_category(&self) -> Option<&str> {
        self.holding.map(|i| self.scene.objects[i].category.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExecReason {
    Ok,
    ObjectAbsent,
    AffordanceViolation,
    HandsFull,
    HandsEmpty,
    InjectedFailure,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ExecOutcome {
    pub success: bool,
    pub reason: ExecReason,
}

impl ExecOutcome {
    fn ok() -> Self {
        ExecOutcome {
            success: true,
            reason: ExecReason::Ok,
        }
    }

    fn fail(reason: ExecReason) -> Self {
        ExecOutcome {
            success: false,
            reason,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExecConfig {
    /// Probability that an otherwise valid subgoal fails.
    pub failure_rate: f64,
    pub seed: u64,
}

impl Default for ExecConfig {
    fn default() -> Self {
        ExecConfig {
            failure_rate: 0.0,
            seed: 0,
        }
    }
}

/// The transition model: catalog, affordances, and failure injection.
#[derive(Debug, Clone)]
pub struct Simulator {
    pub catalog: Catalog,
    pub affordances: Affordances,
    pub exec: ExecConfig,
}

impl Simulator {
    pub fn new(catalog: Catalog, affordances: Affordances) -> Self {
        Simulator {
            catalog,
            affordances,
            exec: ExecConfig::default(),
        }
    }

    pub fn builtin() -> Self {
        Self::new(Catalog::builtin(), Affordances::builtin())
    }

    pub fn with_exec(mut self, exec: ExecConfig) -> Self {
        self.exec = exec;
        self
    }

    /// Fresh state for an episode of `task` in `scene`.
    pub fn reset(&self, scene: &Scene, task: &TaskSpec) -> Result<AgentState, EnvError> {
        scene.validate(&self.catalog, &self.affordances)?;
        if task.scene != scene.id {
            return Err(EnvError::InvalidTask {
                task: task.id.clone(),
                msg: format!("belongs to scene `{}`, not `{}`", task.scene, scene.id),
            });
        }
        let state = AgentState {
            scene: scene.clone(),
            holding: None,
            executed: Vec::new(),
            handled: vec![0; scene.objects.len()],
            semantic_grid: scene.semantic_grid(),
        };
        if reward(task, &state) == 1 {
            return Err(EnvError::AlreadySatisfied(task.id.clone()));
        }
        Ok(state)
    }

    /// Checks that the task is not satisfied initially and that its oracle
    /// plan, if any, executes cleanly and reaches reward 1.
    pub fn validate_task(&self, scene: &Scene, task: &TaskSpec) -> Result<(), EnvError> {
        let mut state = self.reset(scene, task)?;
        if let Some(plan) = &task.oracle_plan {
            let sim = Simulator {
                exec: ExecConfig::default(),
                ..self.clone()
            };
            for g in &plan.steps {
                let (next, out) = sim.execute_subgoal(&state, g);
                if !out.success {
                    return Err(EnvError::OracleFails {
                        task: task.id.clone(),
                        msg: format!("`{g}` failed: {:?}", out.reason),
                    });
                }
                state = next;
            }
            if reward(task, &state) != 1 {
                return Err(EnvError::OracleFails {
                    task: task.id.clone(),
                    msg: "plan completes without meeting the goal".into(),
                });
            }
        }
        Ok(())
    }

    fn injected(&self, state: &AgentState, g: &Subgoal) -> bool {
        if self.exec.failure_rate <= 0.0 {
            return false;
        }
        let mut h = DefaultHasher::new();
        (self.exec.seed, state.executed.len(), &state.executed, g).hash(&mut h);
        ChaCha8Rng::seed_from_u64(h.finish()).gen::<f64>() < self.exec.failure_rate
    }

    /// Applies one subgoal. Failed subgoals return the input state unchanged.
    pub fn execute_subgoal(&self, state: &AgentState, g: &Subgoal) -> (AgentState, ExecOutcome) {
        match self.try_execute(state, g) {
            Ok(mut next) => {
                if self.injected(state, g) {
                    return (state.clone(), ExecOutcome::fail(ExecReason::InjectedFailure));
                }
                next.executed.push(g.clone());
                next.semantic_grid = next.scene.semantic_grid();
                (next, ExecOutcome::ok())
            }
            Err(reason) => (state.clone(), ExecOutcome::fail(reason)),
        }
    }

    fn try_execute(&self, state: &AgentState, g: &Subgoal) -> Result<AgentState, ExecReason> {
        let cat = g.object.id.as_ref();
        let aff = &self.affordances;
        let require = |tag: Tag| {
            if aff.has(cat, tag) {
                Ok(())
            } else {
                Err(ExecReason::AffordanceViolation)
            }
        };
        let objs = &state.scene.objects;
        let mut next = state.clone();
        match g.action {
            ActionType::Pickup => {
                require(Tag::Pickup)?;
                if state.holding.is_some() {
                    return Err(ExecReason::HandsFull);
                }
                let i = state
                    .scene
                    .instances_of(cat)
                    .min_by_key(|&i| (state.handled[i], i))
                    .ok_or(ExecReason::ObjectAbsent)?;
                next.scene.objects[i].contained_in = None;
                next.handled[i] += 1;
                next.holding = Some(i);
            }
            ActionType::Put => {
                require(Tag::Receptacle)?;
                let held = state.holding.ok_or(ExecReason::HandsEmpty)?;
                if state.scene.count(cat) == 0 {
                    return Err(ExecReason::ObjectAbsent);
                }
                // Only the held object itself (or something inside it) matches.
                let r = state
                    .scene
                    .instances_of(cat)
                    .find(|&r| r != held && !state.scene.is_within(r, held))
                    .ok_or(ExecReason::AffordanceViolation)?;
                next.scene.objects[held].contained_in = Some(r);
                let cell = objs[r].cell;
                for i in 0..objs.len() {
                    if i == held || state.scene.is_within(i, held) {
                        next.scene.objects[i].cell = cell;
                    }
                }
                next.holding = None;
            }
            ActionType::Heat | ActionType::Cool | ActionType::Clean => {
                let (tag, flag) = match g.action {
                    ActionType::Heat => (Tag::Heater, Flag::Heated),
                    ActionType::Cool => (Tag::Cooler, Flag::Cooled),
                    _ => (Tag::Cleaner, Flag::Cleaned),
                };
                require(tag)?;
                let held = state.holding.ok_or(ExecReason::HandsEmpty)?;
                if state.scene.count(cat) == 0 {
                    return Err(ExecReason::ObjectAbsent);
                }
                next.scene.objects[held].flags.set(flag);
            }
            ActionType::Slice => {
                require(Tag::Sliceable)?;
                let held = state.holding.ok_or(ExecReason::HandsEmpty)?;
                if !aff.has(&objs[held].category, Tag::Blade) {
                    return Err(ExecReason::AffordanceViolation);
                }
                let i = state
                    .scene
                    .instances_of(cat)
                    .min_by_key(|&i| (objs[i].flags.sliced, i))
                    .ok_or(ExecReason::ObjectAbsent)?;
                next.scene.objects[i].flags.set(Flag::Sliced);
            }
            ActionType::ToggleOn => {
                require(Tag::Toggle)?;
                let i = state
                    .scene
                    .instances_of(cat)
                    .min_by_key(|&i| (objs[i].flags.toggled_on, i))
                    .ok_or(ExecReason::ObjectAbsent)?;
                next.scene.objects[i].flags.set(Flag::ToggledOn);
            }
        }
        Ok(next)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::scene::{ObjectInstance, RoomKind};
    use crate::env::task::{goal_condition_fraction, GoalCondition, Split};
    use crate::grammar::parse;

    fn kitchen() -> Scene {
        Scene {
            id: "k".into(),
            room: RoomKind::Kitchen,
            width: 5,
            height: 5,
            objects: vec![
                ObjectInstance::new("countertop", (0, 0)),
                ObjectInstance::new("apple", (0, 0)).inside(0),
                ObjectInstance::new("fork", (0, 0)).inside(0),
                ObjectInstance::new("knife", (0, 0)).inside(0),
                ObjectInstance::new("fridge", (3, 3)),
                ObjectInstance::new("microwave", (4, 0)),
                ObjectInstance::new("cup", (1, 1)),
            ],
        }
    }

    fn task(conditions: Vec<GoalCondition>, plan: Option<&str>) -> TaskSpec {
        TaskSpec {
            id: "t".into(),
            scene: "k".into(),
            instruction: "do it".into(),
            task_type: "pick_place".into(),
            split: Split::Eval,
            conditions,
            oracle_plan: plan.map(|p| parse(p, &Catalog::builtin()).unwrap()),
            ambiguous: None,
        }
    }

    fn sg(text: &str) -> Subgoal {
        parse(&format!("{text}."), &Catalog::builtin()).unwrap().steps.remove(0)
    }

    #[test]
    fn pickup_and_hands_full() {
        let sim = Simulator::builtin();
        let t = task(vec![GoalCondition::new("apple").inside("fridge")], None);
        let s0 = sim.reset(&kitchen(), &t).unwrap();
        let (s1, out) = sim.execute_subgoal(&s0, &sg("pick up apple"));
        assert!(out.success);
        assert_eq!(s1.held_category(), Some("apple"));
        let (s2, out) = sim.execute_subgoal(&s1, &sg("pick up fork"));
        assert_eq!(out.reason, ExecReason::HandsFull);
        assert_eq!(s2, s1);
    }

    #[test]
    fn failure_reasons() {
        let sim = Simulator::builtin();
        let t = task(vec![GoalCondition::new("apple").inside("fridge")], None);
        let s0 = sim.reset(&kitchen(), &t).unwrap();
        let cases = [
            ("pick up egg", ExecReason::ObjectAbsent),
            ("pick up fridge", ExecReason::AffordanceViolation),
            ("put in fridge", ExecReason::HandsEmpty),
            ("heat in microwave", ExecReason::HandsEmpty),
            ("heat in fridge", ExecReason::AffordanceViolation),
            ("slice apple", ExecReason::HandsEmpty),
            ("turn on desk lamp", ExecReason::ObjectAbsent),
            ("turn on apple", ExecReason::AffordanceViolation),
        ];
        for (text, reason) in cases {
            let (s, out) = sim.execute_subgoal(&s0, &sg(text));
            assert_eq!(out.reason, reason, "{text}");
            assert!(!out.success);
            assert_eq!(s, s0);
        }
        let (s1, _) = sim.execute_subgoal(&s0, &sg("pick up fork"));
        let (_, out) = sim.execute_subgoal(&s1, &sg("slice apple"));
        assert_eq!(out.reason, ExecReason::AffordanceViolation);
        let (_, out) = sim.execute_subgoal(&s1, &sg("heat in stove burner"));
        assert_eq!(out.reason, ExecReason::ObjectAbsent);
    }

    #[test]
    fn oracle_plan_reaches_goal() {
        let sim = Simulator::builtin();
        let t = task(
            vec![
                GoalCondition::new("apple").with_flag(Flag::Sliced).with_flag(Flag::Heated).inside("fridge"),
            ],
            Some("pick up knife, slice apple, put in countertop, pick up apple, heat in microwave, put in fridge."),
        );
        sim.validate_task(&kitchen(), &t).unwrap();
        let mut s = sim.reset(&kitchen(), &t).unwrap();
        assert_eq!(goal_condition_fraction(&t, &s), 0.0);
        for g in &t.oracle_plan.clone().unwrap().steps {
            let (n, out) = sim.execute_subgoal(&s, g);
            assert!(out.success, "{g}");
            assert!(n.grid_consistent());
            assert_eq!(n.scene.category_multiset(), s.scene.category_multiset());
            s = n;
        }
        assert_eq!(reward(&t, &s), 1);
        assert_eq!(goal_condition_fraction(&t, &s), 1.0);
    }

    #[test]
    fn pickup_prefers_unhandled_instance() {
        let mut scene = kitchen();
        scene.objects.push(ObjectInstance::new("apple", (2, 2)));
        let sim = Simulator::builtin();
        let t = task(vec![GoalCondition::new("apple").inside("fridge").times(2)], None);
        let mut s = sim.reset(&scene, &t).unwrap();
        for text in ["pick up apple", "put in fridge", "pick up apple", "put in fridge"] {
            let (n, out) = sim.execute_subgoal(&s, &sg(text));
            assert!(out.success);
            s = n;
        }
        assert_eq!(reward(&t, &s), 1);
    }

    #[test]
    fn put_moves_contents_and_rejects_self() {
        let sim = Simulator::builtin();
        let t = task(vec![GoalCondition::new("fork").inside("cup")], None);
        let mut s = sim.reset(&kitchen(), &t).unwrap();
        for text in ["pick up fork", "put in cup", "pick up cup"] {
            let (n, out) = sim.execute_subgoal(&s, &sg(text));
            assert!(out.success, "{text}");
            s = n;
        }
        let (_, out) = sim.execute_subgoal(&s, &sg("put in cup"));
        assert_eq!(out.reason, ExecReason::AffordanceViolation);
        let (n, out) = sim.execute_subgoal(&s, &sg("put in fridge"));
        assert!(out.success);
        assert_eq!(n.scene.objects[2].cell, (3, 3));
        assert_eq!(reward(&t, &n), 1);
    }

    #[test]
    fn already_satisfied_and_determinism() {
        let sim = Simulator::builtin();
        let t = task(vec![GoalCondition::new("apple").inside("countertop")], None);
        assert!(matches!(
            sim.reset(&kitchen(), &t),
            Err(EnvError::AlreadySatisfied(_))
        ));
        let t = task(vec![GoalCondition::new("apple").inside("fridge")], None);
        assert_eq!(sim.reset(&kitchen(), &t).unwrap(), sim.reset(&kitchen(), &t).unwrap());
    }

    #[test]
    fn injected_failures_are_seeded() {
        let t = task(vec![GoalCondition::new("apple").inside("fridge")], None);
        let run = |seed| {
            let sim = Simulator::builtin().with_exec(ExecConfig {
                failure_rate: 0.5,
                seed,
            });
            let s = sim.reset(&kitchen(), &t).unwrap();
            ["pick up apple", "pick up fork", "pick up knife", "pick up cup"]
                .iter()
                .map(|g| sim.execute_subgoal(&s, &sg(g)).1.reason)
                .collect::<Vec<_>>()
        };
        assert_eq!(run(3), run(3));
        let all: Vec<ExecReason> = (0..20).flat_map(run).collect();
        assert!(all.contains(&ExecReason::InjectedFailure));
        assert!(all.contains(&ExecReason::Ok));
    }
}
