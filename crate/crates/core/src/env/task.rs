//! Tasks: an instruction plus goal conditions over the final state.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::scene::Flag;
use super::state::AgentState;
use super::EnvError;
use crate::grammar::{parse, Catalog, SubgoalSequence};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Location {
    #[default]
    Anywhere,
    /// Directly inside an instance of this category.
    In(String),
    Held,
}

/// At least `count` instances of `category` carry every flag in `flags` and
/// sit at `location`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GoalCondition {
    pub category: String,
    #[serde(default = "one")]
    pub count: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<Flag>,
    #[serde(default)]
    pub location: Location,
}

fn one() -> usize {
    1
}

impl GoalCondition {
    pub fn new(category: &str) -> Self {
        GoalCondition {
            category: category.to_string(),
            count: 1,
            flags: Vec::new(),
            location: Location::Anywhere,
        }
    }

    pub fn with_flag(mut self, flag: Flag) -> Self {
        self.flags.push(flag);
        self
    }

    pub fn inside(mut self, receptacle: &str) -> Self {
        self.location = Location::In(receptacle.to_string());
        self
    }

    pub fn held(mut self) -> Self {
        self.location = Location::Held;
        self
    }

    pub fn times(mut self, count: usize) -> Self {
        self.count = count;
        self
    }

    pub fn holds(&self, state: &AgentState) -> bool {
        let objs = &state.scene.objects;
        let n = state
            .scene
            .instances_of(&self.category)
            .filter(|&i| self.flags.iter().all(|&f| objs[i].flags.get(f)))
            .filter(|&i| match &self.location {
                Location::Anywhere => true,
                Location::Held => state.holding == Some(i),
                Location::In(r) => objs[i].contained_in.is_some_and(|c| objs[c].category == *r),
            })
            .count();
        n >= self.count
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    /// Demonstrations the prompt examples are drawn from.
    Pool,
    /// Instructions used to collect execution feedback.
    Train,
    Eval,
    /// Evaluation tasks whose instruction names an ambiguous object.
    Ambiguity,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Pool => "pool",
            Split::Train => "train",
            Split::Eval => "eval",
            Split::Ambiguity => "ambiguity",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskSpec {
    pub id: String,
    pub scene: String,
    pub instruction: String,
    /// Fine-grained task type, e.g. `heat_sliced`.
    pub task_type: String,
    pub split: Split,
    pub conditions: Vec<GoalCondition>,
    pub oracle_plan: Option<SubgoalSequence>,
    /// Generic word the instruction uses in place of the target's name.
    pub ambiguous: Option<String>,
}

/// On-disk form of a task; the oracle plan is kept as serialized text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskRecord {
    pub id: String,
    pub scene: String,
    pub instruction: String,
    pub task_type: String,
    pub split: Split,
    pub conditions: Vec<GoalCondition>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle_plan: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ambiguous: Option<String>,
}

impl TaskSpec {
    pub fn from_record(rec: TaskRecord, catalog: &Catalog) -> Result<Self, EnvError> {
        if rec.conditions.is_empty() {
            return Err(EnvError::InvalidTask {
                task: rec.id,
                msg: "no goal conditions".into(),
            });
        }
        let oracle_plan = match &rec.oracle_plan {
            Some(text) => Some(parse(text, catalog).map_err(|e| EnvError::InvalidTask {
                task: rec.id.clone(),
                msg: format!("oracle plan: {e}"),
            })?),
            None => None,
        };
        Ok(TaskSpec {
            id: rec.id,
            scene: rec.scene,
            instruction: rec.instruction,
            task_type: rec.task_type,
            split: rec.split,
            conditions: rec.conditions,
            oracle_plan,
            ambiguous: rec.ambiguous,
        })
    }

    pub fn to_record(&self) -> TaskRecord {
        TaskRecord {
            id: self.id.clone(),
            scene: self.scene.clone(),
            instruction: self.instruction.clone(),
            task_type: self.task_type.clone(),
            split: self.split,
            conditions: self.conditions.clone(),
            oracle_plan: self.oracle_plan.as_ref().map(|p| p.to_string()),
            ambiguous: self.ambiguous.clone(),
        }
    }
}

/// 1 if every condition holds, else 0.
pub fn reward(task: &TaskSpec, state: &AgentState) -> u8 {
    u8::from(task.conditions.iter().all(|c| c.holds(state)))
}

/// Satisfied conditions over total conditions.
pub fn goal_condition_fraction(task: &TaskSpec, state: &AgentState) -> f64 {
    if task.conditions.is_empty() {
        return 0.0;
    }
    let met = task.conditions.iter().filter(|c| c.holds(state)).count();
    met as f64 / task.conditions.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn condition_json_shapes() {
        let c = GoalCondition::new("apple").with_flag(Flag::Sliced).inside("fridge");
        let text = serde_json::to_string(&c).unwrap();
        assert_eq!(
            text,
            r#"{"category":"apple","count":1,"flags":["sliced"],"location":{"in":"fridge"}}"#
        );
        let d: GoalCondition = serde_json::from_str(r#"{"category":"book","location":"held"}"#).unwrap();
        assert_eq!(d, GoalCondition::new("book").held());
    }
}
