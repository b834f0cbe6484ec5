//! A set of scenes and tasks, stored as `scenes.jsonl` and `tasks.jsonl`.

use std::collections::HashMap;
use std::path::Path;

use super::scene::Scene;
use super::state::Simulator;
use super::task::{Split, TaskRecord, TaskSpec};
use super::EnvError;
use crate::grammar::Catalog;
use crate::io::write_atomic;
use crate::lm::TrainingPair;

pub const SCENES_FILE: &str = "scenes.jsonl";
pub const TASKS_FILE: &str = "tasks.jsonl";

#[derive(Debug, Clone, PartialEq)]
pub struct Benchmark {
    pub scenes: Vec<Scene>,
    pub tasks: Vec<TaskSpec>,
    index: HashMap<String, usize>,
}

impl Benchmark {
    pub fn new(scenes: Vec<Scene>, tasks: Vec<TaskSpec>) -> Result<Self, EnvError> {
        let mut index = HashMap::new();
        for (i, s) in scenes.iter().enumerate() {
            if index.insert(s.id.clone(), i).is_some() {
                return Err(EnvError::InvalidScene {
                    scene: s.id.clone(),
                    msg: "duplicate scene id".into(),
                });
            }
        }
        let mut seen = std::collections::HashSet::new();
        for t in &tasks {
            if !seen.insert(t.id.as_str()) {
                return Err(EnvError::InvalidTask {
                    task: t.id.clone(),
                    msg: "duplicate task id".into(),
                });
            }
            if !index.contains_key(&t.scene) {
                return Err(EnvError::InvalidTask {
                    task: t.id.clone(),
                    msg: format!("unknown scene `{}`", t.scene),
                });
            }
        }
        Ok(Benchmark {
            scenes,
            tasks,
            index,
        })
    }

    pub fn scene(&self, id: &str) -> Option<&Scene> {
        self.index.get(id).map(|&i| &self.scenes[i])
    }

    /// The scene a task runs in.
    pub fn scene_of(&self, task: &TaskSpec) -> &Scene {
        self.scene(&task.scene).expect("task scenes are checked on construction")
    }

    pub fn split(&self, split: Split) -> Vec<&TaskSpec> {
        self.tasks.iter().filter(|t| t.split == split).collect()
    }

    /// Demonstration pairs from tasks of `split` that carry an oracle plan.
    pub fn pairs(&self, split: Split) -> Vec<(String, TrainingPair)> {
        self.split(split)
            .into_iter()
            .filter_map(|t| {
                let plan = t.oracle_plan.clone()?;
                let pair = TrainingPair::new(t.instruction.clone(), plan).ok()?;
                Some((t.task_type.clone(), pair))
            })
            .collect()
    }

    /// Validates every scene and task, including oracle plans.
    pub fn validate(&self, sim: &Simulator) -> Result<(), EnvError> {
        for s in &self.scenes {
            s.validate(&sim.catalog, &sim.affordances)?;
        }
        for t in &self.tasks {
            sim.validate_task(self.scene_of(t), t)?;
        }
        Ok(())
    }

    pub fn load(dir: &Path, catalog: &Catalog) -> Result<Self, EnvError> {
        let scenes: Vec<Scene> = read_jsonl(&dir.join(SCENES_FILE))?;
        let records: Vec<TaskRecord> = read_jsonl(&dir.join(TASKS_FILE))?;
        let tasks = records
            .into_iter()
            .map(|r| TaskSpec::from_record(r, catalog))
            .collect::<Result<_, _>>()?;
        Self::new(scenes, tasks)
    }

    pub fn save(&self, dir: &Path) -> Result<(), EnvError> {
        write_jsonl(&dir.join(SCENES_FILE), &self.scenes)?;
        let records: Vec<TaskRecord> = self.tasks.iter().map(TaskSpec::to_record).collect();
        write_jsonl(&dir.join(TASKS_FILE), &records)
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> EnvError + '_ {
    move |e| EnvError::Io {
        path: path.display().to_string(),
        source: e,
    }
}

fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>, EnvError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| EnvError::Record {
                path: path.display().to_string(),
                line: i + 1,
                msg: e.to_string(),
            })
        })
        .collect()
}

fn write_jsonl<T: serde::Serialize>(path: &Path, items: &[T]) -> Result<(), EnvError> {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(item).expect("records serialize"));
        out.push('\n');
    }
    write_atomic(path, out.as_bytes()).map_err(io_err(path))
}
