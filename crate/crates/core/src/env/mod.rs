//! Deterministic household simulator: scenes, subgoal execution, goal
//! conditions, and the generated benchmark.

mod affordance;
mod bench;
mod features;
mod generate;
mod scene;
mod state;
mod task;

pub use affordance::{Affordances, Tag};
pub use bench::Benchmark;
pub use features::{pooled_counts, state_features, StateEncoder};
pub use generate::{generate_benchmark, GeneratorConfig, AMBIGUITY_CLASSES, FINE_TASK_TYPES};
pub use scene::{Flag, Flags, ObjectInstance, RoomKind, Scene};
pub use state::{AgentState, ExecConfig, ExecOutcome, ExecReason, Simulator};
pub use task::{
    goal_condition_fraction, reward, GoalCondition, Location, Split, TaskRecord, TaskSpec,
};

#[derive(Debug, thiserror::Error)]
pub enum EnvError {
    #[error("scene `{scene}`: {msg}")]
    InvalidScene { scene: String, msg: String },
    #[error("task `{task}`: {msg}")]
    InvalidTask { task: String, msg: String },
    #[error("task `{0}` is already satisfied in its initial state")]
    AlreadySatisfied(String),
    #[error("task `{task}`: oracle plan does not solve it: {msg}")]
    OracleFails { task: String, msg: String },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("affordance file line {line}: {msg}")]
    Affordance { line: usize, msg: String },
    #[error("{path} line {line}: {msg}")]
    Record { path: String, line: usize, msg: String },
    #[error("benchmark generation: {0}")]
    Generate(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}
