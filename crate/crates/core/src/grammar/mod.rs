//! Subgoal alphabet, the text verbalizer, and prefix validity for decoding.

mod action;
mod catalog;
mod plan;
mod trie;

use std::ops::Range;

pub use action::ActionType;
pub use catalog::{plural, Catalog, ObjectType};
pub use plan::{parse, serialize, verbalize, PlanStep, Subgoal, SubgoalSequence};
pub use trie::{build_prefix_trie, PrefixTrie, TrieCursor};

#[derive(Debug, thiserror::Error)]
pub enum GrammarError {
    #[error("plan has no subgoals")]
    EmptyPlan,
    #[error("unknown action `{text}` at bytes {span:?}")]
    UnknownAction { text: String, span: Range<usize> },
    #[error("unknown object `{text}` at bytes {span:?}")]
    UnknownObject { text: String, span: Range<usize> },
    #[error("malformed plan at bytes {span:?} (`{text}`): expected {expected}")]
    MalformedSequence {
        text: String,
        span: Range<usize>,
        expected: String,
    },
    #[error("tokenizer mismatch: {0}")]
    TokenizerMismatch(String),
    #[error("catalog line {line}: {msg}")]
    Catalog { line: usize, msg: String },
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}
