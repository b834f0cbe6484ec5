//! Few-shot subgoal planning.
//!
//! Natural-language task instructions are translated into subgoal plans by
//! prompting an autoregressive token scorer with example `(instruction, plan)`
//! pairs, decoding with a grammar-constrained beam search, and re-ranking the
//! hypotheses with a weighted mutual-information score. A linear ranking model
//! trained from execution feedback in a household simulator then chooses among
//! the hypotheses while the agent acts.

pub mod decode;
pub mod env;
pub mod eval;
pub mod grammar;
pub mod io;
pub mod lm;
pub mod pipeline;
pub mod ranker;
pub mod rerank;
pub mod tokenize;
