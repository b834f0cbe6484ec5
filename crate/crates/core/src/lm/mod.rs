//! Token scorers and prompt construction.

mod model;
mod ngram;
mod prompt;
mod remote;
mod slot;

pub use model::{
    logsumexp, score_continuation, score_tokens, Distribution, TokenModel, UniformModel, Vocab, UNK,
};
pub use ngram::{fit_ngram, fit_ngram_with_vocab, NGramConfig, NGramModel};
pub use prompt::{
    build_prompt_forward, build_prompt_reverse, format_pairs, load_pairs, normalize_instruction,
    parse_pairs, TrainingPair,
};
pub use slot::{fit_slot_model, SlotConfig, SlotModel, SLOT};
pub use remote::{LogprobRequest, LogprobResponse, RemoteModel};

#[derive(Debug, thiserror::Error)]
pub enum LmError {
    #[error("token `{0}` is not in the model vocabulary")]
    OutOfVocabulary(String),
    #[error("continuation is empty")]
    EmptyContinuation,
    #[error("n-gram order must be at least 1, got {0}")]
    InvalidOrder(usize),
    #[error("invalid smoothing: {0}")]
    InvalidSmoothing(String),
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("transport error: {0}")]
    Transport(String),
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error("server vocabulary mismatch: {0}")]
    ServerVocabMismatch(String),
    #[error("training pairs line {line}: {msg}")]
    PairFile { line: usize, msg: String },
    #[error("vocabulary conflict: {0}")]
    Vocabulary(String),
}
