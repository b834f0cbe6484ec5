use std::collections::HashMap;
use std::sync::Arc;

use super::LmError;
use crate::tokenize::{Tokenizer, WordTokenizer};

/// Token used for out-of-vocabulary words by models that have one.
pub const UNK: &str = "<unk>";

/// Interned token strings.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Vocab {
    tokens: Vec<String>,
    ids: HashMap<String, u32>,
}

impl Vocab {
    pub fn new<I, S>(tokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut v = Vocab::default();
        for t in tokens {
            v.insert(t.into());
        }
        v
    }

    pub fn insert(&mut self, tok: String) -> u32 {
        if let Some(&id) = self.ids.get(&tok) {
            return id;
        }
        let id = self.tokens.len() as u32;
        self.ids.insert(tok.clone(), id);
        self.tokens.push(tok);
        id
    }

    pub fn id(&self, tok: &str) -> Option<u32> {
        self.ids.get(tok).copied()
    }

    pub fn token(&self, id: u32) -> &str {
        &self.tokens[id as usize]
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Natural-log probabilities over a vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    vocab: Arc<Vocab>,
    logp: Vec<f64>,
}

impl Distribution {
    pub fn new(vocab: Arc<Vocab>, logp: Vec<f64>) -> Self {
        assert_eq!(vocab.len(), logp.len(), "one log-probability per token");
        Distribution { vocab, logp }
    }

    pub fn from_map(map: HashMap<String, f64>) -> Self {
        let mut entries: Vec<(String, f64)> = map.into_iter().collect();
        entries.sort_by(|a, b| a.0.cmp(&b.0));
        let vocab = Vocab::new(entries.iter().map(|(t, _)| t.clone()));
        Distribution {
            vocab: Arc::new(vocab),
            logp: entries.into_iter().map(|(_, lp)| lp).collect(),
        }
    }

    pub fn get(&self, tok: &str) -> Option<f64> {
        self.vocab.id(tok).map(|i| self.logp[i as usize])
    }

    /// Log-probability of `tok`, falling back to [`UNK`] when the
    /// distribution carries one.
    pub fn token_logprob(&self, tok: &str) -> Option<f64> {
        self.get(tok).or_else(|| self.get(UNK))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.vocab.tokens().iter().map(String::as_str).zip(self.logp.iter().copied())
    }

    pub fn len(&self) -> usize {
        self.logp.len()
    }

    pub fn is_empty(&self) -> bool {
        self.logp.is_empty()
    }

    pub fn logsumexp(&self) -> f64 {
        logsumexp(&self.logp)
    }

    pub fn to_map(&self) -> HashMap<String, f64> {
        self.iter().map(|(t, lp)| (t.to_string(), lp)).collect()
    }
}

pub fn logsumexp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// An autoregressive scorer: the distribution of the next token given a
/// token context.
///
/// Implementations must be safe to call from several threads at once.
pub trait TokenModel: Send + Sync {
    fn tokenizer(&self) -> &dyn Tokenizer;

    fn next_logprobs(&self, context: &[&str]) -> Result<Distribution, LmError>;

    /// Whether identical contexts always produce identical distributions.
    fn is_deterministic(&self) -> bool {
        true
    }
}

/// Sum of next-token log-probabilities of `continuation` after `context`.
///
/// Accumulates left to right starting from `0.0`; the decoder accumulates in
/// the same order so stored and recomputed scores agree bit for bit.
pub fn score_tokens<M: TokenModel + ?Sized>(
    model: &M,
    context: &[&str],
    continuation: &[&str],
) -> Result<f64, LmError> {
    if continuation.is_empty() {
        return Err(LmError::EmptyContinuation);
    }
    let mut ctx: Vec<&str> = Vec::with_capacity(context.len() + continuation.len());
    ctx.extend_from_slice(context);
    let mut total = 0.0;
    for &tok in continuation {
        let dist = model.next_logprobs(&ctx)?;
        let lp = dist
            .token_logprob(tok)
            .ok_or_else(|| LmError::OutOfVocabulary(tok.to_string()))?;
        total += lp;
        ctx.push(tok);
    }
    Ok(total)
}

/// Text-level wrapper over [`score_tokens`]; both strings are tokenized with
/// the model's tokenizer.
pub fn score_continuation<M: TokenModel + ?Sized>(
    model: &M,
    context: &str,
    continuation: &str,
) -> Result<f64, LmError> {
    let tok = model.tokenizer();
    let ctx = tok.encode(context);
    let cont = tok.encode(continuation);
    let ctx_refs: Vec<&str> = ctx.iter().map(String::as_str).collect();
    let cont_refs: Vec<&str> = cont.iter().map(String::as_str).collect();
    score_tokens(model, &ctx_refs, &cont_refs)
}

/// Uniform distribution over a fixed vocabulary.
#[derive(Debug, Clone)]
pub struct UniformModel {
    dist: Distribution,
}

impl UniformModel {
    pub fn new<I, S>(tokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let vocab = Arc::new(Vocab::new(tokens));
        let lp = -(vocab.len() as f64).ln();
        let logp = vec![lp; vocab.len()];
        UniformModel {
            dist: Distribution::new(vocab, logp),
        }
    }

    pub fn vocab(&self) -> &[String] {
        self.dist.vocab.tokens()
    }
}

impl TokenModel for UniformModel {
    fn tokenizer(&self) -> &dyn Tokenizer {
        &WordTokenizer
    }

    fn next_logprobs(&self, _context: &[&str]) -> Result<Distribution, LmError> {
        Ok(self.dist.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_scores() {
        let m = UniformModel::new(["a", "b", "c", "d"]);
        let s = score_continuation(&m, "a b", "c d a").unwrap();
        assert!((s - 3.0 * (0.25f64).ln()).abs() < 1e-12);
        assert!(m.next_logprobs(&[]).unwrap().logsumexp().abs() < 1e-12);
    }

    #[test]
    fn empty_continuation_rejected() {
        let m = UniformModel::new(["a"]);
        assert!(matches!(
            score_continuation(&m, "a", "  "),
            Err(LmError::EmptyContinuation)
        ));
    }

    #[test]
    fn oov_reported() {
        let m = UniformModel::new(["a"]);
        assert!(matches!(
            score_continuation(&m, "a", "zzz"),
            Err(LmError::OutOfVocabulary(t)) if t == "zzz"
        ));
    }

    #[test]
    fn from_map_round_trip() {
        let mut map = HashMap::new();
        map.insert("x".to_string(), -0.5f64.exp().ln());
        map.insert("y".to_string(), -1.0);
        let d = Distribution::from_map(map.clone());
        assert_eq!(d.to_map(), map);
    }
}
