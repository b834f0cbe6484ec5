//! Interpolated (Jelinek-Mercer) word n-gram model.
//!
//! ```text
//! P(w | h) = (1 - c) * [ l0 / |V| + sum_k lk * Pml_k(w | last k-1 words of h) ] / Z + c * Pcache(w | h)
//! ```
//!
//! `l0` weighs a uniform floor, `lk` the maximum-likelihood estimate from the
//! `k`-gram counts. Levels whose context was never observed drop out and `Z`
//! renormalizes the remaining weights. The optional cache term `c` is the
//! relative frequency of `w` among recent context tokens; it lets the model
//! copy words from the query it is conditioned on. Without an anchor the cache
//! covers the last `cache_window` tokens. With an anchor token (`=` for
//! prompts) it covers the source side of the current record instead: the
//! tokens before the last anchor, back to the previous anchor or stop marker,
//! at most `cache_window` of them.

use std::collections::HashMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::model::{Distribution, TokenModel, Vocab, UNK};
use super::LmError;
use crate::tokenize::{Tokenizer, WordTokenizer, STOP};

const BOS: u32 = u32::MAX;
const OOV: u32 = u32::MAX - 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NGramConfig {
    pub order: usize,
    /// `order + 1` weights: uniform floor, unigram, bigram, ...
    /// Normalized to sum to one when the model is fit.
    pub weights: Vec<f64>,
    #[serde(default)]
    pub cache_weight: f64,
    #[serde(default = "default_cache_window")]
    pub cache_window: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cache_anchor: Option<String>,
    /// Add an `<unk>` token that absorbs out-of-vocabulary words.
    #[serde(default)]
    pub unk: bool,
}

fn default_cache_window() -> usize {
    12
}

impl NGramConfig {
    /// Weights split evenly over the n-gram levels with a small uniform floor.
    pub fn with_order(order: usize) -> Self {
        let mut weights = vec![0.0; order + 1];
        if order >= 1 {
            weights[0] = 0.01;
            let each = 0.99 / order as f64;
            for w in weights.iter_mut().skip(1) {
                *w = each;
            }
        }
        NGramConfig {
            order,
            weights,
            cache_weight: 0.0,
            cache_window: default_cache_window(),
            cache_anchor: None,
            unk: false,
        }
    }
}

#[derive(Debug, Clone, Default)]
struct ContextCounts {
    total: u32,
    counts: Vec<(u32, u32)>,
}

#[derive(Debug, Clone)]
pub struct NGramModel {
    order: usize,
    vocab: Arc<Vocab>,
    /// `levels[k]` maps a `k`-token context to the counts of the next token.
    levels: Vec<HashMap<Vec<u32>, ContextCounts>>,
    weights: Vec<f64>,
    cache_weight: f64,
    cache_window: usize,
    cache_anchor: Option<String>,
    unk: Option<u32>,
}

/// Fits a model on `corpus`; the vocabulary is the corpus tokens.
pub fn fit_ngram<S: AsRef<str>>(corpus: &[S], cfg: &NGramConfig) -> Result<NGramModel, LmError> {
    fit_ngram_with_vocab(corpus, std::iter::empty::<String>(), cfg)
}

/// Fits a model on `corpus`, adding `extra_vocab` so those tokens receive
/// (smoothed) probability even if the corpus never uses them.
pub fn fit_ngram_with_vocab<S, I, T>(
    corpus: &[S],
    extra_vocab: I,
    cfg: &NGramConfig,
) -> Result<NGramModel, LmError>
where
    S: AsRef<str>,
    I: IntoIterator<Item = T>,
    T: Into<String>,
{
    if cfg.order < 1 {
        return Err(LmError::InvalidOrder(cfg.order));
    }
    if cfg.weights.len() != cfg.order + 1 {
        return Err(LmError::InvalidSmoothing(format!(
            "expected {} interpolation weights, got {}",
            cfg.order + 1,
            cfg.weights.len()
        )));
    }
    if cfg.weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(LmError::InvalidSmoothing("weights must be finite and non-negative".into()));
    }
    let wsum: f64 = cfg.weights.iter().sum();
    if wsum <= 0.0 {
        return Err(LmError::InvalidSmoothing("weights sum to zero".into()));
    }
    if !(0.0..1.0).contains(&cfg.cache_weight) {
        return Err(LmError::InvalidSmoothing("cache weight must be in [0, 1)".into()));
    }

    let mut vocab = Vocab::default();
    let unk = cfg.unk.then(|| vocab.insert(UNK.to_string()));
    let docs: Vec<Vec<u32>> = corpus
        .iter()
        .map(|text| {
            WordTokenizer
                .encode(text.as_ref())
                .into_iter()
                .map(|t| vocab.insert(t))
                .collect::<Vec<u32>>()
        })
        .filter(|d| !d.is_empty())
        .collect();
    if docs.is_empty() {
        return Err(LmError::EmptyCorpus);
    }
    for t in extra_vocab {
        vocab.insert(t.into());
    }

    let mut levels: Vec<HashMap<Vec<u32>, ContextCounts>> = vec![HashMap::new(); cfg.order];
    for doc in &docs {
        let padded: Vec<u32> = std::iter::repeat_n(BOS, cfg.order - 1)
            .chain(doc.iter().copied())
            .collect();
        for pos in (cfg.order - 1)..padded.len() {
            let next = padded[pos];
            for (k, level) in levels.iter_mut().enumerate() {
                let ctx = padded[pos - k..pos].to_vec();
                let entry = level.entry(ctx).or_default();
                entry.total += 1;
                match entry.counts.iter_mut().find(|(t, _)| *t == next) {
                    Some((_, c)) => *c += 1,
                    None => entry.counts.push((next, 1)),
                }
            }
        }
    }
    for level in &mut levels {
        for c in level.values_mut() {
            c.counts.sort_unstable();
        }
    }

    let weights: Vec<f64> = cfg.weights.iter().map(|w| w / wsum).collect();
    if weights[0] == 0.0 {
        let unigram = &levels[0][&Vec::new()];
        let unseen = (0..vocab.len() as u32).find(|id| !unigram.counts.iter().any(|(t, _)| t == id));
        if let Some(id) = unseen {
            return Err(LmError::InvalidSmoothing(format!(
                "token `{}` would get zero probability; give the uniform level a positive weight",
                vocab.token(id)
            )));
        }
    }

    Ok(NGramModel {
        order: cfg.order,
        vocab: Arc::new(vocab),
        levels,
        weights,
        cache_weight: cfg.cache_weight,
        cache_window: cfg.cache_window,
        cache_anchor: cfg.cache_anchor.clone(),
        unk,
    })
}

/// The source side of the record being completed: tokens before the last
/// `anchor`, back to the previous anchor or stop marker, at most `window`.
pub(crate) fn anchored_span<'c>(context: &'c [&'c str], anchor: &str, window: usize) -> &'c [&'c str] {
    let Some(end) = context.iter().rposition(|t| *t == anchor) else {
        return &[];
    };
    let mut start = end;
    while start > 0 && end - start < window {
        let t = context[start - 1];
        // A stop marker right before the anchor ends the source itself.
        if t == anchor || (t == STOP && start != end) {
            break;
        }
        start -= 1;
    }
    &context[start..end]
}

impl NGramModel {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    fn id_of(&self, tok: &str) -> u32 {
        self.vocab.id(tok).or(self.unk).unwrap_or(OOV)
    }

    /// Probabilities (not logs) of every vocabulary token after `context`.
    pub fn probabilities(&self, context: &[&str]) -> Vec<f64> {
        let v = self.vocab.len();
        let ids: Vec<u32> = context
            .iter()
            .rev()
            .take(self.order - 1)
            .map(|t| self.id_of(t))
            .collect::<Vec<_>>()
            .into_iter()
            .rev()
            .collect();
        // Left-pad short contexts with BOS, as during fitting.
        let mut hist: Vec<u32> = std::iter::repeat_n(BOS, (self.order - 1) - ids.len()).collect();
        hist.extend(ids);

        let mut p = vec![0.0; v];
        let mut avail = self.weights[0];
        if self.weights[0] > 0.0 {
            let floor = self.weights[0] / v as f64;
            p.iter_mut().for_each(|x| *x = floor);
        }
        for (k, level) in self.levels.iter().enumerate() {
            let w = self.weights[k + 1];
            if w == 0.0 {
                continue;
            }
            let ctx = &hist[hist.len() - k..];
            if let Some(c) = level.get(ctx) {
                avail += w;
                let scale = w / c.total as f64;
                for &(t, n) in &c.counts {
                    p[t as usize] += scale * n as f64;
                }
            }
        }
        if avail > 0.0 {
            p.iter_mut().for_each(|x| *x /= avail);
        } else {
            // Every weighted level is unseen here: back off to the unigram ML estimate.
            let c = &self.levels[0][&Vec::new()];
            for &(t, n) in &c.counts {
                p[t as usize] = n as f64 / c.total as f64;
            }
        }

        if self.cache_weight > 0.0 {
            let window: Vec<u32> = self
                .cache_span(context)
                .iter()
                .map(|t| self.id_of(t))
                .filter(|&id| id != OOV)
                .collect();
            if !window.is_empty() {
                let c = self.cache_weight;
                p.iter_mut().for_each(|x| *x *= 1.0 - c);
                let each = c / window.len() as f64;
                for id in window {
                    p[id as usize] += each;
                }
            }
        }
        p
    }

    fn cache_span<'c>(&self, context: &'c [&'c str]) -> &'c [&'c str] {
        match &self.cache_anchor {
            Some(anchor) => anchored_span(context, anchor, self.cache_window),
            None => &context[context.len().saturating_sub(self.cache_window)..],
        }
    }

    /// Per-token perplexity over held-out texts.
    pub fn perplexity<S: AsRef<str>>(&self, texts: &[S]) -> Result<f64, LmError> {
        let mut nll = 0.0;
        let mut n = 0usize;
        for text in texts {
            let toks = WordTokenizer.encode(text.as_ref());
            let refs: Vec<&str> = toks.iter().map(String::as_str).collect();
            for i in 0..refs.len() {
                let p = self.probabilities(&refs[..i]);
                let id = self.vocab.id(refs[i]).or(self.unk).ok_or_else(|| {
                    LmError::OutOfVocabulary(refs[i].to_string())
                })?;
                nll -= p[id as usize].ln();
                n += 1;
            }
        }
        if n == 0 {
            return Err(LmError::EmptyCorpus);
        }
        Ok((nll / n as f64).exp())
    }
}

impl TokenModel for NGramModel {
    fn tokenizer(&self) -> &dyn Tokenizer {
        &WordTokenizer
    }

    fn next_logprobs(&self, context: &[&str]) -> Result<Distribution, LmError> {
        let logp = self.probabilities(context).into_iter().map(f64::ln).collect();
        Ok(Distribution::new(self.vocab.clone(), logp))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(order: usize, weights: &[f64]) -> NGramConfig {
        NGramConfig {
            order,
            weights: weights.to_vec(),
            cache_weight: 0.0,
            cache_window: 12,
            cache_anchor: None,
            unk: false,
        }
    }

    #[test]
    fn invalid_order() {
        assert!(matches!(
            fit_ngram(&["a b"], &cfg(0, &[1.0])),
            Err(LmError::InvalidOrder(0))
        ));
    }

    #[test]
    fn empty_corpus() {
        let empty: [&str; 0] = [];
        assert!(matches!(
            fit_ngram(&empty, &NGramConfig::with_order(2)),
            Err(LmError::EmptyCorpus)
        ));
        assert!(matches!(
            fit_ngram(&["  "], &NGramConfig::with_order(2)),
            Err(LmError::EmptyCorpus)
        ));
    }

    #[test]
    fn repeated_phrase_bigram() {
        let corpus = vec!["pick up apple ."; 5];
        let m = fit_ngram(&corpus, &NGramConfig::with_order(2)).unwrap();
        let d = m.next_logprobs(&["pick"]).unwrap();
        let (best, _) = d
            .iter()
            .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .unwrap();
        assert_eq!(best, "up");
    }

    /// Corpus "a b a b a b a b a b" (10 tokens), order 2, weights
    /// [0.1, 0.3, 0.6] over V = {a, b}.
    ///   unigram: a 5/10, b 5/10
    ///   bigram after "a": b 5/5
    /// P(b|a) = 0.1/2 + 0.3*0.5 + 0.6*1.0 = 0.8
    /// P(a|a) = 0.05 + 0.15 + 0 = 0.2
    /// After "b": counts a 4/4 (the final b has no successor).
    /// P(a|b) = 0.05 + 0.15 + 0.6 = 0.8
    #[test]
    fn hand_computed_bigram() {
        let m = fit_ngram(&["a b a b a b a b a b"], &cfg(2, &[0.1, 0.3, 0.6])).unwrap();
        let d = m.next_logprobs(&["a"]).unwrap();
        assert!((d.get("b").unwrap() - 0.8f64.ln()).abs() < 1e-12);
        assert!((d.get("a").unwrap() - 0.2f64.ln()).abs() < 1e-12);
        let d = m.next_logprobs(&["x", "b"]).unwrap();
        assert!((d.get("a").unwrap() - 0.8f64.ln()).abs() < 1e-12);
        // The first token is predicted from the BOS context, where "a" was seen once.
        let d = m.next_logprobs(&[]).unwrap();
        assert!((d.get("a").unwrap() - 0.8f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn unseen_context_backs_off() {
        // Context "z" is out of vocabulary: bigram level drops out and
        // weights renormalize over uniform + unigram.
        let m = fit_ngram(&["a b a b a b a b a b"], &cfg(2, &[0.1, 0.3, 0.6])).unwrap();
        let d = m.next_logprobs(&["z"]).unwrap();
        let expect = (0.05 + 0.15) / 0.4;
        assert!((d.get("a").unwrap() - f64::ln(expect)).abs() < 1e-12);
    }

    #[test]
    fn unigram_model_is_context_free() {
        let m = fit_ngram(&["pick up apple .", "put in cup ."], &NGramConfig::with_order(1)).unwrap();
        let a = m.next_logprobs(&["pick"]).unwrap();
        let b = m.next_logprobs(&["cup", "."]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn unigram_weight_only_reduces_to_unigram() {
        let corpus = ["pick up apple .", "put in cup .", "pick up cup ."];
        let tri = fit_ngram(&corpus, &cfg(3, &[0.0, 1.0, 0.0, 0.0])).unwrap();
        let uni = fit_ngram(&corpus, &cfg(1, &[0.0, 1.0])).unwrap();
        for ctx in [vec![], vec!["pick"], vec!["pick", "up"], vec!["in", "cup"]] {
            assert_eq!(tri.next_logprobs(&ctx).unwrap(), uni.next_logprobs(&ctx).unwrap());
        }
    }

    #[test]
    fn zero_floor_with_unseen_vocab_rejected() {
        let err = fit_ngram_with_vocab(&["a b"], ["c"], &cfg(2, &[0.0, 0.5, 0.5])).unwrap_err();
        assert!(matches!(err, LmError::InvalidSmoothing(_)));
    }

    #[test]
    fn unk_absorbs_oov() {
        let mut c = NGramConfig::with_order(2);
        c.unk = true;
        let m = fit_ngram(&["a b"], &c).unwrap();
        let d = m.next_logprobs(&["zebra"]).unwrap();
        assert!(d.token_logprob("zebra").is_some());
        assert!(d.logsumexp().abs() < 1e-12);
        assert!(m.perplexity(&["a zebra b"]).unwrap().is_finite());
    }

    #[test]
    fn cache_boosts_recent_tokens() {
        let mut c = NGramConfig::with_order(2);
        let base = fit_ngram_with_vocab(&["pick up apple ."], ["egg"], &c).unwrap();
        c.cache_weight = 0.3;
        let cached = fit_ngram_with_vocab(&["pick up apple ."], ["egg"], &c).unwrap();
        let ctx = ["heat", "an", "egg", "=", "pick", "up"];
        let b = base.next_logprobs(&ctx[..2]).unwrap();
        let d = cached.next_logprobs(&ctx).unwrap();
        assert!(d.get("egg").unwrap() > b.get("egg").unwrap());
        assert!(d.logsumexp().abs() < 1e-12);
    }

    #[test]
    fn anchored_cache_covers_source_side_only() {
        let mut c = NGramConfig::with_order(2);
        c.cache_weight = 0.5;
        c.cache_window = 20;
        c.cache_anchor = Some("=".into());
        let m = fit_ngram_with_vocab(&["pick up apple ."], ["egg", "cup", "=", ","], &c).unwrap();
        let span = |ctx: &[&'static str]| -> Vec<String> {
            m.cache_span(ctx).iter().map(|s| s.to_string()).collect()
        };
        let fwd = ["get", "cup", "=", "pick", "up", "cup", ".", ",", "heat", "an", "egg", "=", "pick"];
        assert_eq!(span(&fwd), [",", "heat", "an", "egg"]);
        let rev = ["pick", "up", "cup", ".", "=", "get", "cup", ",", "pick", "up", "egg", ".", "="];
        assert_eq!(span(&rev), ["get", "cup", ",", "pick", "up", "egg", "."]);
        assert!(span(&["no", "anchor"]).is_empty());
        let d = m.next_logprobs(&fwd).unwrap();
        assert!(d.get("egg").unwrap() > d.get("cup").unwrap());
        assert!(d.logsumexp().abs() < 1e-12);
    }

    #[test]
    fn held_out_perplexity_finite() {
        let m = fit_ngram_with_vocab(&["pick up apple ."], ["cup", "put", "in"], &NGramConfig::with_order(3)).unwrap();
        let ppl = m.perplexity(&["put in cup ."]).unwrap();
        assert!(ppl.is_finite() && ppl > 1.0);
    }
}
