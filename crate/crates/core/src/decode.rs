//! Grammar-constrained beam search over subgoal plans.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::grammar::{PrefixTrie, Subgoal, SubgoalSequence, TrieCursor};
use crate::lm::{score_tokens, LmError, TokenModel};

#[derive(Debug, thiserror::Error)]
pub enum DecodeError {
    #[error("prompt has {tokens} tokens, over the context budget of {budget}")]
    ContextOverflow { tokens: usize, budget: usize },
    #[error("no admissible continuation survived the search")]
    EmptyBeam,
    #[error("invalid beam configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Lm(#[from] LmError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BeamConfig {
    pub beam_size: usize,
    pub max_subgoals: usize,
    /// Maximum number of prompt tokens.
    pub context_budget: usize,
}

impl Default for BeamConfig {
    fn default() -> Self {
        BeamConfig {
            beam_size: 10,
            max_subgoals: 10,
            context_budget: 1024,
        }
    }
}

impl BeamConfig {
    pub fn validate(&self) -> Result<(), DecodeError> {
        if self.beam_size == 0 {
            return Err(DecodeError::InvalidConfig("beam_size must be at least 1".into()));
        }
        if self.max_subgoals == 0 {
            return Err(DecodeError::InvalidConfig("max_subgoals must be at least 1".into()));
        }
        Ok(())
    }
}

/// A finished plan with its scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hypothesis {
    pub tokens: Vec<String>,
    pub plan: SubgoalSequence,
    /// `log p(h | prompt)`.
    pub logp_forward: f64,
    pub logp_reverse: Option<f64>,
    pub combined: Option<f64>,
}

impl Hypothesis {
    pub fn text(&self) -> String {
        self.plan.to_string()
    }
}

#[derive(Debug, Clone)]
struct Beam {
    tokens: Vec<String>,
    text: String,
    cursor: TrieCursor,
    steps: Vec<Subgoal>,
    logp: f64,
}

/// Descending score, then ascending text.
fn beam_order(a: &Beam, b: &Beam) -> Ordering {
    b.logp
        .partial_cmp(&a.logp)
        .unwrap_or(Ordering::Equal)
        .then_with(|| a.text.cmp(&b.text))
}

fn push_token(text: &str, tok: &str) -> String {
    if text.is_empty() {
        tok.to_string()
    } else if tok == "," || tok == "." {
        format!("{text}{tok}")
    } else {
        format!("{text} {tok}")
    }
}

/// Beam search for the best plans after `prompt`.
///
/// At every step each live prefix is extended only with tokens the trie
/// admits. Finished plans are set aside; the search stops once `beam_size`
/// of them exist or no live prefix remains. Output is sorted by
/// `logp_forward` descending, ties by plan text ascending.
pub fn beam_search<M: TokenModel + ?Sized>(
    model: &M,
    prompt: &str,
    trie: &PrefixTrie,
    cfg: &BeamConfig,
) -> Result<Vec<Hypothesis>, DecodeError> {
    cfg.validate()?;
    let prompt_toks = model.tokenizer().encode(prompt);
    if prompt_toks.len() > cfg.context_budget {
        return Err(DecodeError::ContextOverflow {
            tokens: prompt_toks.len(),
            budget: cfg.context_budget,
        });
    }
    let max = Some(cfg.max_subgoals);
    let mut live = vec![Beam {
        tokens: Vec::new(),
        text: String::new(),
        cursor: trie.root(),
        steps: Vec::new(),
        logp: 0.0,
    }];
    let mut finals: Vec<Beam> = Vec::new();

    while finals.len() < cfg.beam_size && !live.is_empty() {
        let expanded: Vec<Vec<Beam>> = live
            .par_iter()
            .map(|beam| -> Result<Vec<Beam>, DecodeError> {
                let conts = trie.continuations(beam.cursor, max);
                if conts.is_empty() {
                    return Err(DecodeError::EmptyBeam);
                }
                let mut ctx: Vec<&str> = prompt_toks.iter().map(String::as_str).collect();
                ctx.extend(beam.tokens.iter().map(String::as_str));
                let dist = model.next_logprobs(&ctx)?;
                let mut out = Vec::with_capacity(conts.len());
                for tok in conts {
                    let Some(lp) = dist.token_logprob(tok) else { continue };
                    if !lp.is_finite() {
                        continue;
                    }
                    let cursor = trie
                        .advance(beam.cursor, tok, max)
                        .expect("continuation is admissible");
                    let mut steps = beam.steps.clone();
                    if cursor.completed() > beam.cursor.completed() {
                        let g = trie.subgoal_at(beam.cursor).expect("subgoal ends here");
                        steps.push(g.clone());
                    }
                    let mut tokens = beam.tokens.clone();
                    tokens.push(tok.to_string());
                    out.push(Beam {
                        text: push_token(&beam.text, tok),
                        tokens,
                        cursor,
                        steps,
                        logp: beam.logp + lp,
                    });
                }
                Ok(out)
            })
            .collect::<Result<_, _>>()?;
        let mut candidates: Vec<Beam> = expanded.into_iter().flatten().collect();
        candidates.sort_by(beam_order);
        candidates.truncate(cfg.beam_size);
        live.clear();
        for c in candidates {
            if c.cursor.is_finished() {
                finals.push(c);
            } else {
                live.push(c);
            }
        }
    }

    if finals.is_empty() {
        return Err(DecodeError::EmptyBeam);
    }
    finals.sort_by(beam_order);
    finals.truncate(cfg.beam_size);
    Ok(finals
        .into_iter()
        .map(|b| Hypothesis {
            tokens: b.tokens,
            plan: SubgoalSequence::new(b.steps),
            logp_forward: b.logp,
            logp_reverse: None,
            combined: None,
        })
        .collect())
}

/// Rescores a hypothesis' tokens after `prompt`; equals the search-time
/// `logp_forward` exactly for the same model and prompt.
pub fn recompute_logp<M: TokenModel + ?Sized>(
    model: &M,
    prompt: &str,
    hypothesis: &Hypothesis,
) -> Result<f64, LmError> {
    let ctx = model.tokenizer().encode(prompt);
    let ctx: Vec<&str> = ctx.iter().map(String::as_str).collect();
    let cont: Vec<&str> = hypothesis.tokens.iter().map(String::as_str).collect();
    score_tokens(model, &ctx, &cont)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::{build_prefix_trie, parse, ActionType, Catalog};
    use crate::lm::{fit_ngram, NGramConfig, UniformModel};
    use crate::tokenize::{Tokenizer, WordTokenizer};

    fn grammar(ids: &[&str], actions: &[ActionType]) -> (Catalog, PrefixTrie) {
        let cat = Catalog::builtin().subset(ids).unwrap();
        let trie = build_prefix_trie(&cat, actions, &WordTokenizer).unwrap();
        (cat, trie)
    }

    #[test]
    fn uniform_symmetric_tie_break() {
        let (_, trie) = grammar(&["apple", "egg"], &[ActionType::Pickup]);
        let m = UniformModel::new(["pick", "up", "apple", "egg", ",", "."]);
        let cfg = BeamConfig {
            beam_size: 5,
            max_subgoals: 1,
            ..Default::default()
        };
        let hyps = beam_search(&m, "get it = ", &trie, &cfg).unwrap();
        let texts: Vec<String> = hyps.iter().map(Hypothesis::text).collect();
        assert_eq!(texts, ["pick up apple.", "pick up egg."]);
        assert_eq!(hyps[0].logp_forward, hyps[1].logp_forward);
        assert!((hyps[0].logp_forward - 4.0 * (1.0f64 / 6.0).ln()).abs() < 1e-12);
    }

    fn small_model() -> crate::lm::NGramModel {
        fit_ngram(
            &[
                "grab apple = pick up apple.",
                "slice it = pick up knife, slice apple.",
                "pick up egg, put in apple.",
            ],
            &NGramConfig::with_order(3),
        )
        .unwrap()
    }

    #[test]
    fn beam_one_is_greedy() {
        let (_, trie) = grammar(
            &["apple", "egg", "knife"],
            &[ActionType::Pickup, ActionType::Slice, ActionType::Put],
        );
        let m = small_model();
        let prompt = "slice the apple = ";
        let cfg = BeamConfig {
            beam_size: 1,
            max_subgoals: 3,
            ..Default::default()
        };
        let hyp = beam_search(&m, prompt, &trie, &cfg).unwrap().remove(0);

        let mut toks: Vec<String> = Vec::new();
        let mut logp = 0.0;
        let mut ctx = WordTokenizer.encode(prompt);
        loop {
            let cur = trie.walk(&toks, Some(3)).unwrap();
            if cur.is_finished() {
                break;
            }
            let refs: Vec<&str> = ctx.iter().map(String::as_str).collect();
            let dist = m.next_logprobs(&refs).unwrap();
            let text_with = |t: &str| {
                let mut v = toks.clone();
                v.push(t.to_string());
                WordTokenizer.decode(&v)
            };
            let mut best: Option<(&str, f64)> = None;
            for t in trie.continuations(cur, Some(3)) {
                let lp = dist.token_logprob(t).unwrap();
                if best.is_none_or(|(bt, bl)| lp > bl || (lp == bl && text_with(t) < text_with(bt))) {
                    best = Some((t, lp));
                }
            }
            let (t, lp) = best.unwrap();
            logp += lp;
            toks.push(t.to_string());
            ctx.push(t.to_string());
        }
        assert_eq!(hyp.tokens, toks);
        assert_eq!(hyp.logp_forward, logp);
    }

    #[test]
    fn recompute_is_exact_and_outputs_parse() {
        let (cat, trie) = grammar(
            &["apple", "egg", "knife"],
            &[ActionType::Pickup, ActionType::Slice, ActionType::Put],
        );
        let m = small_model();
        let prompt = "put the egg in the apple = ";
        let hyps = beam_search(&m, prompt, &trie, &BeamConfig::default()).unwrap();
        assert_eq!(hyps.len(), 10);
        for h in &hyps {
            assert_eq!(recompute_logp(&m, prompt, h).unwrap(), h.logp_forward);
            assert_eq!(parse(&h.text(), &cat).unwrap(), h.plan);
            assert_eq!(WordTokenizer.decode(&h.tokens), h.text());
            assert!(h.logp_forward <= 0.0);
        }
        for w in hyps.windows(2) {
            assert!(w[0].logp_forward >= w[1].logp_forward);
        }

        let mut swapped = hyps[0].clone();
        swapped.tokens[0] = "slice".into();
        swapped.tokens[1] = "pick".into();
        assert!(!trie.accepts(&swapped.tokens));
        assert_ne!(recompute_logp(&m, prompt, &swapped).unwrap(), hyps[0].logp_forward);
    }

    #[test]
    fn context_overflow() {
        let (_, trie) = grammar(&["apple"], &[ActionType::Pickup]);
        let m = UniformModel::new(["pick", "up", "apple", ",", "."]);
        let cfg = BeamConfig {
            context_budget: 3,
            ..Default::default()
        };
        assert!(matches!(
            beam_search(&m, "a b c d", &trie, &cfg),
            Err(DecodeError::ContextOverflow { tokens: 4, budget: 3 })
        ));
    }

    #[test]
    fn deterministic() {
        let (_, trie) = grammar(
            &["apple", "egg", "knife"],
            &[ActionType::Pickup, ActionType::Slice, ActionType::Put],
        );
        let m = small_model();
        let a = beam_search(&m, "slice = ", &trie, &BeamConfig::default()).unwrap();
        let b = beam_search(&m, "slice = ", &trie, &BeamConfig::default()).unwrap();
        assert_eq!(a, b);
    }
}
