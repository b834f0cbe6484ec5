//! Re-ranking decoded hypotheses by forward, reverse, or weighted
//! mutual-information scores.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::decode::Hypothesis;
use crate::grammar::SubgoalSequence;
use crate::lm::{build_prompt_reverse, score_continuation, LmError, TokenModel, TrainingPair};

#[derive(Debug, thiserror::Error)]
pub enum RerankError {
    #[error("hypothesis `{0}` has no reverse score")]
    MissingScore(String),
    #[error("lambda must lie in [0, 1], got {0}")]
    InvalidLambda(f64),
    #[error("unknown criterion `{0}` (expected forward, reverse, or wmi)")]
    UnknownCriterion(String),
    #[error(transparent)]
    Lm(#[from] LmError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RankCriterion {
    Forward,
    Reverse,
    #[serde(rename = "wmi")]
    WeightedMI { lambda: f64 },
}

impl Default for RankCriterion {
    fn default() -> Self {
        RankCriterion::WeightedMI { lambda: 0.5 }
    }
}

impl RankCriterion {
    pub fn weighted_mi(lambda: f64) -> Result<Self, RerankError> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(RerankError::InvalidLambda(lambda));
        }
        Ok(RankCriterion::WeightedMI { lambda })
    }

    /// Parses `forward`, `reverse`, or `wmi` (which takes `lambda`).
    pub fn from_name(name: &str, lambda: f64) -> Result<Self, RerankError> {
        match name {
            "forward" => Ok(RankCriterion::Forward),
            "reverse" => Ok(RankCriterion::Reverse),
            "wmi" => Self::weighted_mi(lambda),
            other => Err(RerankError::UnknownCriterion(other.to_string())),
        }
    }

    pub fn needs_reverse(&self) -> bool {
        match *self {
            RankCriterion::Forward => false,
            RankCriterion::Reverse => true,
            RankCriterion::WeightedMI { lambda } => lambda > 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), RerankError> {
        if let RankCriterion::WeightedMI { lambda } = *self {
            Self::weighted_mi(lambda)?;
        }
        Ok(())
    }

    /// The criterion's score for one hypothesis.
    pub fn score(&self, h: &Hypothesis) -> Result<f64, RerankError> {
        let rev = || h.logp_reverse.ok_or_else(|| RerankError::MissingScore(h.text()));
        Ok(match *self {
            RankCriterion::Forward => h.logp_forward,
            RankCriterion::Reverse => rev()?,
            RankCriterion::WeightedMI { lambda: 0.0 } => h.logp_forward,
            RankCriterion::WeightedMI { lambda } => combined_score(h.logp_forward, rev()?, lambda),
        })
    }
}

impl fmt::Display for RankCriterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RankCriterion::Forward => f.write_str("forward"),
            RankCriterion::Reverse => f.write_str("reverse"),
            RankCriterion::WeightedMI { lambda } => write!(f, "wmi({lambda})"),
        }
    }
}

impl FromStr for RankCriterion {
    type Err = RerankError;

    /// `forward`, `reverse`, `wmi` (lambda 1/2), or `wmi(0.3)`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if let Some(inner) = s.strip_prefix("wmi(").and_then(|r| r.strip_suffix(')')) {
            let lambda: f64 = inner
                .trim()
                .parse()
                .map_err(|_| RerankError::UnknownCriterion(s.to_string()))?;
            return Self::weighted_mi(lambda);
        }
        Self::from_name(s, 0.5)
    }
}

/// `(1 - lambda) * fwd + lambda * rev`.
pub fn combined_score(logp_fwd: f64, logp_rev: f64, lambda: f64) -> f64 {
    (1.0 - lambda) * logp_fwd + lambda * logp_rev
}

/// `log p(instruction | h)` under the role-swapped prompt.
pub fn score_reverse<M: TokenModel + ?Sized>(
    model: &M,
    pairs: &[TrainingPair],
    hypothesis: &SubgoalSequence,
    instruction: &str,
) -> Result<f64, LmError> {
    score_continuation(model, &build_prompt_reverse(pairs, hypothesis), instruction)
}

/// Fills `logp_reverse` where it is missing and `combined` for `lambda`.
pub fn fill_scores<M: TokenModel + ?Sized>(
    model: &M,
    pairs: &[TrainingPair],
    instruction: &str,
    hypotheses: &mut [Hypothesis],
    lambda: f64,
) -> Result<(), LmError> {
    hypotheses.par_iter_mut().try_for_each(|h| {
        if h.logp_reverse.is_none() {
            h.logp_reverse = Some(score_reverse(model, pairs, &h.plan, instruction)?);
        }
        h.combined = h.logp_reverse.map(|r| combined_score(h.logp_forward, r, lambda));
        Ok(())
    })
}

/// Stable descending sort by the criterion, ties by plan text ascending.
pub fn rank(
    hypotheses: &[Hypothesis],
    criterion: RankCriterion,
) -> Result<Vec<Hypothesis>, RerankError> {
    criterion.validate()?;
    let mut keyed: Vec<(f64, String, &Hypothesis)> = hypotheses
        .iter()
        .map(|h| Ok((criterion.score(h)?, h.text(), h)))
        .collect::<Result<_, RerankError>>()?;
    keyed.sort_by(|a, b| {
        b.0.partial_cmp(&a.0)
            .unwrap_or(Ordering::Equal)
            .then_with(|| a.1.cmp(&b.1))
    });
    Ok(keyed.into_iter().map(|(_, _, h)| h.clone()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::{parse, Catalog};
    use crate::lm::{fit_ngram, NGramConfig, UniformModel};
    use crate::tokenize::{Tokenizer, WordTokenizer};

    fn hyp(text: &str, fwd: f64, rev: Option<f64>) -> Hypothesis {
        let plan = parse(text, &Catalog::builtin()).unwrap();
        Hypothesis {
            tokens: WordTokenizer.encode(text),
            plan,
            logp_forward: fwd,
            logp_reverse: rev,
            combined: None,
        }
    }

    fn texts(hs: &[Hypothesis]) -> Vec<String> {
        hs.iter().map(Hypothesis::text).collect()
    }

    #[test]
    fn combined_degenerate_lambdas() {
        assert_eq!(combined_score(-2.4, -9.1, 0.0), -2.4);
        assert_eq!(combined_score(-2.4, -9.1, 1.0), -9.1);
        assert!((combined_score(-2.4, -9.1, 0.5) - -5.75).abs() < 1e-12);
    }

    #[test]
    fn forward_ranking_flip() {
        let a = "pick up cup, clean in sink, put in cabinet.";
        let b = "pick up cup, put in cabinet.";
        let with_sink = [hyp(b, -4.3, None), hyp(a, -2.4, None)];
        assert_eq!(texts(&rank(&with_sink, RankCriterion::Forward).unwrap())[0], a);
        let without = [hyp(a, -13.7, None), hyp(b, -9.1, None)];
        assert_eq!(texts(&rank(&without, RankCriterion::Forward).unwrap())[0], b);
    }

    #[test]
    fn missing_reverse_score() {
        let hs = [hyp("pick up apple.", -1.0, None)];
        assert!(matches!(
            rank(&hs, RankCriterion::Reverse),
            Err(RerankError::MissingScore(_))
        ));
        assert!(rank(&hs, RankCriterion::weighted_mi(0.0).unwrap()).is_ok());
        assert!(RankCriterion::weighted_mi(1.5).is_err());
    }

    #[test]
    fn ties_by_text() {
        let hs = [hyp("pick up egg.", -1.0, Some(-1.0)), hyp("pick up apple.", -1.0, Some(-1.0))];
        for c in [RankCriterion::Forward, RankCriterion::Reverse, RankCriterion::default()] {
            assert_eq!(texts(&rank(&hs, c).unwrap()), ["pick up apple.", "pick up egg."]);
        }
    }

    #[test]
    fn criterion_parsing() {
        assert_eq!("forward".parse::<RankCriterion>().unwrap(), RankCriterion::Forward);
        assert_eq!(
            "wmi(0.25)".parse::<RankCriterion>().unwrap(),
            RankCriterion::WeightedMI { lambda: 0.25 }
        );
        assert_eq!("wmi".parse::<RankCriterion>().unwrap(), RankCriterion::default());
        assert!("bleu".parse::<RankCriterion>().is_err());
    }

    #[test]
    fn uniform_reverse_is_length_only() {
        let m = UniformModel::new(["a", "b", "c", "d", "e"]);
        let cat = Catalog::builtin();
        let r1 = score_reverse(&m, &[], &parse("pick up apple.", &cat).unwrap(), "a b c").unwrap();
        let r2 = score_reverse(&m, &[], &parse("slice egg, put in cup.", &cat).unwrap(), "a b c").unwrap();
        assert_eq!(r1, r2);
        assert!((r1 - 3.0 * (0.2f64).ln()).abs() < 1e-12);
    }

    #[test]
    fn gold_instruction_has_best_reverse_score() {
        let cat = Catalog::builtin();
        let pair = TrainingPair::new("slice an apple", parse("slice apple.", &cat).unwrap()).unwrap();
        let model = fit_ngram(
            &[build_prompt_reverse(std::slice::from_ref(&pair), &pair.plan) + "slice an apple"],
            &NGramConfig::with_order(3),
        )
        .unwrap();
        let score = |t: &str| score_reverse(&model, std::slice::from_ref(&pair), &pair.plan, t).unwrap();
        let gold = score("slice an apple");
        for other in ["an slice apple", "apple an slice"] {
            assert!(gold > score(other), "{other}");
        }
    }
}
