//! Randomized properties of the scorers, the plan grammar and the rankers.

use proptest::prelude::*;
use subgoal_core::decode::Hypothesis;
use subgoal_core::grammar::{parse, ActionType, Catalog, Subgoal, SubgoalSequence};
use subgoal_core::lm::{fit_ngram, fit_slot_model, score_continuation, NGramConfig, SlotConfig, TokenModel};
use subgoal_core::rerank::{rank, RankCriterion};
use subgoal_core::tokenize::{Tokenizer, WordTokenizer};

const CORPUS: &[&str] = &[
    "put the apple in the fridge = pick up apple, put in fridge.",
    "pick up apple, put in fridge. = put the apple in the fridge",
    "slice a tomato = pick up knife, slice tomato.",
    "pick up knife, slice tomato. = slice a tomato",
    "turn on the desk lamp = toggle on desk lamp.",
];

fn vocab() -> Vec<String> {
    let mut w: Vec<String> = CORPUS.iter().flat_map(|s| WordTokenizer.encode(s)).collect();
    w.sort();
    w.dedup();
    w
}

/// Contexts may hold words the models never saw.
fn context() -> impl Strategy<Value = Vec<String>> {
    let mut w = vocab();
    w.push("zebra".into());
    prop::collection::vec(prop::sample::select(w), 0..12)
}

fn subgoal() -> impl Strategy<Value = Subgoal> {
    let cat = Catalog::builtin();
    (prop::sample::select(ActionType::ALL.to_vec()), prop::sample::select(cat.objects().to_vec()))
        .prop_map(|(a, o)| Subgoal::new(a, o))
}

/// Scores are multiples of 1/8 so that weighted sums and shifts below are
/// exact in floating point.
fn hyps() -> impl Strategy<Value = Vec<Hypothesis>> {
    prop::collection::vec((prop::collection::vec(subgoal(), 1..4), -400i32..0, -400i32..0), 1..8).prop_map(|v| {
        v.into_iter()
            .map(|(steps, f, r)| {
                let (f, r) = (f64::from(f) / 8.0, f64::from(r) / 8.0);
                let plan = SubgoalSequence::new(steps);
                Hypothesis {
                    tokens: WordTokenizer.encode(&plan.to_string()),
                    plan,
                    logp_forward: f,
                    logp_reverse: Some(r),
                    combined: None,
                }
            })
            .collect()
    })
}

fn texts(hs: &[Hypothesis]) -> Vec<String> {
    hs.iter().map(Hypothesis::text).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ngram_distributions_normalize(ctx in context(), order in 1usize..5) {
        let m = fit_ngram(CORPUS, &NGramConfig::with_order(order)).unwrap();
        let refs: Vec<&str> = ctx.iter().map(String::as_str).collect();
        let d = m.next_logprobs(&refs).unwrap();
        prop_assert!(d.logsumexp().abs() < 1e-9, "logsumexp {}", d.logsumexp());
    }

    #[test]
    fn reference_model_distributions_normalize(ctx in context()) {
        let m = fit_slot_model(CORPUS, &Catalog::builtin(), &SlotConfig::default()).unwrap();
        let refs: Vec<&str> = ctx.iter().map(String::as_str).collect();
        let d = m.next_logprobs(&refs).unwrap();
        prop_assert!(d.logsumexp().abs() < 1e-6, "logsumexp {}", d.logsumexp());
    }

    #[test]
    fn continuation_scores_obey_the_chain_rule(
        c in context(),
        a in prop::collection::vec(prop::sample::select(vocab()), 1..5),
        b in prop::collection::vec(prop::sample::select(vocab()), 1..5),
    ) {
        let m = fit_ngram(CORPUS, &NGramConfig::with_order(3)).unwrap();
        let (c, a, b) = (c.join(" "), a.join(" "), b.join(" "));
        let whole = score_continuation(&m, &c, &format!("{a} {b}")).unwrap();
        let split = score_continuation(&m, &c, &a).unwrap() + score_continuation(&m, &format!("{c} {a}"), &b).unwrap();
        prop_assert!((whole - split).abs() < 1e-9, "{} vs {}", whole, split);
    }

    #[test]
    fn random_plans_round_trip(steps in prop::collection::vec(subgoal(), 1..6)) {
        let plan = SubgoalSequence::new(steps);
        prop_assert_eq!(parse(&plan.to_string(), &Catalog::builtin()).unwrap(), plan);
    }

    #[test]
    fn wmi_order_ignores_reverse_offsets(hs in hyps(), shift in -100i32..100, sixteenths in 0u8..=16) {
        let crit = RankCriterion::weighted_mi(f64::from(sixteenths) / 16.0).unwrap();
        let shifted: Vec<Hypothesis> = hs
            .iter()
            .map(|h| Hypothesis { logp_reverse: h.logp_reverse.map(|r| r + f64::from(shift)), ..h.clone() })
            .collect();
        prop_assert_eq!(texts(&rank(&hs, crit).unwrap()), texts(&rank(&shifted, crit).unwrap()));
    }

    #[test]
    fn wmi_endpoints_are_forward_and_reverse(hs in hyps()) {
        let wmi = |l| rank(&hs, RankCriterion::weighted_mi(l).unwrap()).unwrap();
        prop_assert_eq!(texts(&wmi(0.0)), texts(&rank(&hs, RankCriterion::Forward).unwrap()));
        prop_assert_eq!(texts(&wmi(1.0)), texts(&rank(&hs, RankCriterion::Reverse).unwrap()));
    }
}
