//! Subgoals, plans, and the verbalizer that maps them to and from text.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::{ActionType, Catalog, GrammarError, ObjectType};
use crate::tokenize::{Tokenizer, WordTokenizer, SEPARATOR, STOP};

/// One (action, object) interaction.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Subgoal {
    pub action: ActionType,
    pub object: ObjectType,
}

impl Subgoal {
    pub fn new(action: ActionType, object: ObjectType) -> Self {
        Subgoal { action, object }
    }
}

impl fmt::Display for Subgoal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&verbalize(self))
    }
}

/// The element at some index of a plan, with the stop marker made explicit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlanStep<'a> {
    Act(&'a Subgoal),
    Stop,
    /// Past the end of a plan that was never terminated.
    Exhausted,
}

/// An ordered plan. `terminated` records whether the stop marker was emitted.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SubgoalSequence {
    pub steps: Vec<Subgoal>,
    pub terminated: bool,
}

impl SubgoalSequence {
    pub fn new(steps: Vec<Subgoal>) -> Self {
        SubgoalSequence {
            steps,
            terminated: true,
        }
    }

    pub fn unterminated(steps: Vec<Subgoal>) -> Self {
        SubgoalSequence {
            steps,
            terminated: false,
        }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn step(&self, i: usize) -> PlanStep<'_> {
        match self.steps.get(i) {
            Some(g) => PlanStep::Act(g),
            None if i == self.steps.len() && self.terminated => PlanStep::Stop,
            None => PlanStep::Exhausted,
        }
    }

    pub fn starts_with(&self, prefix: &[Subgoal]) -> bool {
        self.steps.starts_with(prefix)
    }
}

impl FromIterator<Subgoal> for SubgoalSequence {
    fn from_iter<I: IntoIterator<Item = Subgoal>>(iter: I) -> Self {
        SubgoalSequence::new(iter.into_iter().collect())
    }
}

impl fmt::Display for SubgoalSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let body: Vec<String> = self.steps.iter().map(verbalize).collect();
        f.write_str(&body.join(", "))?;
        if self.terminated {
            f.write_str(STOP)?;
        }
        Ok(())
    }
}

pub fn verbalize(g: &Subgoal) -> String {
    format!("{} {}", g.action.phrase(), g.object.display)
}

/// `"v(g1), v(g2), ..., v(gn)."`
pub fn serialize(seq: &SubgoalSequence) -> Result<String, GrammarError> {
    if seq.steps.is_empty() {
        return Err(GrammarError::EmptyPlan);
    }
    let body: Vec<String> = seq.steps.iter().map(verbalize).collect();
    Ok(format!("{}{STOP}", body.join(", ")))
}

/// Inverse of [`serialize`].
///
/// Object names are resolved by longest match: an object runs until the next
/// separator or stop marker, and separators never occur inside a display
/// name, so "butter knife" can never be read as "knife".
pub fn parse(text: &str, catalog: &Catalog) -> Result<SubgoalSequence, GrammarError> {
    let toks = WordTokenizer.encode_with_spans(text);
    let span_of = |a: usize, b: usize| -> std::ops::Range<usize> {
        if a >= toks.len() {
            return text.len()..text.len();
        }
        toks[a].1.start..toks[b.max(a + 1).min(toks.len()) - 1].1.end
    };
    let action_tokens: Vec<(ActionType, Vec<String>)> = ActionType::ALL
        .iter()
        .map(|&a| (a, WordTokenizer.encode(a.phrase())))
        .collect();

    let mut steps = Vec::new();
    let mut pos = 0;
    loop {
        if pos >= toks.len() {
            let span = span_of(pos, pos);
            return Err(GrammarError::MalformedSequence {
                text: String::new(),
                span,
                expected: "a subgoal".into(),
            });
        }
        let sep = toks[pos..]
            .iter()
            .position(|(t, _)| t == SEPARATOR || t == STOP)
            .map(|p| p + pos);
        let seg_end = sep.unwrap_or(toks.len());

        let action = action_tokens
            .iter()
            .filter(|(_, words)| {
                pos + words.len() <= seg_end
                    && toks[pos..pos + words.len()]
                        .iter()
                        .zip(words)
                        .all(|((t, _), w)| t == w)
            })
            .max_by_key(|(_, words)| words.len());
        let Some((action, words)) = action else {
            let span = span_of(pos, seg_end);
            return Err(GrammarError::UnknownAction {
                text: text[span.clone()].to_string(),
                span,
            });
        };
        let obj_start = pos + words.len();
        let Some(sep) = sep else {
            let span = span_of(pos, toks.len());
            return Err(GrammarError::MalformedSequence {
                text: text[span.clone()].to_string(),
                span,
                expected: "',' or '.' after subgoal".into(),
            });
        };
        let obj_tokens: Vec<String> = toks[obj_start..sep].iter().map(|(t, _)| t.clone()).collect();
        let Some(object) = catalog.by_display_tokens(&obj_tokens) else {
            let span = if obj_start == sep {
                toks[sep].1.clone()
            } else {
                span_of(obj_start, sep)
            };
            return Err(GrammarError::UnknownObject {
                text: text[span.clone()].to_string(),
                span,
            });
        };
        steps.push(Subgoal::new(*action, object.clone()));

        if toks[sep].0 == STOP {
            if sep + 1 != toks.len() {
                let span = span_of(sep + 1, toks.len());
                return Err(GrammarError::MalformedSequence {
                    text: text[span.clone()].to_string(),
                    span,
                    expected: "end of plan after '.'".into(),
                });
            }
            return Ok(SubgoalSequence::new(steps));
        }
        pos = sep + 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cat() -> Catalog {
        Catalog::builtin()
    }

    fn sg(a: ActionType, id: &str) -> Subgoal {
        Subgoal::new(a, cat().get(id).unwrap().clone())
    }

    #[test]
    fn verbalize_templates() {
        assert_eq!(verbalize(&sg(ActionType::Pickup, "apple")), "pick up apple");
        assert_eq!(verbalize(&sg(ActionType::Heat, "microwave")), "heat in microwave");
        assert_eq!(verbalize(&sg(ActionType::ToggleOn, "desklamp")), "turn on desk lamp");
        assert_eq!(verbalize(&sg(ActionType::Put, "cup")), "put in cup");
        assert_eq!(verbalize(&sg(ActionType::Cool, "fridge")), "cool in fridge");
        assert_eq!(verbalize(&sg(ActionType::Clean, "sink")), "clean in sink");
        assert_eq!(verbalize(&sg(ActionType::Slice, "tomato")), "slice tomato");
    }

    #[test]
    fn serialize_examples() {
        let one = SubgoalSequence::new(vec![sg(ActionType::Pickup, "apple")]);
        assert_eq!(serialize(&one).unwrap(), "pick up apple.");
        let two = SubgoalSequence::new(vec![sg(ActionType::Pickup, "fork"), sg(ActionType::Put, "cup")]);
        assert_eq!(serialize(&two).unwrap(), "pick up fork, put in cup.");
        assert!(matches!(
            serialize(&SubgoalSequence::new(vec![])),
            Err(GrammarError::EmptyPlan)
        ));
    }

    #[test]
    fn parse_examples() {
        let c = cat();
        assert_eq!(
            parse("pick up apple.", &c).unwrap(),
            SubgoalSequence::new(vec![sg(ActionType::Pickup, "apple")])
        );
        assert_eq!(
            parse("pick up butter knife, put in table.", &c).unwrap(),
            SubgoalSequence::new(vec![
                sg(ActionType::Pickup, "butterknife"),
                sg(ActionType::Put, "table")
            ])
        );
        let err = parse("fly to moon.", &c).unwrap_err();
        match err {
            GrammarError::UnknownAction { text, span } => {
                assert_eq!(text, "fly to moon");
                assert_eq!(span, 0..11);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn parse_errors_name_spans() {
        let c = cat();
        match parse("pick up spaceship.", &c).unwrap_err() {
            GrammarError::UnknownObject { text, span } => {
                assert_eq!(text, "spaceship");
                assert_eq!(span, 8..17);
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            parse("pick up apple", &c).unwrap_err(),
            GrammarError::MalformedSequence { .. }
        ));
        assert!(matches!(
            parse("pick up apple,", &c).unwrap_err(),
            GrammarError::MalformedSequence { .. }
        ));
        assert!(matches!(
            parse("pick up apple. put in cup.", &c).unwrap_err(),
            GrammarError::MalformedSequence { .. }
        ));
        assert!(matches!(
            parse("pick up, put in cup.", &c).unwrap_err(),
            GrammarError::UnknownObject { .. }
        ));
        assert!(matches!(parse("", &c).unwrap_err(), GrammarError::MalformedSequence { .. }));
    }

    #[test]
    fn desk_vs_desk_lamp() {
        let c = cat();
        let p = parse("pick up book, turn on desk lamp, put in desk.", &c).unwrap();
        assert_eq!(&*p.steps[1].object.id, "desklamp");
        assert_eq!(&*p.steps[2].object.id, "desk");
    }

    #[test]
    fn plan_steps_expose_stop() {
        let p = SubgoalSequence::new(vec![sg(ActionType::Pickup, "apple")]);
        assert!(matches!(p.step(0), PlanStep::Act(_)));
        assert_eq!(p.step(1), PlanStep::Stop);
        assert_eq!(p.step(2), PlanStep::Exhausted);
        let u = SubgoalSequence::unterminated(p.steps.clone());
        assert_eq!(u.step(1), PlanStep::Exhausted);
    }
}
