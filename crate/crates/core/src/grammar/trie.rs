//! Token-level prefix trie over verbalized subgoals.
//!
//! The trie stores every `v(action) v(object)` token string once. A plan is a
//! walk that, at the end of each subgoal, either takes `,` back to the root or
//! takes `.` and finishes. [`TrieCursor`] tracks that walk so the decoder can
//! ask which next tokens keep the output a valid plan prefix.

use std::collections::BTreeMap;

use super::{ActionType, Catalog, GrammarError, Subgoal};
use crate::tokenize::{Tokenizer, SEPARATOR, STOP};

#[derive(Debug, Clone, PartialEq)]
struct Node {
    children: BTreeMap<String, usize>,
    ends: Option<Subgoal>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrefixTrie {
    nodes: Vec<Node>,
}

/// Position of a partial plan inside the trie.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TrieCursor {
    node: usize,
    /// Subgoals closed by a separator so far.
    completed: usize,
    finished: bool,
}

impl TrieCursor {
    pub fn is_finished(&self) -> bool {
        self.finished
    }

    /// Number of subgoals fully emitted, counting one that has just ended.
    pub fn completed(&self) -> usize {
        self.completed
    }
}

/// Builds the trie for every `(action, object)` pair.
pub fn build_prefix_trie(
    catalog: &Catalog,
    actions: &[ActionType],
    tokenizer: &dyn Tokenizer,
) -> Result<PrefixTrie, GrammarError> {
    let mut trie = PrefixTrie {
        nodes: vec![Node {
            children: BTreeMap::new(),
            ends: None,
        }],
    };
    for &action in actions {
        let action_toks = tokenizer.encode(action.phrase());
        if action_toks.is_empty() {
            return Err(GrammarError::TokenizerMismatch(format!(
                "action phrase `{}` tokenizes to nothing",
                action.phrase()
            )));
        }
        for object in catalog.iter() {
            let obj_toks = tokenizer.encode(&object.display);
            if obj_toks.is_empty() {
                return Err(GrammarError::TokenizerMismatch(format!(
                    "object `{}` tokenizes to nothing",
                    object.id
                )));
            }
            let mut node = 0;
            for tok in action_toks.iter().chain(&obj_toks) {
                if tok == SEPARATOR || tok == STOP {
                    return Err(GrammarError::TokenizerMismatch(format!(
                        "verbalization of ({action}, {}) contains a separator token",
                        object.id
                    )));
                }
                node = match trie.nodes[node].children.get(tok) {
                    Some(&n) => n,
                    None => {
                        trie.nodes.push(Node {
                            children: BTreeMap::new(),
                            ends: None,
                        });
                        let n = trie.nodes.len() - 1;
                        trie.nodes[node].children.insert(tok.clone(), n);
                        n
                    }
                };
            }
            trie.nodes[node].ends = Some(Subgoal::new(action, object.clone()));
        }
    }
    Ok(trie)
}

impl PrefixTrie {
    pub fn root(&self) -> TrieCursor {
        TrieCursor {
            node: 0,
            completed: 0,
            finished: false,
        }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Steps the cursor over one token; `None` if the token is not admissible.
    pub fn advance(
        &self,
        cur: TrieCursor,
        tok: &str,
        max_subgoals: Option<usize>,
    ) -> Option<TrieCursor> {
        if cur.finished {
            return None;
        }
        let node = &self.nodes[cur.node];
        if node.ends.is_some() {
            if tok == STOP {
                return Some(TrieCursor {
                    node: 0,
                    completed: cur.completed + 1,
                    finished: true,
                });
            }
            if tok == SEPARATOR && max_subgoals.is_none_or(|m| cur.completed + 1 < m) {
                return Some(TrieCursor {
                    node: 0,
                    completed: cur.completed + 1,
                    finished: false,
                });
            }
        }
        node.children.get(tok).map(|&n| TrieCursor {
            node: n,
            completed: cur.completed,
            finished: false,
        })
    }

    /// Admissible next tokens from a cursor, in sorted order.
    pub fn continuations(&self, cur: TrieCursor, max_subgoals: Option<usize>) -> Vec<&str> {
        if cur.finished {
            return Vec::new();
        }
        let node = &self.nodes[cur.node];
        let mut out: Vec<&str> = node.children.keys().map(String::as_str).collect();
        if node.ends.is_some() {
            if max_subgoals.is_none_or(|m| cur.completed + 1 < m) {
                out.push(SEPARATOR);
            }
            out.push(STOP);
        }
        out.sort_unstable();
        out
    }

    /// Walks a whole token prefix from the root.
    pub fn walk<S: AsRef<str>>(&self, prefix: &[S], max_subgoals: Option<usize>) -> Option<TrieCursor> {
        prefix
            .iter()
            .try_fold(self.root(), |cur, t| self.advance(cur, t.as_ref(), max_subgoals))
    }

    /// Admissible next tokens after `prefix`; `None` if the prefix itself is invalid.
    pub fn valid_continuations<S: AsRef<str>>(&self, prefix: &[S]) -> Option<Vec<String>> {
        let cur = self.walk(prefix, None)?;
        Some(self.continuations(cur, None).into_iter().map(str::to_string).collect())
    }

    /// Whether `tokens` spell a complete plan.
    pub fn accepts<S: AsRef<str>>(&self, tokens: &[S]) -> bool {
        self.walk(tokens, None).is_some_and(|c| c.finished)
    }

    /// The subgoal that ends exactly at this cursor, if any.
    pub fn subgoal_at(&self, cur: TrieCursor) -> Option<&Subgoal> {
        self.nodes[cur.node].ends.as_ref()
    }
}
