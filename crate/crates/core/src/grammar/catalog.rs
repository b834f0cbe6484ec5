//! Object categories and the line-oriented catalog file.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::GrammarError;
use crate::tokenize::{Tokenizer, WordTokenizer};

const DEFAULT_CATALOG: &str = include_str!("../../data/catalog.tsv");

/// An object category: a compact id plus the text used when verbalizing it.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ObjectType {
    pub id: Arc<str>,
    pub display: Arc<str>,
}

impl ObjectType {
    pub fn new(id: &str, display: &str) -> Self {
        ObjectType {
            id: id.into(),
            display: display.into(),
        }
    }
}

impl fmt::Display for ObjectType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.id)
    }
}

/// Ordered set of object categories with lookups by id and by display tokens.
#[derive(Debug, Clone)]
pub struct Catalog {
    objects: Vec<ObjectType>,
    by_id: HashMap<Arc<str>, usize>,
    by_display: HashMap<Vec<String>, usize>,
}

impl PartialEq for Catalog {
    fn eq(&self, other: &Self) -> bool {
        self.objects == other.objects
    }
}

impl Catalog {
    pub fn new(objects: Vec<ObjectType>) -> Result<Self, GrammarError> {
        Self::build(objects.into_iter().map(|o| (0, o)).collect())
    }

    fn build(objects: Vec<(usize, ObjectType)>) -> Result<Self, GrammarError> {
        let mut by_id = HashMap::new();
        let mut by_display = HashMap::new();
        let mut out = Vec::with_capacity(objects.len());
        for (line, obj) in objects {
            let bad = |msg: String| GrammarError::Catalog { line, msg };
            if obj.id.is_empty()
                || obj.id.chars().any(|c| c.is_whitespace() || c.is_uppercase())
            {
                return Err(bad(format!(
                    "object id `{}` must be lowercase with no spaces",
                    obj.id
                )));
            }
            if obj.display.chars().any(|c| matches!(c, '.' | ',' | '=' | '\t')) {
                return Err(bad(format!(
                    "display `{}` may not contain '.', ',', '=' or tabs",
                    obj.display
                )));
            }
            let tokens = WordTokenizer.encode(&obj.display);
            if tokens.is_empty() {
                return Err(bad(format!("object `{}` has an empty display", obj.id)));
            }
            let idx = out.len();
            if by_id.insert(obj.id.clone(), idx).is_some() {
                return Err(bad(format!("duplicate object id `{}`", obj.id)));
            }
            if by_display.insert(tokens, idx).is_some() {
                return Err(bad(format!("duplicate display `{}`", obj.display)));
            }
            out.push(obj);
        }
        Ok(Catalog {
            objects: out,
            by_id,
            by_display,
        })
    }

    /// Parses `id<TAB>display` records; blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self, GrammarError> {
        let mut objects = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim_end_matches('\r');
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let (id, display) = line.split_once('\t').ok_or(GrammarError::Catalog {
                line: i + 1,
                msg: "expected `id<TAB>display`".into(),
            })?;
            objects.push((i + 1, ObjectType::new(id.trim(), display.trim())));
        }
        Self::build(objects)
    }

    pub fn load(path: &Path) -> Result<Self, GrammarError> {
        let text = std::fs::read_to_string(path).map_err(|e| GrammarError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        Self::parse(&text)
    }

    /// The bundled catalog.
    pub fn builtin() -> Self {
        Self::parse(DEFAULT_CATALOG).expect("bundled catalog is valid")
    }

    /// A catalog restricted to the given ids, in the order given.
    pub fn subset(&self, ids: &[&str]) -> Result<Self, GrammarError> {
        let objects = ids
            .iter()
            .map(|id| {
                self.get(id).cloned().ok_or_else(|| GrammarError::UnknownObject {
                    span: 0..0,
                    text: id.to_string(),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(objects)
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for o in &self.objects {
            out.push_str(&o.id);
            out.push('\t');
            out.push_str(&o.display);
            out.push('\n');
        }
        out
    }

    pub fn get(&self, id: &str) -> Option<&ObjectType> {
        self.by_id.get(id).map(|&i| &self.objects[i])
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.by_id.get(id).copied()
    }

    pub fn by_display_tokens(&self, tokens: &[String]) -> Option<&ObjectType> {
        self.by_display.get(tokens).map(|&i| &self.objects[i])
    }

    pub fn objects(&self) -> &[ObjectType] {
        &self.objects
    }

    pub fn len(&self) -> usize {
        self.objects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &ObjectType> {
        self.objects.iter()
    }
}

/// English plural of an object name, inflecting the last word.
pub fn plural(word: &str) -> String {
    if let Some(stem) = word.strip_suffix("fe") {
        format!("{stem}ves")
    } else if word.ends_with('s') || word.ends_with('x') || word.ends_with("ch") || word.ends_with("sh") {
        format!("{word}es")
    } else {
        format!("{word}s")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_has_the_core_categories() {
        let c = Catalog::builtin();
        for id in [
            "apple", "microwave", "desklamp", "ottoman", "butterknife", "knife", "floorlamp",
            "wateringcan", "glassbottle", "cart", "ladle", "pot", "soapbottle", "sink", "table",
        ] {
            assert!(c.get(id).is_some(), "missing {id}");
        }
        assert_eq!(&*c.get("desklamp").unwrap().display, "desk lamp");
    }

    #[test]
    fn rejects_duplicates() {
        let err = Catalog::parse("apple\tapple\napple\tred apple\n").unwrap_err();
        assert!(matches!(err, GrammarError::Catalog { line: 2, .. }));
        let err = Catalog::parse("apple\tapple\nmalus\tapple\n").unwrap_err();
        assert!(matches!(err, GrammarError::Catalog { line: 2, .. }));
    }

    #[test]
    fn rejects_separator_in_display() {
        assert!(Catalog::parse("a\tx, y\n").is_err());
        assert!(Catalog::parse("a\tx.\n").is_err());
        assert!(Catalog::parse("a\t  \n").is_err());
    }

    #[test]
    fn comments_and_blank_lines() {
        let c = Catalog::parse("# header\n\napple\tapple\n  # indented\n").unwrap();
        assert_eq!(c.len(), 1);
    }

    #[test]
    fn tsv_round_trip() {
        let c = Catalog::builtin();
        assert_eq!(Catalog::parse(&c.to_tsv()).unwrap(), c);
    }

    #[test]
    fn plurals() {
        assert_eq!(plural("apple"), "apples");
        assert_eq!(plural("box"), "boxes");
        assert_eq!(plural("butter knife"), "butter knives");
        assert_eq!(plural("glass"), "glasses");
    }
}
