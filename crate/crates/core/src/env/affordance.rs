//! What each object category can do in the simulator.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::EnvError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tag {
    Pickup,
    Receptacle,
    Heater,
    Cooler,
    Cleaner,
    Sliceable,
    Blade,
    Toggle,
}

impl Tag {
    pub const ALL: [Tag; 8] = [
        Tag::Pickup,
        Tag::Receptacle,
        Tag::Heater,
        Tag::Cooler,
        Tag::Cleaner,
        Tag::Sliceable,
        Tag::Blade,
        Tag::Toggle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Tag::Pickup => "pickup",
            Tag::Receptacle => "receptacle",
            Tag::Heater => "heater",
            Tag::Cooler => "cooler",
            Tag::Cleaner => "cleaner",
            Tag::Sliceable => "sliceable",
            Tag::Blade => "blade",
            Tag::Toggle => "toggle",
        }
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Tag {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Tag::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| format!("unknown affordance tag `{s}`"))
    }
}

/// Category id to affordance tags. Categories without an entry have none.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Affordances {
    tags: HashMap<String, BTreeSet<Tag>>,
}

impl Affordances {
    /// Parses `id<TAB>tag,tag,...` lines; `#` starts a comment line.
    pub fn parse(text: &str) -> Result<Self, EnvError> {
        let mut tags = HashMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim_end();
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let bad = |msg: String| EnvError::Affordance { line: i + 1, msg };
            let (id, list) = line
                .split_once('\t')
                .ok_or_else(|| bad("expected `id<TAB>tags`".into()))?;
            let set = list
                .split(',')
                .map(str::trim)
                .filter(|t| !t.is_empty())
                .map(Tag::from_str)
                .collect::<Result<BTreeSet<_>, _>>()
                .map_err(bad)?;
            if tags.insert(id.trim().to_string(), set).is_some() {
                return Err(bad(format!("duplicate category `{id}`")));
            }
        }
        Ok(Affordances { tags })
    }

    pub fn load(path: &Path) -> Result<Self, EnvError> {
        let text = std::fs::read_to_string(path).map_err(|e| EnvError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        Self::parse(&text)
    }

    pub fn builtin() -> Self {
        Self::parse(include_str!("../../data/affordances.tsv")).expect("bundled affordances parse")
    }

    pub fn has(&self, category: &str, tag: Tag) -> bool {
        self.tags.get(category).is_some_and(|s| s.contains(&tag))
    }

    /// Categories carrying `tag`, sorted.
    pub fn with_tag(&self, tag: Tag) -> Vec<&str> {
        let mut out: Vec<&str> = self
            .tags
            .iter()
            .filter(|(_, s)| s.contains(&tag))
            .map(|(k, _)| k.as_str())
            .collect();
        out.sort_unstable();
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_tags() {
        let a = Affordances::builtin();
        assert!(a.has("apple", Tag::Sliceable));
        assert!(a.has("microwave", Tag::Heater));
        assert!(!a.has("fridge", Tag::Pickup));
        assert!(!a.has("spaceship", Tag::Pickup));
        assert_eq!(a.with_tag(Tag::Blade), ["butterknife", "knife"]);
    }

    #[test]
    fn rejects_bad_lines() {
        assert!(matches!(
            Affordances::parse("apple\tpickup,flying\n"),
            Err(EnvError::Affordance { line: 1, .. })
        ));
        assert!(Affordances::parse("apple pickup\n").is_err());
    }
}
