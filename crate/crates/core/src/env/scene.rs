//! Scenes: rooms populated with object instances.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::affordance::{Affordances, Tag};
use super::EnvError;
use crate::grammar::Catalog;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RoomKind {
    Kitchen,
    Bathroom,
    Bedroom,
    Livingroom,
}

impl RoomKind {
    pub const ALL: [RoomKind; 4] = [
        RoomKind::Kitchen,
        RoomKind::Bathroom,
        RoomKind::Bedroom,
        RoomKind::Livingroom,
    ];
}

impl fmt::Display for RoomKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RoomKind::Kitchen => "kitchen",
            RoomKind::Bathroom => "bathroom",
            RoomKind::Bedroom => "bedroom",
            RoomKind::Livingroom => "livingroom",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Flag {
    Sliced,
    Heated,
    Cooled,
    Cleaned,
    ToggledOn,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Flags {
    pub sliced: bool,
    pub heated: bool,
    pub cooled: bool,
    pub cleaned: bool,
    pub toggled_on: bool,
}

impl Flags {
    pub fn get(&self, flag: Flag) -> bool {
        match flag {
            Flag::Sliced => self.sliced,
            Flag::Heated => self.heated,
            Flag::Cooled => self.cooled,
            Flag::Cleaned => self.cleaned,
            Flag::ToggledOn => self.toggled_on,
        }
    }

    pub fn set(&mut self, flag: Flag) {
        match flag {
            Flag::Sliced => self.sliced = true,
            Flag::Heated => self.heated = true,
            Flag::Cooled => self.cooled = true,
            Flag::Cleaned => self.cleaned = true,
            Flag::ToggledOn => self.toggled_on = true,
        }
    }

    fn is_default(&self) -> bool {
        *self == Flags::default()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectInstance {
    /// Catalog id.
    pub category: String,
    pub cell: (u32, u32),
    #[serde(default, skip_serializing_if = "Flags::is_default")]
    pub flags: Flags,
    /// Index of the receptacle instance holding this one.
    #[serde(default, rename = "in", skip_serializing_if = "Option::is_none")]
    pub contained_in: Option<usize>,
}

impl ObjectInstance {
    pub fn new(category: &str, cell: (u32, u32)) -> Self {
        ObjectInstance {
            category: category.to_string(),
            cell,
            flags: Flags::default(),
            contained_in: None,
        }
    }

    pub fn inside(mut self, receptacle: usize) -> Self {
        self.contained_in = Some(receptacle);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scene {
    pub id: String,
    pub room: RoomKind,
    pub width: u32,
    pub height: u32,
    pub objects: Vec<ObjectInstance>,
}

impl Scene {
    /// Checks bounds, categories, and that containment is a forest of
    /// receptacles.
    pub fn validate(&self, catalog: &Catalog, affordances: &Affordances) -> Result<(), EnvError> {
        let bad = |msg: String| EnvError::InvalidScene {
            scene: self.id.clone(),
            msg,
        };
        if self.width == 0 || self.height == 0 {
            return Err(bad("grid must be non-empty".into()));
        }
        for (i, o) in self.objects.iter().enumerate() {
            if catalog.get(&o.category).is_none() {
                return Err(bad(format!("object {i}: unknown category `{}`", o.category)));
            }
            if o.cell.0 >= self.width || o.cell.1 >= self.height {
                return Err(bad(format!("object {i}: cell {:?} out of bounds", o.cell)));
            }
            if let Some(r) = o.contained_in {
                let Some(rec) = self.objects.get(r) else {
                    return Err(bad(format!("object {i}: container {r} does not exist")));
                };
                if !affordances.has(&rec.category, Tag::Receptacle) {
                    return Err(bad(format!(
                        "object {i}: container {r} (`{}`) is not a receptacle",
                        rec.category
                    )));
                }
            }
            // Walk up the containment chain; more than n steps means a cycle.
            let mut cur = o.contained_in;
            let mut steps = 0;
            while let Some(r) = cur {
                if r == i || steps > self.objects.len() {
                    return Err(bad(format!("object {i}: containment cycle")));
                }
                cur = self.objects[r].contained_in;
                steps += 1;
            }
        }
        Ok(())
    }

    /// Instances directly inside `receptacle`.
    pub fn holds(&self, receptacle: usize) -> Vec<usize> {
        (0..self.objects.len())
            .filter(|&i| self.objects[i].contained_in == Some(receptacle))
            .collect()
    }

    /// Whether `inner` is (transitively) inside `outer`.
    pub fn is_within(&self, inner: usize, outer: usize) -> bool {
        let mut cur = self.objects[inner].contained_in;
        while let Some(r) = cur {
            if r == outer {
                return true;
            }
            cur = self.objects[r].contained_in;
        }
        false
    }

    pub fn instances_of<'a>(&'a self, category: &'a str) -> impl Iterator<Item = usize> + 'a {
        (0..self.objects.len()).filter(move |&i| self.objects[i].category == category)
    }

    pub fn count(&self, category: &str) -> usize {
        self.instances_of(category).count()
    }

    /// Object counts per `(cell, category)`.
    pub fn semantic_grid(&self) -> BTreeMap<((u32, u32), String), u32> {
        let mut grid = BTreeMap::new();
        for o in &self.objects {
            *grid.entry((o.cell, o.category.clone())).or_insert(0) += 1;
        }
        grid
    }

    /// Category multiset, sorted.
    pub fn category_multiset(&self) -> Vec<String> {
        let mut v: Vec<String> = self.objects.iter().map(|o| o.category.clone()).collect();
        v.sort_unstable();
        v
    }
}
