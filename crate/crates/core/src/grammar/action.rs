use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// The abstract interaction actions a subgoal can name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ActionType {
    Pickup,
    Put,
    Heat,
    Cool,
    Clean,
    Slice,
    ToggleOn,
}

impl ActionType {
    pub const ALL: [ActionType; 7] = [
        ActionType::Pickup,
        ActionType::Put,
        ActionType::Heat,
        ActionType::Cool,
        ActionType::Clean,
        ActionType::Slice,
        ActionType::ToggleOn,
    ];

    /// The words placed before the object name when the subgoal is verbalized.
    pub fn phrase(self) -> &'static str {
        match self {
            ActionType::Pickup => "pick up",
            ActionType::Put => "put in",
            ActionType::Heat => "heat in",
            ActionType::Cool => "cool in",
            ActionType::Clean => "clean in",
            ActionType::Slice => "slice",
            ActionType::ToggleOn => "turn on",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ActionType::Pickup => "Pickup",
            ActionType::Put => "Put",
            ActionType::Heat => "Heat",
            ActionType::Cool => "Cool",
            ActionType::Clean => "Clean",
            ActionType::Slice => "Slice",
            ActionType::ToggleOn => "ToggleOn",
        }
    }
}

impl fmt::Display for ActionType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ActionType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ActionType::ALL
            .into_iter()
            .find(|a| a.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown action `{s}`"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn seven_distinct_phrases() {
        let phrases: HashSet<_> = ActionType::ALL.iter().map(|a| a.phrase()).collect();
        assert_eq!(phrases.len(), 7);
    }

    #[test]
    fn names_round_trip() {
        for a in ActionType::ALL {
            assert_eq!(a.name().parse::<ActionType>().unwrap(), a);
        }
    }
}
