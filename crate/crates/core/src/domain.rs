//! Vocabulary shared by the agent, the adaptation engine and the gateway.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Dashboard representation the analyst is currently looking at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layout {
    Graph,
    Timeline,
    Distribution,
}

impl Layout {
    pub const ALL: [Layout; 3] = [Layout::Graph, Layout::Timeline, Layout::Distribution];

    pub fn as_str(self) -> &'static str {
        match self {
            Layout::Graph => "graph",
            Layout::Timeline => "timeline",
            Layout::Distribution => "distribution",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Layout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Layout {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "graph" => Ok(Layout::Graph),
            "timeline" => Ok(Layout::Timeline),
            "distribution" => Ok(Layout::Distribution),
            other => Err(format!("unknown layout `{other}` (expected graph, timeline or distribution)")),
        }
    }
}

/// Combined workload state. `Optimal` is the target the reward pays for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MwlCategory {
    Low,
    Optimal,
    High,
}

impl MwlCategory {
    pub const ALL: [MwlCategory; 3] = [MwlCategory::Low, MwlCategory::Optimal, MwlCategory::High];

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Question difficulty as labelled by the difficulty provider.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Difficulty {
    Low,
    High,
}

impl Difficulty {
    pub const ALL: [Difficulty; 2] = [Difficulty::Low, Difficulty::High];

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Coarse strategy class, used both as part of the agent state and as the
/// key of the simulated user's response table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    None,
    Partial,
    Full,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 3] = [StrategyKind::None, StrategyKind::Partial, StrategyKind::Full];

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Visual attribute touched by a partial adaptation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Attribute {
    Color,
    Shape,
    Size,
    Proximity,
    Thickness,
}

impl Attribute {
    pub const ALL: [Attribute; 5] = [
        Attribute::Color,
        Attribute::Shape,
        Attribute::Size,
        Attribute::Proximity,
        Attribute::Thickness,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Attribute::Color => "color",
            Attribute::Shape => "shape",
            Attribute::Size => "size",
            Attribute::Proximity => "proximity",
            Attribute::Thickness => "thickness",
        }
    }
}

/// One of the seven adaptations an agent can choose. Index order is part of
/// the model file format and must not change.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Action {
    NoAdaptation,
    Partial(Attribute),
    FullAdaptation,
}

impl Action {
    pub const COUNT: usize = 7;

    pub const ALL: [Action; Action::COUNT] = [
        Action::NoAdaptation,
        Action::Partial(Attribute::Color),
        Action::Partial(Attribute::Shape),
        Action::Partial(Attribute::Size),
        Action::Partial(Attribute::Proximity),
        Action::Partial(Attribute::Thickness),
        Action::FullAdaptation,
    ];

    pub fn index(self) -> usize {
        match self {
            Action::NoAdaptation => 0,
            Action::Partial(Attribute::Color) => 1,
            Action::Partial(Attribute::Shape) => 2,
            Action::Partial(Attribute::Size) => 3,
            Action::Partial(Attribute::Proximity) => 4,
            Action::Partial(Attribute::Thickness) => 5,
            Action::FullAdaptation => 6,
        }
    }

    pub fn from_index(index: usize) -> Option<Action> {
        Action::ALL.get(index).copied()
    }

    pub fn kind(self) -> StrategyKind {
        match self {
            Action::NoAdaptation => StrategyKind::None,
            Action::Partial(_) => StrategyKind::Partial,
            Action::FullAdaptation => StrategyKind::Full,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Action::NoAdaptation => "no_adaptation",
            Action::Partial(Attribute::Color) => "partial_color",
            Action::Partial(Attribute::Shape) => "partial_shape",
            Action::Partial(Attribute::Size) => "partial_size",
            Action::Partial(Attribute::Proximity) => "partial_proximity",
            Action::Partial(Attribute::Thickness) => "partial_thickness",
            Action::FullAdaptation => "full_adaptation",
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Action {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Action::ALL
            .iter()
            .copied()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| format!("unknown action `{s}`"))
    }
}

impl Serialize for Action {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for Action {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn action_index_is_a_bijection() {
        for (i, a) in Action::ALL.iter().enumerate() {
            assert_eq!(a.index(), i);
            assert_eq!(Action::from_index(i), Some(*a));
            assert_eq!(a.as_str().parse::<Action>().unwrap(), *a);
        }
        assert_eq!(Action::from_index(7), None);
    }

    #[test]
    fn action_serializes_as_snake_string() {
        let json = serde_json::to_string(&Action::Partial(Attribute::Proximity)).unwrap();
        assert_eq!(json, "\"partial_proximity\"");
        assert!(serde_json::from_str::<Action>("\"partial_glow\"").is_err());
    }

    #[test]
    fn layout_parse() {
        assert_eq!("timeline".parse::<Layout>().unwrap(), Layout::Timeline);
        assert!("Timeline".parse::<Layout>().is_err());
    }
}
