use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{Action, Attribute, Layout, StrategyKind};

const BUILTIN_VOCABULARY: &str = include_str!("../../data/vocabulary.json");
const BUILTIN_CATALOGUE: &str = include_str!("../../data/catalogue.json");

/// Shape names a `shape` property may take.
pub const SHAPES: [&str; 6] = ["circle", "square", "triangle", "diamond", "star", "cross"];

#[derive(Debug, Error)]
pub enum CatalogueError {
    #[error("catalogue parse error: {0}")]
    Parse(String),
    #[error("catalogue has {} violation(s): {}", .0.len(), .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Violation>),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdaptationOperation {
    /// Layout-specific element selector, e.g. `node.clique`.
    pub target: String,
    pub property: String,
    pub value: serde_json::Value,
}

impl AdaptationOperation {
    pub fn new(target: &str, property: &str, value: impl Into<serde_json::Value>) -> Self {
        Self { target: target.into(), property: property.into(), value: value.into() }
    }
}

/// `kind` plus the attribute, which is present exactly when `kind` is partial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "StrategyWire")]
pub struct AdaptationStrategy {
    pub kind: StrategyKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub attribute: Option<Attribute>,
}

#[derive(Deserialize)]
struct StrategyWire {
    kind: StrategyKind,
    #[serde(default)]
    attribute: Option<Attribute>,
}

impl TryFrom<StrategyWire> for AdaptationStrategy {
    type Error = String;

    fn try_from(w: StrategyWire) -> Result<Self, String> {
        let s = AdaptationStrategy { kind: w.kind, attribute: w.attribute };
        s.to_action().map(|_| s)
    }
}

impl AdaptationStrategy {
    pub fn from_action(action: Action) -> Self {
        match action {
            Action::NoAdaptation => Self { kind: StrategyKind::None, attribute: None },
            Action::Partial(a) => Self { kind: StrategyKind::Partial, attribute: Some(a) },
            Action::FullAdaptation => Self { kind: StrategyKind::Full, attribute: None },
        }
    }

    pub fn to_action(self) -> Result<Action, String> {
        match (self.kind, self.attribute) {
            (StrategyKind::None, None) => Ok(Action::NoAdaptation),
            (StrategyKind::Partial, Some(a)) => Ok(Action::Partial(a)),
            (StrategyKind::Full, None) => Ok(Action::FullAdaptation),
            (StrategyKind::Partial, None) => Err("partial strategy needs an attribute".into()),
            (kind, Some(a)) => Err(format!("{kind:?} strategy must not carry attribute {}", a.as_str())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PropertyType {
    /// `#rrggbb`
    Color,
    /// Positive number.
    Multiplier,
    /// One of [`SHAPES`].
    Shape,
    /// One of the property's declared `values`.
    Arrangement,
    Flag,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertySpec {
    #[serde(rename = "type")]
    pub ty: PropertyType,
    /// The partial attribute this property expresses. `None` means only
    /// full adaptation may touch it.
    pub attribute: Option<Attribute>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub values: Vec<String>,
}

impl PropertySpec {
    pub fn check_value(&self, value: &serde_json::Value) -> Result<(), String> {
        let ok = match self.ty {
            PropertyType::Color => value.as_str().is_some_and(is_hex_color),
            PropertyType::Multiplier => value.as_f64().is_some_and(|v| v > 0.0 && v.is_finite()),
            PropertyType::Shape => value.as_str().is_some_and(|s| SHAPES.contains(&s)),
            PropertyType::Arrangement => value.as_str().is_some_and(|s| self.values.iter().any(|v| v == s)),
            PropertyType::Flag => value.is_boolean(),
        };
        if ok {
            Ok(())
        } else {
            Err(format!("value {value} is not a valid {:?}", self.ty))
        }
    }
}

fn is_hex_color(s: &str) -> bool {
    s.len() == 7 && s.starts_with('#') && s[1..].chars().all(|c| c.is_ascii_hexdigit())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutVocabulary {
    pub targets: Vec<String>,
    pub properties: BTreeMap<String, PropertySpec>,
}

/// Selectors and properties each layout understands. Shared with the
/// dashboard so both sides agree on names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vocabulary(pub BTreeMap<Layout, LayoutVocabulary>);

impl Vocabulary {
    pub fn builtin() -> Self {
        serde_json::from_str(BUILTIN_VOCABULARY).expect("bundled vocabulary parses")
    }

    pub fn builtin_json() -> &'static str {
        BUILTIN_VOCABULARY
    }

    pub fn from_json(text: &str) -> Result<Self, CatalogueError> {
        serde_json::from_str(text).map_err(|e| CatalogueError::Parse(e.to_string()))
    }

    pub fn layout(&self, layout: Layout) -> Option<&LayoutVocabulary> {
        self.0.get(&layout)
    }
}

/// One row of the catalogue file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalogueEntry {
    pub layout: Layout,
    pub strategy: StrategyKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attribute: Option<Attribute>,
    pub operations: Vec<AdaptationOperation>,
}

impl CatalogueEntry {
    pub fn action(&self) -> Result<Action, String> {
        AdaptationStrategy { kind: self.strategy, attribute: self.attribute }.to_action()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    /// Position in the catalogue file, when the problem is local to an entry.
    pub entry: Option<usize>,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.entry {
            Some(i) => write!(f, "entry {i}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

/// Every rule the engine relies on at runtime. An empty result means the
/// catalogue is total and consistent with `vocab`.
pub fn validate_catalogue(entries: &[CatalogueEntry], vocab: &Vocabulary) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut at = |entry: Option<usize>, message: String| out.push(Violation { entry, message });
    let mut seen: HashMap<(Layout, Action), usize> = HashMap::new();

    for (i, e) in entries.iter().enumerate() {
        let action = match e.action() {
            Ok(a) => a,
            Err(msg) => {
                at(Some(i), msg);
                continue;
            }
        };
        if let Some(first) = seen.insert((e.layout, action), i) {
            at(Some(i), format!("duplicate of entry {first} ({}, {})", e.layout, action.as_str()));
        }
        if action == Action::NoAdaptation && !e.operations.is_empty() {
            at(Some(i), "no_adaptation must have no operations".into());
        }
        if action != Action::NoAdaptation && e.operations.is_empty() {
            at(Some(i), format!("{} has no operations", action.as_str()));
        }
        let Some(lv) = vocab.layout(e.layout) else {
            at(Some(i), format!("layout {} missing from vocabulary", e.layout));
            continue;
        };
        for op in &e.operations {
            if !lv.targets.contains(&op.target) {
                at(Some(i), format!("unknown target '{}' for {}", op.target, e.layout));
            }
            let Some(spec) = lv.properties.get(&op.property) else {
                at(Some(i), format!("unknown property '{}' for {}", op.property, e.layout));
                continue;
            };
            if let Err(msg) = spec.check_value(&op.value) {
                at(Some(i), format!("{}.{}: {msg}", op.target, op.property));
            }
            if let Action::Partial(attr) = action {
                if spec.attribute != Some(attr) {
                    at(Some(i), format!("property '{}' does not express attribute {}", op.property, attr.as_str()));
                }
            }
        }
    }

    for layout in Layout::ALL {
        for action in Action::ALL {
            if !seen.contains_key(&(layout, action)) {
                at(None, format!("missing entry ({layout}, {})", action.as_str()));
            }
        }
        let Some(&full) = seen.get(&(layout, Action::FullAdaptation)) else { continue };
        for attr in Attribute::ALL {
            let Some(&p) = seen.get(&(layout, Action::Partial(attr))) else { continue };
            for op in &entries[p].operations {
                if !entries[full].operations.contains(op) {
                    at(Some(full), format!("full_adaptation for {layout} lacks {} {} from partial_{}", op.target, op.property, attr.as_str()));
                }
            }
        }
    }
    if entries.len() != Layout::ALL.len() * Action::COUNT {
        at(None, format!("expected {} entries, found {}", Layout::ALL.len() * Action::COUNT, entries.len()));
    }
    out
}

/// A validated catalogue. Lookups cannot fail.
#[derive(Debug, Clone)]
pub struct Catalogue {
    entries: Vec<CatalogueEntry>,
    index: HashMap<(Layout, Action), usize>,
}

impl Catalogue {
    pub fn new(entries: Vec<CatalogueEntry>, vocab: &Vocabulary) -> Result<Self, CatalogueError> {
        let violations = validate_catalogue(&entries, vocab);
        if !violations.is_empty() {
            return Err(CatalogueError::Invalid(violations));
        }
        let index = entries.iter().enumerate().map(|(i, e)| ((e.layout, e.action().expect("validated")), i)).collect();
        Ok(Self { entries, index })
    }

    pub fn parse_entries(text: &str) -> Result<Vec<CatalogueEntry>, CatalogueError> {
        serde_path_to_error::deserialize(&mut serde_json::Deserializer::from_str(text))
            .map_err(|e| CatalogueError::Parse(format!("at '{}': {}", e.path(), e.inner())))
    }

    pub fn from_json(text: &str, vocab: &Vocabulary) -> Result<Self, CatalogueError> {
        Catalogue::new(Catalogue::parse_entries(text)?, vocab)
    }

    pub fn load(path: impl AsRef<Path>, vocab: &Vocabulary) -> Result<Self, CatalogueError> {
        Catalogue::from_json(&std::fs::read_to_string(path)?, vocab)
    }

    /// The catalogue shipped with the crate.
    pub fn builtin() -> Self {
        Catalogue::from_json(BUILTIN_CATALOGUE, &Vocabulary::builtin()).expect("bundled catalogue is valid")
    }

    pub fn builtin_json() -> &'static str {
        BUILTIN_CATALOGUE
    }

    pub fn entries(&self) -> &[CatalogueEntry] {
        &self.entries
    }

    pub fn operations(&self, layout: Layout, action: Action) -> &[AdaptationOperation] {
        &self.entries[self.index[&(layout, action)]].operations
    }
}
