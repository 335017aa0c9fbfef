//! SDoH label taxonomy: categories, attributes, task projections, and the
//! Z-code mapping used for structured-data comparison.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// The six SDoH categories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Category {
    Employment,
    Housing,
    Transportation,
    Parent,
    Relationship,
    Support,
}

impl Category {
    pub const ALL: [Category; 6] = [
        Category::Employment,
        Category::Housing,
        Category::Transportation,
        Category::Parent,
        Category::Relationship,
        Category::Support,
    ];

    /// Canonical uppercase name used in prompts and label files.
    pub fn canonical_name(self) -> &'static str {
        match self {
            Category::Employment => "EMPLOYMENT",
            Category::Housing => "HOUSING",
            Category::Transportation => "TRANSPORTATION",
            Category::Parent => "PARENT",
            Category::Relationship => "RELATIONSHIP",
            Category::Support => "SUPPORT",
        }
    }

    /// Human-readable name used in report tables.
    pub fn display_name(self) -> &'static str {
        match self {
            Category::Employment => "Employment",
            Category::Housing => "Housing",
            Category::Transportation => "Transportation",
            Category::Parent => "Parent",
            Category::Relationship => "Relationship",
            Category::Support => "Social Support",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.canonical_name())
    }
}

/// Category-scoped attribute values. Each attribute belongs to exactly one
/// category; see [`Attribute::category`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Attribute {
    // EMPLOYMENT
    Employed,
    Unemployed,
    Underemployed,
    Retired,
    Disability,
    Student,
    // HOUSING
    FinancialStatus,
    Undomiciled,
    HousingOther,
    // TRANSPORTATION
    Distance,
    Resource,
    TransportationOther,
    // PARENT
    ChildUnder18,
    // RELATIONSHIP
    Married,
    Partnered,
    Widowed,
    Divorced,
    Single,
    // SUPPORT
    SupportPlus,
    SupportMinus,
}

impl Attribute {
    pub const ALL: [Attribute; 20] = [
        Attribute::Employed,
        Attribute::Unemployed,
        Attribute::Underemployed,
        Attribute::Retired,
        Attribute::Disability,
        Attribute::Student,
        Attribute::FinancialStatus,
        Attribute::Undomiciled,
        Attribute::HousingOther,
        Attribute::Distance,
        Attribute::Resource,
        Attribute::TransportationOther,
        Attribute::ChildUnder18,
        Attribute::Married,
        Attribute::Partnered,
        Attribute::Widowed,
        Attribute::Divorced,
        Attribute::Single,
        Attribute::SupportPlus,
        Attribute::SupportMinus,
    ];

    /// The category this attribute belongs to.
    pub fn category(self) -> Category {
        use Attribute::*;
        match self {
            Employed | Unemployed | Underemployed | Retired | Disability | Student => {
                Category::Employment
            }
            FinancialStatus | Undomiciled | HousingOther => Category::Housing,
            Distance | Resource | TransportationOther => Category::Transportation,
            ChildUnder18 => Category::Parent,
            Married | Partnered | Widowed | Divorced | Single => Category::Relationship,
            SupportPlus | SupportMinus => Category::Support,
        }
    }

    /// Name used in annotation files. `other` is reused across housing and
    /// transportation, so parsing always requires the category for context.
    pub fn wire_name(self) -> &'static str {
        use Attribute::*;
        match self {
            Employed => "employed",
            Unemployed => "unemployed",
            Underemployed => "underemployed",
            Retired => "retired",
            Disability => "disability",
            Student => "student",
            FinancialStatus => "financial_status",
            Undomiciled => "undomiciled",
            HousingOther | TransportationOther => "other",
            Distance => "distance",
            Resource => "resource",
            ChildUnder18 => "child_under_18",
            Married => "married",
            Partnered => "partnered",
            Widowed => "widowed",
            Divorced => "divorced",
            Single => "single",
            SupportPlus => "plus",
            SupportMinus => "minus",
        }
    }

    /// Parse an attribute name in the context of its category.
    pub fn parse(category: Category, name: &str) -> Result<Attribute, SchemaError> {
        let name = name.trim().to_ascii_lowercase();
        Attribute::ALL
            .iter()
            .copied()
            .find(|a| a.category() == category && a.wire_name() == name)
            .ok_or(SchemaError::InvalidPair {
                category,
                attribute: name,
            })
    }
}

impl fmt::Display for Attribute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.wire_name())
    }
}

/// The two sentence-level classification tasks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Any,
    Adverse,
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Task::Any => f.write_str("any"),
            Task::Adverse => f.write_str("adverse"),
        }
    }
}

/// A (category, attribute) pair as assigned by an annotator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AnnotationPair {
    pub category: Category,
    pub attribute: Attribute,
}

impl AnnotationPair {
    pub fn new(category: Category, attribute: Attribute) -> Result<Self, SchemaError> {
        if attribute.category() != category {
            return Err(SchemaError::InvalidPair {
                category,
                attribute: attribute.wire_name().to_string(),
            });
        }
        Ok(AnnotationPair {
            category,
            attribute,
        })
    }
}

impl Serialize for AnnotationPair {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut s = serializer.serialize_struct("AnnotationPair", 2)?;
        s.serialize_field("category", &self.category)?;
        s.serialize_field("attribute", self.attribute.wire_name())?;
        s.end()
    }
}

impl<'de> Deserialize<'de> for AnnotationPair {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            category: Category,
            attribute: String,
        }
        let raw = Raw::deserialize(deserializer)?;
        let attribute =
            Attribute::parse(raw.category, &raw.attribute).map_err(serde::de::Error::custom)?;
        Ok(AnnotationPair {
            category: raw.category,
            attribute,
        })
    }
}

/// One sentence's gold annotation: a set of (category, attribute) pairs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Annotation {
    pub sentence_id: String,
    #[serde(default)]
    pub pairs: BTreeSet<AnnotationPair>,
}

/// A set of category labels for one sentence under one task. An empty set
/// means No-SDoH (any task) or No-Adverse-SDoH (adverse task).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSet {
    pub task: Task,
    pub labels: BTreeSet<Category>,
}

impl LabelSet {
    pub fn new(task: Task, labels: BTreeSet<Category>) -> Self {
        LabelSet { task, labels }
    }

    pub fn empty(task: Task) -> Self {
        LabelSet {
            task,
            labels: BTreeSet::new(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

#[derive(Debug, Error)]
pub enum SchemaError {
    #[error("unknown label token: {0:?}")]
    UnknownLabelToken(String),
    #[error("attribute {attribute:?} is not valid for category {category}")]
    InvalidPair {
        category: Category,
        attribute: String,
    },
    #[error("not a Z-code: {0:?}")]
    NotAZCode(String),
    #[error("malformed Z-code map line {line}: {message}")]
    MalformedZCodeMap { line: usize, message: String },
}

/// True when the attribute could create an additional social work or
/// resource support need.
pub fn is_adverse(category: Category, attribute: Attribute) -> Result<bool, SchemaError> {
    if attribute.category() != category {
        return Err(SchemaError::InvalidPair {
            category,
            attribute: attribute.wire_name().to_string(),
        });
    }
    use Attribute::*;
    Ok(match attribute {
        Unemployed | Underemployed | Disability => true,
        Employed | Retired | Student => false,
        FinancialStatus | Undomiciled | HousingOther => true,
        Distance | Resource | TransportationOther => true,
        ChildUnder18 => true,
        Widowed | Divorced | Single => true,
        Married | Partnered => false,
        SupportMinus => true,
        SupportPlus => false,
    })
}

/// Project an annotation onto a task's label set. The any task keeps every
/// category regardless of attribute; the adverse task keeps only categories
/// carried by an adverse attribute.
pub fn project(annotation: &Annotation, task: Task) -> LabelSet {
    let labels = annotation
        .pairs
        .iter()
        .filter(|p| match task {
            Task::Any => true,
            // Pairs are validated on construction, so is_adverse cannot fail.
            Task::Adverse => is_adverse(p.category, p.attribute).unwrap_or(false),
        })
        .map(|p| p.category)
        .collect();
    LabelSet::new(task, labels)
}

/// Alias table for model output tokens, e.g. seq2seq models emitting
/// truncated label vocabulary.
const LABEL_ALIASES: [(&str, Category); 5] = [
    ("RELAT", Category::Relationship),
    ("EMPLOY", Category::Employment),
    ("TRANSPORT", Category::Transportation),
    ("HOUSE", Category::Housing),
    ("SUPP", Category::Support),
];

/// Map a raw label token to a category. Matching is case-insensitive after
/// trimming; canonical names map to themselves and the shipped alias table
/// covers common truncations.
pub fn parse_label_token(token: &str) -> Result<Category, SchemaError> {
    let normalized = token.trim().to_ascii_uppercase();
    for cat in Category::ALL {
        if normalized == cat.canonical_name() {
            return Ok(cat);
        }
    }
    for (alias, cat) in LABEL_ALIASES {
        if normalized == alias {
            return Ok(cat);
        }
    }
    Err(SchemaError::UnknownLabelToken(token.to_string()))
}

/// Result of looking up a code in the Z-code map. `matched_prefix` is `None`
/// when no table entry covers the code, which callers should surface as an
/// unmapped-code warning.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ZCodeMatch {
    pub categories: BTreeSet<Category>,
    pub matched_prefix: Option<String>,
}

/// Longest-prefix Z-code to SDoH category mapping (adverse task). Subcodes
/// such as Z59.0 inherit the parent mapping.
#[derive(Debug, Clone)]
pub struct ZCodeMap {
    entries: Vec<(String, BTreeSet<Category>)>,
}

impl ZCodeMap {
    /// The shipped mapping. Z55 (education) maps to the empty set because
    /// the taxonomy has no education label; lookups still report it as
    /// matched so callers can distinguish it from unknown codes.
    pub fn shipped() -> Self {
        let e = |cats: &[Category]| cats.iter().copied().collect::<BTreeSet<_>>();
        ZCodeMap {
            entries: vec![
                ("Z55".to_string(), e(&[])),
                ("Z56".to_string(), e(&[Category::Employment])),
                (
                    "Z59".to_string(),
                    e(&[Category::Housing, Category::Support, Category::Employment]),
                ),
                ("Z60".to_string(), e(&[Category::Support])),
                ("Z62".to_string(), e(&[Category::Parent, Category::Support])),
                ("Z63".to_string(), e(&[Category::Support])),
                (
                    "Z75".to_string(),
                    e(&[Category::Housing, Category::Transportation]),
                ),
            ],
        }
    }

    /// Parse a user-supplied map: CSV lines `prefix,CAT1;CAT2;...` (an empty
    /// category list is allowed). Lines starting with `#` are skipped.
    pub fn from_csv(text: &str) -> Result<Self, SchemaError> {
        let mut entries = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (prefix, cats) =
                line.split_once(',')
                    .ok_or_else(|| SchemaError::MalformedZCodeMap {
                        line: idx + 1,
                        message: "expected `prefix,categories`".to_string(),
                    })?;
            let prefix = prefix.trim().to_ascii_uppercase();
            if !prefix.starts_with('Z') {
                return Err(SchemaError::MalformedZCodeMap {
                    line: idx + 1,
                    message: format!("prefix {prefix:?} does not start with Z"),
                });
            }
            let mut set = BTreeSet::new();
            for tok in cats.split(';').filter(|t| !t.trim().is_empty()) {
                let cat =
                    parse_label_token(tok).map_err(|e| SchemaError::MalformedZCodeMap {
                        line: idx + 1,
                        message: e.to_string(),
                    })?;
                set.insert(cat);
            }
            entries.push((prefix, set));
        }
        Ok(ZCodeMap { entries })
    }

    /// Longest-prefix lookup. Errors when the code does not start with `Z`;
    /// codes absent from the table yield an empty category set with
    /// `matched_prefix: None`.
    pub fn lookup(&self, code: &str) -> Result<ZCodeMatch, SchemaError> {
        let normalized = code.trim().to_ascii_uppercase();
        if !normalized.starts_with('Z') {
            return Err(SchemaError::NotAZCode(code.to_string()));
        }
        let best = self
            .entries
            .iter()
            .filter(|(prefix, _)| normalized.starts_with(prefix.as_str()))
            .max_by_key(|(prefix, _)| prefix.len());
        Ok(match best {
            Some((prefix, cats)) => ZCodeMatch {
                categories: cats.clone(),
                matched_prefix: Some(prefix.clone()),
            },
            None => ZCodeMatch {
                categories: BTreeSet::new(),
                matched_prefix: None,
            },
        })
    }

    /// Map a set of codes for one patient to the union of their categories.
    /// Returns the union plus the list of codes that matched nothing.
    pub fn map_codes<'a, I: IntoIterator<Item = &'a str>>(
        &self,
        codes: I,
    ) -> Result<(BTreeSet<Category>, Vec<String>), SchemaError> {
        let mut union = BTreeSet::new();
        let mut unmapped = Vec::new();
        for code in codes {
            let m = self.lookup(code)?;
            if m.matched_prefix.is_none() {
                unmapped.push(code.to_string());
            }
            union.extend(m.categories);
        }
        Ok((union, unmapped))
    }
}

impl Default for ZCodeMap {
    fn default() -> Self {
        ZCodeMap::shipped()
    }
}

/// Convenience wrapper over [`ZCodeMap::lookup`] with the shipped table.
pub fn map_zcode(code: &str) -> Result<ZCodeMatch, SchemaError> {
    ZCodeMap::shipped().lookup(code)
}
