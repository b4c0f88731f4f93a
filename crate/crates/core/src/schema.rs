//! Interpretation schema for jaw-cyst radiographs.
//!
//! Seven categories, each constrained to a fixed vocabulary, plus the set of
//! affected teeth in FDI notation. [`emit_structured_json`] is the canonical,
//! byte-stable serialization used for ground-truth files and run outputs;
//! [`parse_structured_json`] is its validating inverse.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde_json::Value;
use thiserror::Error;

/// Errors raised while parsing teeth or structured records.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SchemaError {
    #[error("invalid FDI tooth number: {0:?}")]
    InvalidFdi(String),
    #[error("malformed JSON: {0}")]
    MalformedJson(String),
    #[error("unknown field: {0}")]
    UnknownField(String),
    #[error("missing field: {0}")]
    MissingField(String),
    #[error("invalid value for {field}: {value:?}")]
    InvalidValue { field: String, value: String },
    #[error("affected_teeth must not be empty")]
    EmptyToothList,
}

macro_rules! vocabulary {
    ($(#[$meta:meta])* $name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }

            /// Exact (already case-folded) vocabulary lookup.
            pub fn from_vocab(text: &str) -> Option<Self> {
                match text {
                    $($text => Some($name::$variant),)+
                    _ => None,
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }
    };
}

vocabulary!(
    /// X-ray transparency of the lesion.
    Radiolucency { Radiolucent => "radiolucent", Radiopaque => "radiopaque" }
);
vocabulary!(InternalStructure { Unilocular => "unilocular", Multilocular => "multilocular" });
vocabulary!(Boundary { WellDefined => "well-defined", IllDefined => "ill-defined" });
vocabulary!(
    /// Shared grading for root resorption and tooth displacement.
    Severity { No => "no", Mild => "mild", Severe => "severe" }
);
vocabulary!(
    /// Relation to the mandibular canal / maxillary sinus. `None` states a
    /// negative finding explicitly.
    AnatomicalRelation {
        None => "none",
        Contact => "contact",
        Displacement => "displacement",
        Invasion => "invasion",
    }
);

/// The seven schema categories, in canonical key order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Category {
    Radiolucency,
    InternalStructure,
    Boundary,
    RootResorption,
    ToothDisplacement,
    AnatomicalRelation,
    AffectedTeeth,
}

impl Category {
    pub const ALL: [Category; 7] = [
        Category::Radiolucency,
        Category::InternalStructure,
        Category::Boundary,
        Category::RootResorption,
        Category::ToothDisplacement,
        Category::AnatomicalRelation,
        Category::AffectedTeeth,
    ];

    /// JSON key.
    pub fn key(self) -> &'static str {
        match self {
            Category::Radiolucency => "radiolucency",
            Category::InternalStructure => "internal_structure",
            Category::Boundary => "boundary",
            Category::RootResorption => "root_resorption",
            Category::ToothDisplacement => "tooth_displacement",
            Category::AnatomicalRelation => "anatomical_relation",
            Category::AffectedTeeth => "affected_teeth",
        }
    }

    /// Human-readable name used in prompts and reports.
    pub fn label(self) -> &'static str {
        match self {
            Category::Radiolucency => "radiolucency",
            Category::InternalStructure => "internal structure",
            Category::Boundary => "boundary",
            Category::RootResorption => "root resorption",
            Category::ToothDisplacement => "tooth displacement",
            Category::AnatomicalRelation => "anatomical relationship",
            Category::AffectedTeeth => "affected tooth number",
        }
    }

    pub fn from_key(key: &str) -> Option<Category> {
        Category::ALL.into_iter().find(|c| c.key() == key)
    }

    /// Allowed values; empty for `AffectedTeeth`, which is open-ended FDI.
    pub fn vocabulary(self) -> &'static [&'static str] {
        match self {
            Category::Radiolucency => &["radiolucent", "radiopaque"],
            Category::InternalStructure => &["unilocular", "multilocular"],
            Category::Boundary => &["well-defined", "ill-defined"],
            Category::RootResorption | Category::ToothDisplacement => &["no", "mild", "severe"],
            Category::AnatomicalRelation => &["none", "contact", "displacement", "invasion"],
            Category::AffectedTeeth => &[],
        }
    }

    /// The six categories with a closed vocabulary.
    pub fn enumerated() -> impl Iterator<Item = Category> {
        Category::ALL.into_iter().filter(|c| *c != Category::AffectedTeeth)
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl serde::Serialize for Category {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.key())
    }
}

impl<'de> serde::Deserialize<'de> for Category {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let key = String::deserialize(deserializer)?;
        Category::from_key(&key).ok_or_else(|| serde::de::Error::custom(format!("unknown category {key:?}")))
    }
}

/// A permanent tooth in FDI two-digit notation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FdiTooth {
    quadrant: u8,
    position: u8,
}

impl FdiTooth {
    pub fn new(quadrant: u8, position: u8) -> Result<Self, SchemaError> {
        if (1..=4).contains(&quadrant) && (1..=8).contains(&position) {
            Ok(FdiTooth { quadrant, position })
        } else {
            Err(SchemaError::InvalidFdi(format!("{quadrant}{position}")))
        }
    }

    pub fn quadrant(self) -> u8 {
        self.quadrant
    }

    pub fn position(self) -> u8 {
        self.position
    }

    /// Two-digit number, e.g. 47.
    pub fn number(self) -> u8 {
        self.quadrant * 10 + self.position
    }

    /// All 32 permanent teeth in ascending order.
    pub fn all() -> impl Iterator<Item = FdiTooth> {
        (1..=4u8).flat_map(|q| (1..=8u8).map(move |p| FdiTooth { quadrant: q, position: p }))
    }
}

impl fmt::Display for FdiTooth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.quadrant, self.position)
    }
}

impl FromStr for FdiTooth {
    type Err = SchemaError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_fdi_tooth(s)
    }
}

impl serde::Serialize for FdiTooth {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> serde::Deserialize<'de> for FdiTooth {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let token = String::deserialize(deserializer)?;
        parse_fdi_tooth(&token).map_err(serde::de::Error::custom)
    }
}

/// Parses a two-digit FDI token, optionally prefixed with `#` ("#47").
pub fn parse_fdi_tooth(token: &str) -> Result<FdiTooth, SchemaError> {
    let invalid = || SchemaError::InvalidFdi(token.to_string());
    let digits = token.strip_prefix('#').unwrap_or(token);
    let bytes = digits.as_bytes();
    if bytes.len() != 2 || !bytes.iter().all(u8::is_ascii_digit) {
        return Err(invalid());
    }
    FdiTooth::new(bytes[0] - b'0', bytes[1] - b'0').map_err(|_| invalid())
}

/// Deduplicated set of teeth, always iterated in ascending order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
#[serde(transparent)]
pub struct ToothSet(BTreeSet<FdiTooth>);

impl ToothSet {
    pub fn new() -> Self {
        ToothSet(BTreeSet::new())
    }

    pub fn insert(&mut self, tooth: FdiTooth) -> bool {
        self.0.insert(tooth)
    }

    pub fn remove(&mut self, tooth: &FdiTooth) -> bool {
        self.0.remove(tooth)
    }

    pub fn contains(&self, tooth: &FdiTooth) -> bool {
        self.0.contains(tooth)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = FdiTooth> + '_ {
        self.0.iter().copied()
    }

    pub fn is_subset(&self, other: &ToothSet) -> bool {
        self.0.is_subset(&other.0)
    }

    /// Teeth in `self` but not in `other`.
    pub fn difference(&self, other: &ToothSet) -> ToothSet {
        ToothSet(self.0.difference(&other.0).copied().collect())
    }

    /// Parses a list of FDI tokens.
    pub fn parse<'a>(tokens: impl IntoIterator<Item = &'a str>) -> Result<ToothSet, SchemaError> {
        tokens.into_iter().map(parse_fdi_tooth).collect()
    }

    /// Canonical two-digit strings, ascending.
    pub fn to_strings(&self) -> Vec<String> {
        self.iter().map(|t| t.to_string()).collect()
    }

    /// "33, 34, 35" rendering used in prompts.
    pub fn join(&self, sep: &str) -> String {
        self.to_strings().join(sep)
    }
}

impl FromIterator<FdiTooth> for ToothSet {
    fn from_iter<I: IntoIterator<Item = FdiTooth>>(iter: I) -> Self {
        ToothSet(iter.into_iter().collect())
    }
}

impl<'a> IntoIterator for &'a ToothSet {
    type Item = &'a FdiTooth;
    type IntoIter = std::collections::btree_set::Iter<'a, FdiTooth>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

impl fmt::Display for ToothSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}}}", self.join(","))
    }
}

/// One fully validated interpretation record.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CystStructuredData {
    pub radiolucency: Radiolucency,
    pub internal_structure: InternalStructure,
    pub boundary: Boundary,
    pub root_resorption: Severity,
    pub tooth_displacement: Severity,
    pub anatomical_relation: AnatomicalRelation,
    affected_teeth: ToothSet,
}

impl CystStructuredData {
    pub fn new(
        radiolucency: Radiolucency,
        internal_structure: InternalStructure,
        boundary: Boundary,
        root_resorption: Severity,
        tooth_displacement: Severity,
        anatomical_relation: AnatomicalRelation,
        affected_teeth: ToothSet,
    ) -> Result<Self, SchemaError> {
        if affected_teeth.is_empty() {
            return Err(SchemaError::EmptyToothList);
        }
        Ok(CystStructuredData {
            radiolucency,
            internal_structure,
            boundary,
            root_resorption,
            tooth_displacement,
            anatomical_relation,
            affected_teeth,
        })
    }

    pub fn affected_teeth(&self) -> &ToothSet {
        &self.affected_teeth
    }

    /// Replaces the tooth set, keeping the non-empty invariant.
    pub fn with_teeth(&self, teeth: ToothSet) -> Result<Self, SchemaError> {
        if teeth.is_empty() {
            return Err(SchemaError::EmptyToothList);
        }
        Ok(CystStructuredData { affected_teeth: teeth, ..self.clone() })
    }

    /// Vocabulary string of an enumerated category; `None` for `AffectedTeeth`.
    pub fn value_of(&self, category: Category) -> Option<&'static str> {
        Some(match category {
            Category::Radiolucency => self.radiolucency.as_str(),
            Category::InternalStructure => self.internal_structure.as_str(),
            Category::Boundary => self.boundary.as_str(),
            Category::RootResorption => self.root_resorption.as_str(),
            Category::ToothDisplacement => self.tooth_displacement.as_str(),
            Category::AnatomicalRelation => self.anatomical_relation.as_str(),
            Category::AffectedTeeth => return None,
        })
    }

    /// Returns a copy with one enumerated category set from a vocabulary string.
    pub fn with_value(&self, category: Category, value: &str) -> Result<Self, SchemaError> {
        let invalid = || SchemaError::InvalidValue { field: category.key().to_string(), value: value.to_string() };
        let mut out = self.clone();
        match category {
            Category::Radiolucency => out.radiolucency = Radiolucency::from_vocab(value).ok_or_else(invalid)?,
            Category::InternalStructure => {
                out.internal_structure = InternalStructure::from_vocab(value).ok_or_else(invalid)?
            }
            Category::Boundary => out.boundary = Boundary::from_vocab(value).ok_or_else(invalid)?,
            Category::RootResorption => out.root_resorption = Severity::from_vocab(value).ok_or_else(invalid)?,
            Category::ToothDisplacement => out.tooth_displacement = Severity::from_vocab(value).ok_or_else(invalid)?,
            Category::AnatomicalRelation => {
                out.anatomical_relation = AnatomicalRelation::from_vocab(value).ok_or_else(invalid)?
            }
            Category::AffectedTeeth => return Err(invalid()),
        }
        Ok(out)
    }
}

/// Generated or reference finding prose.
#[derive(Debug, Clone, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct FindingText {
    body: String,
    language: String,
}

impl FindingText {
    /// Trims the body and terminates it with a period when the last sentence
    /// lacks terminal punctuation. Returns `None` for an empty body.
    pub fn new(body: &str, language: &str) -> Option<FindingText> {
        let trimmed = body.trim();
        if trimmed.is_empty() {
            return None;
        }
        let mut body = trimmed.to_string();
        if !body.ends_with(['.', '。', '!', '?']) {
            body.push(if language.starts_with("ja") { '。' } else { '.' });
        }
        Some(FindingText { body, language: language.to_string() })
    }

    pub fn body(&self) -> &str {
        &self.body
    }

    pub fn language(&self) -> &str {
        &self.language
    }
}

impl fmt::Display for FindingText {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.body)
    }
}

/// Canonical serialization: fixed key order, two-space indentation, teeth
/// ascending as strings on one line. Byte-stable for equal records.
pub fn emit_structured_json(data: &CystStructuredData) -> String {
    let mut out = String::from("{\n");
    for category in Category::enumerated() {
        let value = data.value_of(category).unwrap_or_default();
        out.push_str(&format!("  \"{}\": \"{}\",\n", category.key(), value));
    }
    let teeth: Vec<String> = data.affected_teeth.iter().map(|t| format!("\"{t}\"")).collect();
    out.push_str(&format!("  \"affected_teeth\": [{}]\n}}", teeth.join(", ")));
    out
}

/// Strict parse: values must be vocabulary members after case folding.
pub fn parse_structured_json(text: &str) -> Result<CystStructuredData, SchemaError> {
    parse_structured_json_with(text, |_, _| None)
}

/// Parse with a fallback mapper for values outside the vocabulary. The
/// mapper receives the category and the case-folded surface form and may
/// return a canonical vocabulary value.
pub fn parse_structured_json_with<F>(text: &str, mut normalize: F) -> Result<CystStructuredData, SchemaError>
where
    F: FnMut(Category, &str) -> Option<String>,
{
    let body = strip_code_fence(text);
    let value: Value = serde_json::from_str(body).map_err(|e| SchemaError::MalformedJson(e.to_string()))?;
    let Value::Object(map) = value else {
        return Err(SchemaError::MalformedJson("top-level value is not an object".into()));
    };
    if let Some(unknown) = map.keys().find(|k| Category::from_key(k).is_none()) {
        return Err(SchemaError::UnknownField(unknown.clone()));
    }

    let mut enumerated: Vec<String> = Vec::with_capacity(6);
    for category in Category::enumerated() {
        let raw = map.get(category.key()).ok_or_else(|| SchemaError::MissingField(category.key().into()))?;
        let invalid = || SchemaError::InvalidValue {
            field: category.key().to_string(),
            value: raw.as_str().map(str::to_string).unwrap_or_else(|| raw.to_string()),
        };
        let folded = raw.as_str().ok_or_else(invalid)?.trim().to_lowercase();
        let canonical = if category.vocabulary().contains(&folded.as_str()) {
            folded
        } else {
            normalize(category, &folded).filter(|v| category.vocabulary().contains(&v.as_str())).ok_or_else(invalid)?
        };
        enumerated.push(canonical);
    }

    let raw_teeth = map
        .get(Category::AffectedTeeth.key())
        .ok_or_else(|| SchemaError::MissingField(Category::AffectedTeeth.key().into()))?;
    let teeth_invalid =
        || SchemaError::InvalidValue { field: Category::AffectedTeeth.key().to_string(), value: raw_teeth.to_string() };
    let items = raw_teeth.as_array().ok_or_else(teeth_invalid)?;
    let mut teeth = ToothSet::new();
    for item in items {
        let token = match item {
            Value::String(s) => s.trim().to_string(),
            Value::Number(n) => n.to_string(),
            _ => return Err(teeth_invalid()),
        };
        teeth.insert(parse_fdi_tooth(&token)?);
    }

    let pick = |i: usize| enumerated[i].as_str();
    CystStructuredData::new(
        Radiolucency::from_vocab(pick(0)).expect("vocabulary checked"),
        InternalStructure::from_vocab(pick(1)).expect("vocabulary checked"),
        Boundary::from_vocab(pick(2)).expect("vocabulary checked"),
        Severity::from_vocab(pick(3)).expect("vocabulary checked"),
        Severity::from_vocab(pick(4)).expect("vocabulary checked"),
        AnatomicalRelation::from_vocab(pick(5)).expect("vocabulary checked"),
        teeth,
    )
}

/// Removes a surrounding Markdown code fence and any prose outside the
/// outermost JSON object.
pub fn strip_code_fence(text: &str) -> &str {
    let mut s = text.trim();
    if let Some(rest) = s.strip_prefix("```") {
        let rest = rest.split_once('\n').map(|(_, r)| r).unwrap_or("");
        s = rest.trim_end().strip_suffix("```").unwrap_or(rest).trim();
    }
    if !s.starts_with('{') {
        if let (Some(start), Some(end)) = (s.find('{'), s.rfind('}')) {
            if start < end {
                s = &s[start..=end];
            }
        }
    }
    s
}
