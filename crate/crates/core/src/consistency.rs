//! Consistency checks between pipeline artifacts.
//!
//! Stage 1 compares the teeth named in structured data with the teeth read
//! directly off the image. Stage 2 compares approved structured data with
//! the record re-extracted from the generated finding.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::schema::{parse_structured_json_with, Category, CystStructuredData, FdiTooth, SchemaError, ToothSet};

const DEFAULT_SYNONYMS: &str = include_str!("../data/synonyms.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ToothStatus {
    Match,
    Mismatch,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ToothVerdict {
    pub status: ToothStatus,
    /// Extracted from the image but absent from the structured data.
    pub missing_from_structured: ToothSet,
    /// Named in the structured data but not extracted from the image.
    pub extra_in_structured: ToothSet,
}

impl ToothVerdict {
    pub fn is_match(&self) -> bool {
        self.status == ToothStatus::Match
    }
}

/// Match iff the structured teeth are non-empty and all of them were also
/// extracted from the image. Extracted teeth the structured data leaves out
/// are reported but do not by themselves cause a mismatch.
pub fn check_tooth_consistency(structured: &ToothSet, extracted: &ToothSet) -> ToothVerdict {
    let missing_from_structured = extracted.difference(structured);
    let extra_in_structured = structured.difference(extracted);
    let status = if !structured.is_empty() && extra_in_structured.is_empty() {
        ToothStatus::Match
    } else {
        ToothStatus::Mismatch
    };
    ToothVerdict { status, missing_from_structured, extra_in_structured }
}

/// One disagreement between approved and restructured data.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FieldDiff {
    Value {
        category: Category,
        expected: String,
        found: String,
    },
    /// In the approved data, absent from the restructured record.
    MissingTooth {
        tooth: FdiTooth,
    },
    /// In the restructured record, absent from the approved data.
    SurplusTooth {
        tooth: FdiTooth,
    },
}

impl FieldDiff {
    pub fn category(&self) -> Category {
        match self {
            FieldDiff::Value { category, .. } => *category,
            FieldDiff::MissingTooth { .. } | FieldDiff::SurplusTooth { .. } => Category::AffectedTeeth,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoundTripStatus {
    Consistent,
    Inconsistent,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoundTripVerdict {
    pub status: RoundTripStatus,
    pub diffs: Vec<FieldDiff>,
}

impl RoundTripVerdict {
    pub fn is_consistent(&self) -> bool {
        self.status == RoundTripStatus::Consistent
    }
}

/// Field-by-field comparison in canonical category order; teeth compared as
/// sets, one diff per missing tooth then one per surplus tooth, ascending.
///
/// Both records are already canonical: synonyms are folded when the
/// restructured text is parsed (see [`SynonymTable::parse_lenient`]).
pub fn check_roundtrip(original: &CystStructuredData, restructured: &CystStructuredData) -> RoundTripVerdict {
    let mut diffs = Vec::new();
    for category in Category::enumerated() {
        let expected = original.value_of(category).expect("enumerated category");
        let found = restructured.value_of(category).expect("enumerated category");
        if expected != found {
            diffs.push(FieldDiff::Value { category, expected: expected.into(), found: found.into() });
        }
    }
    let approved = original.affected_teeth();
    let reread = restructured.affected_teeth();
    diffs.extend(approved.difference(reread).iter().map(|tooth| FieldDiff::MissingTooth { tooth }));
    diffs.extend(reread.difference(approved).iter().map(|tooth| FieldDiff::SurplusTooth { tooth }));

    let status = if diffs.is_empty() { RoundTripStatus::Consistent } else { RoundTripStatus::Inconsistent };
    RoundTripVerdict { status, diffs }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SynonymError {
    #[error("no canonical {category} value for {raw:?}")]
    UnmappableValue { category: Category, raw: String },
    #[error("synonym table line {line}: {reason}")]
    BadLine { line: usize, reason: String },
    #[error("reading synonym table: {0}")]
    Io(String),
}

/// Table-driven mapping of surface forms onto vocabulary values.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynonymTable {
    id: String,
    entries: HashMap<(Category, String), &'static str>,
}

impl Default for SynonymTable {
    fn default() -> Self {
        let mut table = Self::parse(DEFAULT_SYNONYMS).expect("embedded synonym table is valid");
        table.id = "synonyms@v1".into();
        table
    }
}

impl SynonymTable {
    /// Parses `category | surface form | canonical value` lines.
    pub fn parse(text: &str) -> Result<Self, SynonymError> {
        let mut entries = HashMap::new();
        for (idx, raw_line) in text.lines().enumerate() {
            let line = raw_line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |reason: String| SynonymError::BadLine { line: idx + 1, reason };
            let parts: Vec<&str> = line.split('|').map(str::trim).collect();
            let [category, surface, canonical] = parts[..] else {
                return Err(bad(format!("expected 3 fields, found {}", parts.len())));
            };
            let category = Category::from_key(category)
                .filter(|c| *c != Category::AffectedTeeth)
                .ok_or_else(|| bad(format!("unknown category {category:?}")))?;
            let canonical = category
                .vocabulary()
                .iter()
                .find(|v| **v == canonical)
                .ok_or_else(|| bad(format!("{canonical:?} is not a {category} value")))?;
            if surface.is_empty() {
                return Err(bad("empty surface form".into()));
            }
            entries.insert((category, surface.to_lowercase()), *canonical);
        }
        let digest = Sha256::digest(text.as_bytes());
        Ok(SynonymTable { id: format!("synonyms@custom-{}", &hex::encode(digest)[..8]), entries })
    }

    pub fn load(path: &Path) -> Result<Self, SynonymError> {
        let text = std::fs::read_to_string(path).map_err(|e| SynonymError::Io(e.to_string()))?;
        Self::parse(&text)
    }

    /// Version id recorded in run manifests.
    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Vocabulary members map to themselves; configured surface forms map to
    /// their canonical value; anything else is an error.
    pub fn normalize_value(&self, category: Category, raw: &str) -> Result<&'static str, SynonymError> {
        let folded = raw.trim().to_lowercase();
        if let Some(member) = category.vocabulary().iter().find(|v| **v == folded) {
            return Ok(member);
        }
        self.entries
            .get(&(category, folded))
            .copied()
            .ok_or_else(|| SynonymError::UnmappableValue { category, raw: raw.to_string() })
    }

    /// Parses structured JSON, folding synonyms before vocabulary matching.
    pub fn parse_lenient(&self, text: &str) -> Result<CystStructuredData, SchemaError> {
        parse_structured_json_with(text, |category, raw| self.normalize_value(category, raw).ok().map(str::to_string))
    }
}

/// Hex SHA-256 of the canonical serialization.
pub fn structured_hash(data: &CystStructuredData) -> String {
    hex::encode(Sha256::digest(crate::schema::emit_structured_json(data).as_bytes()))
}
