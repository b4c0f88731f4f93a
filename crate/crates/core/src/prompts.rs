//! Prompt builders for every model call in the pipeline.
//!
//! Templates are plain text with `{{name}}` placeholders. The defaults are
//! embedded in the binary; [`PromptForge::from_dir`] overrides any subset of
//! them from a directory of `<template>.txt` files. Every bundle carries a
//! template id (`name@v1` for embedded text, `name@custom-<hash>` otherwise)
//! so transcripts stay interpretable after wording changes.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::consistency::FieldDiff;
use crate::schema::{
    emit_structured_json, parse_fdi_tooth, strip_code_fence, Category, CystStructuredData, FindingText, SchemaError,
    ToothSet,
};

const EMBEDDED_VERSION: &str = "v1";
const SYSTEM: &str = "radiologist.system";

/// Template name, embedded text, allowed placeholders.
const TEMPLATES: &[(&str, &str, &[&str])] = &[
    (SYSTEM, include_str!("../templates/radiologist.system.txt"), &[]),
    ("structured_generation", include_str!("../templates/structured_generation.txt"), &["schema_items"]),
    ("tooth_extraction", include_str!("../templates/tooth_extraction.txt"), &[]),
    (
        "tooth_feedback",
        include_str!("../templates/tooth_feedback.txt"),
        &["structured_teeth", "extracted_teeth", "difference", "schema_items"],
    ),
    ("structured_retry", include_str!("../templates/structured_retry.txt"), &["error", "schema_items"]),
    (
        "finding_generation",
        include_str!("../templates/finding_generation.txt"),
        &["structured_json", "language_directive"],
    ),
    ("restructure", include_str!("../templates/restructure.txt"), &["finding", "schema_items"]),
    (
        "finding_feedback",
        include_str!("../templates/finding_feedback.txt"),
        &["issues", "structured_json", "language_directive"],
    ),
    (
        "finding_retry",
        include_str!("../templates/finding_retry.txt"),
        &["error", "structured_json", "language_directive"],
    ),
    ("cot", include_str!("../templates/cot.txt"), &[]),
];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PromptError {
    #[error("template {template}: unknown placeholder {{{{{placeholder}}}}}")]
    UnknownPlaceholder { template: String, placeholder: String },
    #[error("reading template {path}: {reason}")]
    Io { path: String, reason: String },
}

/// What the reply to a prompt should contain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expectation {
    StructuredJson,
    ToothList,
    FindingText,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub template_id: String,
    pub system_text: String,
    pub user_text: String,
    pub expects: Expectation,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Template {
    text: String,
    custom: bool,
}

/// The template set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptForge {
    templates: BTreeMap<&'static str, Template>,
}

impl Default for PromptForge {
    fn default() -> Self {
        let templates = TEMPLATES
            .iter()
            .map(|(name, text, _)| (*name, Template { text: (*text).to_string(), custom: false }))
            .collect();
        PromptForge { templates }
    }
}

impl PromptForge {
    /// Embedded templates, with any `<name>.txt` found in `dir` taking precedence.
    pub fn from_dir(dir: &Path) -> Result<Self, PromptError> {
        let mut forge = PromptForge::default();
        for (name, _, allowed) in TEMPLATES {
            let path = dir.join(format!("{name}.txt"));
            if !path.exists() {
                continue;
            }
            let text = std::fs::read_to_string(&path)
                .map_err(|e| PromptError::Io { path: path.display().to_string(), reason: e.to_string() })?;
            if let Some(unknown) = placeholders(&text).into_iter().find(|p| !allowed.contains(&p.as_str())) {
                return Err(PromptError::UnknownPlaceholder { template: (*name).into(), placeholder: unknown });
            }
            forge.templates.insert(name, Template { text, custom: true });
        }
        Ok(forge)
    }

    /// Bundle template ids, keyed by template name, for run manifests.
    pub fn versions(&self) -> BTreeMap<String, String> {
        TEMPLATES
            .iter()
            .filter(|(name, _, _)| *name != SYSTEM)
            .map(|(name, _, _)| (name.to_string(), self.bundle_id(name)))
            .collect()
    }

    fn bundle_id(&self, name: &str) -> String {
        let system = &self.templates[SYSTEM];
        let user = &self.templates[name];
        if !system.custom && !user.custom {
            return format!("{name}@{EMBEDDED_VERSION}");
        }
        let mut hasher = Sha256::new();
        hasher.update(system.text.as_bytes());
        hasher.update([0]);
        hasher.update(user.text.as_bytes());
        format!("{name}@custom-{}", &hex::encode(hasher.finalize())[..8])
    }

    fn bundle(&self, name: &str, vars: &[(&str, &str)], expects: Expectation) -> PromptBundle {
        PromptBundle {
            template_id: self.bundle_id(name),
            system_text: render(&self.templates[SYSTEM].text, &[]),
            user_text: render(&self.templates[name].text, vars),
            expects,
        }
    }

    /// Initial structured-data request listing every category and its
    /// allowed values.
    pub fn structured_generation_prompt(&self) -> PromptBundle {
        self.bundle("structured_generation", &[("schema_items", &schema_items())], Expectation::StructuredJson)
    }

    pub fn tooth_extraction_prompt(&self) -> PromptBundle {
        self.bundle("tooth_extraction", &[], Expectation::ToothList)
    }

    /// Regeneration request after a tooth-number mismatch. States both sets
    /// and their differences in each direction.
    pub fn tooth_feedback_prompt(&self, structured: &ToothSet, extracted: &ToothSet) -> PromptBundle {
        let vars = [
            ("structured_teeth", structured.join(", ")),
            ("extracted_teeth", extracted.join(", ")),
            ("difference", difference_line(structured, extracted)),
            ("schema_items", schema_items()),
        ];
        self.bundle("tooth_feedback", &borrowed(&vars), Expectation::StructuredJson)
    }

    /// Regeneration request after the structured reply failed to parse.
    pub fn structured_retry_prompt(&self, error: &str) -> PromptBundle {
        let vars = [("error", error.to_string()), ("schema_items", schema_items())];
        self.bundle("structured_retry", &borrowed(&vars), Expectation::StructuredJson)
    }

    pub fn finding_generation_prompt(&self, data: &CystStructuredData, language: &str) -> PromptBundle {
        let vars =
            [("structured_json", emit_structured_json(data)), ("language_directive", language_directive(language))];
        self.bundle("finding_generation", &borrowed(&vars), Expectation::FindingText)
    }

    /// Embeds the finding verbatim and asks for the seven schema items back.
    pub fn restructure_prompt(&self, finding: &FindingText) -> PromptBundle {
        let vars = [("finding", finding.body().to_string()), ("schema_items", schema_items())];
        self.bundle("restructure", &borrowed(&vars), Expectation::StructuredJson)
    }

    /// Finding regeneration with one line per inconsistency.
    ///
    /// # Panics
    /// When `diffs` is empty.
    pub fn finding_feedback_prompt(
        &self,
        data: &CystStructuredData,
        diffs: &[FieldDiff],
        language: &str,
    ) -> PromptBundle {
        assert!(!diffs.is_empty(), "finding feedback requires at least one inconsistency");
        let mut ordered: Vec<&FieldDiff> = diffs.iter().collect();
        ordered.sort_by_key(|d| d.category());
        let issues: Vec<String> = ordered.into_iter().map(|d| format!("- {}", describe_diff(d))).collect();
        let vars = [
            ("issues", issues.join("\n")),
            ("structured_json", emit_structured_json(data)),
            ("language_directive", language_directive(language)),
        ];
        self.bundle("finding_feedback", &borrowed(&vars), Expectation::FindingText)
    }

    /// Finding regeneration after the restructured reply failed to parse.
    pub fn finding_retry_prompt(&self, data: &CystStructuredData, error: &str, language: &str) -> PromptBundle {
        let vars = [
            ("error", error.to_string()),
            ("structured_json", emit_structured_json(data)),
            ("language_directive", language_directive(language)),
        ];
        self.bundle("finding_retry", &borrowed(&vars), Expectation::FindingText)
    }

    /// Single-prompt stepwise baseline.
    pub fn cot_prompt(&self) -> PromptBundle {
        self.bundle("cot", &[], Expectation::FindingText)
    }
}

fn borrowed<'a>(vars: &'a [(&'a str, String)]) -> Vec<(&'a str, &'a str)> {
    vars.iter().map(|(k, v)| (*k, v.as_str())).collect()
}

fn render(template: &str, vars: &[(&str, &str)]) -> String {
    let mut out = template.trim_end().to_string();
    for (key, value) in vars {
        out = out.replace(&format!("{{{{{key}}}}}"), value);
    }
    out
}

fn placeholders(text: &str) -> Vec<String> {
    let mut found = Vec::new();
    let mut rest = text;
    while let Some(start) = rest.find("{{") {
        let after = &rest[start + 2..];
        let Some(end) = after.find("}}") else { break };
        found.push(after[..end].trim().to_string());
        rest = &after[end + 2..];
    }
    found
}

/// One line per category with its allowed values, generated from the
/// schema vocabulary.
pub fn schema_items() -> String {
    let mut lines = Vec::new();
    for category in Category::ALL {
        let line = match category {
            Category::AffectedTeeth => format!(
                "- \"{}\" ({}): list of FDI tooth numbers as two-digit strings, for example [\"33\", \"34\"]",
                category.key(),
                category.label()
            ),
            Category::AnatomicalRelation => format!(
                "- \"{}\" ({} to the mandibular canal / maxillary sinus): {}",
                category.key(),
                category.label(),
                quoted_alternatives(category.vocabulary())
            ),
            _ => format!(
                "- \"{}\" ({}): {}",
                category.key(),
                category.label(),
                quoted_alternatives(category.vocabulary())
            ),
        };
        lines.push(line);
    }
    lines.join("\n")
}

fn quoted_alternatives(values: &[&str]) -> String {
    let quoted: Vec<String> = values.iter().map(|v| format!("\"{v}\"")).collect();
    match quoted.as_slice() {
        [] => String::new(),
        [one] => one.clone(),
        [a, b] => format!("{a} or {b}"),
        [init @ .., last] => format!("{}, or {last}", init.join(", ")),
    }
}

/// "11", "31 and 32", "11, 12, and 13".
fn list_phrase(teeth: &ToothSet) -> String {
    let items = teeth.to_strings();
    match items.as_slice() {
        [] => String::new(),
        [one] => one.clone(),
        [a, b] => format!("{a} and {b}"),
        [init @ .., last] => format!("{}, and {last}", init.join(", ")),
    }
}

fn numbers_clause(teeth: &ToothSet, singular: &str, plural: &str) -> String {
    if teeth.len() == 1 {
        format!("Number {} {singular}", list_phrase(teeth))
    } else {
        format!("Numbers {} {plural}", list_phrase(teeth))
    }
}

fn difference_line(structured: &ToothSet, extracted: &ToothSet) -> String {
    let missing = extracted.difference(structured);
    let extra = structured.difference(extracted);
    let mut sentences = Vec::new();
    if !missing.is_empty() {
        sentences.push(numbers_clause(
            &missing,
            "is not included in the structured data.",
            "are not included in the structured data.",
        ));
    }
    if !extra.is_empty() {
        sentences.push(numbers_clause(
            &extra,
            "is not among the teeth extracted from the image.",
            "are not among the teeth extracted from the image.",
        ));
    }
    if structured.is_empty() {
        sentences.push("The structured data lists no affected teeth.".into());
    }
    if sentences.is_empty() {
        sentences.push("The tooth numbers could not be confirmed.".into());
    }
    sentences.join(" ")
}

fn describe_diff(diff: &FieldDiff) -> String {
    match diff {
        FieldDiff::Value { category, expected, found } => format!(
            "The {} description differs from the structured data (expected {expected}, found {found}).",
            category.label()
        ),
        FieldDiff::MissingTooth { tooth } => format!("The tooth number {tooth} is missing."),
        FieldDiff::SurplusTooth { tooth } => format!("The tooth number {tooth} is not in the structured data."),
    }
}

fn language_directive(tag: &str) -> String {
    let primary = tag.split(['-', '_']).next().unwrap_or(tag).to_lowercase();
    match primary.as_str() {
        "en" => "Write the finding in English.".into(),
        "ja" => "Write the finding in natural Japanese medical language.".into(),
        _ => format!("Write the finding in the language with IETF tag \"{tag}\"."),
    }
}

/// Parses a tooth-extraction reply: comma/whitespace separated FDI numbers,
/// optionally bracketed or quoted; "none" yields the empty set.
pub fn parse_tooth_list(text: &str) -> Result<ToothSet, SchemaError> {
    let body = strip_code_fence(text).trim();
    if body.eq_ignore_ascii_case("none") || body.is_empty() {
        return Ok(ToothSet::new());
    }
    let mut teeth = ToothSet::new();
    for raw in body.split(|c: char| c == ',' || c == ';' || c.is_whitespace()) {
        let token = raw.trim_matches(|c: char| matches!(c, '[' | ']' | '"' | '\'' | '.' | '(' | ')'));
        if token.is_empty() || token.eq_ignore_ascii_case("and") {
            continue;
        }
        teeth.insert(parse_fdi_tooth(token)?);
    }
    Ok(teeth)
}
