//! Synthetic corpora and mock scripts for end-to-end runs.
#![allow(dead_code)]

use std::path::{Path, PathBuf};

use slso_core::backend::{CaseScript, MockScript, StepKind};
use slso_core::schema::{emit_structured_json, parse_structured_json, Category, CystStructuredData, ToothSet};

/// Correct-answer counts per category over 22 cases, report order:
/// radiolucency, internal structure, boundary, root resorption, tooth
/// displacement, relationship, tooth number.
pub const COT_COUNTS: [usize; 7] = [22, 20, 19, 7, 6, 11, 3];
pub const SLSO_COUNTS: [usize; 7] = [22, 20, 19, 9, 8, 12, 5];
pub const N_CASES: usize = 22;

pub fn case_id(i: usize) -> String {
    format!("cases_{:03}", i + 1)
}

/// Ground truth of case `i`; teeth vary so that set equality is exercised.
pub fn truth(i: usize) -> CystStructuredData {
    let base = parse_structured_json(
        r#"{"radiolucency":"radiolucent","internal_structure":"unilocular","boundary":"well-defined",
            "root_resorption":"no","tooth_displacement":"mild","anatomical_relation":"contact","affected_teeth":["36"]}"#,
    )
    .unwrap();
    let quadrant = 1 + i % 4;
    let first = 1 + i % 6;
    let teeth =
        ToothSet::parse([format!("{quadrant}{first}"), format!("{quadrant}{}", first + 1)].iter().map(String::as_str))
            .unwrap();
    base.with_teeth(teeth).unwrap()
}

/// `truth` with every category whose bit is 0 replaced by a wrong value.
pub fn output_with_bits(truth: &CystStructuredData, bits: [bool; 7]) -> CystStructuredData {
    let mut out = truth.clone();
    for (category, correct) in Category::ALL.into_iter().zip(bits) {
        if correct {
            continue;
        }
        out = match category {
            Category::AffectedTeeth => {
                let mut teeth = truth.affected_teeth().clone();
                let extra = if teeth.contains(&"48".parse().unwrap()) { "38" } else { "48" };
                teeth.insert(extra.parse().unwrap());
                out.with_teeth(teeth).unwrap()
            }
            other => {
                let current = truth.value_of(other).unwrap();
                let wrong = other.vocabulary().iter().find(|v| **v != current).unwrap();
                out.with_value(other, wrong).unwrap()
            }
        };
    }
    out
}

pub fn bits_for(i: usize, counts: &[usize; 7]) -> [bool; 7] {
    std::array::from_fn(|c| i < counts[c])
}

/// SLSO script that resolves on the first pass with `record`.
pub fn slso_case_script(record: &CystStructuredData) -> CaseScript {
    let json = emit_structured_json(record);
    let finding =
        format!("A radiolucent lesion is observed involving teeth {}.", record.affected_teeth().join(" and "));
    CaseScript::new()
        .with(StepKind::StructuredGeneration, [json.clone()])
        .with(StepKind::ToothExtraction, [record.affected_teeth().join(", ")])
        .with(StepKind::FindingGeneration, [finding])
        .with(StepKind::Restructure, [json])
}

/// Baseline script whose restructured output is `record`.
pub fn cot_case_script(record: &CystStructuredData) -> CaseScript {
    CaseScript::new()
        .with(StepKind::Cot, ["Step 1: Internal structure - the lesion is radiolucent and unilocular."])
        .with(StepKind::Restructure, [emit_structured_json(record)])
}

fn tiny_png(path: &Path) {
    image::GrayImage::from_pixel(4, 4, image::Luma([128])).save_with_format(path, image::ImageFormat::Png).unwrap();
}

pub struct Fixture {
    pub cases: PathBuf,
    pub cot_script: PathBuf,
    pub slso_script: PathBuf,
}

/// Writes `n` case directories (roi.png + truth.json) and one mock script
/// per method whose outputs reproduce the given per-category counts.
pub fn write_corpus(root: &Path, n: usize, cot_counts: &[usize; 7], slso_counts: &[usize; 7]) -> Fixture {
    let cases = root.join("cases");
    let (mut cot_script, mut slso_script) = (MockScript::new(), MockScript::new());
    for i in 0..n {
        let id = case_id(i);
        let dir = cases.join(&id);
        std::fs::create_dir_all(&dir).unwrap();
        tiny_png(&dir.join("roi.png"));
        let t = truth(i);
        std::fs::write(dir.join("truth.json"), emit_structured_json(&t) + "\n").unwrap();
        slso_script =
            slso_script.with_case(id.clone(), slso_case_script(&output_with_bits(&t, bits_for(i, slso_counts))));
        cot_script = cot_script.with_case(id, cot_case_script(&output_with_bits(&t, bits_for(i, cot_counts))));
    }
    let fixture =
        Fixture { cases, cot_script: root.join("cot_script.json"), slso_script: root.join("slso_script.json") };
    std::fs::write(&fixture.cot_script, cot_script.to_json()).unwrap();
    std::fs::write(&fixture.slso_script, slso_script.to_json()).unwrap();
    fixture
}
