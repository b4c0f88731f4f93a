//! Records and scripts transcribed from the published case tables.
#![allow(dead_code)]

use slso_core::backend::{CaseScript, ImagePayload, StepKind};
use slso_core::orchestrator::CaseInput;
use slso_core::schema::{parse_structured_json, CystStructuredData};

/// Successful case: SLSO output, also the truth labels (scored 1.00).
pub const SUCCESS_SLSO: &str = r#"{
  "radiolucency": "radiolucent",
  "internal_structure": "unilocular",
  "boundary": "well-defined",
  "root_resorption": "no",
  "tooth_displacement": "no",
  "anatomical_relation": "contact",
  "affected_teeth": ["47", "48"]
}"#;

pub const SUCCESS_SLSO_FINDING: &str = "A radiolucent lesion is confirmed around teeth #47 and #48 on the right side of the mandible. The internal structure of the lesion is unilocular, with well-defined and round borders. These characteristics suggest a lesion with high probability of being a cyst. Although the lesion is adjacent to the inferior alveolar nerve canal, no pathological effects such as root resorption or tooth displacement are observed, and no cortical bone expansion is seen. Additionally, no association with the maxillary sinus is identified.";

/// Failure case truth labels: canine to canine, mild resorption, relation
/// to the nasal floor read as displacement.
pub const FAILURE_TRUTH: &str = r#"{
  "radiolucency": "radiolucent",
  "internal_structure": "unilocular",
  "boundary": "well-defined",
  "root_resorption": "mild",
  "tooth_displacement": "mild",
  "anatomical_relation": "displacement",
  "affected_teeth": ["11", "12", "13", "21", "22", "23"]
}"#;

pub const FAILURE_SLSO: &str = r#"{
  "radiolucency": "radiolucent",
  "internal_structure": "unilocular",
  "boundary": "well-defined",
  "root_resorption": "no",
  "tooth_displacement": "no",
  "anatomical_relation": "none",
  "affected_teeth": ["11", "12"]
}"#;

pub const FAILURE_SLSO_FINDING: &str = "A radiolucent lesion is observed around teeth #11 and #12 in the maxillary anterior region. The internal structure is unilocular, presenting a well-defined, round morphology. Based on these radiological findings, it is judged to have a high probability of being a cystic lesion. Regarding this lesion, no effects such as root resorption, tooth movement, or cortical bone expansion were observed. Additionally, no relationship with the inferior alveolar canal or maxillary sinus is identified.";

/// Restructured baseline output for the failure case.
pub const FAILURE_COT: &str = r#"{
  "radiolucency": "radiolucent",
  "internal_structure": "unilocular",
  "boundary": "well-defined",
  "root_resorption": "no",
  "tooth_displacement": "mild",
  "anatomical_relation": "none",
  "affected_teeth": ["21"]
}"#;

pub const FAILURE_COT_TEXT: &str = "Step 1: Internal structure - The observed lesion shows radiolucency compared to surrounding structures, with high X-ray transparency. The morphology is unilocular, presenting a uniform radiolucent appearance.\nStep 2: Lesion characteristics - The lesion boundary is well-defined, with a round to oval shape. Such findings suggest a suspected cyst (likely cyst).\nStep 3: Effects on surrounding anatomical structures - No root resorption is observed in adjacent teeth (none). Tooth movement is none to mild, with possible slight mobility particularly around tooth #21. No cortical bone expansion is observed (false).\nStep 4: Relationship with anatomical structures - The lesion has no relationship with the inferior alveolar canal or maxillary sinus (unrelated).\nStep 5: Involved tooth numbers (FDI system) - The lesion is located around tooth #21, with possible mild extension to teeth #11 and #22, but structural involvement is minimal. Therefore, the involved FDI tooth number is #21.";

pub fn record(json: &str) -> CystStructuredData {
    parse_structured_json(json).expect("fixture record is valid")
}

pub fn input(case_id: &str) -> CaseInput {
    CaseInput {
        case_id: case_id.into(),
        image: ImagePayload { bytes: b"\x89PNG\r\n\x1a\nfixture".to_vec(), media_type: "image/png".into() },
        language: "en".into(),
    }
}

/// A script that resolves on the first pass of both stages.
pub fn faithful(record_json: &str, extraction: &str, finding: &str) -> CaseScript {
    CaseScript::new()
        .with(StepKind::StructuredGeneration, [record_json])
        .with(StepKind::ToothExtraction, [extraction])
        .with(StepKind::FindingGeneration, [finding])
        .with(StepKind::Restructure, [record_json])
}
