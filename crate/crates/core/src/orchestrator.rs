//! The two-stage self-correction loop and the single-prompt baseline.
//!
//! Stage 1 issues structured generation and tooth extraction concurrently,
//! checks tooth consistency, and regenerates both on mismatch. Stage 2
//! writes a finding from the approved record, converts it back into
//! structured data, compares, and regenerates only the finding on
//! disagreement. Every model call lands in an append-only [`LoopTranscript`].

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::backend::{
    BackendError, BackendErrorKind, CaseScript, DecodingParams, ImagePayload, RequestTag, ResponseMode,
    SchemaDescriptor, ScriptEntry, StepKind, VisionBackend, VisionRequest,
};
use crate::consistency::{
    check_roundtrip, check_tooth_consistency, structured_hash, FieldDiff, RoundTripStatus, SynonymTable, ToothStatus,
};
use crate::prompts::{parse_tooth_list, PromptBundle, PromptForge};
use crate::schema::{emit_structured_json, parse_structured_json, CystStructuredData, FindingText, ToothSet};

/// Regeneration limits per stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Caps {
    pub stage1: u32,
    pub stage2: u32,
}

impl Default for Caps {
    fn default() -> Self {
        Caps { stage1: 5, stage2: 3 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Slso,
    Cot,
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "slso" => Ok(Method::Slso),
            "cot" => Ok(Method::Cot),
            other => Err(format!("unknown method {other:?} (expected slso or cot)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CaseInput {
    pub case_id: String,
    pub image: ImagePayload,
    pub language: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Stage1,
    Stage2,
    Baseline,
}

/// Outcome of a consistency check, as recorded in the transcript.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "check", rename_all = "snake_case")]
pub enum Verdict {
    Tooth {
        status: ToothStatus,
        missing_from_structured: ToothSet,
        extra_in_structured: ToothSet,
    },
    RoundTrip {
        status: RoundTripStatus,
        diffs: Vec<FieldDiff>,
    },
    /// The check could not run because a reply failed to parse.
    Unverifiable {
        reason: String,
    },
}

impl Verdict {
    pub fn passed(&self) -> bool {
        matches!(
            self,
            Verdict::Tooth { status: ToothStatus::Match, .. }
                | Verdict::RoundTrip { status: RoundTripStatus::Consistent, .. }
        )
    }
}

/// One model call.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptRecord {
    pub stage: Stage,
    /// 0 for the first attempt of the stage, n for its n-th regeneration.
    pub iteration: u32,
    pub step: StepKind,
    pub template_id: String,
    pub system_text: String,
    pub user_text: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub response: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub backend_error: Option<BackendError>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub parsed: Option<Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub parse_error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verdict: Option<Verdict>,
    /// Hash of the approved structured data; set on every stage-2 record.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub structured_hash: Option<String>,
}

/// Append-only audit of a case run.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoopTranscript {
    pub case_id: String,
    pub records: Vec<TranscriptRecord>,
    pub stage1_regenerations: u32,
    pub stage2_regenerations: u32,
}

impl LoopTranscript {
    pub fn new(case_id: &str) -> Self {
        LoopTranscript { case_id: case_id.to_string(), ..Self::default() }
    }

    fn push(&mut self, record: TranscriptRecord) {
        self.records.push(record);
    }

    /// Regeneration rounds visible in the records of a stage.
    pub fn recorded_regenerations(&self, stage: Stage) -> u32 {
        let step = match stage {
            Stage::Stage1 => StepKind::StructuredGeneration,
            Stage::Stage2 => StepKind::FindingGeneration,
            Stage::Baseline => return 0,
        };
        self.records.iter().filter(|r| r.stage == stage && r.step == step && r.iteration > 0).count() as u32
    }

    pub fn records_for(&self, stage: Stage) -> impl Iterator<Item = &TranscriptRecord> {
        self.records.iter().filter(move |r| r.stage == stage)
    }

    /// Replies in call order per step kind, suitable for a replay mock.
    pub fn to_case_script(&self) -> CaseScript {
        let mut script = CaseScript::new();
        for record in &self.records {
            let entry = match (&record.response, &record.backend_error) {
                (Some(text), _) => ScriptEntry::Text(text.clone()),
                (None, Some(err)) => ScriptEntry::error(err),
                (None, None) => continue,
            };
            script.push(record.step, entry);
        }
        script
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaseStatus {
    Resolved,
    UnresolvedStage1,
    UnresolvedStage2,
    BackendFailed,
}

impl CaseStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            CaseStatus::Resolved => "resolved",
            CaseStatus::UnresolvedStage1 => "unresolved_stage1",
            CaseStatus::UnresolvedStage2 => "unresolved_stage2",
            CaseStatus::BackendFailed => "backend_failed",
        }
    }
}

impl std::fmt::Display for CaseStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Final (or last-best, when unresolved) outputs of a case.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CaseResult {
    pub case_id: String,
    pub status: CaseStatus,
    pub structured: Option<CystStructuredData>,
    pub finding: Option<FindingText>,
    pub failure: Option<String>,
    pub transcript: LoopTranscript,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StageError {
    #[error("stage 1 unresolved after {regenerations} regenerations")]
    Stage1Exhausted { regenerations: u32, last_verdict: Verdict, last_best: Option<CystStructuredData> },
    #[error("stage 2 unresolved after {regenerations} regenerations")]
    Stage2Exhausted { regenerations: u32, diffs: Vec<FieldDiff>, last_finding: FindingText },
    #[error("backend failed at {step}: {error}")]
    BackendFailed { step: StepKind, error: BackendError, last_best: Option<CystStructuredData> },
}

/// Pipeline configuration shared by every case of a run.
#[derive(Debug, Clone, Default)]
pub struct Orchestrator {
    pub forge: PromptForge,
    pub synonyms: SynonymTable,
    pub params: DecodingParams,
    pub caps: Caps,
}

struct Reply {
    text: Option<String>,
    error: Option<BackendError>,
}

impl Orchestrator {
    pub fn new(caps: Caps) -> Self {
        Orchestrator { caps, ..Self::default() }
    }

    fn request(&self, input: &CaseInput, step: StepKind, prompt: &PromptBundle, with_image: bool) -> VisionRequest {
        let response_mode = match step {
            StepKind::StructuredGeneration | StepKind::Restructure => {
                ResponseMode::JsonConstrained(SchemaDescriptor::cyst_analysis())
            }
            _ => ResponseMode::FreeText,
        };
        VisionRequest {
            tag: RequestTag { case_id: input.case_id.clone(), step },
            system_text: prompt.system_text.clone(),
            user_text: prompt.user_text.clone(),
            image: with_image.then(|| input.image.clone()),
            params: self.params,
            response_mode,
        }
    }

    async fn call(
        &self,
        backend: &dyn VisionBackend,
        input: &CaseInput,
        step: StepKind,
        prompt: &PromptBundle,
        with_image: bool,
    ) -> Reply {
        match backend.send(&self.request(input, step, prompt, with_image)).await {
            Ok(response) => Reply { text: Some(response.text), error: None },
            Err(error) => Reply { text: None, error: Some(error) },
        }
    }

    fn record(stage: Stage, iteration: u32, step: StepKind, prompt: &PromptBundle, reply: &Reply) -> TranscriptRecord {
        TranscriptRecord {
            stage,
            iteration,
            step,
            template_id: prompt.template_id.clone(),
            system_text: prompt.system_text.clone(),
            user_text: prompt.user_text.clone(),
            response: reply.text.clone(),
            backend_error: reply.error.clone(),
            parsed: None,
            parse_error: None,
            verdict: None,
            structured_hash: None,
        }
    }

    /// Structured generation with tooth-number verification.
    pub async fn run_stage1(
        &self,
        input: &CaseInput,
        backend: &dyn VisionBackend,
        transcript: &mut LoopTranscript,
    ) -> Result<CystStructuredData, StageError> {
        let mut structured_prompt = self.forge.structured_generation_prompt();
        let extraction_prompt = self.forge.tooth_extraction_prompt();
        let mut last_best: Option<CystStructuredData> = None;

        for round in 0..=self.caps.stage1 {
            if round > 0 {
                transcript.stage1_regenerations = round;
            }
            let (structured_reply, extraction_reply) = tokio::join!(
                self.call(backend, input, StepKind::StructuredGeneration, &structured_prompt, true),
                self.call(backend, input, StepKind::ToothExtraction, &extraction_prompt, true),
            );
            let mut s_rec = Self::record(
                Stage::Stage1,
                round,
                StepKind::StructuredGeneration,
                &structured_prompt,
                &structured_reply,
            );
            let mut e_rec =
                Self::record(Stage::Stage1, round, StepKind::ToothExtraction, &extraction_prompt, &extraction_reply);

            for (step, reply) in
                [(StepKind::StructuredGeneration, &structured_reply), (StepKind::ToothExtraction, &extraction_reply)]
            {
                if let Some(error) = &reply.error {
                    transcript.push(s_rec);
                    transcript.push(e_rec);
                    return Err(StageError::BackendFailed { step, error: error.clone(), last_best });
                }
            }

            let structured = parse_structured_json(structured_reply.text.as_deref().unwrap_or_default());
            let extracted = parse_tooth_list(extraction_reply.text.as_deref().unwrap_or_default());
            match &structured {
                Ok(d) => s_rec.parsed = Some(structured_value(d)),
                Err(e) => s_rec.parse_error = Some(e.to_string()),
            }
            match &extracted {
                Ok(t) => e_rec.parsed = Some(serde_json::to_value(t).expect("tooth set serializes")),
                Err(e) => e_rec.parse_error = Some(e.to_string()),
            }

            let verdict = match (&structured, &extracted) {
                (Ok(d), Ok(teeth)) => {
                    let v = check_tooth_consistency(d.affected_teeth(), teeth);
                    Verdict::Tooth {
                        status: v.status,
                        missing_from_structured: v.missing_from_structured,
                        extra_in_structured: v.extra_in_structured,
                    }
                }
                (Err(e), _) => Verdict::Unverifiable { reason: format!("structured data: {e}") },
                (_, Err(e)) => Verdict::Unverifiable { reason: format!("tooth extraction: {e}") },
            };
            s_rec.verdict = Some(verdict.clone());
            transcript.push(s_rec);
            transcript.push(e_rec);

            if let Ok(d) = &structured {
                if verdict.passed() {
                    return Ok(d.clone());
                }
                last_best = Some(d.clone());
            }
            if round == self.caps.stage1 {
                return Err(StageError::Stage1Exhausted { regenerations: round, last_verdict: verdict, last_best });
            }

            structured_prompt = match (&structured, &extracted) {
                (Ok(d), Ok(teeth)) => self.forge.tooth_feedback_prompt(d.affected_teeth(), teeth),
                (Err(e), _) => self.forge.structured_retry_prompt(&e.to_string()),
                (Ok(_), Err(_)) => self.forge.structured_generation_prompt(),
            };
        }
        unreachable!("loop returns on its final round")
    }

    /// Finding generation with round-trip verification. `data` is never modified.
    pub async fn run_stage2(
        &self,
        data: &CystStructuredData,
        input: &CaseInput,
        backend: &dyn VisionBackend,
        transcript: &mut LoopTranscript,
    ) -> Result<FindingText, StageError> {
        let hash = structured_hash(data);
        let mut finding_prompt = self.forge.finding_generation_prompt(data, &input.language);

        for round in 0..=self.caps.stage2 {
            if round > 0 {
                transcript.stage2_regenerations = round;
            }
            let reply = self.call(backend, input, StepKind::FindingGeneration, &finding_prompt, false).await;
            let mut f_rec = Self::record(Stage::Stage2, round, StepKind::FindingGeneration, &finding_prompt, &reply);
            f_rec.structured_hash = Some(hash.clone());
            let finding = match (&reply.error, reply.text.as_deref().and_then(|t| FindingText::new(t, &input.language)))
            {
                (None, Some(finding)) => finding,
                (error, _) => {
                    transcript.push(f_rec);
                    let error = error
                        .clone()
                        .unwrap_or_else(|| BackendError::new(BackendErrorKind::EmptyResponse, "blank finding"));
                    return Err(StageError::BackendFailed {
                        step: StepKind::FindingGeneration,
                        error,
                        last_best: Some(data.clone()),
                    });
                }
            };
            f_rec.parsed = Some(Value::String(finding.body().to_string()));
            transcript.push(f_rec);

            let restructure_prompt = self.forge.restructure_prompt(&finding);
            let reply = self.call(backend, input, StepKind::Restructure, &restructure_prompt, false).await;
            let mut r_rec = Self::record(Stage::Stage2, round, StepKind::Restructure, &restructure_prompt, &reply);
            r_rec.structured_hash = Some(hash.clone());
            if let Some(error) = reply.error {
                transcript.push(r_rec);
                return Err(StageError::BackendFailed {
                    step: StepKind::Restructure,
                    error,
                    last_best: Some(data.clone()),
                });
            }

            let restructured = self.synonyms.parse_lenient(reply.text.as_deref().unwrap_or_default());
            let verdict = match &restructured {
                Ok(r) => {
                    r_rec.parsed = Some(structured_value(r));
                    let v = check_roundtrip(data, r);
                    Verdict::RoundTrip { status: v.status, diffs: v.diffs }
                }
                Err(e) => {
                    r_rec.parse_error = Some(e.to_string());
                    Verdict::Unverifiable { reason: format!("restructured data: {e}") }
                }
            };
            r_rec.verdict = Some(verdict.clone());
            transcript.push(r_rec);

            if verdict.passed() {
                return Ok(finding);
            }
            let diffs = match &verdict {
                Verdict::RoundTrip { diffs, .. } => diffs.clone(),
                _ => Vec::new(),
            };
            if round == self.caps.stage2 {
                return Err(StageError::Stage2Exhausted { regenerations: round, diffs, last_finding: finding });
            }
            finding_prompt = match (&restructured, diffs.is_empty()) {
                (Err(e), _) => self.forge.finding_retry_prompt(data, &e.to_string(), &input.language),
                (Ok(_), false) => self.forge.finding_feedback_prompt(data, &diffs, &input.language),
                (Ok(_), true) => unreachable!("consistent verdict returned above"),
            };
        }
        unreachable!("loop returns on its final round")
    }

    /// Full two-stage run. Failures are reported in the status, never raised.
    pub async fn run_case(&self, input: &CaseInput, backend: &dyn VisionBackend) -> CaseResult {
        let mut transcript = LoopTranscript::new(&input.case_id);
        let approved = match self.run_stage1(input, backend, &mut transcript).await {
            Ok(data) => data,
            Err(err) => {
                let (status, structured) = match &err {
                    StageError::BackendFailed { last_best, .. } => (CaseStatus::BackendFailed, last_best.clone()),
                    StageError::Stage1Exhausted { last_best, .. } => (CaseStatus::UnresolvedStage1, last_best.clone()),
                    StageError::Stage2Exhausted { .. } => unreachable!("stage 1 error"),
                };
                return CaseResult {
                    case_id: input.case_id.clone(),
                    status,
                    structured,
                    finding: None,
                    failure: Some(err.to_string()),
                    transcript,
                };
            }
        };

        let (status, finding, failure) = match self.run_stage2(&approved, input, backend, &mut transcript).await {
            Ok(finding) => (CaseStatus::Resolved, Some(finding), None),
            Err(err @ StageError::Stage2Exhausted { .. }) => {
                let StageError::Stage2Exhausted { last_finding, .. } = &err else { unreachable!() };
                (CaseStatus::UnresolvedStage2, Some(last_finding.clone()), Some(err.to_string()))
            }
            Err(err) => (CaseStatus::BackendFailed, None, Some(err.to_string())),
        };
        CaseResult { case_id: input.case_id.clone(), status, structured: Some(approved), finding, failure, transcript }
    }

    /// Baseline: one stepwise prompt, then restructuring of its text for scoring.
    pub async fn run_cot_case(&self, input: &CaseInput, backend: &dyn VisionBackend) -> CaseResult {
        let mut transcript = LoopTranscript::new(&input.case_id);
        let failed = |transcript: LoopTranscript,
                      step: StepKind,
                      error: &BackendError,
                      finding: Option<FindingText>| CaseResult {
            case_id: input.case_id.clone(),
            status: CaseStatus::BackendFailed,
            structured: None,
            finding,
            failure: Some(format!("backend failed at {step}: {error}")),
            transcript,
        };

        let cot_prompt = self.forge.cot_prompt();
        let reply = self.call(backend, input, StepKind::Cot, &cot_prompt, true).await;
        let mut c_rec = Self::record(Stage::Baseline, 0, StepKind::Cot, &cot_prompt, &reply);
        let finding = match (&reply.error, reply.text.as_deref().and_then(|t| FindingText::new(t, &input.language))) {
            (None, Some(f)) => f,
            (error, _) => {
                transcript.push(c_rec);
                let error =
                    error.clone().unwrap_or_else(|| BackendError::new(BackendErrorKind::EmptyResponse, "blank reply"));
                return failed(transcript, StepKind::Cot, &error, None);
            }
        };
        c_rec.parsed = Some(Value::String(finding.body().to_string()));
        transcript.push(c_rec);

        let restructure_prompt = self.forge.restructure_prompt(&finding);
        let reply = self.call(backend, input, StepKind::Restructure, &restructure_prompt, false).await;
        let mut r_rec = Self::record(Stage::Baseline, 0, StepKind::Restructure, &restructure_prompt, &reply);
        if let Some(error) = &reply.error {
            transcript.push(r_rec);
            return failed(transcript, StepKind::Restructure, error, Some(finding));
        }
        let parsed = self.synonyms.parse_lenient(reply.text.as_deref().unwrap_or_default());
        let (status, structured, failure) = match parsed {
            Ok(d) => {
                r_rec.parsed = Some(structured_value(&d));
                (CaseStatus::Resolved, Some(d), None)
            }
            Err(e) => {
                r_rec.parse_error = Some(e.to_string());
                (CaseStatus::UnresolvedStage2, None, Some(format!("restructuring failed: {e}")))
            }
        };
        transcript.push(r_rec);
        CaseResult { case_id: input.case_id.clone(), status, structured, finding: Some(finding), failure, transcript }
    }

    pub async fn run(&self, method: Method, input: &CaseInput, backend: &dyn VisionBackend) -> CaseResult {
        match method {
            Method::Slso => self.run_case(input, backend).await,
            Method::Cot => self.run_cot_case(input, backend).await,
        }
    }
}

fn structured_value(data: &CystStructuredData) -> Value {
    serde_json::from_str(&emit_structured_json(data)).expect("canonical JSON parses")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{Fault, FaultAction, MockBackend, MockScript};

    const RECORD: &str = r#"{
  "radiolucency": "radiolucent",
  "internal_structure": "unilocular",
  "boundary": "well-defined",
  "root_resorption": "mild",
  "tooth_displacement": "no",
  "anatomical_relation": "contact",
  "affected_teeth": ["33", "34", "35", "36"]
}"#;
    const FINDING: &str = "A radiolucent lesion is observed from number 33 to number 36.";

    fn input() -> CaseInput {
        CaseInput {
            case_id: "c1".into(),
            image: ImagePayload { bytes: vec![1, 2, 3], media_type: "image/png".into() },
            language: "en".into(),
        }
    }

    fn faithful() -> CaseScript {
        CaseScript::new()
            .with(StepKind::StructuredGeneration, [RECORD])
            .with(StepKind::ToothExtraction, ["33, 34, 35, 36"])
            .with(StepKind::FindingGeneration, [FINDING])
            .with(StepKind::Restructure, [RECORD])
    }

    #[tokio::test]
    async fn fault_free_run_resolves_without_regeneration() {
        let mock = MockBackend::new(MockScript::uniform(faithful()));
        let result = Orchestrator::default().run_case(&input(), &mock).await;
        assert_eq!(result.status, CaseStatus::Resolved);
        assert_eq!(result.transcript.stage1_regenerations, 0);
        assert_eq!(result.transcript.stage2_regenerations, 0);
        assert_eq!(result.finding.unwrap().body(), FINDING);
        assert_eq!(result.transcript.records.len(), 4);
    }

    #[tokio::test]
    async fn parse_failure_triggers_retry_prompt() {
        let mut script = faithful();
        script.steps.insert(StepKind::StructuredGeneration, vec!["not json".into(), RECORD.into()]);
        let mock = MockBackend::new(MockScript::uniform(script).repeating_last());
        let result = Orchestrator::default().run_case(&input(), &mock).await;
        assert_eq!(result.status, CaseStatus::Resolved);
        assert_eq!(result.transcript.stage1_regenerations, 1);
        let second = &result.transcript.records[2];
        assert_eq!(second.step, StepKind::StructuredGeneration);
        assert!(second.template_id.starts_with("structured_retry@"));
        assert!(matches!(result.transcript.records[0].verdict, Some(Verdict::Unverifiable { .. })));
    }

    #[tokio::test]
    async fn restructure_with_synonyms_is_consistent() {
        let synonym_reply = RECORD.replace("\"well-defined\"", "\"clear border\"");
        let mut script = faithful();
        script.steps.insert(StepKind::Restructure, vec![synonym_reply.into()]);
        let mock = MockBackend::new(MockScript::uniform(script));
        let result = Orchestrator::default().run_case(&input(), &mock).await;
        assert_eq!(result.status, CaseStatus::Resolved);
    }

    #[tokio::test]
    async fn stage2_exhaustion_keeps_last_finding() {
        let wrong = RECORD.replace("\"mild\"", "\"severe\"");
        let mut script = faithful();
        script.steps.insert(StepKind::Restructure, vec![wrong.into()]);
        let mock = MockBackend::new(MockScript::uniform(script).repeating_last());
        let orch = Orchestrator::new(Caps { stage1: 5, stage2: 2 });
        let result = orch.run_case(&input(), &mock).await;
        assert_eq!(result.status, CaseStatus::UnresolvedStage2);
        assert_eq!(result.transcript.stage2_regenerations, 2);
        assert_eq!(result.transcript.recorded_regenerations(Stage::Stage2), 2);
        assert!(result.finding.is_some());
        assert!(result.structured.is_some());
        let feedback =
            result.transcript.records.iter().filter(|r| r.template_id.starts_with("finding_feedback@")).count();
        assert_eq!(feedback, 2);
    }

    #[tokio::test]
    async fn backend_failure_in_parallel_step_is_recorded() {
        let mock = MockBackend::new(MockScript::uniform(faithful()).with_fault(Fault {
            case_id: None,
            step: StepKind::ToothExtraction,
            first: 1,
            action: FaultAction::Fail(BackendError::new(BackendErrorKind::Auth, "SLSO_API_KEY is not set")),
        }));
        let result = Orchestrator::default().run_case(&input(), &mock).await;
        assert_eq!(result.status, CaseStatus::BackendFailed);
        let failing = result.transcript.records.iter().find(|r| r.backend_error.is_some()).unwrap();
        assert_eq!(failing.step, StepKind::ToothExtraction);
        assert!(result.failure.unwrap().contains("tooth_extraction"));
    }

    #[tokio::test]
    async fn cap_zero_means_no_regeneration() {
        let mock = MockBackend::new(MockScript::uniform(faithful()).repeating_last().with_fault(Fault {
            case_id: None,
            step: StepKind::ToothExtraction,
            first: 10,
            action: FaultAction::ReplaceTeeth(vec!["11".into()]),
        }));
        let result = Orchestrator::new(Caps { stage1: 0, stage2: 0 }).run_case(&input(), &mock).await;
        assert_eq!(result.status, CaseStatus::UnresolvedStage1);
        assert_eq!(result.transcript.stage1_regenerations, 0);
        assert_eq!(mock.call_count("c1"), 2);
    }

    #[test]
    fn method_parsing() {
        assert_eq!("SLSO".parse::<Method>(), Ok(Method::Slso));
        assert_eq!("cot".parse::<Method>(), Ok(Method::Cot));
        assert!("direct".parse::<Method>().is_err());
    }
}
