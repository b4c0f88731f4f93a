//! Scripted backend for desk-scale runs and tests.
//!
//! Responses are looked up by `(case_id, step kind, call index)`; the call
//! index is a per-case, per-step cursor kept behind a mutex, so concurrent
//! requests for different steps or cases never disturb each other. Prompt
//! wording plays no part in the lookup.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::sync::Mutex;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{
    BackendError, BackendErrorKind, BackendMeta, RequestTag, StepKind, VisionBackend, VisionRequest, VisionResponse,
};
use crate::prompts::parse_tooth_list;
use crate::schema::{parse_fdi_tooth, strip_code_fence, ToothSet};

/// One canned reply: model text, or a backend failure to raise.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScriptEntry {
    Text(String),
    Error { error: BackendErrorKind, message: String },
}

impl ScriptEntry {
    pub fn error(err: &BackendError) -> Self {
        ScriptEntry::Error { error: err.kind, message: err.message.clone() }
    }
}

impl From<&str> for ScriptEntry {
    fn from(text: &str) -> Self {
        ScriptEntry::Text(text.to_string())
    }
}

impl From<String> for ScriptEntry {
    fn from(text: String) -> Self {
        ScriptEntry::Text(text)
    }
}

/// Replies for one case, per step kind, in call order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CaseScript {
    pub steps: BTreeMap<StepKind, Vec<ScriptEntry>>,
}

impl CaseScript {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, step: StepKind, entry: impl Into<ScriptEntry>) -> &mut Self {
        self.steps.entry(step).or_default().push(entry.into());
        self
    }

    pub fn with(mut self, step: StepKind, entries: impl IntoIterator<Item = impl Into<ScriptEntry>>) -> Self {
        self.steps.entry(step).or_default().extend(entries.into_iter().map(Into::into));
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultAction {
    /// Drop these teeth from the reply (structured JSON or tooth list).
    OmitTeeth(Vec<String>),
    /// Replace the reply's teeth with this list.
    ReplaceTeeth(Vec<String>),
    /// Raise a backend failure instead of replying.
    Fail(BackendError),
}

/// Perturbs the first `first` replies of one step kind.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fault {
    /// Restrict to one case; all cases when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub case_id: Option<String>,
    pub step: StepKind,
    pub first: usize,
    pub action: FaultAction,
}

/// Full script: per-case replies, an optional fallback for unlisted cases,
/// and a fault plan.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MockScript {
    #[serde(default)]
    pub cases: BTreeMap<String, CaseScript>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default: Option<CaseScript>,
    /// Keep replaying the last entry of a step once its list runs out.
    #[serde(default)]
    pub repeat_last: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub faults: Vec<Fault>,
}

impl MockScript {
    pub fn new() -> Self {
        Self::default()
    }

    /// Script where every case gets the same replies.
    pub fn uniform(case: CaseScript) -> Self {
        MockScript { default: Some(case), ..Self::default() }
    }

    pub fn with_case(mut self, case_id: impl Into<String>, case: CaseScript) -> Self {
        self.cases.insert(case_id.into(), case);
        self
    }

    pub fn repeating_last(mut self) -> Self {
        self.repeat_last = true;
        self
    }

    pub fn with_fault(mut self, fault: Fault) -> Self {
        self.faults.push(fault);
        self
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn load(path: &Path) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("script serializes")
    }

    fn lookup(&self, tag: &RequestTag, index: usize) -> Result<ScriptEntry, BackendError> {
        let exhausted = |why: &str| {
            BackendError::new(
                BackendErrorKind::ScriptExhausted,
                format!("case {:?}, step {}, call {index}: {why}", tag.case_id, tag.step),
            )
        };
        let case =
            self.cases.get(&tag.case_id).or(self.default.as_ref()).ok_or_else(|| exhausted("no script for case"))?;
        let entries = case.steps.get(&tag.step).ok_or_else(|| exhausted("no entries for step"))?;
        let entry = match entries.get(index) {
            Some(e) => e,
            None if self.repeat_last => entries.last().ok_or_else(|| exhausted("no entries for step"))?,
            None => return Err(exhausted("script exhausted")),
        };

        let mut entry = entry.clone();
        for fault in &self.faults {
            let applies = fault.step == tag.step
                && index < fault.first
                && fault.case_id.as_deref().is_none_or(|c| c == tag.case_id);
            if applies {
                entry = apply_fault(entry, &fault.action);
            }
        }
        Ok(entry)
    }
}

fn apply_fault(entry: ScriptEntry, action: &FaultAction) -> ScriptEntry {
    let text = match (entry, action) {
        (_, FaultAction::Fail(err)) => return ScriptEntry::error(err),
        (e @ ScriptEntry::Error { .. }, _) => return e,
        (ScriptEntry::Text(t), _) => t,
    };
    let edit = |teeth: &ToothSet| -> ToothSet {
        let listed = |list: &[String]| -> ToothSet { list.iter().filter_map(|t| parse_fdi_tooth(t).ok()).collect() };
        match action {
            FaultAction::OmitTeeth(list) => teeth.difference(&listed(list)),
            FaultAction::ReplaceTeeth(list) => listed(list),
            FaultAction::Fail(_) => unreachable!(),
        }
    };

    if let Ok(Value::Object(mut map)) = serde_json::from_str::<Value>(strip_code_fence(&text)) {
        if let Some(Value::Array(items)) = map.get("affected_teeth") {
            let current: ToothSet = items
                .iter()
                .filter_map(|v| match v {
                    Value::String(s) => parse_fdi_tooth(s.trim()).ok(),
                    Value::Number(n) => parse_fdi_tooth(&n.to_string()).ok(),
                    _ => None,
                })
                .collect();
            let edited = edit(&current).to_strings().into_iter().map(Value::String).collect();
            map.insert("affected_teeth".into(), Value::Array(edited));
            return ScriptEntry::Text(serde_json::to_string_pretty(&Value::Object(map)).expect("serializes"));
        }
        return ScriptEntry::Text(text);
    }
    match parse_tooth_list(&text) {
        Ok(teeth) => {
            let edited = edit(&teeth);
            ScriptEntry::Text(if edited.is_empty() { "none".into() } else { edited.join(", ") })
        }
        Err(_) => ScriptEntry::Text(text),
    }
}

/// Deterministic backend replaying a [`MockScript`].
pub struct MockBackend {
    script: MockScript,
    model_id: String,
    cursors: Mutex<HashMap<(String, StepKind), usize>>,
    calls: Mutex<Vec<RequestTag>>,
}

impl MockBackend {
    pub fn new(script: MockScript) -> Self {
        MockBackend {
            script,
            model_id: "mock".into(),
            cursors: Mutex::new(HashMap::new()),
            calls: Mutex::new(Vec::new()),
        }
    }

    pub fn with_model_id(mut self, model_id: impl Into<String>) -> Self {
        self.model_id = model_id.into();
        self
    }

    pub fn script(&self) -> &MockScript {
        &self.script
    }

    /// Every request received, in arrival order.
    pub fn calls(&self) -> Vec<RequestTag> {
        self.calls.lock().expect("mock call log poisoned").clone()
    }

    pub fn call_count(&self, case_id: &str) -> usize {
        self.calls.lock().expect("mock call log poisoned").iter().filter(|t| t.case_id == case_id).count()
    }

    fn next_index(&self, tag: &RequestTag) -> usize {
        let mut cursors = self.cursors.lock().expect("mock cursor poisoned");
        let cursor = cursors.entry((tag.case_id.clone(), tag.step)).or_insert(0);
        let index = *cursor;
        *cursor += 1;
        index
    }
}

#[async_trait]
impl VisionBackend for MockBackend {
    async fn send(&self, request: &VisionRequest) -> Result<VisionResponse, BackendError> {
        self.calls.lock().expect("mock call log poisoned").push(request.tag.clone());
        let index = self.next_index(&request.tag);
        match self.script.lookup(&request.tag, index)? {
            ScriptEntry::Error { error, message } => Err(BackendError::new(error, message)),
            ScriptEntry::Text(text) if text.trim().is_empty() => {
                Err(BackendError::new(BackendErrorKind::EmptyResponse, "scripted empty reply"))
            }
            ScriptEntry::Text(text) => Ok(VisionResponse {
                text,
                meta: BackendMeta {
                    request_id: Some(format!("mock-{}-{}-{index}", request.tag.case_id, request.tag.step)),
                    ..BackendMeta::default()
                },
            }),
        }
    }

    fn model_id(&self) -> &str {
        &self.model_id
    }
}
