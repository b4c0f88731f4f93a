use std::path::Path;
use std::sync::Arc;

use futures::stream::{self, StreamExt};
use serde::Serialize;
use serde_json::json;
use slso_core::backend::{ImagePayload, MockBackend, MockScript, RemoteBackend, VisionBackend, API_KEY_ENV};
use slso_core::consistency::{structured_hash, SynonymTable};
use slso_core::orchestrator::{CaseInput, CaseResult, CaseStatus, Method, Orchestrator};
use slso_core::prompts::PromptForge;
use slso_core::schema::emit_structured_json;
use tracing::info;

use crate::config::{BackendKind, RunConfig};
use crate::corpus::{CaseBundle, Corpus, InvalidCase};
use crate::{write_file, CliError};

/// Per-case line of the run summary and manifest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CaseOutcome {
    pub case_id: String,
    pub status: CaseStatus,
    pub stage1_regenerations: u32,
    pub stage2_regenerations: u32,
}

impl CaseOutcome {
    pub fn summary_line(&self) -> String {
        format!(
            "{}\t{}\tstage1_regenerations={}\tstage2_regenerations={}",
            self.case_id, self.status, self.stage1_regenerations, self.stage2_regenerations
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunSummary {
    pub cases: Vec<CaseOutcome>,
    pub invalid: Vec<InvalidCase>,
}

impl RunSummary {
    /// 1 when any case failed at the backend, else 0.
    pub fn exit_code(&self) -> i32 {
        if self.cases.iter().any(|c| c.status == CaseStatus::BackendFailed) {
            1
        } else {
            0
        }
    }
}

/// Builds the backend named by the config. Fails before any request is made
/// when a remote backend has no credential.
pub fn build_backend(config: &RunConfig) -> Result<Arc<dyn VisionBackend>, CliError> {
    match &config.backend {
        BackendKind::Mock { script } => {
            let script = MockScript::load(script)
                .map_err(|e| CliError::Config(format!("mock script {}: {e}", script.display())))?;
            Ok(Arc::new(MockBackend::new(script).with_model_id(config.model_id.clone())))
        }
        BackendKind::Remote { endpoint } => {
            let backend = RemoteBackend::from_env(endpoint, &config.model_id);
            if !backend.has_credential() {
                return Err(CliError::Config(format!("{API_KEY_ENV} is not set")));
            }
            Ok(Arc::new(backend))
        }
    }
}

pub fn build_orchestrator(config: &RunConfig) -> Result<Orchestrator, CliError> {
    let forge = match &config.templates {
        Some(dir) => PromptForge::from_dir(dir).map_err(|e| CliError::Config(format!("templates: {e}")))?,
        None => PromptForge::default(),
    };
    Ok(Orchestrator { forge, synonyms: SynonymTable::default(), params: config.params, caps: config.caps })
}

/// Runs every valid case of the corpus and persists artifacts under
/// `config.out`.
pub async fn cmd_run(config: &RunConfig, corpus: &Corpus) -> Result<RunSummary, CliError> {
    let backend = build_backend(config)?;
    let orchestrator = build_orchestrator(config)?;
    execute(config, corpus, &orchestrator, backend.as_ref()).await
}

pub async fn execute(
    config: &RunConfig,
    corpus: &Corpus,
    orchestrator: &Orchestrator,
    backend: &dyn VisionBackend,
) -> Result<RunSummary, CliError> {
    let started_at = now();
    std::fs::create_dir_all(&config.out).map_err(|e| CliError::io(&config.out, e))?;

    let results: Vec<Result<CaseOutcome, CliError>> = stream::iter(&corpus.bundles)
        .map(|bundle| run_bundle(config, orchestrator, backend, bundle))
        .buffered(config.parallelism)
        .collect()
        .await;
    let cases = results.into_iter().collect::<Result<Vec<_>, _>>()?;

    let manifest = json!({
        "tool_version": env!("CARGO_PKG_VERSION"),
        "method": config.method,
        "model": config.model_id,
        "backend": config.backend,
        "params": config.params,
        "caps": config.caps,
        "language": config.language,
        "parallelism": config.parallelism,
        "templates": orchestrator.forge.versions(),
        "synonyms": orchestrator.synonyms.id(),
        "corpus": corpus.root,
        "started_at": started_at,
        "finished_at": now(),
        "cases": cases,
        "invalid_cases": corpus.invalid,
    });
    write_file(&config.out.join("manifest.json"), &pretty(&manifest))?;
    Ok(RunSummary { cases, invalid: corpus.invalid.clone() })
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

fn pretty(value: &impl Serialize) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    text
}

async fn run_bundle(
    config: &RunConfig,
    orchestrator: &Orchestrator,
    backend: &dyn VisionBackend,
    bundle: &CaseBundle,
) -> Result<CaseOutcome, CliError> {
    let bytes = std::fs::read(&bundle.image_path).map_err(|e| CliError::io(&bundle.image_path, e))?;
    let input = CaseInput {
        case_id: bundle.case_id.clone(),
        image: ImagePayload { bytes, media_type: bundle.media_type.to_string() },
        language: config.language.clone(),
    };
    let result = orchestrator.run(config.method, &input, backend).await;
    let outcome = CaseOutcome {
        case_id: result.case_id.clone(),
        status: result.status,
        stage1_regenerations: result.transcript.stage1_regenerations,
        stage2_regenerations: result.transcript.stage2_regenerations,
    };
    info!(case = %outcome.case_id, status = %outcome.status, "case finished");
    write_case(&config.out.join(&bundle.case_id), config.method, &result)?;
    Ok(outcome)
}

fn write_case(dir: &Path, method: Method, result: &CaseResult) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    for stale in ["structured.json", "finding.txt"] {
        let _ = std::fs::remove_file(dir.join(stale));
    }
    write_file(&dir.join("transcript.json"), &pretty(&result.transcript))?;
    if let Some(data) = &result.structured {
        write_file(&dir.join("structured.json"), &format!("{}\n", emit_structured_json(data)))?;
    }
    if let Some(finding) = &result.finding {
        write_file(&dir.join("finding.txt"), &format!("{}\n", finding.body()))?;
    }
    let status = json!({
        "case_id": result.case_id,
        "method": method,
        "status": result.status,
        "stage1_regenerations": result.transcript.stage1_regenerations,
        "stage2_regenerations": result.transcript.stage2_regenerations,
        "structured_hash": result.structured.as_ref().map(structured_hash),
        "failure": result.failure,
    });
    write_file(&dir.join("status.json"), &pretty(&status))
}
