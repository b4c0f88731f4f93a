use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use slso_core::backend::{DecodingParams, API_KEY_ENV, DEFAULT_MODEL_ID};
use slso_core::orchestrator::{Caps, Method};

use crate::CliError;

pub const DEFAULT_PARALLELISM: usize = 4;
pub const DEFAULT_LANGUAGE: &str = "en";

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BackendKind {
    Remote { endpoint: String },
    Mock { script: PathBuf },
}

impl BackendKind {
    /// `mock:PATH` or an http(s) endpoint URL.
    pub fn parse(spec: &str) -> Result<BackendKind, CliError> {
        if let Some(path) = spec.strip_prefix("mock:") {
            if path.is_empty() {
                return Err(CliError::Config("mock backend needs a script path (mock:PATH)".into()));
            }
            return Ok(BackendKind::Mock { script: PathBuf::from(path) });
        }
        if spec.starts_with("http://") || spec.starts_with("https://") {
            return Ok(BackendKind::Remote { endpoint: spec.to_string() });
        }
        Err(CliError::Config(format!("backend {spec:?} is neither an http(s) URL nor mock:PATH")))
    }
}

/// Settings read from `--config FILE`. Every field can be overridden by the
/// matching flag.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub cases: Option<PathBuf>,
    pub method: Option<Method>,
    pub backend: Option<String>,
    pub out: Option<PathBuf>,
    pub model: Option<String>,
    pub language: Option<String>,
    pub parallel: Option<usize>,
    pub cap1: Option<u32>,
    pub cap2: Option<u32>,
    pub templates: Option<PathBuf>,
    pub params: Option<DecodingParams>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<FileConfig, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        FileConfig::parse(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn parse(text: &str) -> Result<FileConfig, String> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| e.to_string())?;
        if table.keys().any(|k| k.eq_ignore_ascii_case("api_key") || k == API_KEY_ENV) {
            return Err(format!("credentials are not read from config files; set {API_KEY_ENV}"));
        }
        toml::from_str(text).map_err(|e| e.to_string())
    }
}

/// Flag values; `None` means "not given on the command line".
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunFlags {
    pub cases: Option<PathBuf>,
    pub method: Option<Method>,
    pub backend: Option<String>,
    pub out: Option<PathBuf>,
    pub model: Option<String>,
    pub language: Option<String>,
    pub parallel: Option<usize>,
    pub cap1: Option<u32>,
    pub cap2: Option<u32>,
    pub templates: Option<PathBuf>,
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub cases: PathBuf,
    pub method: Method,
    pub backend: BackendKind,
    pub out: PathBuf,
    pub model_id: String,
    pub language: String,
    pub parallelism: usize,
    pub caps: Caps,
    pub templates: Option<PathBuf>,
    pub params: DecodingParams,
}

impl RunConfig {
    /// Merges flags over the config file (if any) over defaults.
    pub fn resolve(flags: RunFlags) -> Result<RunConfig, CliError> {
        let file = match &flags.config {
            Some(path) => FileConfig::load(path)?,
            None => FileConfig::default(),
        };
        RunConfig::merge(flags, file)
    }

    pub fn merge(flags: RunFlags, file: FileConfig) -> Result<RunConfig, CliError> {
        let missing = |name: &str| CliError::Config(format!("--{name} is required (flag or config file)"));
        let cases = flags.cases.or(file.cases).ok_or_else(|| missing("cases"))?;
        let out = flags.out.or(file.out).ok_or_else(|| missing("out"))?;
        let backend = BackendKind::parse(&flags.backend.or(file.backend).ok_or_else(|| missing("backend"))?)?;
        let parallelism = flags.parallel.or(file.parallel).unwrap_or(DEFAULT_PARALLELISM);
        if parallelism == 0 {
            return Err(CliError::Config("--parallel must be at least 1".into()));
        }
        let defaults = Caps::default();
        Ok(RunConfig {
            cases,
            method: flags.method.or(file.method).unwrap_or(Method::Slso),
            backend,
            out,
            model_id: flags.model.or(file.model).unwrap_or_else(|| DEFAULT_MODEL_ID.to_string()),
            language: flags.language.or(file.language).unwrap_or_else(|| DEFAULT_LANGUAGE.to_string()),
            parallelism,
            caps: Caps {
                stage1: flags.cap1.or(file.cap1).unwrap_or(defaults.stage1),
                stage2: flags.cap2.or(file.cap2).unwrap_or(defaults.stage2),
            },
            templates: flags.templates.or(file.templates),
            params: file.params.unwrap_or_default(),
        })
    }
}
