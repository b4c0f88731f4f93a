use std::path::{Path, PathBuf};

use image::ImageFormat;
use slso_core::schema::{parse_structured_json, CystStructuredData};
use thiserror::Error;

const IMAGE_NAMES: [(&str, &str); 3] =
    [("roi.png", "image/png"), ("roi.jpg", "image/jpeg"), ("roi.jpeg", "image/jpeg")];

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read corpus root {path}: {source}")]
    Root { path: PathBuf, source: std::io::Error },
    #[error("no case directories under {0}")]
    EmptyCorpus(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaseBundle {
    pub case_id: String,
    pub image_path: PathBuf,
    pub media_type: &'static str,
    pub truth: Option<CystStructuredData>,
    pub truth_text: Option<String>,
}

/// A case directory that failed validation.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct InvalidCase {
    pub case_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub root: PathBuf,
    pub bundles: Vec<CaseBundle>,
    pub invalid: Vec<InvalidCase>,
}

/// Discovers one case per subdirectory, in lexical order. Invalid cases are
/// collected rather than aborting the load.
pub fn load_corpus(root: &Path) -> Result<Corpus, CorpusError> {
    let read_err = |source| CorpusError::Root { path: root.to_path_buf(), source };
    let mut dirs: Vec<(String, PathBuf)> = Vec::new();
    for entry in std::fs::read_dir(root).map_err(read_err)? {
        let entry = entry.map_err(read_err)?;
        if entry.file_type().map_err(read_err)?.is_dir() {
            dirs.push((entry.file_name().to_string_lossy().into_owned(), entry.path()));
        }
    }
    if dirs.is_empty() {
        return Err(CorpusError::EmptyCorpus(root.to_path_buf()));
    }
    dirs.sort();

    let mut bundles = Vec::new();
    let mut invalid = Vec::new();
    for (case_id, dir) in dirs {
        match load_case(&case_id, &dir) {
            Ok(bundle) => bundles.push(bundle),
            Err(reason) => invalid.push(InvalidCase { case_id, reason }),
        }
    }
    Ok(Corpus { root: root.to_path_buf(), bundles, invalid })
}

fn load_case(case_id: &str, dir: &Path) -> Result<CaseBundle, String> {
    let (image_path, media_type) = IMAGE_NAMES
        .iter()
        .map(|(name, media)| (dir.join(name), *media))
        .find(|(path, _)| path.is_file())
        .ok_or_else(|| "no roi.png or roi.jpg".to_string())?;
    validate_image(&image_path, media_type)?;

    let truth = match std::fs::read_to_string(dir.join("truth.json")) {
        Ok(text) => Some(parse_structured_json(&text).map_err(|e| format!("truth.json: {e}"))?),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => None,
        Err(e) => return Err(format!("truth.json: {e}")),
    };
    let truth_text = match std::fs::read_to_string(dir.join("truth.txt")) {
        Ok(text) => Some(text),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => None,
        Err(e) => return Err(format!("truth.txt: {e}")),
    };
    Ok(CaseBundle { case_id: case_id.to_string(), image_path, media_type, truth, truth_text })
}

fn validate_image(path: &Path, media_type: &str) -> Result<(), String> {
    let name = path.file_name().unwrap_or_default().to_string_lossy();
    let reader =
        image::ImageReader::open(path).and_then(|r| r.with_guessed_format()).map_err(|e| format!("{name}: {e}"))?;
    let expected = if media_type == "image/png" { ImageFormat::Png } else { ImageFormat::Jpeg };
    if reader.format() != Some(expected) {
        return Err(format!("{name}: content is not {media_type}"));
    }
    reader.decode().map_err(|e| format!("{name}: {e}"))?;
    Ok(())
}
