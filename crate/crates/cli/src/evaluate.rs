use std::path::{Path, PathBuf};

use serde::Deserialize;
use slso_core::eval::{compare, score_case, CaseScore, EvaluationReport, FlaggedCase, ReportFormat};
use slso_core::orchestrator::{CaseStatus, Method};
use slso_core::schema::{parse_structured_json, CystStructuredData};

use crate::{write_file, CliError};

#[derive(Debug, Deserialize)]
struct StatusFile {
    status: CaseStatus,
    method: Method,
}

/// Outputs of one run directory, in case-id order.
struct RunCases {
    method: Option<Method>,
    cases: Vec<(String, StatusFile, Option<CystStructuredData>)>,
}

fn method_label(method: Option<Method>, fallback: &str) -> String {
    match method {
        Some(Method::Slso) => "SLSO".into(),
        Some(Method::Cot) => "CoT".into(),
        None => fallback.into(),
    }
}

fn read_run(dir: &Path) -> Result<RunCases, CliError> {
    let mut case_dirs: Vec<(String, PathBuf)> = std::fs::read_dir(dir)
        .map_err(|e| CliError::io(dir, e))?
        .filter_map(Result::ok)
        .map(|e| e.path())
        .filter(|p| p.join("status.json").is_file())
        .map(|p| (p.file_name().unwrap_or_default().to_string_lossy().into_owned(), p))
        .collect();
    case_dirs.sort();

    let mut cases = Vec::with_capacity(case_dirs.len());
    for (case_id, path) in case_dirs {
        let status_path = path.join("status.json");
        let text = std::fs::read_to_string(&status_path).map_err(|e| CliError::io(&status_path, e))?;
        let status: StatusFile =
            serde_json::from_str(&text).map_err(|e| CliError::Invalid(format!("{}: {e}", status_path.display())))?;
        let structured_path = path.join("structured.json");
        let structured = match std::fs::read_to_string(&structured_path) {
            Ok(text) => Some(
                parse_structured_json(&text)
                    .map_err(|e| CliError::Invalid(format!("{}: {e}", structured_path.display())))?,
            ),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => None,
            Err(e) => return Err(CliError::io(&structured_path, e)),
        };
        cases.push((case_id, status, structured));
    }
    let method = cases.first().map(|(_, s, _)| s.method);
    let method = method.filter(|m| cases.iter().all(|(_, s, _)| s.method == *m));
    Ok(RunCases { method, cases })
}

fn read_truth(truth_root: &Path, case_id: &str) -> Result<CystStructuredData, CliError> {
    let path = truth_root.join(case_id).join("truth.json");
    let text = std::fs::read_to_string(&path).map_err(|_| CliError::MissingTruth(case_id.to_string()))?;
    parse_structured_json(&text).map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))
}

/// Cases with no structured output score zero in every category.
fn score(case_id: &str, structured: Option<&CystStructuredData>, truth: &CystStructuredData) -> CaseScore {
    match structured {
        Some(data) => score_case(case_id, data, truth),
        None => CaseScore::new(case_id, [0; 7]),
    }
}

/// Scores run A (baseline) and run B (proposed) against the truth labels and
/// writes report.md, report.csv and report.json under `out`.
pub fn cmd_eval(run_a: &Path, run_b: &Path, truth_root: &Path, out: &Path) -> Result<EvaluationReport, CliError> {
    let a = read_run(run_a)?;
    let b = read_run(run_b)?;
    let ids_a: Vec<&str> = a.cases.iter().map(|c| c.0.as_str()).collect();
    let ids_b: Vec<&str> = b.cases.iter().map(|c| c.0.as_str()).collect();
    if ids_a != ids_b {
        let index = ids_a.iter().zip(&ids_b).position(|(x, y)| x != y).unwrap_or(ids_a.len().min(ids_b.len()));
        return Err(CliError::CaseIdMismatch {
            index,
            run_a: ids_a.get(index).map(|s| s.to_string()),
            run_b: ids_b.get(index).map(|s| s.to_string()),
        });
    }

    let (mut scores_a, mut scores_b, mut flagged) = (Vec::new(), Vec::new(), Vec::new());
    for ((case_id, status_a, data_a), (_, status_b, data_b)) in a.cases.iter().zip(&b.cases) {
        let truth = read_truth(truth_root, case_id)?;
        scores_a.push(score(case_id, data_a.as_ref(), &truth));
        scores_b.push(score(case_id, data_b.as_ref(), &truth));
        for (status, label) in [(status_a, "A"), (status_b, "B")] {
            if status.status != CaseStatus::Resolved {
                flagged.push(FlaggedCase {
                    case_id: case_id.clone(),
                    method: format!("run {label}, {}", method_label(Some(status.method), "")),
                    status: status.status.to_string(),
                });
            }
        }
    }

    let rows = compare(&scores_a, &scores_b).map_err(CliError::Eval)?;
    let report = EvaluationReport {
        baseline_label: method_label(a.method, "Run A"),
        proposed_label: method_label(b.method, "Run B"),
        rows,
        flagged,
    };
    std::fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    for format in ReportFormat::ALL {
        write_file(&out.join(format!("report.{}", format.extension())), &report.render(format))?;
    }
    Ok(report)
}
