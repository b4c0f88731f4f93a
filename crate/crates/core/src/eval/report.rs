use std::fmt::Write as _;
use std::str::FromStr;

use serde::Serialize;
use serde_json::json;

use super::score::report_label;
use super::stats::{round3, CategoryComparison, Summary};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Markdown,
    Csv,
    Json,
}

impl ReportFormat {
    pub const ALL: [ReportFormat; 3] = [ReportFormat::Markdown, ReportFormat::Csv, ReportFormat::Json];

    pub fn extension(self) -> &'static str {
        match self {
            ReportFormat::Markdown => "md",
            ReportFormat::Csv => "csv",
            ReportFormat::Json => "json",
        }
    }
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "md" | "markdown" => Ok(ReportFormat::Markdown),
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(format!("unknown report format {other:?}")),
        }
    }
}

/// A case whose run did not resolve cleanly; still scored, listed separately.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FlaggedCase {
    pub case_id: String,
    pub method: String,
    pub status: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluationReport {
    pub baseline_label: String,
    pub proposed_label: String,
    pub rows: Vec<CategoryComparison>,
    pub flagged: Vec<FlaggedCase>,
}

/// Formatted cells of one row; every rendering reads from these.
struct Cells {
    category: &'static str,
    baseline_mean: String,
    baseline_se: String,
    proposed_mean: String,
    proposed_se: String,
    absolute: String,
    rate: String,
    p_value: String,
}

fn fixed3(x: f64) -> String {
    // Adding 0.0 folds -0.0 into +0.0.
    format!("{:.3}", round3(x) + 0.0)
}

fn signed3(x: f64) -> String {
    format!("{:+.3}", round3(x) + 0.0)
}

fn mean_se(s: &Summary) -> (String, String) {
    (fixed3(s.mean), fixed3(s.se))
}

impl Cells {
    fn of(row: &CategoryComparison) -> Cells {
        let (baseline_mean, baseline_se) = mean_se(&row.baseline);
        let (proposed_mean, proposed_se) = mean_se(&row.proposed);
        Cells {
            category: report_label(row.category),
            baseline_mean,
            baseline_se,
            proposed_mean,
            proposed_se,
            absolute: signed3(row.absolute_improvement),
            rate: match row.improvement_rate {
                Some(r) => format!("{:+.1} %", (r * 10.0).round() / 10.0 + 0.0),
                None => "n/a".to_string(),
            },
            p_value: match row.p_value {
                Some(p) => fixed3(p),
                None => "n/a".to_string(),
            },
        }
    }
}

impl EvaluationReport {
    pub fn n(&self) -> usize {
        self.rows.first().map_or(0, |r| r.baseline.n)
    }

    pub fn render(&self, format: ReportFormat) -> String {
        match format {
            ReportFormat::Markdown => self.to_markdown(),
            ReportFormat::Csv => self.to_csv(),
            ReportFormat::Json => self.to_json(),
        }
    }

    pub fn to_markdown(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# Evaluation: {} vs {} (n = {})\n", self.baseline_label, self.proposed_label, self.n());
        let _ = writeln!(
            out,
            "| Interpretation category | {} (mean ± SE) | {} (mean ± SE) | Absolute improvement | Improvement rate | p-value |",
            self.baseline_label, self.proposed_label
        );
        out.push_str("|---|---|---|---|---|---|\n");
        for row in &self.rows {
            let c = Cells::of(row);
            let _ = writeln!(
                out,
                "| {} | {} ± {} | {} ± {} | {} | {} | {} |",
                c.category,
                c.baseline_mean,
                c.baseline_se,
                c.proposed_mean,
                c.proposed_se,
                c.absolute,
                c.rate,
                c.p_value
            );
        }
        out.push_str("\n## Flagged cases\n\n");
        if self.flagged.is_empty() {
            out.push_str("None.\n");
        }
        for f in &self.flagged {
            let _ = writeln!(out, "- {} ({}): {}", f.case_id, f.method, f.status);
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "category,baseline_mean,baseline_se,proposed_mean,proposed_se,absolute_improvement,improvement_rate,p_value\n",
        );
        for row in &self.rows {
            let c = Cells::of(row);
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                c.category,
                c.baseline_mean,
                c.baseline_se,
                c.proposed_mean,
                c.proposed_se,
                c.absolute,
                c.rate,
                c.p_value
            );
        }
        out
    }

    pub fn to_json(&self) -> String {
        let rows: Vec<_> = self
            .rows
            .iter()
            .map(|row| {
                let c = Cells::of(row);
                json!({
                    "category": row.category,
                    "label": c.category,
                    "cells": {
                        "baseline_mean": c.baseline_mean,
                        "baseline_se": c.baseline_se,
                        "proposed_mean": c.proposed_mean,
                        "proposed_se": c.proposed_se,
                        "absolute_improvement": c.absolute,
                        "improvement_rate": c.rate,
                        "p_value": c.p_value,
                    },
                    "baseline": row.baseline,
                    "proposed": row.proposed,
                    "absolute_improvement": row.absolute_improvement,
                    "improvement_rate": row.improvement_rate,
                    "p_value": row.p_value,
                    "test": row.test,
                })
            })
            .collect();
        let doc = json!({
            "baseline": self.baseline_label,
            "proposed": self.proposed_label,
            "n": self.n(),
            "rows": rows,
            "flagged": self.flagged,
        });
        let mut text = serde_json::to_string_pretty(&doc).expect("report serializes");
        text.push('\n');
        text
    }
}
