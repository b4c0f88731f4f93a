use serde::Serialize;

use super::hypothesis::{test_paired, PairedTest};
use super::score::{category_index, CaseScore};
use super::EvalError;
use crate::schema::Category;

/// Mean and standard error of one category's binary scores.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub n: usize,
    pub correct: usize,
    pub mean: f64,
    pub se: f64,
}

impl Summary {
    /// Bessel-corrected standard error of a 0/1 sample: sqrt(p(1-p)/(n-1)).
    pub fn from_bits(bits: impl IntoIterator<Item = u8>) -> Result<Summary, EvalError> {
        let (mut n, mut correct) = (0usize, 0usize);
        for b in bits {
            n += 1;
            correct += b as usize;
        }
        if n < 2 {
            return Err(EvalError::InsufficientCases { needed: 2, got: n });
        }
        let mean = correct as f64 / n as f64;
        let se = (mean * (1.0 - mean) / (n as f64 - 1.0)).sqrt();
        Ok(Summary { n, correct, mean, se })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CategorySummary {
    pub category: Category,
    #[serde(flatten)]
    pub summary: Summary,
}

/// Per-category means and SEs of one method, in report order.
pub fn aggregate(scores: &[CaseScore]) -> Result<Vec<CategorySummary>, EvalError> {
    Category::ALL
        .into_iter()
        .map(|category| {
            let summary = Summary::from_bits(scores.iter().map(|s| s.bit(category)))?;
            Ok(CategorySummary { category, summary })
        })
        .collect()
}

pub fn round3(x: f64) -> f64 {
    (x * 1000.0).round() / 1000.0
}

/// Absolute improvement and improvement rate (percent) from two means.
///
/// Both are computed from the means as printed, i.e. rounded to three
/// decimals, so 0.136 → 0.227 gives +0.091 and +66.9 %. The rate is `None`
/// when the rounded baseline mean is zero.
pub fn improvement(baseline_mean: f64, proposed_mean: f64) -> (f64, Option<f64>) {
    let b = round3(baseline_mean);
    let absolute = round3(round3(proposed_mean) - b);
    let rate = (b != 0.0).then(|| absolute / b * 100.0);
    (absolute, rate)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CategoryComparison {
    pub category: Category,
    pub baseline: Summary,
    pub proposed: Summary,
    pub absolute_improvement: f64,
    pub improvement_rate: Option<f64>,
    pub p_value: Option<f64>,
    pub test: Option<PairedTest>,
}

/// Paired per-category comparison. Both lists must hold the same case ids
/// in the same order.
pub fn compare(baseline: &[CaseScore], proposed: &[CaseScore]) -> Result<Vec<CategoryComparison>, EvalError> {
    if baseline.len() != proposed.len() {
        return Err(EvalError::CaseIdMismatch {
            index: baseline.len().min(proposed.len()),
            baseline: baseline.get(proposed.len()).map(|s| s.case_id.clone()),
            proposed: proposed.get(baseline.len()).map(|s| s.case_id.clone()),
        });
    }
    if let Some((index, (b, p))) = baseline.iter().zip(proposed).enumerate().find(|(_, (b, p))| b.case_id != p.case_id)
    {
        return Err(EvalError::CaseIdMismatch {
            index,
            baseline: Some(b.case_id.clone()),
            proposed: Some(p.case_id.clone()),
        });
    }
    let base = aggregate(baseline)?;
    let prop = aggregate(proposed)?;
    Category::ALL
        .into_iter()
        .map(|category| {
            let i = category_index(category);
            let (absolute_improvement, improvement_rate) = improvement(base[i].summary.mean, prop[i].summary.mean);
            let diffs: Vec<f64> =
                baseline.iter().zip(proposed).map(|(b, p)| p.bits[i] as f64 - b.bits[i] as f64).collect();
            let outcome = test_paired(&diffs)?;
            Ok(CategoryComparison {
                category,
                baseline: base[i].summary,
                proposed: prop[i].summary,
                absolute_improvement,
                improvement_rate,
                p_value: outcome.map(|o| o.p_value),
                test: outcome.map(|o| o.test),
            })
        })
        .collect()
}
