use serde::Serialize;

use crate::schema::{Category, CystStructuredData};

/// Row label used in evaluation reports.
pub fn report_label(category: Category) -> &'static str {
    match category {
        Category::Radiolucency => "Radiolucency",
        Category::InternalStructure => "Internal structure",
        Category::Boundary => "Boundary",
        Category::RootResorption => "Root resorption",
        Category::ToothDisplacement => "Tooth displacement",
        Category::AnatomicalRelation => "Relationship with other structures",
        Category::AffectedTeeth => "Tooth number",
    }
}

/// Binary per-category score of one case, bits in [`Category::ALL`] order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CaseScore {
    pub case_id: String,
    pub bits: [u8; 7],
}

impl CaseScore {
    pub fn new(case_id: impl Into<String>, bits: [u8; 7]) -> CaseScore {
        assert!(bits.iter().all(|b| *b <= 1), "score bits must be 0 or 1");
        CaseScore { case_id: case_id.into(), bits }
    }

    pub fn bit(&self, category: Category) -> u8 {
        self.bits[category_index(category)]
    }

    pub fn correct(&self) -> usize {
        self.bits.iter().map(|b| *b as usize).sum()
    }

    pub fn category_mean(&self) -> f64 {
        self.correct() as f64 / 7.0
    }
}

pub(crate) fn category_index(category: Category) -> usize {
    Category::ALL.iter().position(|c| *c == category).expect("category listed in ALL")
}

/// Scores `result` against `truth`. Enumerated fields compare by canonical
/// value; the tooth category scores 1 only on exact set equality.
pub fn score_case(case_id: &str, result: &CystStructuredData, truth: &CystStructuredData) -> CaseScore {
    let mut bits = [0u8; 7];
    for (i, category) in Category::ALL.into_iter().enumerate() {
        let same = match category {
            Category::AffectedTeeth => result.affected_teeth() == truth.affected_teeth(),
            other => result.value_of(other) == truth.value_of(other),
        };
        bits[i] = same as u8;
    }
    CaseScore::new(case_id, bits)
}
