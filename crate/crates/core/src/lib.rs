//! Self-correcting structured-output pipeline for jaw-cyst findings on dental
//! panoramic radiographs.
//!
//! The pipeline drives a vision-language backend through two verification
//! loops: structured data is checked against tooth numbers read directly off
//! the image, then the generated finding is converted back into structured
//! data and compared with the approved record. [`eval`] scores outputs
//! against ground truth and compares two methods per category.

pub mod backend;
pub mod consistency;
pub mod eval;
pub mod orchestrator;
pub mod prompts;
pub mod schema;
