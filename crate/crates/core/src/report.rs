use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// Outcome of checking one analytic hypothesis or numerical property,
/// together with the quantities it was decided on. Non-finite quantities
/// serialize as `null`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriterionReport {
    pub criterion: String,
    pub passed: bool,
    pub verdict: String,
    pub quantities: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl CriterionReport {
    pub fn new(criterion: impl Into<String>, passed: bool, verdict: impl Into<String>) -> Self {
        CriterionReport {
            criterion: criterion.into(),
            passed,
            verdict: verdict.into(),
            quantities: BTreeMap::new(),
            notes: Vec::new(),
        }
    }

    pub fn with(mut self, key: &str, value: f64) -> Self {
        self.quantities.insert(key.to_string(), value);
        self
    }

    pub fn note(mut self, text: impl Into<String>) -> Self {
        self.notes.push(text.into());
        self
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.quantities.get(key).copied()
    }
}
