//! Outcome of a single numerical check.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// Named check with its pass flag, numeric metrics and free-form notes.
///
/// Metrics are kept in a sorted map so serialized reports are reproducible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub check_name: String,
    pub passed: bool,
    pub metrics: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl CheckReport {
    pub fn new(check_name: impl Into<String>) -> Self {
        Self { check_name: check_name.into(), passed: false, metrics: BTreeMap::new(), notes: Vec::new() }
    }

    pub fn metric(mut self, key: &str, value: f64) -> Self {
        self.metrics.insert(key.to_string(), value);
        self
    }

    pub fn note(mut self, text: impl Into<String>) -> Self {
        self.notes.push(text.into());
        self
    }

    pub fn passed(mut self, passed: bool) -> Self {
        self.passed = passed;
        self
    }

    /// Metric value, panicking on a missing key.
    pub fn get(&self, key: &str) -> f64 {
        *self.metrics.get(key).unwrap_or_else(|| panic!("report {} has no metric {key}", self.check_name))
    }
}

/// Serializes reports as a pretty JSON array with a trailing newline.
pub fn reports_to_json(reports: &[CheckReport]) -> String {
    let mut s = serde_json::to_string_pretty(reports).expect("reports serialize");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_through_json() {
        let r = CheckReport::new("demo").metric("b", 2.0).metric("a", 0.1).note("n").passed(true);
        let s = reports_to_json(std::slice::from_ref(&r));
        assert!(s.find("\"a\"").unwrap() < s.find("\"b\"").unwrap());
        let back: Vec<CheckReport> = serde_json::from_str(&s).unwrap();
        assert_eq!(back, vec![r]);
    }
}
