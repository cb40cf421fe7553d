//! Per-meter categorical labels (feeder ids or phases), partially known.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::MeterId;

/// Labels for a set of meters with a known/unknown mask and confidences.
///
/// A meter marked known always carries a label; externally recorded labels
/// default to confidence 1.0.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LabelSet {
    labels: BTreeMap<MeterId, String>,
    known: BTreeMap<MeterId, bool>,
    confidence: BTreeMap<MeterId, f64>,
}

impl LabelSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records a known label with confidence 1.0.
    pub fn insert_known(&mut self, meter: impl Into<MeterId>, label: impl Into<String>) {
        self.insert_with_confidence(meter, label, 1.0);
    }

    pub fn insert_with_confidence(
        &mut self,
        meter: impl Into<MeterId>,
        label: impl Into<String>,
        confidence: f64,
    ) {
        let meter = meter.into();
        self.labels.insert(meter.clone(), label.into());
        self.known.insert(meter.clone(), true);
        self.confidence.insert(meter, confidence.clamp(0.0, 1.0));
    }

    /// Registers a meter whose label is not known.
    pub fn insert_unknown(&mut self, meter: impl Into<MeterId>) {
        let meter = meter.into();
        self.labels.remove(&meter);
        self.known.insert(meter.clone(), false);
        self.confidence.insert(meter, 0.0);
    }

    pub fn label(&self, meter: &str) -> Option<&str> {
        self.labels.get(meter).map(String::as_str)
    }

    pub fn is_known(&self, meter: &str) -> bool {
        self.known.get(meter).copied().unwrap_or(false)
    }

    pub fn confidence(&self, meter: &str) -> f64 {
        self.confidence.get(meter).copied().unwrap_or(0.0)
    }

    pub fn contains(&self, meter: &str) -> bool {
        self.known.contains_key(meter)
    }

    pub fn len(&self) -> usize {
        self.known.len()
    }

    pub fn is_empty(&self) -> bool {
        self.known.is_empty()
    }

    /// All registered meters, sorted.
    pub fn meters(&self) -> impl Iterator<Item = &MeterId> {
        self.known.keys()
    }

    pub fn known_meters(&self) -> impl Iterator<Item = &MeterId> {
        self.known.iter().filter(|(_, &k)| k).map(|(m, _)| m)
    }

    pub fn unknown_meters(&self) -> impl Iterator<Item = &MeterId> {
        self.known.iter().filter(|(_, &k)| !k).map(|(m, _)| m)
    }

    pub fn known_count(&self) -> usize {
        self.known.values().filter(|&&k| k).count()
    }

    /// Distinct labels among known meters, sorted.
    pub fn categories(&self) -> Vec<String> {
        let mut cats: Vec<String> = self
            .known_meters()
            .filter_map(|m| self.label(m).map(str::to_string))
            .collect();
        cats.sort();
        cats.dedup();
        cats
    }

    /// Fails unless every meter is known and labeled.
    pub fn require_fully_labeled(&self) -> Result<()> {
        for m in self.meters() {
            if !self.is_known(m) || self.label(m).is_none() {
                return Err(Error::MeterSetMismatch(format!("meter {m} lacks a label")));
            }
        }
        Ok(())
    }

    /// Checks the "known implies labeled" invariant after deserialization.
    pub fn validate(&self) -> Result<()> {
        for (m, &k) in &self.known {
            if k && !self.labels.contains_key(m) {
                return Err(Error::Parse(format!("meter {m} marked known without a label")));
            }
        }
        Ok(())
    }

    /// Restriction to the meters accepted by the predicate.
    pub fn filtered(&self, keep: impl Fn(&str) -> bool) -> LabelSet {
        let mut out = LabelSet::new();
        for m in self.meters() {
            if keep(m) {
                if self.is_known(m) {
                    out.insert_with_confidence(m.clone(), self.label(m).unwrap(), self.confidence(m));
                } else {
                    out.insert_unknown(m.clone());
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_implies_label() {
        let mut ls = LabelSet::new();
        ls.insert_known("m001", "F1");
        ls.insert_unknown("m002");
        assert!(ls.is_known("m001"));
        assert_eq!(ls.label("m001"), Some("F1"));
        assert!(!ls.is_known("m002"));
        assert_eq!(ls.label("m002"), None);
        assert_eq!(ls.confidence("m001"), 1.0);
        ls.validate().unwrap();
    }

    #[test]
    fn categories_sorted_distinct() {
        let mut ls = LabelSet::new();
        ls.insert_known("m2", "B");
        ls.insert_known("m1", "A");
        ls.insert_known("m3", "A");
        assert_eq!(ls.categories(), vec!["A".to_string(), "B".to_string()]);
    }
}
