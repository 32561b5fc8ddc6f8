//! Flat key-value reports produced by the condition checkers.

use alloc::string::String;
use alloc::vec::Vec;

/// One failed inequality, with the sample that exposed it.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub condition: &'static str,
    pub detail: String,
}

/// Constants and worst-case margins of a certificate, in insertion order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConditionReport {
    pub name: String,
    pub entries: Vec<(String, f64)>,
    pub violations: Vec<Violation>,
}

impl ConditionReport {
    pub fn new(name: impl Into<String>) -> Self {
        Self { name: name.into(), ..Self::default() }
    }

    pub fn set(&mut self, key: impl Into<String>, value: f64) {
        let key = key.into();
        match self.entries.iter_mut().find(|(k, _)| *k == key) {
            Some(slot) => slot.1 = value,
            None => self.entries.push((key, value)),
        }
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| *v)
    }

    pub fn violate(&mut self, condition: &'static str, detail: impl Into<String>) {
        self.violations.push(Violation { condition, detail: detail.into() });
    }

    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    /// Whether some violation concerns `condition`.
    pub fn violates(&self, condition: &str) -> bool {
        self.violations.iter().any(|v| v.condition == condition)
    }

    pub fn merge(&mut self, other: ConditionReport) {
        for (k, v) in other.entries {
            self.set(k, v);
        }
        self.violations.extend(other.violations);
    }
}
