use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    Pass,
    Fail,
    Inconclusive,
}

/// One structural condition evaluated on a finite sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckEntry {
    pub name: String,
    pub status: CheckStatus,
    /// Worst sample point, as `(x, u)` for reactions or `(x, _)` for profiles.
    pub worst_point: Option<(f64, f64)>,
    /// Size of the worst violation (0 when nothing was violated).
    pub worst_violation: f64,
    pub detail: String,
}

/// Outcome of validating a reaction term or an initial profile on sample grids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct ValidationReport {
    pub entries: Vec<CheckEntry>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.entries.iter().all(|e| e.status == CheckStatus::Pass)
    }

    pub fn entry(&self, name: &str) -> Option<&CheckEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    pub fn status(&self, name: &str) -> Option<CheckStatus> {
        self.entry(name).map(|e| e.status)
    }

    pub(crate) fn push(&mut self, entry: CheckEntry) {
        self.entries.push(entry);
    }
}

/// Tracks the worst violation while scanning a sample grid.
#[derive(Debug, Default)]
pub(crate) struct WorstTracker {
    pub worst: f64,
    pub point: Option<(f64, f64)>,
}

impl WorstTracker {
    pub fn observe(&mut self, violation: f64, point: (f64, f64)) {
        if violation.is_nan() || violation > self.worst || (self.point.is_none() && violation > 0.0) {
            self.worst = if violation.is_nan() { f64::INFINITY } else { violation };
            self.point = Some(point);
        }
    }

    pub fn into_entry(self, name: &str, tolerance: f64, detail: impl Into<String>) -> CheckEntry {
        let status = if self.worst <= tolerance {
            CheckStatus::Pass
        } else {
            CheckStatus::Fail
        };
        CheckEntry {
            name: name.to_string(),
            status,
            worst_point: self.point,
            worst_violation: self.worst,
            detail: detail.into(),
        }
    }
}
