use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::write_jsonl;
use crate::error::{Error, Result};

/// Probabilities one model assigned to one altered sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    #[serde(rename = "id")]
    pub sample_id: String,
    pub group: String,
    pub probabilities: BTreeMap<String, f64>,
}

impl PredictionRecord {
    pub fn probability(&self, label: &str) -> Option<f64> {
        self.probabilities.get(label).copied()
    }
}

/// Sorts records by group name, then sample id.
pub fn sort_records(records: &mut [PredictionRecord]) {
    records.sort_by(|a, b| (&a.group, &a.sample_id).cmp(&(&b.group, &b.sample_id)));
}

/// Checks the per-run record invariants: probabilities in [0, 1], one label
/// set shared by every record, and no duplicate `(id, group)` pair.
pub fn validate_records(records: &[PredictionRecord]) -> Result<()> {
    let mut seen = HashSet::with_capacity(records.len());
    let mut labels: Option<BTreeSet<&String>> = None;
    for r in records {
        if !seen.insert((&r.sample_id, &r.group)) {
            return Err(Error::validation(format!(
                "duplicate prediction for id {:?} in group {:?}",
                r.sample_id, r.group
            )));
        }
        check_probabilities(r)?;
        let these: BTreeSet<&String> = r.probabilities.keys().collect();
        match &labels {
            None => labels = Some(these),
            Some(l) if *l != these => {
                return Err(Error::validation(format!(
                    "record ({}, {}) has a different label set than earlier records",
                    r.group, r.sample_id
                )))
            }
            _ => {}
        }
    }
    Ok(())
}

fn check_probabilities(r: &PredictionRecord) -> Result<()> {
    for (label, p) in &r.probabilities {
        if !(0.0..=1.0).contains(p) {
            return Err(Error::validation(format!(
                "probability {p} for label {label:?} of ({}, {}) is outside [0, 1]",
                r.group, r.sample_id
            )));
        }
    }
    Ok(())
}

pub fn save_predictions(records: &[PredictionRecord], path: impl AsRef<Path>) -> Result<()> {
    write_jsonl(path.as_ref(), records)
}

pub fn load_predictions(path: impl AsRef<Path>) -> Result<Vec<PredictionRecord>> {
    let path = path.as_ref();
    let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in raw.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            path: path.to_owned(),
            line: i + 1,
            message,
        };
        let record: PredictionRecord =
            serde_json::from_str(line).map_err(|e| parse_err(e.to_string()))?;
        if !seen.insert((record.sample_id.clone(), record.group.clone())) {
            return Err(Error::validation(format!(
                "{}: duplicate prediction for id {:?} in group {:?} on line {}",
                path.display(),
                record.sample_id,
                record.group,
                i + 1
            )));
        }
        check_probabilities(&record).map_err(|e| parse_err(e.to_string()))?;
        records.push(record);
    }
    validate_records(&records)?;
    Ok(records)
}
