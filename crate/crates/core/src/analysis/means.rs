use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result, SampleKey};
use crate::inference::{validate_records, PredictionRecord};

/// Mean predicted probability per (group, label) over one cohort.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupMeans {
    pub characteristic: String,
    pub groups: Vec<String>,
    pub labels: Vec<String>,
    /// `means[g][l]` for `groups[g]` and `labels[l]`.
    pub means: Vec<Vec<f64>>,
    pub cohort_size: usize,
}

fn check_shape(groups: &[String], labels: &[String], cells: &[Vec<f64>]) -> Result<()> {
    if cells.len() != groups.len() || cells.iter().any(|row| row.len() != labels.len()) {
        return Err(Error::validation(format!(
            "matrix shape does not match {} groups x {} labels",
            groups.len(),
            labels.len()
        )));
    }
    let unique = |v: &[String]| v.iter().collect::<BTreeSet<_>>().len() == v.len();
    if !unique(groups) || !unique(labels) {
        return Err(Error::validation("group and label names must be unique"));
    }
    Ok(())
}

impl GroupMeans {
    pub fn new(
        characteristic: impl Into<String>,
        groups: Vec<String>,
        labels: Vec<String>,
        means: Vec<Vec<f64>>,
        cohort_size: usize,
    ) -> Result<Self> {
        check_shape(&groups, &labels, &means)?;
        if cohort_size < 1 {
            return Err(Error::validation("cohort size must be at least 1"));
        }
        Ok(GroupMeans {
            characteristic: characteristic.into(),
            groups,
            labels,
            means,
            cohort_size,
        })
    }

    pub fn group_index(&self, group: &str) -> Option<usize> {
        self.groups.iter().position(|g| g == group)
    }

    pub fn label_index(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn mean(&self, group: &str, label: &str) -> Option<f64> {
        Some(self.means[self.group_index(group)?][self.label_index(label)?])
    }

    /// Same means with groups listed in `order` (every group exactly once).
    pub fn reorder_groups(&self, order: &[&str]) -> Result<Self> {
        let idx: Vec<usize> = order
            .iter()
            .map(|g| {
                self.group_index(g)
                    .ok_or_else(|| Error::validation(format!("unknown group {g:?}")))
            })
            .collect::<Result<_>>()?;
        if idx.len() != self.groups.len() || idx.iter().collect::<BTreeSet<_>>().len() != idx.len() {
            return Err(Error::validation("group order must list every group exactly once"));
        }
        Ok(GroupMeans {
            groups: idx.iter().map(|&i| self.groups[i].clone()).collect(),
            means: idx.iter().map(|&i| self.means[i].clone()).collect(),
            ..self.clone()
        })
    }
}

/// Averages the probabilities of every group over the shared cohort.
///
/// Groups come out sorted by name. Within a group the summation runs in
/// sample-id order, so the result does not depend on record order.
pub fn aggregate(characteristic: &str, records: &[PredictionRecord]) -> Result<GroupMeans> {
    if records.is_empty() {
        return Err(Error::validation("no prediction records to aggregate"));
    }
    validate_records(records)?;
    let mut by_group: BTreeMap<&str, BTreeMap<&str, &PredictionRecord>> = BTreeMap::new();
    for r in records {
        by_group
            .entry(r.group.as_str())
            .or_default()
            .insert(r.sample_id.as_str(), r);
    }
    let all_ids: BTreeSet<&str> = records.iter().map(|r| r.sample_id.as_str()).collect();
    let mut missing: Vec<SampleKey> = Vec::new();
    for (group, rows) in &by_group {
        for id in all_ids.iter().filter(|id| !rows.contains_key(*id)) {
            missing.push((group.to_string(), id.to_string()));
        }
    }
    if !missing.is_empty() {
        return Err(Error::IncompleteCohort { missing });
    }

    let labels: Vec<String> = records[0].probabilities.keys().cloned().collect();
    let n = all_ids.len();
    let means = by_group
        .values()
        .map(|rows| {
            labels
                .iter()
                .map(|label| {
                    let sum: f64 = rows.values().map(|r| r.probabilities[label]).sum();
                    sum / n as f64
                })
                .collect()
        })
        .collect();
    GroupMeans::new(
        characteristic,
        by_group.keys().map(|g| g.to_string()).collect(),
        labels,
        means,
        n,
    )
}

/// Per (group, label) deviation of a group's mean from the mean of all
/// other groups' means.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviationMatrix {
    pub characteristic: String,
    pub groups: Vec<String>,
    pub labels: Vec<String>,
    /// `cells[g][l]` for `groups[g]` and `labels[l]`.
    pub cells: Vec<Vec<f64>>,
}

impl DeviationMatrix {
    pub fn new(
        characteristic: impl Into<String>,
        groups: Vec<String>,
        labels: Vec<String>,
        cells: Vec<Vec<f64>>,
    ) -> Result<Self> {
        check_shape(&groups, &labels, &cells)?;
        Ok(DeviationMatrix {
            characteristic: characteristic.into(),
            groups,
            labels,
            cells,
        })
    }

    pub fn group_count(&self) -> usize {
        self.groups.len()
    }

    pub fn get(&self, group: &str, label: &str) -> Option<f64> {
        let g = self.groups.iter().position(|x| x == group)?;
        let l = self.labels.iter().position(|x| x == label)?;
        Some(self.cells[g][l])
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty() || self.labels.is_empty()
    }

    /// Largest absolute deviation, 0 for an all-zero matrix.
    pub fn max_abs(&self) -> f64 {
        self.cells
            .iter()
            .flatten()
            .fold(0.0_f64, |m, c| m.max(c.abs()))
    }
}

/// `c_i = p_i - (Σ_{j≠i} p_j) / (G - 1)` for every group `i` and label.
pub fn deviation(means: &GroupMeans) -> Result<DeviationMatrix> {
    let g = means.groups.len();
    if g < 2 {
        return Err(Error::validation(format!(
            "deviation needs at least 2 groups, got {g}"
        )));
    }
    let others = (g - 1) as f64;
    let cells = (0..g)
        .map(|i| {
            (0..means.labels.len())
                .map(|l| {
                    let rest: f64 = (0..g).filter(|&j| j != i).map(|j| means.means[j][l]).sum();
                    means.means[i][l] - rest / others
                })
                .collect()
        })
        .collect();
    DeviationMatrix::new(
        means.characteristic.clone(),
        means.groups.clone(),
        means.labels.clone(),
        cells,
    )
}
