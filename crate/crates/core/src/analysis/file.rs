use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::baseline::BaselineDistribution;
use super::means::{deviation, DeviationMatrix, GroupMeans};
use crate::error::{Error, Result};
use crate::perturb::write_json;

pub const ANALYSIS_FILE: &str = "analysis.json";
pub const BASELINE_FILE: &str = "baseline.json";

type Table<T> = BTreeMap<String, BTreeMap<String, T>>;

/// On-disk form of an analysis: means and deviations keyed by group, then
/// label. `groups` keeps the display order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisFile {
    pub characteristic: String,
    pub cohort_size: usize,
    pub groups: Vec<String>,
    pub labels: Vec<String>,
    pub means: Table<f64>,
    pub deviations: Table<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub counts: Option<Table<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group_sizes: Option<BTreeMap<String, usize>>,
}

fn table<T: Copy>(groups: &[String], labels: &[String], cells: &[Vec<T>]) -> Table<T> {
    groups
        .iter()
        .zip(cells)
        .map(|(g, row)| (g.clone(), labels.iter().cloned().zip(row.iter().copied()).collect()))
        .collect()
}

fn untable(t: &Table<f64>, groups: &[String], labels: &[String], what: &str) -> Result<Vec<Vec<f64>>> {
    groups
        .iter()
        .map(|g| {
            let row = t
                .get(g)
                .ok_or_else(|| Error::validation(format!("{what}: missing group {g:?}")))?;
            labels
                .iter()
                .map(|l| {
                    row.get(l).copied().ok_or_else(|| {
                        Error::validation(format!("{what}: missing ({g}, {l})"))
                    })
                })
                .collect()
        })
        .collect()
}

impl AnalysisFile {
    pub fn new(means: &GroupMeans, deviations: &DeviationMatrix) -> Self {
        AnalysisFile {
            characteristic: means.characteristic.clone(),
            cohort_size: means.cohort_size,
            groups: means.groups.clone(),
            labels: means.labels.clone(),
            means: table(&means.groups, &means.labels, &means.means),
            deviations: table(&deviations.groups, &deviations.labels, &deviations.cells),
            counts: None,
            group_sizes: None,
        }
    }

    pub fn from_means(means: &GroupMeans) -> Result<Self> {
        Ok(Self::new(means, &deviation(means)?))
    }

    pub fn from_baseline(baseline: &BaselineDistribution) -> Result<Self> {
        let means = baseline.as_means()?;
        let mut file = Self::from_means(&means)?;
        file.counts = Some(table(&baseline.groups, &baseline.labels, &baseline.counts));
        file.group_sizes = Some(
            baseline
                .groups
                .iter()
                .cloned()
                .zip(baseline.group_sizes.iter().copied())
                .collect(),
        );
        Ok(file)
    }

    pub fn group_means(&self) -> Result<GroupMeans> {
        GroupMeans::new(
            self.characteristic.clone(),
            self.groups.clone(),
            self.labels.clone(),
            untable(&self.means, &self.groups, &self.labels, "means")?,
            self.cohort_size,
        )
    }

    pub fn deviation_matrix(&self) -> Result<DeviationMatrix> {
        DeviationMatrix::new(
            self.characteristic.clone(),
            self.groups.clone(),
            self.labels.clone(),
            untable(&self.deviations, &self.groups, &self.labels, "deviations")?,
        )
    }

    /// The observed distribution stored in a baseline file, `None` for a
    /// model analysis.
    pub fn baseline(&self) -> Option<BaselineDistribution> {
        let counts = self.counts.as_ref()?;
        let sizes = self.group_sizes.as_ref()?;
        let rows = self
            .groups
            .iter()
            .map(|g| {
                let row = counts.get(g)?;
                self.labels.iter().map(|l| row.get(l).copied()).collect::<Option<Vec<_>>>()
            })
            .collect::<Option<Vec<_>>>()?;
        Some(BaselineDistribution {
            characteristic: self.characteristic.clone(),
            groups: self.groups.clone(),
            labels: self.labels.clone(),
            group_sizes: self.groups.iter().map(|g| sizes.get(g).copied()).collect::<Option<_>>()?,
            counts: rows,
            empty_groups: Vec::new(),
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_json(path.as_ref(), self)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: AnalysisFile = serde_json::from_str(&raw).map_err(|e| Error::Parse {
            path: path.to_owned(),
            line: e.line(),
            message: e.to_string(),
        })?;
        file.group_means()?;
        file.deviation_matrix()?;
        Ok(file)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let means = GroupMeans::new(
            "gender",
            vec!["male".into(), "female".into()],
            vec!["a".into(), "b".into()],
            vec![vec![0.1 + 0.2, 1.0 / 3.0], vec![0.7, 2e-17]],
            5,
        )
        .unwrap();
        let file = AnalysisFile::from_means(&means).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(ANALYSIS_FILE);
        file.save(&path).unwrap();
        let back = AnalysisFile::load(&path).unwrap();
        assert_eq!(back, file);
        assert_eq!(back.group_means().unwrap(), means);
        assert_eq!(back.groups, ["male", "female"]);
        assert!(back.baseline().is_none());
    }

    #[test]
    fn baseline_counts_survive() {
        let b = BaselineDistribution {
            characteristic: "gender".into(),
            groups: vec!["female".into(), "male".into()],
            labels: vec!["x".into()],
            group_sizes: vec![4, 2],
            counts: vec![vec![1], vec![2]],
            empty_groups: Vec::new(),
        };
        let file = AnalysisFile::from_baseline(&b).unwrap();
        assert_eq!(file.baseline().unwrap(), b);
        assert_eq!(file.means["male"]["x"], 1.0);
        assert_eq!(file.deviations["female"]["x"], -0.75);
    }
}
