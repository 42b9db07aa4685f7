use log::warn;

use super::means::{deviation, DeviationMatrix, GroupMeans};
use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::par::{self, Execution};
use crate::perturb::CompiledSpec;

/// Bucket for notes that mention no group of a characteristic without an
/// absent marker.
pub const NO_MENTION: &str = "no_mention";

/// Observed label prevalence per group, grouping unaltered notes by the
/// group they already mention.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineDistribution {
    pub characteristic: String,
    /// Groups with at least one note, in spec order (an implicit
    /// [`NO_MENTION`] bucket comes last).
    pub groups: Vec<String>,
    pub labels: Vec<String>,
    pub group_sizes: Vec<usize>,
    /// `counts[g][l]`: notes of group `g` carrying label `l`.
    pub counts: Vec<Vec<usize>>,
    /// Groups dropped because no note belongs to them.
    pub empty_groups: Vec<String>,
}

impl BaselineDistribution {
    pub fn prevalence(&self) -> Vec<Vec<f64>> {
        self.counts
            .iter()
            .zip(&self.group_sizes)
            .map(|(row, &n)| row.iter().map(|&c| c as f64 / n as f64).collect())
            .collect()
    }

    pub fn group_index(&self, group: &str) -> Option<usize> {
        self.groups.iter().position(|g| g == group)
    }

    pub fn total(&self) -> usize {
        self.group_sizes.iter().sum()
    }

    /// Prevalences shaped like model means, so the same deviation and
    /// reports apply.
    pub fn as_means(&self) -> Result<GroupMeans> {
        GroupMeans::new(
            self.characteristic.clone(),
            self.groups.clone(),
            self.labels.clone(),
            self.prevalence(),
            self.total(),
        )
    }

    pub fn deviation(&self) -> Result<DeviationMatrix> {
        deviation(&self.as_means()?)
    }
}

pub fn baseline_distribution(corpus: &Corpus, spec: &CompiledSpec) -> Result<BaselineDistribution> {
    baseline_distribution_with(corpus, spec, Execution::default())
}

pub fn baseline_distribution_with(
    corpus: &Corpus,
    spec: &CompiledSpec,
    exec: Execution,
) -> Result<BaselineDistribution> {
    if !corpus.is_labeled() {
        return Err(Error::validation(
            "baseline distribution needs a labeled corpus",
        ));
    }
    let mut groups: Vec<String> = spec.spec().group_names().into_iter().map(String::from).collect();
    let fallback = match spec.absent_marker() {
        Some(g) => spec.group_index(&g.name).expect("marker is a group"),
        None => {
            groups.push(NO_MENTION.to_string());
            groups.len() - 1
        }
    };
    let assigned: Vec<usize> = par::map(exec, corpus.notes(), |note| {
        let spans = spec.detect_text(&note.text);
        spec.resolve_group(&spans)
            .and_then(|g| spec.group_index(&g))
            .unwrap_or(fallback)
    });

    let labels = corpus.label_vocabulary().to_vec();
    let mut sizes = vec![0usize; groups.len()];
    let mut counts = vec![vec![0usize; labels.len()]; groups.len()];
    for (note, &g) in corpus.notes().iter().zip(&assigned) {
        sizes[g] += 1;
        for (l, label) in labels.iter().enumerate() {
            if note.has_label(label) {
                counts[g][l] += 1;
            }
        }
    }

    let mut out = BaselineDistribution {
        characteristic: spec.name().to_string(),
        groups: Vec::new(),
        labels,
        group_sizes: Vec::new(),
        counts: Vec::new(),
        empty_groups: Vec::new(),
    };
    for ((name, size), row) in groups.into_iter().zip(sizes).zip(counts) {
        if size == 0 {
            out.empty_groups.push(name);
        } else {
            out.groups.push(name);
            out.group_sizes.push(size);
            out.counts.push(row);
        }
    }
    if !out.empty_groups.is_empty() {
        warn!(
            "{}: no note belongs to {}; dropped from baseline",
            out.characteristic,
            out.empty_groups.join(", ")
        );
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::PatientNote;
    use crate::perturb::builtin;

    fn note(id: &str, text: &str, labels: &[&str]) -> PatientNote {
        PatientNote::new(id, text).with_labels(labels.iter().copied())
    }

    #[test]
    fn gender_buckets() {
        let corpus = Corpus::new(
            vec![
                note("1", "She is a 60 yo woman.", &["mortality"]),
                note("2", "60 yo man with cough.", &[]),
                note("3", "Patient admitted.", &["mortality"]),
                note("4", "He was seen today.", &["mortality"]),
            ],
            None,
        )
        .unwrap();
        let spec = builtin::gender().compile().unwrap();
        let b = baseline_distribution(&corpus, &spec).unwrap();
        assert_eq!(b.groups, ["female", "male", NO_MENTION]);
        assert_eq!(b.empty_groups, ["transgender"]);
        assert_eq!(b.group_sizes, [1, 2, 1]);
        assert_eq!(b.counts, [vec![1], vec![1], vec![1]]);
        assert_eq!(b.prevalence()[1], [0.5]);
        let d = b.deviation().unwrap();
        assert_eq!(d.get("male", "mortality"), Some(-0.5));
    }

    #[test]
    fn absent_marker_collects_unmentioned_notes() {
        let corpus = Corpus::new(
            vec![
                note("1", "58 yo African American F with sepsis.", &["mortality"]),
                note("2", "58 yo F with sepsis.", &[]),
            ],
            None,
        )
        .unwrap();
        let spec = builtin::ethnicity().compile().unwrap();
        let b = baseline_distribution_with(&corpus, &spec, Execution::Sequential).unwrap();
        assert_eq!(b.groups, ["no_mention", "african_american"]);
        assert_eq!(b.counts, [vec![0], vec![1]]);
    }

    #[test]
    fn unlabeled_corpus_is_rejected() {
        let corpus = Corpus::new(vec![PatientNote::new("1", "text")], None).unwrap();
        let spec = builtin::gender().compile().unwrap();
        assert!(baseline_distribution(&corpus, &spec).is_err());
    }
}
