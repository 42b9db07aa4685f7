use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::alter::{alter_with, AlterOp, Outcome};
use super::builtin;
use super::spec::{CharacteristicSpec, CompiledSpec};
use crate::corpus::{write_jsonl, Corpus};
use crate::error::{Error, Result};
use crate::par::{self, Execution};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlteredSample {
    pub id: String,
    pub text: String,
    pub op: AlterOp,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupSamples {
    pub name: String,
    pub samples: Vec<AlteredSample>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExcludedSample {
    pub id: String,
    /// First group the sample could not be rewritten to.
    pub group: String,
    pub reason: String,
}

/// One altered copy of the cohort per test group.
///
/// Every group holds the same sample ids in corpus order; samples that
/// could not join some group are listed in `excluded` instead.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupedDataset {
    pub characteristic: String,
    pub groups: Vec<GroupSamples>,
    pub excluded: Vec<ExcludedSample>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpLogEntry {
    pub id: String,
    pub ops: BTreeMap<String, AlterOp>,
}

impl GroupedDataset {
    pub fn group_names(&self) -> Vec<&str> {
        self.groups.iter().map(|g| g.name.as_str()).collect()
    }

    pub fn group(&self, name: &str) -> Option<&GroupSamples> {
        self.groups.iter().find(|g| g.name == name)
    }

    /// Cohort sample ids in corpus order.
    pub fn ids(&self) -> Vec<&str> {
        self.groups
            .first()
            .map(|g| g.samples.iter().map(|s| s.id.as_str()).collect())
            .unwrap_or_default()
    }

    pub fn cohort_size(&self) -> usize {
        self.groups.first().map_or(0, |g| g.samples.len())
    }

    pub fn excluded_ids(&self) -> Vec<&str> {
        self.excluded.iter().map(|e| e.id.as_str()).collect()
    }

    pub fn op_log(&self) -> Vec<OpLogEntry> {
        let n = self.cohort_size();
        (0..n)
            .map(|i| OpLogEntry {
                id: self.groups[0].samples[i].id.clone(),
                ops: self
                    .groups
                    .iter()
                    .map(|g| (g.name.clone(), g.samples[i].op))
                    .collect(),
            })
            .collect()
    }

    /// Checks that every group carries the same ids in the same order and
    /// that no excluded id is in the cohort.
    pub fn check_cohort(&self) -> Result<()> {
        let ids = self.ids();
        for g in &self.groups {
            if g.samples.len() != ids.len()
                || g.samples.iter().zip(&ids).any(|(s, id)| s.id != *id)
            {
                return Err(Error::validation(format!(
                    "group {:?} does not hold the same samples as group {:?}",
                    g.name, self.groups[0].name
                )));
            }
        }
        let cohort: BTreeSet<&str> = ids.iter().copied().collect();
        if cohort.len() != ids.len() {
            return Err(Error::validation("duplicate sample id in cohort"));
        }
        if let Some(e) = self.excluded.iter().find(|e| cohort.contains(e.id.as_str())) {
            return Err(Error::validation(format!(
                "sample {:?} is both excluded and in the cohort",
                e.id
            )));
        }
        Ok(())
    }
}

pub fn generate_groups(corpus: &Corpus, spec: &CompiledSpec) -> Result<GroupedDataset> {
    generate_groups_with(corpus, spec, Execution::default())
}

/// Applies every group's alteration to every note. A note excluded from
/// any group is dropped from all of them.
pub fn generate_groups_with(
    corpus: &Corpus,
    spec: &CompiledSpec,
    exec: Execution,
) -> Result<GroupedDataset> {
    if corpus.is_empty() {
        return Err(Error::validation("cannot generate test groups from an empty corpus"));
    }
    let group_count = spec.spec().groups.len();
    let per_note = par::map(exec, corpus.notes(), |note| {
        let spans = spec.detect_text(&note.text);
        (0..group_count)
            .map(|gi| alter_with(&note.text, &spans, spec, gi))
            .collect::<Vec<_>>()
    });

    let mut groups: Vec<GroupSamples> = spec
        .spec()
        .groups
        .iter()
        .map(|g| GroupSamples {
            name: g.name.clone(),
            samples: Vec::with_capacity(corpus.len()),
        })
        .collect();
    let mut excluded = Vec::new();
    for (note, outcomes) in corpus.notes().iter().zip(per_note) {
        if let Some(ex) = outcomes.iter().find_map(|o| match o {
            Outcome::Excluded(e) => Some(e),
            Outcome::Altered(_) => None,
        }) {
            excluded.push(ExcludedSample {
                id: note.id.clone(),
                group: ex.group.clone(),
                reason: ex.reason.clone(),
            });
            continue;
        }
        for (group, outcome) in groups.iter_mut().zip(outcomes) {
            let alteration = outcome.altered().expect("exclusions handled above");
            group.samples.push(AlteredSample {
                id: note.id.clone(),
                text: alteration.text,
                op: alteration.op,
            });
        }
    }
    if excluded.len() == corpus.len() {
        log::warn!(
            "every note was excluded for characteristic {:?}; the cohort is empty",
            spec.name()
        );
    }
    Ok(GroupedDataset {
        characteristic: spec.name().to_string(),
        groups,
        excluded,
    })
}

/// The 73 age groups (18..=89 and over-90) with the default de-id token.
pub fn age_groups(corpus: &Corpus) -> Result<GroupedDataset> {
    let spec = builtin::age(builtin::DEFAULT_OVER90_TOKEN).compile()?;
    generate_groups(corpus, &spec)
}

pub const SPEC_FILE: &str = "characteristic.json";
pub const EXCLUDED_FILE: &str = "excluded.json";
pub const OPLOG_FILE: &str = "oplog.json";

/// Directory holding the files of one characteristic under a run directory.
pub fn characteristic_dir(out: &Path, characteristic: &str) -> PathBuf {
    out.join(characteristic)
}

pub(crate) fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let mut body = serde_json::to_string_pretty(value).map_err(|e| Error::io(path, e.into()))?;
    body.push('\n');
    fs::write(path, body).map_err(|e| Error::io(path, e))
}

/// Writes `<out>/<characteristic>/<group>.jsonl` for every group, plus the
/// exclusion list, the op log and the spec used.
pub fn write_grouped_dataset(
    dataset: &GroupedDataset,
    spec: &CharacteristicSpec,
    out: &Path,
) -> Result<PathBuf> {
    let dir = characteristic_dir(out, &dataset.characteristic);
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    for g in &dataset.groups {
        write_jsonl(&dir.join(format!("{}.jsonl", g.name)), &g.samples)?;
    }
    write_json(&dir.join(EXCLUDED_FILE), &dataset.excluded)?;
    write_json(&dir.join(OPLOG_FILE), &dataset.op_log())?;
    write_json(&dir.join(SPEC_FILE), spec)?;
    Ok(dir)
}

/// Reads back a directory written by [`write_grouped_dataset`].
pub fn read_grouped_dataset(dir: &Path) -> Result<(GroupedDataset, CharacteristicSpec)> {
    let spec = CharacteristicSpec::load(dir.join(SPEC_FILE))?;
    let mut groups = Vec::with_capacity(spec.groups.len());
    for g in &spec.groups {
        let path = dir.join(format!("{}.jsonl", g.name));
        let samples = read_jsonl::<AlteredSample>(&path)?;
        groups.push(GroupSamples {
            name: g.name.clone(),
            samples,
        });
    }
    let excluded_path = dir.join(EXCLUDED_FILE);
    let excluded = match fs::read_to_string(&excluded_path) {
        Ok(raw) => serde_json::from_str(&raw).map_err(|e| Error::Parse {
            path: excluded_path.clone(),
            line: e.line(),
            message: e.to_string(),
        })?,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Vec::new(),
        Err(e) => return Err(Error::io(&excluded_path, e)),
    };
    let dataset = GroupedDataset {
        characteristic: spec.name.clone(),
        groups,
        excluded,
    };
    dataset.check_cohort()?;
    Ok((dataset, spec))
}

pub(crate) fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let raw = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    raw.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::Parse {
                path: path.to_owned(),
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}
