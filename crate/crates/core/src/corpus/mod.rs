//! Clinical notes, outcome labels, and their JSONL storage.

mod synthetic;

use std::collections::{BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use synthetic::{generate_synthetic_corpus, SyntheticProfile, DEFAULT_DIAGNOSES, MORTALITY};

/// One admission note.
///
/// Labels are ground-truth outcomes. They feed baseline distributions and
/// AUROC only; behavioral tests never compare altered notes against them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatientNote {
    pub id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<BTreeSet<String>>,
}

impl PatientNote {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        PatientNote {
            id: id.into(),
            text: text.into(),
            labels: None,
        }
    }

    pub fn with_labels<I, S>(mut self, labels: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.labels = Some(labels.into_iter().map(Into::into).collect());
        self
    }

    pub fn has_label(&self, label: &str) -> bool {
        self.labels.as_ref().is_some_and(|l| l.contains(label))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    notes: Vec<PatientNote>,
    label_vocabulary: Vec<String>,
}

impl Corpus {
    /// Builds a corpus, deriving the label vocabulary (sorted union of all
    /// note labels) when none is given.
    pub fn new(notes: Vec<PatientNote>, vocabulary: Option<Vec<String>>) -> Result<Self> {
        let mut seen = HashMap::with_capacity(notes.len());
        for (i, note) in notes.iter().enumerate() {
            validate_note(note)?;
            if let Some(first) = seen.insert(note.id.as_str(), i) {
                return Err(Error::validation(format!(
                    "duplicate note id {:?} at positions {} and {}",
                    note.id,
                    first + 1,
                    i + 1
                )));
            }
        }
        let derived: BTreeSet<&str> = notes
            .iter()
            .flat_map(|n| n.labels.iter().flatten())
            .map(String::as_str)
            .collect();
        let label_vocabulary = match vocabulary {
            None => derived.into_iter().map(str::to_owned).collect(),
            Some(vocab) => {
                let known: BTreeSet<&str> = vocab.iter().map(String::as_str).collect();
                if known.len() != vocab.len() {
                    return Err(Error::validation("label vocabulary contains duplicates"));
                }
                if let Some(unknown) = derived.iter().find(|l| !known.contains(*l)) {
                    return Err(Error::validation(format!(
                        "label {unknown:?} is not in the label vocabulary"
                    )));
                }
                vocab
            }
        };
        Ok(Corpus {
            notes,
            label_vocabulary,
        })
    }

    pub fn notes(&self) -> &[PatientNote] {
        &self.notes
    }

    pub fn label_vocabulary(&self) -> &[String] {
        &self.label_vocabulary
    }

    pub fn len(&self) -> usize {
        self.notes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.notes.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&PatientNote> {
        self.notes.iter().find(|n| n.id == id)
    }

    /// True when at least one note carries a label set.
    pub fn is_labeled(&self) -> bool {
        self.notes.iter().any(|n| n.labels.is_some())
    }

    /// Number of notes carrying each vocabulary label, in vocabulary order.
    pub fn label_frequencies(&self) -> Vec<(String, usize)> {
        self.label_vocabulary
            .iter()
            .map(|l| (l.clone(), self.notes.iter().filter(|n| n.has_label(l)).count()))
            .collect()
    }
}

fn validate_note(note: &PatientNote) -> Result<()> {
    if note.id.is_empty() {
        return Err(Error::validation("note id must be non-empty"));
    }
    if note.text.is_empty() {
        return Err(Error::validation(format!("note {:?} has empty text", note.id)));
    }
    Ok(())
}

/// Reads a JSONL notes file. Blank lines are skipped; line numbers in
/// errors are 1-based physical lines.
pub fn load_corpus(path: impl AsRef<Path>, vocabulary: Option<&Path>) -> Result<Corpus> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut notes = Vec::new();
    let mut first_line: HashMap<String, usize> = HashMap::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let note: PatientNote = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.to_owned(),
            line: line_no,
            message: e.to_string(),
        })?;
        validate_note(&note).map_err(|e| Error::Parse {
            path: path.to_owned(),
            line: line_no,
            message: e.to_string(),
        })?;
        if let Some(first) = first_line.get(&note.id) {
            return Err(Error::validation(format!(
                "{}: duplicate note id {:?} on line {line_no} (first seen on line {first})",
                path.display(),
                note.id
            )));
        }
        first_line.insert(note.id.clone(), line_no);
        notes.push(note);
    }
    let vocab = match vocabulary {
        Some(vpath) => {
            let raw = std::fs::read_to_string(vpath).map_err(|e| Error::io(vpath, e))?;
            let labels: Vec<String> = serde_json::from_str(&raw).map_err(|e| Error::Parse {
                path: vpath.to_owned(),
                line: e.line(),
                message: e.to_string(),
            })?;
            Some(labels)
        }
        None => None,
    };
    Corpus::new(notes, vocab)
}

pub fn save_corpus(corpus: &Corpus, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    write_jsonl(path, corpus.notes())
}

pub(crate) fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for row in rows {
        serde_json::to_writer(&mut out, row).map_err(|e| Error::io(path, e.into()))?;
        out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}
