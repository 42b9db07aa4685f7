//! Checks every alteration must satisfy, phrased as lists of violations so
//! callers can report all of them at once.

use std::collections::BTreeSet;

use noteprobe_core::corpus::{Corpus, PatientNote};
use noteprobe_core::perturb::{alter, detect, AlterOp, Alteration, CompiledSpec, GroupedDataset, Outcome};

fn window_end(text: &str, chars: usize) -> usize {
    text.char_indices().nth(chars).map_or(text.len(), |(i, _)| i)
}

/// The group a text expresses, with unmentioned texts assigned to the
/// absent-marker group.
pub fn expressed_group(text: &str, spec: &CompiledSpec) -> Option<String> {
    spec.resolve_group(&spec.detect_text(text))
        .or_else(|| spec.absent_marker().map(|g| g.name.clone()))
}

fn rebuild(original: &str, a: &Alteration) -> String {
    let mut out = String::new();
    let mut pos = 0;
    for e in &a.edits {
        out.push_str(&original[pos..e.start]);
        out.push_str(&e.replacement);
        pos = e.end;
    }
    out.push_str(&original[pos..]);
    out
}

/// Idempotence, detection round-trip and locality of `note` altered to
/// every group of `spec`.
pub fn check_note(note: &PatientNote, spec: &CompiledSpec) -> Vec<String> {
    let mut failures = Vec::new();
    let spans = detect(note, spec);
    let limit = window_end(&note.text, spec.spec().detection_window_chars);
    for group in spec.spec().group_names() {
        let fail = |what: String| format!("{} -> {group}: {what}", note.id);
        let altered = match alter(note, spec, group).unwrap() {
            Outcome::Altered(a) => a,
            Outcome::Excluded(_) => continue,
        };

        // locality
        if rebuild(&note.text, &altered) != altered.text {
            failures.push(fail("edits do not reproduce the altered text".into()));
        }
        for w in altered.edits.windows(2) {
            if w[0].end > w[1].start {
                failures.push(fail("overlapping edits".into()));
            }
        }
        for e in &altered.edits {
            if e.end > limit {
                failures.push(fail(format!("edit at {}..{} beyond the detection window", e.start, e.end)));
            }
            let inside_mention = spans
                .iter()
                .any(|s| e.start + 1 >= s.start && e.end <= s.end + 1 && e.start < s.end);
            if e.start != e.end && !inside_mention {
                failures.push(fail(format!("edit at {}..{} touches text outside any mention", e.start, e.end)));
            }
        }
        if altered.op == AlterOp::Keep && altered.text != note.text {
            failures.push(fail("keep changed the text".into()));
        }

        // detection round-trip
        let got = expressed_group(&altered.text, spec);
        if got.as_deref() != Some(group) {
            failures.push(fail(format!("altered text reads as {got:?}: {:?}", altered.text)));
        }

        // idempotence
        let again = PatientNote::new(note.id.clone(), altered.text.clone());
        match alter(&again, spec, group).unwrap() {
            Outcome::Altered(b) if b.text == altered.text && b.op == AlterOp::Keep => {}
            Outcome::Altered(b) => failures.push(fail(format!(
                "second alteration is {} with text {:?}",
                b.op, b.text
            ))),
            Outcome::Excluded(x) => failures.push(fail(format!("second alteration excluded: {}", x.reason))),
        }
    }
    failures
}

/// Every group covers the same ids in corpus order, and the cohort plus the
/// exclusions is the whole corpus.
pub fn check_cohort(corpus: &Corpus, ds: &GroupedDataset) -> Vec<String> {
    let mut failures = Vec::new();
    let excluded: BTreeSet<&str> = ds.excluded.iter().map(|x| x.id.as_str()).collect();
    let expected: Vec<&str> = corpus
        .notes()
        .iter()
        .map(|n| n.id.as_str())
        .filter(|id| !excluded.contains(id))
        .collect();
    for g in &ds.groups {
        let ids: Vec<&str> = g.samples.iter().map(|s| s.id.as_str()).collect();
        if ids != expected {
            failures.push(format!("group {} covers a different id list", g.name));
        }
    }
    if excluded.len() != ds.excluded.len() {
        failures.push("an id is excluded twice".into());
    }
    failures
}
