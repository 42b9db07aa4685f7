//! Characteristic definitions, mention detection, and counterfactual
//! test-group generation.
//!
//! A characteristic (gender, age, ethnicity, or a user-supplied spec) is a
//! list of test groups. For each group every note is rewritten with one of
//! three operations: *change* an existing mention, *add* a missing one at
//! the spec's insertion anchor, or *keep* a note that already belongs to the
//! group. Notes that cannot be brought into some group are removed from all
//! groups, so every group covers the same patients.

mod alter;
pub mod builtin;
mod detect;
mod groups;
mod spec;

pub use alter::{alter, alter_detected, AlterOp, Alteration, CohortExclusion, Edit, Outcome};
pub use builtin::{DEFAULT_OVER90_TOKEN, OVER90};
pub use detect::{detect, MentionKind, MentionSpan};
pub use groups::{
    age_groups, characteristic_dir, generate_groups, generate_groups_with, read_grouped_dataset,
    write_grouped_dataset, AlteredSample, ExcludedSample, GroupSamples, GroupedDataset, OpLogEntry,
    EXCLUDED_FILE, OPLOG_FILE, SPEC_FILE,
};
pub(crate) use groups::{read_jsonl, write_json};
pub use spec::{
    CharacteristicSpec, CompiledSpec, FallbackPolicy, TestGroup, DEFAULT_WINDOW_CHARS,
};

/// Loads a characteristic from a spec file, or falls back to a built-in.
pub fn resolve_spec(name: Option<&str>, path: Option<&std::path::Path>) -> crate::Result<CharacteristicSpec> {
    match (path, name) {
        (Some(p), _) => CharacteristicSpec::load(p),
        (None, Some(n)) => builtin::builtin(n),
        (None, None) => Err(crate::Error::validation(
            "either a characteristic name or a spec file is required",
        )),
    }
}
