use std::cmp::Reverse;

use serde::{Deserialize, Serialize};

use super::spec::CompiledSpec;
use crate::corpus::PatientNote;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MentionKind {
    #[default]
    NounPhrase,
    Pronoun,
    AgeNumeral,
    DeidToken,
}

/// A detected mention. Offsets are byte offsets into the note text and
/// always fall on UTF-8 boundaries.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MentionSpan {
    pub start: usize,
    pub end: usize,
    pub group: String,
    pub kind: MentionKind,
    /// Index of the matching pattern within the group (none for pronouns).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pattern: Option<usize>,
    /// Byte range of the underlying noun for modifier phrases.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base: Option<(usize, usize)>,
}

impl MentionSpan {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }

    pub fn text<'a>(&self, text: &'a str) -> &'a str {
        &text[self.start..self.end]
    }
}

/// All mentions of the characteristic in `note`: non-pronoun mentions
/// starting inside the head window, plus pronouns anywhere in the text.
/// Spans are non-overlapping and sorted by start.
pub fn detect(note: &PatientNote, spec: &CompiledSpec) -> Vec<MentionSpan> {
    spec.detect_text(&note.text)
}

impl CompiledSpec {
    /// Every raw pattern match, before overlap resolution.
    pub(crate) fn candidates(&self, text: &str) -> Vec<MentionSpan> {
        let window_end = self.window_end(text);
        let mut out = Vec::new();
        for (group, compiled) in self.spec.groups.iter().zip(&self.groups) {
            for (pi, re) in compiled.patterns.iter().enumerate() {
                for caps in re.captures_iter(text) {
                    let whole = caps.get(0).expect("group 0");
                    let mention = caps.name("m").unwrap_or(whole);
                    if mention.start() >= window_end {
                        break;
                    }
                    if mention.is_empty() {
                        continue;
                    }
                    out.push(MentionSpan {
                        start: mention.start(),
                        end: mention.end(),
                        group: group.name.clone(),
                        kind: group.kind,
                        pattern: Some(pi),
                        base: caps.name("base").map(|b| (b.start(), b.end())),
                    });
                }
            }
        }
        if let Some(re) = &self.pronoun_regex {
            for m in re.find_iter(text) {
                let owner = self.pronoun_owner[&m.as_str().to_lowercase()];
                out.push(MentionSpan {
                    start: m.start(),
                    end: m.end(),
                    group: self.spec.groups[owner].name.clone(),
                    kind: MentionKind::Pronoun,
                    pattern: None,
                    base: None,
                });
            }
        }
        out
    }

    /// Resolves overlapping candidates: earliest start wins, then the
    /// longest match, then group order.
    pub fn detect_text(&self, text: &str) -> Vec<MentionSpan> {
        let mut candidates = self.candidates(text);
        candidates.sort_by_key(|s| {
            (
                s.start,
                Reverse(s.len()),
                self.group_index(&s.group),
                s.pattern,
            )
        });
        let mut out: Vec<MentionSpan> = Vec::with_capacity(candidates.len());
        for c in candidates {
            if out.last().is_none_or(|last| c.start >= last.end) {
                out.push(c);
            }
        }
        out
    }

    /// The group a text expresses: the group of its first non-pronoun
    /// mention, otherwise the most frequent pronoun group (ties go to the
    /// earlier group), otherwise `None`.
    pub fn resolve_group(&self, spans: &[MentionSpan]) -> Option<String> {
        if let Some(s) = spans.iter().find(|s| s.kind != MentionKind::Pronoun) {
            return Some(s.group.clone());
        }
        let mut counts = vec![0usize; self.spec.groups.len()];
        for s in spans {
            counts[self.group_index(&s.group).expect("known group")] += 1;
        }
        let best = counts.iter().copied().max().filter(|&c| c > 0)?;
        let idx = counts.iter().position(|&c| c == best)?;
        Some(self.spec.groups[idx].name.clone())
    }
}
