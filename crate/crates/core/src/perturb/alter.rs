use serde::{Deserialize, Serialize};

use super::detect::{MentionKind, MentionSpan};
use super::spec::{CompiledSpec, TestGroup};
use crate::corpus::PatientNote;
use crate::error::{Error, Result};

/// The alteration applied to one sample for one test group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlterOp {
    Change,
    Add,
    Keep,
}

impl std::fmt::Display for AlterOp {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            AlterOp::Change => "change",
            AlterOp::Add => "add",
            AlterOp::Keep => "keep",
        })
    }
}

/// A replacement of `original[start..end]`. Insertions have `start == end`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Edit {
    pub start: usize,
    pub end: usize,
    pub replacement: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alteration {
    pub text: String,
    pub op: AlterOp,
    /// Edits in original-text coordinates, sorted and non-overlapping.
    pub edits: Vec<Edit>,
}

/// The sample cannot join `group`; it must leave every group of the
/// characteristic.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CohortExclusion {
    pub group: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    Altered(Alteration),
    Excluded(CohortExclusion),
}

impl Outcome {
    pub fn altered(self) -> Option<Alteration> {
        match self {
            Outcome::Altered(a) => Some(a),
            Outcome::Excluded(_) => None,
        }
    }
}

/// Rewrites `note` so that it expresses group `target`.
pub fn alter(note: &PatientNote, spec: &CompiledSpec, target: &str) -> Result<Outcome> {
    let spans = spec.detect_text(&note.text);
    alter_detected(&note.text, &spans, spec, target)
}

/// Same as [`alter`] with the mentions of `text` already detected.
pub fn alter_detected(
    text: &str,
    spans: &[MentionSpan],
    spec: &CompiledSpec,
    target: &str,
) -> Result<Outcome> {
    let ti = spec
        .group_index(target)
        .ok_or_else(|| Error::validation(format!("{target:?} is not a group of {:?}", spec.name())))?;
    Ok(alter_with(text, spans, spec, ti))
}

pub(crate) fn alter_with(text: &str, spans: &[MentionSpan], spec: &CompiledSpec, ti: usize) -> Outcome {
    let target = &spec.spec.groups[ti];
    let (pronouns, nouns): (Vec<&MentionSpan>, Vec<&MentionSpan>) =
        spans.iter().partition(|s| s.kind == MentionKind::Pronoun);

    let mut edits = Vec::new();
    let op = if nouns.is_empty() {
        if target.absent_marker {
            AlterOp::Keep
        } else {
            match insertion_point(text, spec) {
                Some(at) => {
                    edits.push(Edit {
                        start: at,
                        end: at,
                        replacement: format!("{} ", target.canonical),
                    });
                    AlterOp::Add
                }
                None => {
                    let reason = if spec.anchor.is_some() {
                        format!("no {} mention and the insertion anchor did not match", spec.name())
                    } else {
                        format!("no {} mention and mentions cannot be inserted", spec.name())
                    };
                    return Outcome::Excluded(CohortExclusion {
                        group: target.name.clone(),
                        reason,
                    });
                }
            }
        }
    } else {
        for span in nouns.iter().filter(|s| s.group != target.name) {
            edits.push(rewrite_mention(text, span, spec, target));
        }
        AlterOp::Change
    };

    if target.pronouns.is_some() {
        for span in pronouns.iter().filter(|s| s.group != target.name) {
            edits.push(Edit {
                start: span.start,
                end: span.end,
                replacement: rewrite_pronoun(text, span, spec, target),
            });
        }
    }

    if edits.is_empty() {
        return Outcome::Altered(Alteration {
            text: text.to_string(),
            op: AlterOp::Keep,
            edits,
        });
    }
    edits.sort_by_key(|e| (e.start, e.end));
    expand_removals(text, &mut edits);
    let altered = apply_edits(text, &edits);
    // contextual patterns can fail to recognize a rewritten mention
    // ("Asian, was" -> "White, was"); such a sample cannot join the group
    let reads_as = spec
        .resolve_group(&spec.detect_text(&altered))
        .or_else(|| spec.absent_marker().map(|g| g.name.clone()));
    if reads_as.as_deref() != Some(target.name.as_str()) {
        return Outcome::Excluded(CohortExclusion {
            group: target.name.clone(),
            reason: format!("rewritten text does not read as {}", target.name),
        });
    }
    Outcome::Altered(Alteration {
        text: altered,
        op,
        edits,
    })
}

fn insertion_point(text: &str, spec: &CompiledSpec) -> Option<usize> {
    let anchor = spec.anchor.as_ref()?;
    let window_end = spec.window_end(text);
    anchor
        .captures_iter(text)
        .filter_map(|c| c.name("at").map(|m| m.start()))
        .take_while(|&at| at < window_end)
        .next()
}

fn rewrite_mention(text: &str, span: &MentionSpan, spec: &CompiledSpec, target: &TestGroup) -> Edit {
    let original = span.text(text);
    let source = spec.group(&span.group).expect("detected group exists");
    let replacement = if target.absent_marker {
        String::new()
    } else if target.modifier {
        format!("{} {original}", style_modifier(&target.canonical, original))
    } else if source.modifier {
        match span.base {
            Some((bs, be)) => {
                let base = &text[bs..be];
                match classify_base(base, spec) {
                    Some((gi, _)) if spec.spec.groups[gi].name == target.name => base.to_string(),
                    Some((_, pattern)) => target_form(target, Some(pattern), base, span.kind),
                    None => target_form(target, None, base, span.kind),
                }
            }
            None => target_form(target, None, original, span.kind),
        }
    } else {
        target_form(target, span.pattern, original, span.kind)
    };
    Edit {
        start: span.start,
        end: span.end,
        replacement,
    }
}

/// Which plain group (and pattern) claims the whole of `base`.
fn classify_base(base: &str, spec: &CompiledSpec) -> Option<(usize, usize)> {
    for (gi, (group, compiled)) in spec.spec.groups.iter().zip(&spec.groups).enumerate() {
        if group.modifier || group.absent_marker {
            continue;
        }
        for (pi, re) in compiled.patterns.iter().enumerate() {
            if let Some(c) = re.captures(base) {
                let m = c.name("m").unwrap_or_else(|| c.get(0).expect("group 0"));
                if m.start() == 0 && m.end() == base.len() {
                    return Some((gi, pi));
                }
            }
        }
    }
    None
}

fn target_form(target: &TestGroup, pattern: Option<usize>, original: &str, kind: MentionKind) -> String {
    let form = pattern
        .and_then(|k| target.forms.get(k))
        .unwrap_or(&target.canonical);
    match (kind, target.kind) {
        (MentionKind::NounPhrase | MentionKind::Pronoun, MentionKind::NounPhrase) => {
            apply_style(form, Style::of(original))
        }
        _ => form.clone(),
    }
}

fn rewrite_pronoun(text: &str, span: &MentionSpan, spec: &CompiledSpec, target: &TestGroup) -> String {
    let original = span.text(text);
    let token = original.to_lowercase();
    let source_map = spec
        .group(&span.group)
        .and_then(|g| g.pronouns.as_ref())
        .expect("pronoun owner has a pronoun map");
    let target_map = target.pronouns.as_ref().expect("checked by caller");
    let mut roles: Vec<&str> = source_map
        .iter()
        .filter(|(_, t)| t.to_lowercase() == token)
        .map(|(r, _)| r.as_str())
        .collect();
    roles.sort_by_key(|r| role_rank(r));
    let role = if roles.contains(&"object") && roles.contains(&"possessive") {
        if next_word_takes_object(&text[span.end..]) {
            "object"
        } else {
            "possessive"
        }
    } else {
        roles[0]
    };
    apply_style(&target_map[role], Style::of(original))
}

fn role_rank(role: &str) -> (usize, &str) {
    let rank = ["subject", "object", "possessive", "possessive_pronoun", "reflexive"]
        .iter()
        .position(|r| *r == role)
        .unwrap_or(usize::MAX);
    (rank, role)
}

/// Words after which an ambiguous "her" reads as an object pronoun:
/// verbs, prepositions, conjunctions, determiners and adverbs.
const OBJECT_FOLLOWERS: &[&str] = &[
    "a", "about", "after", "again", "also", "an", "and", "are", "as", "at", "back", "be", "because",
    "been", "before", "being", "but", "by", "can", "closely", "could", "did", "directly", "do",
    "does", "down", "feel", "feels", "felt", "for", "from", "further", "go", "had", "has", "have",
    "home", "if", "immediately", "in", "into", "is", "know", "may", "might", "not", "now", "of",
    "off", "on", "or", "out", "should", "since", "so", "that", "the", "then", "these", "this",
    "those", "to", "today", "tomorrow", "until", "up", "via", "was", "well", "were", "when",
    "while", "will", "with", "would", "yesterday",
];

fn next_word_takes_object(rest: &str) -> bool {
    let rest = rest.trim_start();
    let word: String = rest.chars().take_while(|c| c.is_alphabetic()).collect();
    word.is_empty() || OBJECT_FOLLOWERS.contains(&word.to_lowercase().as_str())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Style {
    Lower,
    Title,
    Upper,
}

impl Style {
    pub(crate) fn of(s: &str) -> Style {
        let letters: Vec<char> = s.chars().filter(|c| c.is_alphabetic()).collect();
        if letters.len() >= 2 && letters.iter().all(|c| c.is_uppercase()) {
            Style::Upper
        } else if letters.first().is_some_and(|c| c.is_uppercase()) {
            Style::Title
        } else {
            Style::Lower
        }
    }
}

pub(crate) fn apply_style(form: &str, style: Style) -> String {
    match style {
        Style::Lower => form.to_lowercase(),
        Style::Upper => form.to_uppercase(),
        Style::Title => {
            let mut chars = form.chars();
            match chars.next() {
                Some(first) => first.to_uppercase().chain(chars).collect(),
                None => String::new(),
            }
        }
    }
}

/// The modifier takes the case of the phrase it attaches to; a single
/// capital letter ("F") counts as lowercase context.
fn style_modifier(modifier: &str, original: &str) -> String {
    let letters = original.chars().filter(|c| c.is_alphabetic()).count();
    match Style::of(original) {
        Style::Upper => modifier.to_uppercase(),
        Style::Title if letters > 1 => apply_style(modifier, Style::Title),
        _ => modifier.to_lowercase(),
    }
}

/// Deleting a mention also deletes one adjacent whitespace character so no
/// double space is left behind.
fn expand_removals(text: &str, edits: &mut [Edit]) {
    for i in 0..edits.len() {
        if !edits[i].replacement.is_empty() || edits[i].start == edits[i].end {
            continue;
        }
        let next_start = edits.get(i + 1).map_or(text.len(), |e| e.start);
        let prev_end = if i == 0 { 0 } else { edits[i - 1].end };
        let end = edits[i].end;
        let start = edits[i].start;
        if let Some(c) = text[end..].chars().next().filter(|c| c.is_whitespace()) {
            if end + c.len_utf8() <= next_start {
                edits[i].end = end + c.len_utf8();
                continue;
            }
        }
        if let Some(c) = text[..start].chars().next_back().filter(|c| c.is_whitespace()) {
            if start - c.len_utf8() >= prev_end {
                edits[i].start = start - c.len_utf8();
            }
        }
    }
}

pub(crate) fn apply_edits(text: &str, edits: &[Edit]) -> String {
    let mut out = String::with_capacity(text.len() + 32);
    let mut cursor = 0;
    for e in edits {
        out.push_str(&text[cursor..e.start]);
        out.push_str(&e.replacement);
        cursor = e.end;
    }
    out.push_str(&text[cursor..]);
    out
}
