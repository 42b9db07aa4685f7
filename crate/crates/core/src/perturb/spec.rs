use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::MentionKind;
use crate::error::{Error, Result};

pub const DEFAULT_WINDOW_CHARS: usize = 600;

fn default_window() -> usize {
    DEFAULT_WINDOW_CHARS
}

fn is_false(b: &bool) -> bool {
    !*b
}

fn is_noun(k: &MentionKind) -> bool {
    *k == MentionKind::NounPhrase
}

/// What happens to a sample whose mention cannot be added to some group.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FallbackPolicy {
    /// Drop the sample from every group of the characteristic.
    #[default]
    ExcludeCohort,
}

/// One manifestation of a characteristic.
///
/// `patterns` are matched case-insensitively; use `(?-i:...)` for
/// case-sensitive pieces. When a pattern has a named group `m`, only that
/// group is the mention; the rest of the match is context. A `base` group
/// marks the underlying noun of a modifier phrase.
///
/// `forms` (optional) is index-aligned with `patterns` across the groups
/// of one characteristic: a mention matched by pattern `k` of one group is
/// rewritten to `forms[k]` of the target group, falling back to
/// `canonical`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestGroup {
    pub name: String,
    #[serde(default)]
    pub patterns: Vec<String>,
    #[serde(default)]
    pub canonical: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub forms: Vec<String>,
    /// Pronoun role (`subject`, `object`, `possessive`, ...) to token.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pronouns: Option<BTreeMap<String, String>>,
    #[serde(default, skip_serializing_if = "is_false")]
    pub absent_marker: bool,
    /// Rewriting to this group prefixes `canonical` to the existing mention
    /// instead of replacing it.
    #[serde(default, skip_serializing_if = "is_false")]
    pub modifier: bool,
    #[serde(default, skip_serializing_if = "is_noun")]
    pub kind: MentionKind,
}

impl TestGroup {
    pub fn new(name: &str, patterns: &[&str], canonical: &str) -> Self {
        TestGroup {
            name: name.to_string(),
            patterns: patterns.iter().map(|p| p.to_string()).collect(),
            canonical: canonical.to_string(),
            forms: Vec::new(),
            pronouns: None,
            absent_marker: false,
            modifier: false,
            kind: MentionKind::NounPhrase,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CharacteristicSpec {
    pub name: String,
    #[serde(default = "default_window")]
    pub detection_window_chars: usize,
    /// Regex whose named group `at` marks where a missing mention is
    /// inserted. `None` means mentions can never be added.
    #[serde(default)]
    pub insertion_anchor: Option<String>,
    #[serde(default)]
    pub fallback_policy: FallbackPolicy,
    pub groups: Vec<TestGroup>,
}

impl CharacteristicSpec {
    pub fn from_json(raw: &str) -> Result<Self> {
        serde_json::from_str(raw).map_err(|e| Error::validation(format!("characteristic spec: {e}")))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&raw).map_err(|e| Error::Parse {
            path: path.to_owned(),
            line: e.line(),
            message: e.to_string(),
        })
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serializes")
    }

    pub fn group_names(&self) -> Vec<&str> {
        self.groups.iter().map(|g| g.name.as_str()).collect()
    }

    /// Validates and compiles every pattern.
    pub fn compile(&self) -> Result<CompiledSpec> {
        CompiledSpec::new(self.clone())
    }
}

#[derive(Debug)]
pub(crate) struct CompiledGroup {
    pub patterns: Vec<Regex>,
}

/// A validated characteristic with its regexes compiled.
#[derive(Debug)]
pub struct CompiledSpec {
    pub(crate) spec: CharacteristicSpec,
    pub(crate) groups: Vec<CompiledGroup>,
    pub(crate) anchor: Option<Regex>,
    pub(crate) pronoun_regex: Option<Regex>,
    pub(crate) pronoun_owner: HashMap<String, usize>,
    index: HashMap<String, usize>,
}

fn compile_pattern(pattern: &str, what: &str) -> Result<Regex> {
    Regex::new(&format!("(?i){pattern}"))
        .map_err(|e| Error::validation(format!("{what}: invalid pattern {pattern:?}: {e}")))
}

impl CompiledSpec {
    pub fn new(spec: CharacteristicSpec) -> Result<Self> {
        let name = &spec.name;
        if name.is_empty() {
            return Err(Error::validation("characteristic name must be non-empty"));
        }
        if spec.groups.len() < 2 {
            return Err(Error::validation(format!(
                "characteristic {name:?} needs at least 2 groups, has {}",
                spec.groups.len()
            )));
        }
        if spec.detection_window_chars < 1 {
            return Err(Error::validation("detection_window_chars must be at least 1"));
        }
        let mut index = HashMap::new();
        for (i, g) in spec.groups.iter().enumerate() {
            if g.name.is_empty() || g.name.contains(['/', '\\']) {
                return Err(Error::validation(format!("invalid group name {:?}", g.name)));
            }
            if index.insert(g.name.clone(), i).is_some() {
                return Err(Error::validation(format!("duplicate group name {:?}", g.name)));
            }
        }
        if spec.groups.iter().filter(|g| g.absent_marker).count() > 1 {
            return Err(Error::validation("at most one group may be the absent marker"));
        }

        let mut groups = Vec::with_capacity(spec.groups.len());
        let mut pronoun_owner = HashMap::new();
        let mut pronoun_roles: Option<BTreeSet<&String>> = None;
        for (gi, g) in spec.groups.iter().enumerate() {
            let what = format!("group {:?}", g.name);
            if g.absent_marker {
                if !g.patterns.is_empty() || g.pronouns.is_some() || g.modifier {
                    return Err(Error::validation(format!(
                        "{what}: the absent marker takes no patterns, pronouns or modifier flag"
                    )));
                }
            } else {
                if g.canonical.is_empty() {
                    return Err(Error::validation(format!("{what}: canonical form is empty")));
                }
                if g.patterns.is_empty() {
                    return Err(Error::validation(format!("{what}: no detection patterns")));
                }
            }
            if !g.forms.is_empty() && g.forms.len() != g.patterns.len() {
                return Err(Error::validation(format!(
                    "{what}: forms must align with patterns ({} forms, {} patterns)",
                    g.forms.len(),
                    g.patterns.len()
                )));
            }
            if g.modifier && g.pronouns.is_some() {
                return Err(Error::validation(format!(
                    "{what}: modifier groups keep existing pronouns and cannot define their own"
                )));
            }
            if let Some(map) = &g.pronouns {
                let roles: BTreeSet<&String> = map.keys().collect();
                match &pronoun_roles {
                    Some(existing) if *existing != roles => {
                        return Err(Error::validation(format!(
                            "{what}: pronoun roles differ from other groups"
                        )));
                    }
                    _ => pronoun_roles = Some(roles),
                }
                for token in map.values() {
                    let token = token.to_lowercase();
                    if token.is_empty() || !token.chars().all(char::is_alphabetic) {
                        return Err(Error::validation(format!("{what}: bad pronoun {token:?}")));
                    }
                    if let Some(&other) = pronoun_owner.get(&token) {
                        if other != gi {
                            return Err(Error::validation(format!(
                                "pronoun {token:?} belongs to two groups"
                            )));
                        }
                    }
                    pronoun_owner.insert(token, gi);
                }
            }
            let patterns = g
                .patterns
                .iter()
                .map(|p| compile_pattern(p, &what))
                .collect::<Result<Vec<_>>>()?;
            groups.push(CompiledGroup { patterns });
        }

        let anchor = match &spec.insertion_anchor {
            Some(a) => {
                let re = compile_pattern(a, "insertion_anchor")?;
                if !re.capture_names().flatten().any(|n| n == "at") {
                    return Err(Error::validation(
                        "insertion_anchor must contain a named group `at` marking the insertion point",
                    ));
                }
                Some(re)
            }
            None => None,
        };

        let pronoun_regex = if pronoun_owner.is_empty() {
            None
        } else {
            let mut tokens: Vec<&String> = pronoun_owner.keys().collect();
            tokens.sort_by(|a, b| b.len().cmp(&a.len()).then(a.cmp(b)));
            let alt = tokens
                .iter()
                .map(|t| regex::escape(t))
                .collect::<Vec<_>>()
                .join("|");
            Some(compile_pattern(&format!(r"\b(?:{alt})\b"), "pronouns")?)
        };

        let compiled = CompiledSpec {
            spec,
            groups,
            anchor,
            pronoun_regex,
            pronoun_owner,
            index,
        };
        compiled.check_canonical_forms()?;
        Ok(compiled)
    }

    /// Canonical forms must not be claimed by another group's patterns, and
    /// each noun-phrase canonical form must be recognized as its own group
    /// either alone or followed by "patient".
    fn check_canonical_forms(&self) -> Result<()> {
        for (gi, g) in self.spec.groups.iter().enumerate() {
            if g.absent_marker {
                continue;
            }
            let probes = [g.canonical.clone(), format!("{} patient", g.canonical)];
            let mut recognized = false;
            for probe in &probes {
                let candidates = self.candidates(probe);
                if let Some(other) = candidates
                    .iter()
                    .find(|s| s.group != g.name && s.kind != MentionKind::Pronoun)
                {
                    return Err(Error::validation(format!(
                        "canonical form {:?} of group {:?} is detected as group {:?}",
                        g.canonical, g.name, other.group
                    )));
                }
                recognized |= self.detect_text(probe).iter().any(|s| self.index[&s.group] == gi);
            }
            if g.kind == MentionKind::NounPhrase && !recognized {
                return Err(Error::validation(format!(
                    "canonical form {:?} of group {:?} is not detected by its own patterns",
                    g.canonical, g.name
                )));
            }
        }
        Ok(())
    }

    pub fn spec(&self) -> &CharacteristicSpec {
        &self.spec
    }

    pub fn name(&self) -> &str {
        &self.spec.name
    }

    pub fn group_index(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn group(&self, name: &str) -> Option<&TestGroup> {
        self.group_index(name).map(|i| &self.spec.groups[i])
    }

    pub fn absent_marker(&self) -> Option<&TestGroup> {
        self.spec.groups.iter().find(|g| g.absent_marker)
    }

    /// Byte offset where the detection window ends.
    pub(crate) fn window_end(&self, text: &str) -> usize {
        text.char_indices()
            .nth(self.spec.detection_window_chars)
            .map_or(text.len(), |(i, _)| i)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perturb::builtin;

    fn two_groups() -> CharacteristicSpec {
        CharacteristicSpec {
            name: "smoking".into(),
            detection_window_chars: 100,
            insertion_anchor: None,
            fallback_policy: FallbackPolicy::ExcludeCohort,
            groups: vec![
                TestGroup::new("smoker", &[r"\bsmoker\b"], "smoker"),
                TestGroup::new("nonsmoker", &[r"\bnon-?smoker\b"], "nonsmoker"),
            ],
        }
    }

    #[test]
    fn builtins_compile() {
        for name in builtin::BUILTIN_NAMES {
            let spec = builtin::builtin(name).unwrap();
            spec.compile().unwrap();
        }
    }

    #[test]
    fn custom_spec_round_trips_through_json() {
        let spec = two_groups();
        let back = CharacteristicSpec::from_json(&spec.to_json_pretty()).unwrap();
        assert_eq!(spec, back);
        back.compile().unwrap();
    }

    #[test]
    fn rejects_structural_problems() {
        let mut one = two_groups();
        one.groups.truncate(1);
        assert!(one.compile().is_err());

        let mut dup = two_groups();
        dup.groups[1].name = "smoker".into();
        assert!(dup.compile().is_err());

        let mut zero = two_groups();
        zero.detection_window_chars = 0;
        assert!(zero.compile().is_err());

        let mut bad = two_groups();
        bad.groups[0].patterns = vec!["(".into()];
        assert!(bad.compile().is_err());

        let mut anchor = two_groups();
        anchor.insertion_anchor = Some(r"\bpatient\b".into());
        assert!(anchor.compile().unwrap_err().to_string().contains("`at`"));
    }

    #[test]
    fn rejects_overlapping_canonical_forms() {
        let mut spec = two_groups();
        // "smoker" pattern without boundaries also claims "nonsmoker".
        spec.groups[0].patterns = vec!["smoker".into()];
        spec.groups[1].patterns = vec![r"\bnonsmoker\b".into()];
        assert!(spec.compile().is_err());
    }

    #[test]
    fn empty_canonical_only_for_absent_marker() {
        let mut spec = two_groups();
        spec.groups[0].canonical.clear();
        assert!(spec.compile().is_err());
    }
}
