//! Built-in characteristics: gender, age and ethnicity.
//!
//! Surface-form lists are ordinary configuration. Dump them with
//! `noteprobe dump-spec`, edit, and pass the result back with `--spec`.

use std::collections::BTreeMap;

use super::spec::{CharacteristicSpec, FallbackPolicy, TestGroup, DEFAULT_WINDOW_CHARS};
use super::MentionKind;
use crate::error::{Error, Result};

pub const BUILTIN_NAMES: [&str; 3] = ["gender", "age", "ethnicity"];

/// De-identification placeholder MIMIC-style notes use for ages above 89.
pub const DEFAULT_OVER90_TOKEN: &str = "[**Age over 90 **]";

pub const OVER90: &str = "over90";
pub const MIN_AGE: u32 = 18;
pub const MAX_AGE: u32 = 89;

const GENDER_TERMS: &str = r"transgender|female|male|woman|man|lady|gentleman|(?-i:F|M)";
const AGE_UNIT: &str = r"\s*-?\s*(?:years?[\s-]old|yrs?[\s-]old|y/o|y\.o\.|yo\b)";

pub fn builtin(name: &str) -> Result<CharacteristicSpec> {
    match name {
        "gender" => Ok(gender()),
        "age" => Ok(age(DEFAULT_OVER90_TOKEN)),
        "ethnicity" => Ok(ethnicity()),
        other => Err(Error::validation(format!(
            "unknown characteristic {other:?}; built-ins are {}",
            BUILTIN_NAMES.join(", ")
        ))),
    }
}

fn pronouns(pairs: &[(&str, &str)]) -> Option<BTreeMap<String, String>> {
    Some(pairs.iter().map(|(r, t)| (r.to_string(), t.to_string())).collect())
}

pub fn gender() -> CharacteristicSpec {
    let mut female = TestGroup::new(
        "female",
        &[r"\bfemale\b", r"\bwoman\b", r"\b(?-i:F)\b", r"\blady\b"],
        "female",
    );
    female.forms = ["female", "woman", "F", "lady"].map(String::from).to_vec();
    female.pronouns = pronouns(&[
        ("subject", "she"),
        ("object", "her"),
        ("possessive", "her"),
        ("possessive_pronoun", "hers"),
        ("reflexive", "herself"),
    ]);

    let mut male = TestGroup::new(
        "male",
        &[r"\bmale\b", r"\bman\b", r"\b(?-i:M)\b", r"\bgentleman\b"],
        "male",
    );
    male.forms = ["male", "man", "M", "gentleman"].map(String::from).to_vec();
    male.pronouns = pronouns(&[
        ("subject", "he"),
        ("object", "him"),
        ("possessive", "his"),
        ("possessive_pronoun", "his"),
        ("reflexive", "himself"),
    ]);

    let mut transgender = TestGroup::new(
        "transgender",
        &[r"\btransgender(?:\s+(?P<base>female|male|woman|man|lady|gentleman|(?-i:F|M)))?\b"],
        "transgender",
    );
    transgender.modifier = true;

    CharacteristicSpec {
        name: "gender".into(),
        detection_window_chars: DEFAULT_WINDOW_CHARS,
        insertion_anchor: Some(format!(
            r"(?:\b\d{{1,3}}|\[\*\*[^\]]*\*\*\]){AGE_UNIT}\s+(?P<at>)"
        )),
        fallback_policy: FallbackPolicy::ExcludeCohort,
        groups: vec![female, male, transgender],
    }
}

/// Ages 18 through 89 plus the over-90 group, whose rewrite substitutes
/// `over90_token` for the numeral.
pub fn age(over90_token: &str) -> CharacteristicSpec {
    let mut groups: Vec<TestGroup> = (MIN_AGE..=MAX_AGE)
        .map(|n| {
            let mut g = TestGroup::new(
                &n.to_string(),
                &[&format!(r"\b(?P<m>{n}){AGE_UNIT}")],
                &n.to_string(),
            );
            g.kind = MentionKind::AgeNumeral;
            g
        })
        .collect();
    let mut over90 = TestGroup::new(OVER90, &[r"\[\*\*\s*age\s+over\s+90\s*\*\*\]"], over90_token);
    over90.kind = MentionKind::DeidToken;
    groups.push(over90);
    CharacteristicSpec {
        name: "age".into(),
        detection_window_chars: DEFAULT_WINDOW_CHARS,
        insertion_anchor: None,
        fallback_policy: FallbackPolicy::ExcludeCohort,
        groups,
    }
}

pub fn ethnicity() -> CharacteristicSpec {
    let mut no_mention = TestGroup::new("no_mention", &[], "");
    no_mention.absent_marker = true;
    // "white" alone is too ambiguous in clinical text ("white count"), so it
    // only counts when it directly describes the patient.
    let white_context = format!(r"\b(?P<m>white)\s+(?:{GENDER_TERMS}|patient)\b");
    CharacteristicSpec {
        name: "ethnicity".into(),
        detection_window_chars: DEFAULT_WINDOW_CHARS,
        insertion_anchor: Some(format!(r"(?P<at>)\b(?:{GENDER_TERMS})\b")),
        fallback_policy: FallbackPolicy::ExcludeCohort,
        groups: vec![
            no_mention,
            TestGroup::new("white", &[r"\bcaucasian\b", &white_context], "White"),
            TestGroup::new("african_american", &[r"\bafrican[\s-]american\b"], "African American"),
            TestGroup::new("hispanic", &[r"\bhispanic\b", r"\blatin[oax]\b"], "Hispanic"),
            TestGroup::new("asian", &[r"\basian\b"], "Asian"),
        ],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn group_counts() {
        assert_eq!(gender().groups.len(), 3);
        assert_eq!(age(DEFAULT_OVER90_TOKEN).groups.len(), 73);
        assert_eq!(ethnicity().groups.len(), 5);
        assert_eq!(age(DEFAULT_OVER90_TOKEN).groups.last().unwrap().name, OVER90);
    }

    #[test]
    fn unknown_builtin_lists_names() {
        let err = builtin("religion").unwrap_err().to_string();
        for n in BUILTIN_NAMES {
            assert!(err.contains(n));
        }
    }
}
