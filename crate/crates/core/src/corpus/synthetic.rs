//! Deterministic synthetic admission notes with controlled label rates.
//!
//! Every note opens with an admission header that plants exactly one age
//! phrase, one gender term and (optionally) one ethnicity term. The rest of
//! the note is templated clinical prose that refers to the patient only by
//! pronouns, so detection of the planted characteristics is unambiguous.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Corpus, PatientNote};
use crate::error::{Error, Result};
use crate::par::{self, Execution};
use crate::perturb::DEFAULT_OVER90_TOKEN;

pub const MORTALITY: &str = "mortality";

/// Diagnosis groups used as label names by the default profile.
pub const DEFAULT_DIAGNOSES: [&str; 8] = [
    "Abuse of drugs",
    "Acute kidney failure",
    "Cardiac dysrhythmias",
    "Chronic ischemic heart disease",
    "Chronic kidney disease",
    "Hypertension",
    "Unspecified anemias",
    "Urinary tract disorders",
];

/// Label-rate override for notes planted with one characteristic group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupRate {
    pub characteristic: String,
    pub group: String,
    pub label: String,
    pub rate: f64,
}

/// Generator parameters. Group weights are relative and need not sum to 1.
///
/// Label rates: each label is drawn independently with probability
/// `label_rates[label]`, unless an entry of `group_rates` matches the note's
/// planted gender, ethnicity, or age group; the last matching entry wins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticProfile {
    pub gender: BTreeMap<String, f64>,
    pub ethnicity_mention_rate: f64,
    pub ethnicity: BTreeMap<String, f64>,
    pub age_min: u32,
    pub age_max: u32,
    pub over90_rate: f64,
    pub label_rates: BTreeMap<String, f64>,
    pub group_rates: Vec<GroupRate>,
    /// Number of templated sentences after the header.
    pub body_sentences: usize,
}

impl Default for SyntheticProfile {
    fn default() -> Self {
        let gender = [("female", 0.5), ("male", 0.5), ("transgender", 0.0)];
        let ethnicity = [
            ("african_american", 0.2),
            ("asian", 0.1),
            ("hispanic", 0.1),
            ("white", 0.6),
        ];
        let mut label_rates: BTreeMap<String, f64> =
            DEFAULT_DIAGNOSES.iter().map(|d| (d.to_string(), 0.2)).collect();
        label_rates.insert(MORTALITY.to_string(), 0.12);
        let rate = |c: &str, g: &str, l: &str, r: f64| GroupRate {
            characteristic: c.into(),
            group: g.into(),
            label: l.into(),
            rate: r,
        };
        SyntheticProfile {
            gender: gender.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            ethnicity_mention_rate: 0.3,
            ethnicity: ethnicity.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            age_min: 18,
            age_max: 89,
            over90_rate: 0.03,
            label_rates,
            group_rates: vec![
                rate("gender", "male", "Chronic ischemic heart disease", 0.3),
                rate("gender", "female", "Urinary tract disorders", 0.3),
                rate("ethnicity", "african_american", "Hypertension", 0.35),
                rate("age", "over90", MORTALITY, 0.3),
            ],
            body_sentences: 4,
        }
    }
}

impl SyntheticProfile {
    pub fn validate(&self) -> Result<()> {
        check_weights("gender", &self.gender, &["female", "male", "transgender"])?;
        check_weights(
            "ethnicity",
            &self.ethnicity,
            &["african_american", "asian", "hispanic", "white"],
        )?;
        check_rate("ethnicity_mention_rate", self.ethnicity_mention_rate)?;
        check_rate("over90_rate", self.over90_rate)?;
        if !(18..=89).contains(&self.age_min) || !(18..=89).contains(&self.age_max) {
            return Err(Error::validation("age_min and age_max must lie in 18..=89"));
        }
        if self.age_min > self.age_max {
            return Err(Error::validation("age_min must not exceed age_max"));
        }
        for (label, r) in &self.label_rates {
            check_rate(&format!("label_rates[{label:?}]"), *r)?;
        }
        for gr in &self.group_rates {
            check_rate(&format!("group rate for {:?}", gr.label), gr.rate)?;
            if !self.label_rates.contains_key(&gr.label) {
                return Err(Error::validation(format!(
                    "group rate refers to label {:?} missing from label_rates",
                    gr.label
                )));
            }
            if !["gender", "ethnicity", "age"].contains(&gr.characteristic.as_str()) {
                return Err(Error::validation(format!(
                    "group rate characteristic must be gender, ethnicity or age, got {:?}",
                    gr.characteristic
                )));
            }
        }
        Ok(())
    }
}

fn check_rate(what: &str, r: f64) -> Result<()> {
    if (0.0..=1.0).contains(&r) {
        Ok(())
    } else {
        Err(Error::validation(format!("{what} must lie in [0, 1], got {r}")))
    }
}

fn check_weights(what: &str, weights: &BTreeMap<String, f64>, allowed: &[&str]) -> Result<()> {
    if let Some(k) = weights.keys().find(|k| !allowed.contains(&k.as_str())) {
        return Err(Error::validation(format!(
            "unknown {what} group {k:?}; expected one of {allowed:?}"
        )));
    }
    if weights.values().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::validation(format!("{what} weights must be non-negative")));
    }
    if weights.values().sum::<f64>() <= 0.0 {
        return Err(Error::validation(format!("{what} weights must not all be zero")));
    }
    Ok(())
}

const UNITS: [&str; 4] = ["year old", "yo", "y/o", "year-old"];
const FEMALE_TERMS: [&str; 4] = ["female", "woman", "F", "lady"];
const MALE_TERMS: [&str; 4] = ["male", "man", "M", "gentleman"];

const COMPLAINTS: [&str; 10] = [
    "chest pain",
    "shortness of breath",
    "abdominal pain",
    "fever and chills",
    "altered mental status",
    "syncope",
    "sepsis",
    "GI bleed",
    "worsening dyspnea",
    "acute confusion",
];

const HISTORIES: [&str; 8] = [
    "CHF",
    "COPD",
    "diabetes",
    "atrial fibrillation",
    "CKD",
    "hypertension",
    "alcohol use",
    "cirrhosis",
];

// `{s}` subject, `{o}` object, `{p}` possessive pronoun; a leading capital
// variant is used when the slot opens the sentence.
const BODY: [&str; 10] = [
    "{S} reports {symptom} for the past several days.",
    "{P} symptoms began suddenly at home.",
    "On arrival {s} was hemodynamically stable.",
    "Family brought {o} to the emergency department.",
    "The team will continue to monitor {o}.",
    "{S} denies recent travel or sick contacts.",
    "Medications were reviewed with {o} and {p} family.",
    "Plan is to admit to the medicine service for further workup.",
    "Labs notable for elevated lactate and mild anemia.",
    "{S} was given fluids and broad spectrum antibiotics.",
];

const SYMPTOMS: [&str; 6] = [
    "nausea",
    "fatigue",
    "intermittent palpitations",
    "decreased appetite",
    "lightheadedness",
    "cough",
];

fn pick<'a, R: Rng>(rng: &mut R, items: &[&'a str]) -> &'a str {
    items[rng.random_range(0..items.len())]
}

fn pick_weighted<R: Rng>(rng: &mut R, weights: &BTreeMap<String, f64>) -> String {
    let total: f64 = weights.values().sum();
    let mut x = rng.random::<f64>() * total;
    let mut last = None;
    for (k, w) in weights {
        if *w <= 0.0 {
            continue;
        }
        if x < *w {
            return k.clone();
        }
        x -= w;
        last = Some(k);
    }
    last.expect("validated weights").clone()
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

fn ethnicity_term<R: Rng>(rng: &mut R, group: &str) -> &'static str {
    let lower = rng.random_bool(0.2);
    match (group, lower) {
        ("white", false) => "White",
        ("white", true) => "white",
        ("african_american", false) => "African American",
        ("african_american", true) => "African-American",
        ("hispanic", false) => "Hispanic",
        ("hispanic", true) => "hispanic",
        ("asian", _) => "Asian",
        _ => unreachable!("validated ethnicity group"),
    }
}

struct Planted {
    gender: String,
    ethnicity: Option<String>,
    age: String,
}

fn generate_note(seed: u64, index: usize, profile: &SyntheticProfile) -> PatientNote {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);

    let gender = pick_weighted(&mut rng, &profile.gender);
    let ethnicity = rng
        .random_bool(profile.ethnicity_mention_rate)
        .then(|| pick_weighted(&mut rng, &profile.ethnicity));
    let age = if rng.random_bool(profile.over90_rate) {
        "over90".to_string()
    } else {
        rng.random_range(profile.age_min..=profile.age_max).to_string()
    };

    let age_text = if age == "over90" {
        DEFAULT_OVER90_TOKEN.to_string()
    } else {
        age.clone()
    };
    let base_female = match gender.as_str() {
        "female" => true,
        "male" => false,
        _ => rng.random_bool(0.5),
    };
    let term_idx = rng.random_range(0..FEMALE_TERMS.len());
    let base_term = if base_female {
        FEMALE_TERMS[term_idx]
    } else {
        MALE_TERMS[term_idx]
    };
    let mut descriptor = String::new();
    if let Some(eth) = &ethnicity {
        descriptor.push_str(ethnicity_term(&mut rng, eth));
        descriptor.push(' ');
    }
    if gender == "transgender" {
        descriptor.push_str("transgender ");
    }
    descriptor.push_str(base_term);

    let unit = pick(&mut rng, &UNITS);
    let complaint = pick(&mut rng, &COMPLAINTS);
    let header = match rng.random_range(0..3) {
        0 => format!("{age_text} {unit} {descriptor} admitted with {complaint}."),
        1 => format!("Patient is a {age_text} {unit} {descriptor} who presents with {complaint}."),
        _ => format!(
            "This is a {age_text} {unit} {descriptor} with a history of {} presenting with {complaint}.",
            pick(&mut rng, &HISTORIES)
        ),
    };

    let (s, o, p) = if base_female {
        ("she", "her", "her")
    } else {
        ("he", "him", "his")
    };
    let mut sentences: Vec<usize> = (0..BODY.len()).collect();
    let take = profile.body_sentences.min(BODY.len());
    for i in 0..take {
        let j = rng.random_range(i..sentences.len());
        sentences.swap(i, j);
    }
    let mut text = header;
    for &idx in &sentences[..take] {
        let sentence = BODY[idx]
            .replace("{S}", &capitalize(s))
            .replace("{P}", &capitalize(p))
            .replace("{s}", s)
            .replace("{o}", o)
            .replace("{p}", p)
            .replace("{symptom}", pick(&mut rng, &SYMPTOMS));
        text.push(' ');
        text.push_str(&sentence);
    }

    let planted = Planted {
        gender,
        ethnicity,
        age,
    };
    let labels: BTreeSet<String> = profile
        .label_rates
        .iter()
        .filter_map(|(label, base)| {
            let rate = label_rate(profile, &planted, label, *base);
            rng.random_bool(rate).then(|| label.clone())
        })
        .collect();

    PatientNote {
        id: format!("s{index:06}"),
        text,
        labels: Some(labels),
    }
}

fn label_rate(profile: &SyntheticProfile, planted: &Planted, label: &str, base: f64) -> f64 {
    profile
        .group_rates
        .iter()
        .rev()
        .filter(|gr| gr.label == label)
        .find(|gr| match gr.characteristic.as_str() {
            "gender" => gr.group == planted.gender,
            "ethnicity" => planted.ethnicity.as_deref() == Some(gr.group.as_str()),
            "age" => gr.group == planted.age,
            _ => false,
        })
        .map_or(base, |gr| gr.rate)
}

/// Generates `n` notes; a pure function of `(seed, n, profile)`.
///
/// Each note draws from its own ChaCha stream keyed by its index, so the
/// output does not depend on how the work is scheduled.
pub fn generate_synthetic_corpus(seed: u64, n: usize, profile: &SyntheticProfile) -> Result<Corpus> {
    if n == 0 {
        return Err(Error::validation("synthetic corpus size must be at least 1"));
    }
    profile.validate()?;
    let notes = par::map_range(Execution::default(), n, |i| generate_note(seed, i, profile));
    let vocab = profile.label_rates.keys().cloned().collect();
    Corpus::new(notes, Some(vocab))
}
