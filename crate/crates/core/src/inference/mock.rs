use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::records::{sort_records, PredictionRecord};
use crate::error::{Error, Result};
use crate::par::{self, Execution};
use crate::perturb::GroupedDataset;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LexiconEntry {
    pub token: String,
    pub label: String,
    pub weight: f64,
}

/// Deterministic bag-of-words model used as a ground-truth oracle:
/// `P(label | text) = logistic(base_logit[label] + Σ weight(token, label))`
/// over the distinct lexicon tokens present in the text.
///
/// Tokens are maximal runs of alphanumeric characters, lowercased unless
/// `case_sensitive` is set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MockLexicalModel {
    pub base_logits: BTreeMap<String, f64>,
    #[serde(default)]
    pub lexicon: Vec<LexiconEntry>,
    #[serde(default)]
    pub case_sensitive: bool,
}

pub fn logistic(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Inverse of [`logistic`] for `p` in (0, 1).
pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

impl MockLexicalModel {
    pub fn new<I: IntoIterator<Item = (String, f64)>>(base_logits: I) -> Self {
        MockLexicalModel {
            base_logits: base_logits.into_iter().collect(),
            lexicon: Vec::new(),
            case_sensitive: false,
        }
    }

    pub fn with_weight(mut self, token: &str, label: &str, weight: f64) -> Self {
        self.lexicon.push(LexiconEntry {
            token: token.into(),
            label: label.into(),
            weight,
        });
        self
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let model: MockLexicalModel = serde_json::from_str(&raw).map_err(|e| Error::Parse {
            path: path.to_owned(),
            line: e.line(),
            message: e.to_string(),
        })?;
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        if self.base_logits.is_empty() {
            return Err(Error::validation("mock model needs at least one label"));
        }
        if let Some((l, _)) = self.base_logits.iter().find(|(_, b)| !b.is_finite()) {
            return Err(Error::validation(format!("base logit for {l:?} is not finite")));
        }
        let mut seen = BTreeSet::new();
        for e in &self.lexicon {
            if !self.base_logits.contains_key(&e.label) {
                return Err(Error::validation(format!(
                    "lexicon entry for token {:?} names unknown label {:?}",
                    e.token, e.label
                )));
            }
            if !e.weight.is_finite() {
                return Err(Error::validation(format!("weight for {:?} is not finite", e.token)));
            }
            let token = self.normalize(&e.token);
            if tokenize(&token, true).len() != 1 {
                return Err(Error::validation(format!(
                    "lexicon token {:?} must be a single alphanumeric word",
                    e.token
                )));
            }
            if !seen.insert((token, e.label.clone())) {
                return Err(Error::validation(format!(
                    "duplicate lexicon entry ({:?}, {:?})",
                    e.token, e.label
                )));
            }
        }
        Ok(())
    }

    pub fn labels(&self) -> Vec<String> {
        self.base_logits.keys().cloned().collect()
    }

    fn normalize(&self, token: &str) -> String {
        if self.case_sensitive {
            token.to_string()
        } else {
            token.to_lowercase()
        }
    }

    pub fn logits(&self, text: &str) -> BTreeMap<String, f64> {
        let tokens = tokenize(text, self.case_sensitive);
        let mut z = self.base_logits.clone();
        for e in &self.lexicon {
            if tokens.contains(&self.normalize(&e.token)) {
                *z.get_mut(&e.label).expect("validated label") += e.weight;
            }
        }
        z
    }

    pub fn predict_text(&self, text: &str) -> BTreeMap<String, f64> {
        self.logits(text)
            .into_iter()
            .map(|(l, z)| (l, logistic(z)))
            .collect()
    }
}

/// Distinct alphanumeric tokens of `text`.
pub fn tokenize(text: &str, case_sensitive: bool) -> BTreeSet<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| {
            if case_sensitive {
                t.to_string()
            } else {
                t.to_lowercase()
            }
        })
        .collect()
}

pub fn predict_mock(dataset: &GroupedDataset, model: &MockLexicalModel) -> Vec<PredictionRecord> {
    predict_mock_with(dataset, model, Execution::default())
}

/// One record per (group, sample), ordered by group name then sample id.
pub fn predict_mock_with(
    dataset: &GroupedDataset,
    model: &MockLexicalModel,
    exec: Execution,
) -> Vec<PredictionRecord> {
    let items: Vec<(&str, &str, &str)> = dataset
        .groups
        .iter()
        .flat_map(|g| {
            g.samples
                .iter()
                .map(move |s| (g.name.as_str(), s.id.as_str(), s.text.as_str()))
        })
        .collect();
    let mut records = par::map(exec, &items, |(group, id, text)| PredictionRecord {
        sample_id: id.to_string(),
        group: group.to_string(),
        probabilities: model.predict_text(text),
    });
    sort_records(&mut records);
    records
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mortality(base: f64) -> MockLexicalModel {
        MockLexicalModel::new([("mortality".to_string(), base)])
    }

    #[test]
    fn zero_logit_is_one_half() {
        let m = mortality(0.0);
        assert_eq!(m.predict_text("anything at all")["mortality"], 0.5);
    }

    #[test]
    fn negative_token_weight() {
        let m = mortality(0.0).with_weight("transgender", "mortality", -0.5);
        let with = m.predict_text("58 yo Transgender woman")["mortality"];
        assert!((with - 0.37754).abs() < 1e-5, "{with}");
        assert_eq!(m.predict_text("58 yo woman")["mortality"], 0.5);
    }

    #[test]
    fn saturation() {
        let m = mortality(0.0).with_weight("sepsis", "mortality", 10.0);
        assert!(m.predict_text("sepsis")["mortality"] > 0.9999);
    }

    #[test]
    fn tokens_count_once() {
        let m = mortality(0.0).with_weight("pain", "mortality", 1.0);
        assert_eq!(m.predict_text("pain pain pain"), m.predict_text("pain"));
    }

    #[test]
    fn tokenization_splits_deid_token() {
        let toks = tokenize("[**Age over 90 **] year-old", false);
        let want: BTreeSet<String> = ["age", "over", "90", "year", "old"].map(String::from).into();
        assert_eq!(toks, want);
    }

    #[test]
    fn case_sensitivity() {
        let mut m = mortality(0.0).with_weight("F", "mortality", 1.0);
        m.case_sensitive = true;
        assert_eq!(m.predict_text("yo f")["mortality"], 0.5);
        assert!(m.predict_text("yo F")["mortality"] > 0.5);
    }

    #[test]
    fn validation() {
        assert!(mortality(0.0).with_weight("x", "htn", 1.0).validate().is_err());
        assert!(mortality(0.0).with_weight("two words", "mortality", 1.0).validate().is_err());
        assert!(mortality(0.0)
            .with_weight("x", "mortality", 1.0)
            .with_weight("X", "mortality", 1.0)
            .validate()
            .is_err());
        assert!(MockLexicalModel::new([]).validate().is_err());
    }

    #[test]
    fn logit_inverts_logistic() {
        for p in [0.01, 0.3, 0.5, 0.55, 0.99] {
            assert!((logistic(logit(p)) - p).abs() < 1e-15);
        }
    }
}
