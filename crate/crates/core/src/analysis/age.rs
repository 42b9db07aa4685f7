use std::fmt;

use super::baseline::BaselineDistribution;
use super::means::{aggregate, GroupMeans};
use crate::error::{Error, Result};
use crate::inference::PredictionRecord;
use crate::perturb::builtin::{MAX_AGE, MIN_AGE};
use crate::perturb::OVER90;

/// One point on the age axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AgeBucket {
    Years(u32),
    Over90,
}

impl AgeBucket {
    /// Every bucket in axis order: 18..=89, then over-90.
    pub fn all() -> Vec<AgeBucket> {
        (MIN_AGE..=MAX_AGE)
            .map(AgeBucket::Years)
            .chain([AgeBucket::Over90])
            .collect()
    }

    pub fn parse(group: &str) -> Option<AgeBucket> {
        if group == OVER90 {
            return Some(AgeBucket::Over90);
        }
        let years: u32 = group.parse().ok()?;
        (MIN_AGE..=MAX_AGE)
            .contains(&years)
            .then_some(AgeBucket::Years(years))
    }
}

impl fmt::Display for AgeBucket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AgeBucket::Years(y) => write!(f, "{y}"),
            AgeBucket::Over90 => f.write_str(OVER90),
        }
    }
}

/// Mean probability of one label at every age, optionally with the
/// observed prevalence of that label among notes already at that age.
#[derive(Debug, Clone, PartialEq)]
pub struct AgeCurve {
    pub label: String,
    pub points: Vec<(AgeBucket, f64)>,
    /// Same length as `points`; `None` where no note has that age.
    pub overlay: Option<Vec<Option<f64>>>,
}

/// Aggregates age-sweep predictions into one curve per label.
pub fn age_sweep(
    records: &[PredictionRecord],
    overlay: Option<&BaselineDistribution>,
) -> Result<Vec<AgeCurve>> {
    age_curves(&aggregate("age", records)?, overlay)
}

/// Curves from already aggregated means; every age group must be present.
pub fn age_curves(
    means: &GroupMeans,
    overlay: Option<&BaselineDistribution>,
) -> Result<Vec<AgeCurve>> {
    let buckets = AgeBucket::all();
    if let Some(bad) = means.groups.iter().find(|g| AgeBucket::parse(g).is_none()) {
        return Err(Error::validation(format!("{bad:?} is not an age group")));
    }
    let missing: Vec<String> = buckets
        .iter()
        .map(|b| b.to_string())
        .filter(|b| means.group_index(b).is_none())
        .collect();
    if !missing.is_empty() {
        return Err(Error::validation(format!(
            "age sweep is missing groups: {}",
            missing.join(", ")
        )));
    }
    let rows: Vec<usize> = buckets
        .iter()
        .map(|b| means.group_index(&b.to_string()).expect("checked"))
        .collect();
    let prevalence = overlay.map(|o| o.prevalence());

    Ok(means
        .labels
        .iter()
        .enumerate()
        .map(|(l, label)| {
            let points = buckets
                .iter()
                .zip(&rows)
                .map(|(&b, &g)| (b, means.means[g][l]))
                .collect();
            let overlay = overlay.zip(prevalence.as_ref()).and_then(|(o, prev)| {
                let ol = o.labels.iter().position(|x| x == label)?;
                Some(
                    buckets
                        .iter()
                        .map(|b| o.group_index(&b.to_string()).map(|g| prev[g][ol]))
                        .collect(),
                )
            });
            AgeCurve {
                label: label.clone(),
                points,
                overlay,
            }
        })
        .collect())
}
