//! Model predictions for altered samples: a remote model behind the HTTP
//! wire protocol, a precomputed predictions file, or the built-in mock
//! lexical model.
//!
//! Probabilities are transported as-is; no link function is applied to
//! remote outputs. A run either covers every `(group, sample)` pair or
//! fails.

pub mod conformance;
mod mock;
mod records;
mod remote;

pub use mock::{logistic, logit, predict_mock, predict_mock_with, tokenize, LexiconEntry, MockLexicalModel};
pub use records::{load_predictions, save_predictions, sort_records, validate_records, PredictionRecord};
pub use remote::{
    predict_remote, predict_remote_async, ErrorBody, ModelEndpoint, ModelInfo, PredictRequest,
    PredictResponse, RemoteClient, Task,
};

use std::collections::BTreeSet;

use crate::error::{Error, Result, SampleKey};
use crate::perturb::GroupedDataset;

/// Checks that `records` hold exactly one prediction per `(group, sample)`
/// pair of `dataset`, with no extras.
pub fn check_complete(dataset: &GroupedDataset, records: &[PredictionRecord]) -> Result<()> {
    validate_records(records)?;
    let expected: BTreeSet<SampleKey> = dataset
        .groups
        .iter()
        .flat_map(|g| g.samples.iter().map(|s| (g.name.clone(), s.id.clone())))
        .collect();
    let got: BTreeSet<SampleKey> = records
        .iter()
        .map(|r| (r.group.clone(), r.sample_id.clone()))
        .collect();
    let missing: Vec<SampleKey> = expected.difference(&got).cloned().collect();
    if !missing.is_empty() {
        return Err(Error::IncompleteCohort { missing });
    }
    if let Some((g, id)) = got.difference(&expected).next() {
        return Err(Error::validation(format!(
            "prediction for ({g}, {id}) does not belong to the dataset"
        )));
    }
    Ok(())
}
