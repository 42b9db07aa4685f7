use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::ReportOptions;
use crate::corpus::{load_corpus, Corpus};
use crate::error::{Error, Result};
use crate::inference::{MockLexicalModel, ModelEndpoint};
use crate::perturb::{resolve_spec, CharacteristicSpec};
use crate::report::DEFAULT_TOP_K;

/// Where predictions come from.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelSource {
    Mock(MockLexicalModel),
    Endpoint(ModelEndpoint),
    Predictions(PathBuf),
}

/// Settings shared by the pipeline commands. Every field is optional so a
/// config file and command-line flags can be layered with
/// [`RunConfig::overlay`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    pub vocabulary: Option<PathBuf>,
    pub characteristic: Option<String>,
    pub spec: Option<PathBuf>,
    pub endpoint: Option<String>,
    pub predictions: Option<PathBuf>,
    pub mock: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub top_k: Option<usize>,
    pub seed: Option<u64>,
    pub max_parallel: Option<usize>,
    pub timeout_ms: Option<u64>,
    pub table_labels: Option<Vec<String>>,
}

impl RunConfig {
    /// Reads a JSON config. Relative paths inside it are taken relative to
    /// the file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: RunConfig = serde_json::from_str(&raw).map_err(|e| Error::Parse {
            path: path.to_owned(),
            line: e.line(),
            message: e.to_string(),
        })?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [
            &mut cfg.input,
            &mut cfg.vocabulary,
            &mut cfg.spec,
            &mut cfg.predictions,
            &mut cfg.mock,
            &mut cfg.out,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    /// Fields set in `flags` replace those of `self`.
    pub fn overlay(self, flags: RunConfig) -> RunConfig {
        RunConfig {
            input: flags.input.or(self.input),
            vocabulary: flags.vocabulary.or(self.vocabulary),
            characteristic: flags.characteristic.or(self.characteristic),
            spec: flags.spec.or(self.spec),
            endpoint: flags.endpoint.or(self.endpoint),
            predictions: flags.predictions.or(self.predictions),
            mock: flags.mock.or(self.mock),
            out: flags.out.or(self.out),
            top_k: flags.top_k.or(self.top_k),
            seed: flags.seed.or(self.seed),
            max_parallel: flags.max_parallel.or(self.max_parallel),
            timeout_ms: flags.timeout_ms.or(self.timeout_ms),
            table_labels: flags.table_labels.or(self.table_labels),
        }
    }

    pub fn out_dir(&self) -> Result<&Path> {
        self.out
            .as_deref()
            .ok_or_else(|| Error::validation("an output directory (--out) is required"))
    }

    pub fn corpus(&self) -> Result<Corpus> {
        let input = self
            .input
            .as_deref()
            .ok_or_else(|| Error::validation("an input notes file (--input) is required"))?;
        load_corpus(input, self.vocabulary.as_deref())
    }

    pub fn characteristic_spec(&self) -> Result<CharacteristicSpec> {
        resolve_spec(self.characteristic.as_deref(), self.spec.as_deref())
    }

    /// Name of the characteristic directory under the output directory.
    pub fn characteristic_name(&self) -> Result<String> {
        match (&self.spec, &self.characteristic) {
            (Some(_), _) => Ok(self.characteristic_spec()?.name),
            (None, Some(name)) => Ok(name.clone()),
            (None, None) => Err(Error::validation(
                "either --characteristic or --spec is required",
            )),
        }
    }

    /// The single configured model source. `token` is passed to endpoints
    /// as a bearer token.
    pub fn model_source(&self, token: Option<String>) -> Result<ModelSource> {
        let set = [self.endpoint.is_some(), self.predictions.is_some(), self.mock.is_some()]
            .iter()
            .filter(|&&b| b)
            .count();
        if set != 1 {
            return Err(Error::validation(
                "exactly one of --endpoint, --predictions, --mock is required",
            ));
        }
        if let Some(url) = &self.endpoint {
            let mut endpoint = ModelEndpoint::new(url.clone());
            if let Some(n) = self.max_parallel {
                endpoint.max_parallel = n;
            }
            if let Some(ms) = self.timeout_ms {
                endpoint.timeout_ms = ms;
            }
            endpoint.bearer_token = token;
            endpoint.validate()?;
            return Ok(ModelSource::Endpoint(endpoint));
        }
        if let Some(path) = &self.predictions {
            return Ok(ModelSource::Predictions(path.clone()));
        }
        let path = self.mock.as_ref().expect("one source is set");
        Ok(ModelSource::Mock(MockLexicalModel::load(path)?))
    }

    pub fn report_options(&self) -> ReportOptions {
        ReportOptions {
            top_k: self.top_k.unwrap_or(DEFAULT_TOP_K),
            table_labels: self.table_labels.clone().unwrap_or_default(),
        }
    }
}
