//! HTTP client for models served behind the prediction wire protocol.
//!
//! ```text
//! GET  /v1/info     -> {"model_id": str, "task": "multilabel"|"binary", "labels": [str]}
//! POST /v1/predict  {"texts": [str]}
//!                   -> {"labels": [str], "probabilities": [[f64]]}
//! errors            -> 4xx {"error": str}
//! ```

use std::collections::BTreeMap;
use std::time::Duration;

use futures::stream::{self, StreamExt};
use serde::{Deserialize, Serialize};

use super::records::PredictionRecord;
use crate::error::{Error, Result, SampleKey};
use crate::perturb::GroupedDataset;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelEndpoint {
    pub base_url: String,
    pub timeout_ms: u64,
    pub max_batch: usize,
    pub max_parallel: usize,
    pub retries: u32,
    /// Sent as `Authorization: Bearer <token>` when set.
    pub bearer_token: Option<String>,
}

impl ModelEndpoint {
    pub fn new(base_url: impl Into<String>) -> Self {
        ModelEndpoint {
            base_url: base_url.into(),
            timeout_ms: 30_000,
            max_batch: 16,
            max_parallel: 4,
            retries: 3,
            bearer_token: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_batch < 1 {
            return Err(Error::validation("max_batch must be at least 1"));
        }
        if self.max_parallel < 1 {
            return Err(Error::validation("max_parallel must be at least 1"));
        }
        if !(self.base_url.starts_with("http://") || self.base_url.starts_with("https://")) {
            return Err(Error::validation(format!(
                "endpoint {:?} must be an http(s) URL",
                self.base_url
            )));
        }
        Ok(())
    }

    fn url(&self, path: &str) -> String {
        format!("{}{path}", self.base_url.trim_end_matches('/'))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Multilabel,
    Binary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelInfo {
    pub model_id: String,
    pub task: Task,
    pub labels: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictRequest {
    pub texts: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictResponse {
    pub labels: Vec<String>,
    pub probabilities: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
}

#[derive(Debug)]
pub(crate) enum Failure {
    /// Connection problems, timeouts, 5xx, 408 and 429.
    Transient(String),
    Fatal(Error),
}

/// Raw HTTP access to one endpoint.
#[derive(Debug, Clone)]
pub struct RemoteClient {
    http: reqwest::Client,
    endpoint: ModelEndpoint,
}

impl RemoteClient {
    pub fn new(endpoint: ModelEndpoint) -> Result<Self> {
        endpoint.validate()?;
        let http = reqwest::Client::builder()
            .timeout(Duration::from_millis(endpoint.timeout_ms))
            .build()
            .map_err(|e| Error::validation(format!("cannot build HTTP client: {e}")))?;
        Ok(RemoteClient { http, endpoint })
    }

    pub fn endpoint(&self) -> &ModelEndpoint {
        &self.endpoint
    }

    fn authorize(&self, req: reqwest::RequestBuilder) -> reqwest::RequestBuilder {
        match &self.endpoint.bearer_token {
            Some(t) => req.bearer_auth(t),
            None => req,
        }
    }

    /// Sends one request and returns status and body, classifying
    /// transport-level problems as transient.
    pub(crate) async fn send(
        &self,
        path: &str,
        body: Option<&serde_json::Value>,
    ) -> std::result::Result<(u16, String), Failure> {
        let url = self.endpoint.url(path);
        let req = match body {
            Some(b) => self.http.post(&url).json(b),
            None => self.http.get(&url),
        };
        let resp = self
            .authorize(req)
            .send()
            .await
            .map_err(|e| Failure::Transient(format!("{url}: {e}")))?;
        let status = resp.status().as_u16();
        let text = resp
            .text()
            .await
            .map_err(|e| Failure::Transient(format!("{url}: reading body: {e}")))?;
        Ok((status, text))
    }

    async fn call<T: serde::de::DeserializeOwned>(
        &self,
        path: &str,
        body: Option<&serde_json::Value>,
    ) -> std::result::Result<T, Failure> {
        let (status, text) = self.send(path, body).await?;
        match status {
            200 => serde_json::from_str(&text).map_err(|e| {
                Failure::Fatal(Error::Protocol(format!("{path}: malformed response: {e}")))
            }),
            408 | 429 | 500..=599 => Err(Failure::Transient(format!("{path}: HTTP {status}"))),
            _ => {
                let msg = serde_json::from_str::<ErrorBody>(&text)
                    .map(|b| b.error)
                    .unwrap_or(text);
                Err(Failure::Fatal(Error::Protocol(format!("{path}: HTTP {status}: {msg}"))))
            }
        }
    }

    async fn with_retries<T, F, Fut>(&self, mut attempt: F) -> std::result::Result<T, Failure>
    where
        F: FnMut() -> Fut,
        Fut: std::future::Future<Output = std::result::Result<T, Failure>>,
    {
        let mut tries = 0u32;
        loop {
            match attempt().await {
                Err(Failure::Transient(msg)) if tries < self.endpoint.retries => {
                    log::debug!("transient failure (attempt {}): {msg}", tries + 1);
                    let backoff = 25u64.saturating_mul(1 << tries.min(5)).min(1_000);
                    tokio::time::sleep(Duration::from_millis(backoff)).await;
                    tries += 1;
                }
                other => return other,
            }
        }
    }

    pub async fn info(&self) -> Result<ModelInfo> {
        let info: ModelInfo = self
            .with_retries(|| self.call("/v1/info", None))
            .await
            .map_err(|f| match f {
                Failure::Transient(message) => Error::Transport {
                    message,
                    missing: vec![],
                },
                Failure::Fatal(e) => e,
            })?;
        check_info(&info)?;
        Ok(info)
    }

    pub(crate) async fn predict_texts(
        &self,
        texts: &[&str],
    ) -> std::result::Result<PredictResponse, Failure> {
        let body = serde_json::json!({ "texts": texts });
        self.with_retries(|| self.call("/v1/predict", Some(&body))).await
    }
}

pub(crate) fn check_info(info: &ModelInfo) -> Result<()> {
    if info.labels.is_empty() {
        return Err(Error::Protocol("/v1/info lists no labels".into()));
    }
    let mut sorted = info.labels.clone();
    sorted.sort();
    sorted.dedup();
    if sorted.len() != info.labels.len() {
        return Err(Error::Protocol("/v1/info lists duplicate labels".into()));
    }
    if info.task == Task::Binary && info.labels.len() != 1 {
        return Err(Error::Protocol(format!(
            "binary task must expose exactly one label, got {}",
            info.labels.len()
        )));
    }
    Ok(())
}

struct Batch<'a> {
    group: &'a str,
    ids: Vec<&'a str>,
    texts: Vec<&'a str>,
}

fn batches(dataset: &GroupedDataset, max_batch: usize) -> Vec<Batch<'_>> {
    let mut groups: Vec<_> = dataset.groups.iter().collect();
    groups.sort_by(|a, b| a.name.cmp(&b.name));
    let mut out = Vec::new();
    for g in groups {
        let mut samples: Vec<_> = g.samples.iter().collect();
        samples.sort_by(|a, b| a.id.cmp(&b.id));
        for chunk in samples.chunks(max_batch) {
            out.push(Batch {
                group: &g.name,
                ids: chunk.iter().map(|s| s.id.as_str()).collect(),
                texts: chunk.iter().map(|s| s.text.as_str()).collect(),
            });
        }
    }
    out
}

fn to_records(
    batch: &Batch<'_>,
    labels: &[String],
    resp: PredictResponse,
) -> Result<Vec<PredictionRecord>> {
    if resp.labels != labels {
        return Err(Error::Protocol(format!(
            "response labels {:?} differ from /v1/info labels {:?} (group {:?}, first id {:?})",
            resp.labels, labels, batch.group, batch.ids[0]
        )));
    }
    if resp.probabilities.len() != batch.texts.len() {
        return Err(Error::Protocol(format!(
            "sent {} texts but received {} rows (group {:?}, first id {:?})",
            batch.texts.len(),
            resp.probabilities.len(),
            batch.group,
            batch.ids[0]
        )));
    }
    batch
        .ids
        .iter()
        .zip(resp.probabilities)
        .map(|(id, row)| {
            if row.len() != labels.len() {
                return Err(Error::Protocol(format!(
                    "record ({}, {id}) has {} probabilities for {} labels",
                    batch.group,
                    row.len(),
                    labels.len()
                )));
            }
            let mut probabilities = BTreeMap::new();
            for (label, p) in labels.iter().zip(row) {
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::Protocol(format!(
                        "record ({}, {id}): probability {p} for label {label:?} is outside [0, 1]",
                        batch.group
                    )));
                }
                probabilities.insert(label.clone(), p);
            }
            Ok(PredictionRecord {
                sample_id: id.to_string(),
                group: batch.group.to_string(),
                probabilities,
            })
        })
        .collect()
}

/// Collects predictions for every (group, sample) pair of `dataset`.
///
/// Requests carry at most `max_batch` texts with at most `max_parallel` in
/// flight. Results come back ordered by group name, then sample id, however
/// the requests complete. Any batch still failing after the retries aborts
/// the run with the full list of missing pairs.
pub async fn predict_remote_async(
    dataset: &GroupedDataset,
    endpoint: &ModelEndpoint,
) -> Result<Vec<PredictionRecord>> {
    let client = RemoteClient::new(endpoint.clone())?;
    let info = client.info().await.map_err(|e| match e {
        Error::Transport { message, .. } => Error::Transport {
            message,
            missing: all_keys(dataset),
        },
        other => other,
    })?;
    let work = batches(dataset, endpoint.max_batch);
    let client = &client;
    let mut results: Vec<(usize, std::result::Result<PredictResponse, Failure>)> =
        stream::iter(work.iter().enumerate().map(|(i, b)| async move {
            (i, client.predict_texts(&b.texts).await)
        }))
        .buffer_unordered(endpoint.max_parallel)
        .collect()
        .await;
    results.sort_by_key(|(i, _)| *i);

    let mut records = Vec::with_capacity(dataset.cohort_size() * dataset.groups.len());
    let mut missing = Vec::new();
    let mut last_transient = None;
    for (i, result) in results {
        let batch = &work[i];
        match result {
            Ok(resp) => records.extend(to_records(batch, &info.labels, resp)?),
            Err(Failure::Fatal(e)) => return Err(e),
            Err(Failure::Transient(msg)) => {
                missing.extend(batch.ids.iter().map(|id| (batch.group.to_string(), id.to_string())));
                last_transient = Some(msg);
            }
        }
    }
    if let Some(message) = last_transient {
        return Err(Error::Transport { message, missing });
    }
    Ok(records)
}

/// Blocking wrapper around [`predict_remote_async`]. Must not be called
/// from inside an async runtime.
pub fn predict_remote(dataset: &GroupedDataset, endpoint: &ModelEndpoint) -> Result<Vec<PredictionRecord>> {
    runtime()?.block_on(predict_remote_async(dataset, endpoint))
}

pub(crate) fn runtime() -> Result<tokio::runtime::Runtime> {
    tokio::runtime::Builder::new_current_thread()
        .enable_all()
        .build()
        .map_err(|e| Error::io("<tokio runtime>", e))
}

fn all_keys(dataset: &GroupedDataset) -> Vec<SampleKey> {
    let mut keys: Vec<SampleKey> = dataset
        .groups
        .iter()
        .flat_map(|g| g.samples.iter().map(|s| (g.name.clone(), s.id.clone())))
        .collect();
    keys.sort();
    keys
}
