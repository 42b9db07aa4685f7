//! Protocol conformance checks for model servers.
//!
//! Run these against an adapter before auditing a real model with it. Each
//! check is independent and reports a one-line detail.

use serde::Serialize;

use super::remote::{check_info, runtime, ErrorBody, Failure, ModelEndpoint, ModelInfo, PredictResponse, RemoteClient};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConformanceReport {
    pub endpoint: String,
    pub checks: Vec<CheckResult>,
}

impl ConformanceReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn render(&self) -> String {
        let mut out = format!("conformance: {}\n", self.endpoint);
        for c in &self.checks {
            let mark = if c.passed { "PASS" } else { "FAIL" };
            out.push_str(&format!("  [{mark}] {:<22} {}\n", c.name, c.detail));
        }
        out
    }
}

const PROBE_TEXTS: [&str; 2] = [
    "58 yo F admitted with chest pain. She is stable.",
    "73 year old M with sepsis. He was given fluids.",
];

type Raw = std::result::Result<(u16, String), Failure>;

fn describe(r: &Raw) -> String {
    match r {
        Ok((s, body)) => format!("HTTP {s}: {}", body.chars().take(120).collect::<String>()),
        Err(Failure::Transient(m)) => m.clone(),
        Err(Failure::Fatal(e)) => e.to_string(),
    }
}

fn parse_predict(r: &Raw) -> std::result::Result<PredictResponse, String> {
    match r {
        Ok((200, body)) => serde_json::from_str(body).map_err(|e| format!("malformed body: {e}")),
        other => Err(describe(other)),
    }
}

fn check(name: &'static str, outcome: std::result::Result<String, String>) -> CheckResult {
    match outcome {
        Ok(detail) => CheckResult { name, passed: true, detail },
        Err(detail) => CheckResult { name, passed: false, detail },
    }
}

fn expects_error(r: &Raw) -> std::result::Result<String, String> {
    match r {
        Ok((status, body)) if (400..500).contains(status) => serde_json::from_str::<ErrorBody>(body)
            .map(|b| format!("HTTP {status} {:?}", b.error))
            .map_err(|_| format!("HTTP {status} without an {{\"error\": ...}} body")),
        other => Err(format!("expected a 4xx error, got {}", describe(other))),
    }
}

pub async fn run_conformance_async(endpoint: &ModelEndpoint) -> Result<ConformanceReport> {
    let client = RemoteClient::new(endpoint.clone())?;
    let mut checks = Vec::new();

    let info_raw = client.send("/v1/info", None).await;
    let info: std::result::Result<ModelInfo, String> = match &info_raw {
        Ok((200, body)) => serde_json::from_str::<ModelInfo>(body)
            .map_err(|e| format!("malformed body: {e}"))
            .and_then(|i| check_info(&i).map(|_| i).map_err(|e| e.to_string())),
        other => Err(describe(other)),
    };
    checks.push(check(
        "info_schema",
        info.as_ref()
            .map(|i| format!("model {:?}, {:?}, {} labels", i.model_id, i.task, i.labels.len()))
            .map_err(Clone::clone),
    ));
    let Ok(info) = info else {
        return Ok(ConformanceReport {
            endpoint: endpoint.base_url.clone(),
            checks,
        });
    };

    let body = |texts: &[&str]| serde_json::json!({ "texts": texts });
    let first = client.send("/v1/predict", Some(&body(&PROBE_TEXTS))).await;
    let parsed = parse_predict(&first);
    checks.push(check(
        "predict_schema",
        parsed.as_ref().map_err(Clone::clone).and_then(|r| {
            if r.labels != info.labels {
                Err(format!("labels {:?} differ from /v1/info order {:?}", r.labels, info.labels))
            } else if r.probabilities.len() != PROBE_TEXTS.len() {
                Err(format!("{} rows for {} texts", r.probabilities.len(), PROBE_TEXTS.len()))
            } else if r.probabilities.iter().any(|row| row.len() != info.labels.len()) {
                Err("row length differs from label count".into())
            } else {
                Ok("rows and label order match".into())
            }
        }),
    ));
    checks.push(check(
        "probability_range",
        parsed.as_ref().map_err(Clone::clone).and_then(|r| {
            match r.probabilities.iter().flatten().find(|p| !(0.0..=1.0).contains(*p)) {
                Some(p) => Err(format!("probability {p} outside [0, 1]")),
                None => Ok("all probabilities in [0, 1]".into()),
            }
        }),
    ));

    let again = parse_predict(&client.send("/v1/predict", Some(&body(&PROBE_TEXTS))).await);
    checks.push(check(
        "deterministic",
        match (&parsed, &again) {
            (Ok(a), Ok(b)) if a == b => Ok("identical responses".into()),
            (Ok(_), Ok(_)) => Err("repeated request returned a different response".into()),
            (Err(e), _) | (_, Err(e)) => Err(e.clone()),
        },
    ));

    let reversed = [PROBE_TEXTS[1], PROBE_TEXTS[0]];
    let swapped = parse_predict(&client.send("/v1/predict", Some(&body(&reversed))).await);
    checks.push(check(
        "row_order",
        match (&parsed, &swapped) {
            (Ok(a), Ok(b)) if a.probabilities.len() == 2 && b.probabilities.len() == 2 => {
                if a.probabilities[0] == b.probabilities[1] && a.probabilities[1] == b.probabilities[0] {
                    Ok("rows follow request order".into())
                } else {
                    Err("rows do not follow request order".into())
                }
            }
            (Err(e), _) | (_, Err(e)) => Err(e.clone()),
            _ => Err("unexpected row count".into()),
        },
    ));

    let empty = client.send("/v1/predict", Some(&body(&[]))).await;
    checks.push(check("empty_texts_rejected", expects_error(&empty)));
    let malformed = client
        .send("/v1/predict", Some(&serde_json::json!({ "inputs": "x" })))
        .await;
    checks.push(check("malformed_rejected", expects_error(&malformed)));

    Ok(ConformanceReport {
        endpoint: endpoint.base_url.clone(),
        checks,
    })
}

/// Blocking wrapper around [`run_conformance_async`].
pub fn run_conformance(endpoint: &ModelEndpoint) -> Result<ConformanceReport> {
    runtime()?.block_on(run_conformance_async(endpoint))
}
