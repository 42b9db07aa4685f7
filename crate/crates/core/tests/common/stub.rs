//! In-process model server speaking the prediction wire protocol, with
//! switchable misbehavior.




use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::Duration;

use axum::extract::State;
use axum::http::{HeaderMap, StatusCode};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde_json::{json, Value};
use tokio::sync::oneshot;

pub const LABELS: [&str; 2] = ["mortality", "sepsis"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Answers every request immediately and correctly.
    Echo,
    /// Delays each response by a pseudo-random amount derived from its
    /// texts, so responses complete out of request order.
    Shuffled,
    /// Answers the first predict request with HTTP 503, then like `Shuffled`.
    ShuffledFailOnce,
    /// Returns probability 1.2 for texts containing [`BAD_MARKER`].
    OutOfRange,
    /// Lists the labels in reverse order in predict responses.
    LabelMismatch,
    /// Always answers predict with HTTP 503.
    Unavailable,
    /// Returns different values for identical requests.
    Nondeterministic,
}

pub const BAD_MARKER: &str = "sepsis";

/// Probabilities the stub assigns to `text`, in [`LABELS`] order.
pub fn oracle(text: &str) -> Vec<f64> {
    let p = (text.chars().count() % 100) as f64 / 100.0;
    vec![p, 1.0 - p]
}

struct Shared {
    mode: Mode,
    predict_calls: AtomicUsize,
    auth: Mutex<Vec<String>>,
}

pub struct Stub {
    pub url: String,
    shared: Arc<Shared>,
    shutdown: Option<oneshot::Sender<()>>,
    thread: Option<JoinHandle<()>>,
}

impl Stub {
    pub fn start(mode: Mode) -> Stub {
        let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
        listener.set_nonblocking(true).unwrap();
        let url = format!("http://{}", listener.local_addr().unwrap());
        let shared = Arc::new(Shared {
            mode,
            predict_calls: AtomicUsize::new(0),
            auth: Mutex::new(Vec::new()),
        });
        let (tx, rx) = oneshot::channel::<()>();
        let state = shared.clone();
        let thread = std::thread::spawn(move || {
            let rt = tokio::runtime::Builder::new_multi_thread()
                .worker_threads(2)
                .enable_all()
                .build()
                .unwrap();
            rt.block_on(async move {
                let app = Router::new()
                    .route("/v1/info", get(info))
                    .route("/v1/predict", post(predict))
                    .with_state(state);
                let listener = tokio::net::TcpListener::from_std(listener).unwrap();
                axum::serve(listener, app)
                    .with_graceful_shutdown(async {
                        let _ = rx.await;
                    })
                    .await
                    .unwrap();
            });
        });
        Stub {
            url,
            shared,
            shutdown: Some(tx),
            thread: Some(thread),
        }
    }

    pub fn predict_calls(&self) -> usize {
        self.shared.predict_calls.load(Ordering::SeqCst)
    }

    pub fn authorization_headers(&self) -> Vec<String> {
        self.shared.auth.lock().unwrap().clone()
    }
}

impl Drop for Stub {
    fn drop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

async fn info() -> Json<Value> {
    Json(json!({"model_id": "stub", "task": "multilabel", "labels": LABELS}))
}

fn error(status: StatusCode, msg: &str) -> (StatusCode, Json<Value>) {
    (status, Json(json!({ "error": msg })))
}

async fn predict(
    State(shared): State<Arc<Shared>>,
    headers: HeaderMap,
    body: String,
) -> (StatusCode, Json<Value>) {
    let call = shared.predict_calls.fetch_add(1, Ordering::SeqCst);
    if let Some(v) = headers.get("authorization").and_then(|v| v.to_str().ok()) {
        shared.auth.lock().unwrap().push(v.to_string());
    }
    let texts: Vec<String> = match serde_json::from_str::<Value>(&body)
        .ok()
        .and_then(|v| v.get("texts").cloned())
        .and_then(|t| serde_json::from_value(t).ok())
    {
        Some(t) => t,
        None => return error(StatusCode::BAD_REQUEST, "body must be {\"texts\": [...]}"),
    };
    if texts.is_empty() {
        return error(StatusCode::UNPROCESSABLE_ENTITY, "texts must be non-empty");
    }
    let mode = shared.mode;
    if mode == Mode::Unavailable || (mode == Mode::ShuffledFailOnce && call == 0) {
        return error(StatusCode::SERVICE_UNAVAILABLE, "warming up");
    }
    if matches!(mode, Mode::Shuffled | Mode::ShuffledFailOnce) {
        let mut h = DefaultHasher::new();
        texts.hash(&mut h);
        tokio::time::sleep(Duration::from_millis(h.finish() % 40)).await;
    }
    let mut labels: Vec<&str> = LABELS.to_vec();
    let mut rows: Vec<Vec<f64>> = texts.iter().map(|t| oracle(t)).collect();
    match mode {
        Mode::OutOfRange => {
            for (row, t) in rows.iter_mut().zip(&texts) {
                if t.contains(BAD_MARKER) {
                    row[0] = 1.2;
                }
            }
        }
        Mode::LabelMismatch => {
            labels.reverse();
            rows.iter_mut().for_each(|r| r.reverse());
        }
        Mode::Nondeterministic => {
            for row in &mut rows {
                row[0] = (call % 7) as f64 / 10.0;
            }
        }
        _ => {}
    }
    (StatusCode::OK, Json(json!({ "labels": labels, "probabilities": rows })))
}
