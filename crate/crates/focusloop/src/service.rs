//! The classify loop and the network side: WebSocket broadcast, rating
//! capture and the dev-mode manual label endpoint.

use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{mpsc, Arc, Mutex};
use std::time::Duration;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use focusloop_core::tick::{Mode, StateMessage, TickEngine};
use focusloop_core::StateLabel;
use serde::{Deserialize, Serialize};
use tokio::sync::{broadcast, oneshot};

use crate::error::{Error, Result};
use crate::ingestion::queue::{BoundedQueue, Pop};
use crate::ingestion::{LabeledSample, SampleSource};

/// Per-consumer backlog; a slower consumer loses its oldest frames.
pub const OUTBOX_CAPACITY: usize = 16;

pub fn to_json_line(m: &StateMessage) -> String {
    serde_json::to_string(m).expect("state message serializes")
}

/// True for errors that reject one sample but leave the stream usable.
fn is_sample_error(e: &focusloop_core::Error) -> bool {
    use focusloop_core::Error as E;
    matches!(e, E::NonMonotonicTimestamp { .. } | E::ChannelCountMismatch { .. } | E::NonFinite(_))
}

fn feed(engine: &mut TickEngine, ls: LabeledSample, drops: u64) -> Result<Option<StateMessage>> {
    match engine.on_sample(ls.sample, drops) {
        Ok(m) => Ok(m),
        Err(e) if is_sample_error(&e) => {
            log::warn!("sample rejected: {}", e);
            Ok(None)
        }
        Err(e) => Err(e.into()),
    }
}

/// Pull-based loop: every sample of `source` goes through the engine and
/// each emitted message goes to `sink`. Returns the number of messages.
pub fn run_source<S, F>(engine: &mut TickEngine, source: &mut S, mut sink: F) -> Result<usize>
where
    S: SampleSource + ?Sized,
    F: FnMut(&StateMessage) -> Result<()>,
{
    let mut n = 0;
    while let Some(ls) = source.next_sample()? {
        if let Some(m) = feed(engine, ls, source.drop_count())? {
            sink(&m)?;
            n += 1;
        }
    }
    Ok(n)
}

/// Live loop: consumes the producer queue and manual labels until the queue
/// closes.
pub fn run_live<F>(
    mut engine: TickEngine,
    queue: BoundedQueue<LabeledSample>,
    manual: mpsc::Receiver<StateLabel>,
    mut sink: F,
) -> Result<usize>
where
    F: FnMut(&StateMessage) -> Result<()>,
{
    let mut n = 0;
    let mut last_t = 0;
    loop {
        while let Ok(label) = manual.try_recv() {
            let m = engine.on_manual_label(label, last_t, queue.drop_count());
            sink(&m)?;
            n += 1;
        }
        match queue.pop_timeout(Duration::from_millis(10)) {
            Pop::Item(ls) => {
                if let Some(m) = feed(&mut engine, ls, queue.drop_count())? {
                    last_t = m.t_ms;
                    sink(&m)?;
                    n += 1;
                }
            }
            Pop::TimedOut => {}
            Pop::Closed => return Ok(n),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rating {
    pub session_id: String,
    pub model: Mode,
    pub points: i64,
}

impl Rating {
    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.session_id.trim().is_empty() {
            return Err("session_id must not be empty".into());
        }
        if !(1..=10).contains(&self.points) {
            return Err(format!("points must be 1..10, got {}", self.points));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatingRow {
    pub session_id: String,
    pub model: Mode,
    pub points: i64,
    pub utc: String,
}

/// `session_id,model,points,utc` file; one row per (session, model).
#[derive(Debug)]
pub struct RatingStore {
    path: PathBuf,
    lock: Mutex<()>,
}

impl RatingStore {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        Self {
            path: path.into(),
            lock: Mutex::new(()),
        }
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn rows(&self) -> Result<Vec<RatingRow>> {
        if !self.path.exists() {
            return Ok(Vec::new());
        }
        let mut rdr = csv::Reader::from_path(&self.path).map_err(|e| csv_err(&self.path, e))?;
        rdr.deserialize()
            .collect::<std::result::Result<Vec<RatingRow>, _>>()
            .map_err(|e| csv_err(&self.path, e))
    }

    /// Replaces any earlier rating for the same session and model.
    pub fn upsert(&self, r: &Rating, utc: String) -> Result<()> {
        let _g = self.lock.lock().expect("rating lock poisoned");
        let mut rows = self.rows()?;
        rows.retain(|x| !(x.session_id == r.session_id && x.model == r.model));
        rows.push(RatingRow {
            session_id: r.session_id.clone(),
            model: r.model,
            points: r.points,
            utc,
        });
        let tmp = self.path.with_extension("csv.tmp");
        {
            let mut w = csv::Writer::from_path(&tmp).map_err(|e| csv_err(&tmp, e))?;
            for row in &rows {
                w.serialize(row).map_err(|e| csv_err(&tmp, e))?;
            }
            w.flush().map_err(|e| Error::io(&tmp, e))?;
        }
        std::fs::rename(&tmp, &self.path).map_err(|e| Error::io(&self.path, e))
    }
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    Error::Csv {
        path: path.to_path_buf(),
        line,
        reason: e.to_string(),
    }
}

#[derive(Clone)]
pub struct AppState {
    pub frames: broadcast::Sender<String>,
    pub ratings: Arc<RatingStore>,
    /// Present only in dev mode.
    pub manual: Option<mpsc::Sender<StateLabel>>,
}

#[derive(Debug, Deserialize)]
pub struct ManualLabel {
    pub label: StateLabel,
}

fn reply(status: StatusCode, msg: impl Into<String>) -> Response {
    (status, Json(serde_json::json!({ "status": msg.into() }))).into_response()
}

async fn ws_upgrade(ws: WebSocketUpgrade, State(st): State<AppState>) -> Response {
    let rx = st.frames.subscribe();
    ws.on_upgrade(move |socket| forward_frames(socket, rx))
}

async fn forward_frames(mut socket: WebSocket, mut rx: broadcast::Receiver<String>) {
    loop {
        match rx.recv().await {
            Ok(text) => {
                if socket.send(Message::Text(text.into())).await.is_err() {
                    return;
                }
            }
            Err(broadcast::error::RecvError::Lagged(n)) => {
                log::debug!("websocket consumer lagged, {} frames dropped", n);
            }
            Err(broadcast::error::RecvError::Closed) => {
                let _ = socket.send(Message::Close(None)).await;
                return;
            }
        }
    }
}

async fn post_rating(State(st): State<AppState>, Json(r): Json<Rating>) -> Response {
    if let Err(msg) = r.validate() {
        return reply(StatusCode::UNPROCESSABLE_ENTITY, msg);
    }
    let store = Arc::clone(&st.ratings);
    let utc = chrono::Utc::now().to_rfc3339();
    match tokio::task::spawn_blocking(move || store.upsert(&r, utc)).await {
        Ok(Ok(())) => reply(StatusCode::OK, "stored"),
        Ok(Err(e)) => reply(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
        Err(e) => reply(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    }
}

async fn post_manual(State(st): State<AppState>, Json(m): Json<ManualLabel>) -> Response {
    match &st.manual {
        None => reply(StatusCode::NOT_FOUND, "manual labels need dev mode"),
        Some(tx) => match tx.send(m.label) {
            Ok(()) => reply(StatusCode::ACCEPTED, "queued"),
            Err(_) => reply(StatusCode::SERVICE_UNAVAILABLE, "classify loop stopped"),
        },
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/ws", get(ws_upgrade))
        .route("/rating", post(post_rating))
        .route("/manual", post(post_manual))
        .with_state(state)
}

#[derive(Debug, Clone)]
pub struct ServeOptions {
    pub bind: SocketAddr,
    pub ratings_path: PathBuf,
    pub dev_mode: bool,
    /// Also write each frame to stdout as NDJSON.
    pub stdout: bool,
}

/// A started service: HTTP/WebSocket server plus the classify loop thread.
pub struct RunningService {
    pub addr: SocketAddr,
    shutdown: Option<oneshot::Sender<()>>,
    server: tokio::task::JoinHandle<std::io::Result<()>>,
    classify: std::thread::JoinHandle<Result<usize>>,
    queue: BoundedQueue<LabeledSample>,
}

impl RunningService {
    /// Binds and starts. The loop runs until `queue` closes.
    pub async fn start(opts: ServeOptions, engine: TickEngine, queue: BoundedQueue<LabeledSample>) -> Result<Self> {
        let (frames, _) = broadcast::channel(OUTBOX_CAPACITY);
        let (manual_tx, manual_rx) = mpsc::channel();
        let state = AppState {
            frames: frames.clone(),
            ratings: Arc::new(RatingStore::new(&opts.ratings_path)),
            manual: opts.dev_mode.then_some(manual_tx),
        };
        let listener = tokio::net::TcpListener::bind(opts.bind).await?;
        let addr = listener.local_addr()?;
        let (stop_tx, stop_rx) = oneshot::channel::<()>();
        let server = tokio::spawn(async move {
            axum::serve(listener, router(state))
                .with_graceful_shutdown(async {
                    let _ = stop_rx.await;
                })
                .await
        });
        log::info!("broadcasting on ws://{}/ws", addr);

        let stdout = opts.stdout;
        let loop_queue = queue.clone();
        let classify = std::thread::spawn(move || {
            let mut out = std::io::stdout();
            run_live(engine, loop_queue, manual_rx, |m| {
                let line = to_json_line(m);
                if stdout {
                    writeln!(out, "{}", line)?;
                    out.flush()?;
                }
                // no subscribers is not an error
                let _ = frames.send(line);
                Ok(())
            })
        });
        Ok(Self {
            addr,
            shutdown: Some(stop_tx),
            server,
            classify,
            queue,
        })
    }

    pub fn loop_finished(&self) -> bool {
        self.classify.is_finished()
    }

    /// Closes the sample queue, waits for the loop, then stops the server.
    pub async fn stop(mut self) -> Result<usize> {
        self.queue.close();
        let classify = self.classify;
        let n = tokio::task::spawn_blocking(move || classify.join())
            .await
            .map_err(|e| Error::Config(e.to_string()))?
            .map_err(|_| Error::Config("classify loop panicked".into()))??;
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        self.server
            .await
            .map_err(|e| Error::Config(e.to_string()))??;
        Ok(n)
    }
}
