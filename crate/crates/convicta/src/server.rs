//! HTTP and WebSocket front end for interactive sessions.
//!
//! Each session runs on its own thread, which owns the simulation and takes
//! commands from a queue in arrival order. State events are broadcast to
//! every connected client through a bounded per-client outbox; when a client
//! falls behind, the oldest state frames are dropped, but acknowledgements,
//! errors and stop events never are. Acknowledgements and errors go only to
//! the client that sent the command.

use std::collections::{HashMap, VecDeque};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{mpsc, Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use convicta_core::config::{parse_config, serialize_config, ConfigError, ConfigKey, ModelConfig, Violation};
use convicta_core::scenario::ScenarioSource;
use convicta_core::session::{
    ClientMessage, Command, Mode, ParamValue, ServerMessage, Session, SessionError, StateEvent, PROTOCOL_VERSION,
};
use futures::{SinkExt, StreamExt};
use serde::{Deserialize, Serialize};
use tokio::sync::{oneshot, Notify};

use crate::catalog::ScenarioCatalog;

/// Frames a client may have queued before state frames are dropped.
pub const DEFAULT_OUTBOX_CAPACITY: usize = 64;

/// Bounded queue of frames for one client.
#[derive(Debug)]
pub struct Outbox {
    queue: Mutex<VecDeque<ServerMessage>>,
    capacity: usize,
    notify: Notify,
    closed: AtomicBool,
    dropped: AtomicU64,
}

impl Outbox {
    pub fn new(capacity: usize) -> Self {
        Self {
            queue: Mutex::new(VecDeque::new()),
            capacity: capacity.max(1),
            notify: Notify::new(),
            closed: AtomicBool::new(false),
            dropped: AtomicU64::new(0),
        }
    }

    /// Queue `msg`. When full, the oldest non-critical frame makes room; if
    /// every queued frame is critical, a non-critical `msg` is discarded and
    /// a critical one is queued anyway.
    pub fn push(&self, msg: ServerMessage) {
        {
            let mut q = self.queue.lock().expect("outbox lock");
            if q.len() >= self.capacity {
                if let Some(i) = q.iter().position(|m| !m.is_critical()) {
                    q.remove(i);
                    self.dropped.fetch_add(1, Ordering::Relaxed);
                } else if !msg.is_critical() {
                    self.dropped.fetch_add(1, Ordering::Relaxed);
                    return;
                }
            }
            q.push_back(msg);
        }
        self.notify.notify_one();
    }

    /// Next frame, or `None` once closed and drained.
    pub async fn pop(&self) -> Option<ServerMessage> {
        loop {
            {
                let mut q = self.queue.lock().expect("outbox lock");
                if let Some(m) = q.pop_front() {
                    return Some(m);
                }
                if self.closed.load(Ordering::Acquire) {
                    return None;
                }
            }
            self.notify.notified().await;
        }
    }

    pub fn close(&self) {
        self.closed.store(true, Ordering::Release);
        self.notify.notify_one();
    }

    pub fn len(&self) -> usize {
        self.queue.lock().expect("outbox lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dropped(&self) -> u64 {
        self.dropped.load(Ordering::Relaxed)
    }
}

/// Overview returned by `GET /sessions/{id}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SessionInfo {
    pub v: u32,
    pub id: String,
    pub mode: Mode,
    pub tick_rate: f64,
    pub clients: usize,
    /// Configuration the next tick runs under, in config file syntax.
    pub config: String,
    pub state: StateEvent,
}

enum ActorMsg {
    Command { client: u64, text: String },
    Subscribe { client: u64, outbox: Arc<Outbox> },
    Unsubscribe { client: u64 },
    Info(oneshot::Sender<SessionInfo>),
    Shutdown,
}

struct Actor {
    session: Session,
    catalog: ScenarioCatalog,
    clients: Vec<(u64, Arc<Outbox>)>,
}

impl Actor {
    fn broadcast(clients: &[(u64, Arc<Outbox>)], event: StateEvent) {
        let msg = ServerMessage::State(event);
        for (_, outbox) in clients {
            outbox.push(msg.clone());
        }
    }

    fn send_to(&self, client: u64, msg: ServerMessage) {
        if let Some((_, outbox)) = self.clients.iter().find(|(c, _)| *c == client) {
            outbox.push(msg);
        }
    }

    fn command(&mut self, client: u64, text: &str) {
        let message: ClientMessage = match serde_json::from_str(text) {
            Ok(m) => m,
            Err(e) => {
                let msg = ServerMessage::Error {
                    v: PROTOCOL_VERSION,
                    command: None,
                    message: format!("malformed message: {e}"),
                    violations: Vec::new(),
                };
                return self.send_to(client, msg);
            }
        };
        let name = message.command.name();
        let result = match message.command {
            _ if message.v != PROTOCOL_VERSION => Err(SessionError::Version(message.v)),
            Command::Step { n } => {
                let clients = &self.clients;
                let stopped = self.session.simulation().stopped();
                match stopped {
                    Some(stop) => Err(SessionError::Stopped(stop.kind)),
                    None => self.session.step_with(n, &mut |e| Self::broadcast(clients, e)),
                }
            }
            command => self.session.handle_command(command, &self.catalog).map(|reply| {
                for event in reply.events {
                    Self::broadcast(&self.clients, event);
                }
                reply.ack
            }),
        };
        let reply = match result {
            Ok(ack) => ServerMessage::Ack(ack),
            Err(e) => ServerMessage::error(Some(name), &e),
        };
        self.send_to(client, reply);
    }

    fn period(&self) -> Duration {
        Duration::from_secs_f64(1.0 / self.session.tick_rate())
    }

    fn run(mut self, rx: mpsc::Receiver<ActorMsg>) {
        let mut next_tick: Option<Instant> = None;
        loop {
            let msg = if self.session.mode() == Mode::Playing {
                let deadline = *next_tick.get_or_insert_with(|| Instant::now() + self.period());
                let now = Instant::now();
                if now >= deadline {
                    None
                } else {
                    match rx.recv_timeout(deadline - now) {
                        Ok(m) => Some(m),
                        Err(mpsc::RecvTimeoutError::Timeout) => None,
                        Err(mpsc::RecvTimeoutError::Disconnected) => break,
                    }
                }
            } else {
                next_tick = None;
                match rx.recv() {
                    Ok(m) => Some(m),
                    Err(_) => break,
                }
            };
            match msg {
                None => {
                    if let Some(event) = self.session.advance() {
                        Self::broadcast(&self.clients, event);
                    }
                    let due = next_tick.unwrap_or_else(Instant::now) + self.period();
                    next_tick = Some(due.max(Instant::now()));
                }
                Some(ActorMsg::Command { client, text }) => self.command(client, &text),
                Some(ActorMsg::Subscribe { client, outbox }) => {
                    outbox.push(ServerMessage::State(self.session.emit_state()));
                    self.clients.push((client, outbox));
                }
                Some(ActorMsg::Unsubscribe { client }) => {
                    self.clients.retain(|(c, outbox)| {
                        if *c == client {
                            outbox.close();
                        }
                        *c != client
                    });
                }
                Some(ActorMsg::Info(reply)) => {
                    let _ = reply.send(SessionInfo {
                        v: PROTOCOL_VERSION,
                        id: self.session.id().to_owned(),
                        mode: self.session.mode(),
                        tick_rate: self.session.tick_rate(),
                        clients: self.clients.len(),
                        config: serialize_config(&self.session.effective_config()),
                        state: self.session.emit_state(),
                    });
                }
                Some(ActorMsg::Shutdown) => break,
            }
        }
        for (_, outbox) in &self.clients {
            outbox.close();
        }
    }
}

struct SessionHandle {
    tx: mpsc::Sender<ActorMsg>,
}

impl Drop for SessionHandle {
    fn drop(&mut self) {
        let _ = self.tx.send(ActorMsg::Shutdown);
    }
}

struct Inner {
    sessions: Mutex<HashMap<String, SessionHandle>>,
    catalog: ScenarioCatalog,
    next_session: AtomicU64,
    next_client: AtomicU64,
    outbox_capacity: usize,
}

/// Shared server state.
#[derive(Clone)]
pub struct AppState(Arc<Inner>);

impl AppState {
    pub fn new(catalog: ScenarioCatalog) -> Self {
        Self::with_capacity(catalog, DEFAULT_OUTBOX_CAPACITY)
    }

    pub fn with_capacity(catalog: ScenarioCatalog, outbox_capacity: usize) -> Self {
        Self(Arc::new(Inner {
            sessions: Mutex::new(HashMap::new()),
            catalog,
            next_session: AtomicU64::new(1),
            next_client: AtomicU64::new(1),
            outbox_capacity,
        }))
    }

    fn sender(&self, id: &str) -> Option<mpsc::Sender<ActorMsg>> {
        self.0.sessions.lock().expect("sessions lock").get(id).map(|h| h.tx.clone())
    }

    /// Start a session thread and register it.
    pub fn spawn_session(&self, config: ModelConfig, seed: u64, tick_rate: Option<f64>) -> Result<String, ConfigError> {
        let n = self.0.next_session.fetch_add(1, Ordering::Relaxed);
        let id = format!("s{n}");
        let mut session = Session::new(id.clone(), config, seed)?;
        if let Some(rate) = tick_rate {
            session.set_tick_rate(rate);
        }
        let (tx, rx) = mpsc::channel();
        let actor = Actor { session, catalog: self.0.catalog.clone(), clients: Vec::new() };
        thread::Builder::new()
            .name(format!("session-{id}"))
            .spawn(move || actor.run(rx))
            .expect("session thread starts");
        self.0.sessions.lock().expect("sessions lock").insert(id.clone(), SessionHandle { tx });
        Ok(id)
    }

    pub fn remove_session(&self, id: &str) -> bool {
        self.0.sessions.lock().expect("sessions lock").remove(id).is_some()
    }

    pub fn session_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.0.sessions.lock().expect("sessions lock").keys().cloned().collect();
        ids.sort();
        ids
    }
}

/// JSON error body: `{"v", "error", "violations"}`.
#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
    violations: Vec<Violation>,
}

impl ApiError {
    fn not_found(id: &str) -> Self {
        Self { status: StatusCode::NOT_FOUND, message: format!("no session `{id}`"), violations: Vec::new() }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self { status: StatusCode::BAD_REQUEST, message: message.into(), violations: Vec::new() }
    }
}

impl From<ConfigError> for ApiError {
    fn from(e: ConfigError) -> Self {
        let violations = match &e {
            ConfigError::Invalid(v) => v.clone(),
            _ => Vec::new(),
        };
        Self { status: StatusCode::BAD_REQUEST, message: e.to_string(), violations }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = serde_json::json!({
            "v": PROTOCOL_VERSION,
            "error": self.message,
            "violations": self.violations,
        });
        (self.status, Json(body)).into_response()
    }
}

/// Body of `POST /sessions`. `scenario` and `config` are exclusive; with
/// neither, the `default` scenario is used.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct CreateSession {
    #[serde(default)]
    pub scenario: Option<String>,
    /// Configuration text in config file syntax.
    #[serde(default)]
    pub config: Option<String>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub tick_rate: Option<f64>,
    /// Parameter overrides applied before setup, structural keys included.
    #[serde(default)]
    pub set: HashMap<String, ParamValue>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SessionCreated {
    pub v: u32,
    pub id: String,
    pub seed: u64,
    pub stream: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioEntry {
    pub name: String,
    pub description: String,
}

/// One tunable parameter, as a slider registry entry.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParameterEntry {
    pub key: String,
    pub section: String,
    /// Only changes through setup.
    pub structural: bool,
    pub integer: bool,
    pub min: f64,
    /// `None` when unbounded.
    pub max: Option<f64>,
    pub default: String,
}

async fn list_scenarios(State(app): State<AppState>) -> Result<Json<serde_json::Value>, ApiError> {
    let (scenarios, _) = app.0.catalog.list();
    let entries: Vec<ScenarioEntry> = scenarios
        .into_iter()
        .map(|s| ScenarioEntry { name: s.name, description: s.description })
        .collect();
    Ok(Json(serde_json::json!({ "v": PROTOCOL_VERSION, "scenarios": entries })))
}

async fn list_parameters() -> Json<serde_json::Value> {
    let defaults = ModelConfig::default();
    let entries: Vec<ParameterEntry> = ConfigKey::all()
        .into_iter()
        .map(|k| {
            let (min, max) = k.bounds();
            ParameterEntry {
                key: k.name(),
                section: k.section().to_owned(),
                structural: k.is_structural(),
                integer: k.is_integer(),
                min,
                max: max.is_finite().then_some(max),
                default: k.read(&defaults),
            }
        })
        .collect();
    Json(serde_json::json!({ "v": PROTOCOL_VERSION, "parameters": entries }))
}

async fn create_session(
    State(app): State<AppState>,
    Json(body): Json<CreateSession>,
) -> Result<(StatusCode, Json<SessionCreated>), ApiError> {
    let mut config = match (&body.scenario, &body.config) {
        (Some(_), Some(_)) => return Err(ApiError::bad_request("give either `scenario` or `config`, not both")),
        (_, Some(text)) => parse_config(text)?,
        (name, None) => app.0.catalog.scenario(name.as_deref().unwrap_or("default"))?.config,
    };
    let mut overrides: Vec<_> = body.set.iter().collect();
    overrides.sort_by(|a, b| a.0.cmp(b.0));
    for (key, value) in overrides {
        config.set(key, &value.to_string())?;
    }
    let seed = body.seed.unwrap_or(config.engine.seed);
    let id = app.spawn_session(config, seed, body.tick_rate)?;
    let stream = format!("/sessions/{id}/stream");
    Ok((StatusCode::CREATED, Json(SessionCreated { v: PROTOCOL_VERSION, id, seed, stream })))
}

async fn list_sessions(State(app): State<AppState>) -> Json<serde_json::Value> {
    Json(serde_json::json!({ "v": PROTOCOL_VERSION, "sessions": app.session_ids() }))
}

async fn show_session(State(app): State<AppState>, Path(id): Path<String>) -> Result<Json<SessionInfo>, ApiError> {
    let tx = app.sender(&id).ok_or_else(|| ApiError::not_found(&id))?;
    let (reply, rx) = oneshot::channel();
    tx.send(ActorMsg::Info(reply)).map_err(|_| ApiError::not_found(&id))?;
    rx.await.map(Json).map_err(|_| ApiError::not_found(&id))
}

async fn delete_session(State(app): State<AppState>, Path(id): Path<String>) -> Result<StatusCode, ApiError> {
    if app.remove_session(&id) {
        Ok(StatusCode::NO_CONTENT)
    } else {
        Err(ApiError::not_found(&id))
    }
}

async fn stream_session(
    State(app): State<AppState>,
    Path(id): Path<String>,
    ws: WebSocketUpgrade,
) -> Result<Response, ApiError> {
    let tx = app.sender(&id).ok_or_else(|| ApiError::not_found(&id))?;
    let client = app.0.next_client.fetch_add(1, Ordering::Relaxed);
    let capacity = app.0.outbox_capacity;
    Ok(ws.on_upgrade(move |socket| client_loop(socket, tx, client, capacity)))
}

async fn client_loop(socket: WebSocket, tx: mpsc::Sender<ActorMsg>, client: u64, capacity: usize) {
    let outbox = Arc::new(Outbox::new(capacity));
    if tx.send(ActorMsg::Subscribe { client, outbox: outbox.clone() }).is_err() {
        return;
    }
    let (mut sink, mut incoming) = socket.split();
    let writer = {
        let outbox = outbox.clone();
        tokio::spawn(async move {
            while let Some(msg) = outbox.pop().await {
                let text = serde_json::to_string(&msg).expect("server messages serialize");
                if sink.send(Message::Text(text.into())).await.is_err() {
                    return;
                }
            }
            let _ = sink.close().await;
        })
    };
    while let Some(Ok(msg)) = incoming.next().await {
        match msg {
            Message::Text(text) => {
                if tx.send(ActorMsg::Command { client, text: text.as_str().to_owned() }).is_err() {
                    break;
                }
            }
            Message::Close(_) => break,
            _ => {}
        }
    }
    let _ = tx.send(ActorMsg::Unsubscribe { client });
    outbox.close();
    let _ = writer.await;
}

pub fn router(app: AppState) -> Router {
    Router::new()
        .route("/scenarios", get(list_scenarios))
        .route("/parameters", get(list_parameters))
        .route("/sessions", get(list_sessions).post(create_session))
        .route("/sessions/{id}", get(show_session).delete(delete_session))
        .route("/sessions/{id}/stream", get(stream_session))
        .with_state(app)
}

/// Serve until `shutdown` resolves.
pub async fn serve(
    listener: tokio::net::TcpListener,
    app: AppState,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(app)).with_graceful_shutdown(shutdown).await
}
