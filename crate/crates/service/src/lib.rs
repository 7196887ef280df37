//! HTTP server for live reference games.
//!
//! The server samples a hidden target program, the client reveals cells of
//! its rendering one at a time, and after every reveal the chosen listener
//! returns its current best guesses. Every JSON body carries `"v": 1`.

mod error;
mod session;

use std::collections::HashMap;
use std::io;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex as SyncMutex};
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::routing::{get, post};
use axum::{Json, Router};
use pragsynth::listener::Guess;
use pragsynth::neural::ListenerNet;
use pragsynth::search::SearchConfig;
use pragsynth::{Listener, ListenerKind, Program, ProgramSpace, Utterance};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use serde_json::{json, Value};
use tokio::sync::Mutex;

pub use error::ApiError;
pub use session::{replay, Journal, JournalEvent, Role, Session, Status};

pub const API_VERSION: u32 = 1;
pub const DEFAULT_TOP_K: usize = 5;
pub const MAX_TOP_K: usize = 50;
pub const DEFAULT_IDLE_TIMEOUT: Duration = Duration::from_secs(30 * 60);

#[derive(Clone)]
pub struct ServiceConfig {
    /// Network for N0/N1; without it those listeners are refused.
    pub model: Option<Arc<ListenerNet>>,
    pub journal: Option<PathBuf>,
    pub idle_timeout: Duration,
    pub search: SearchConfig,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            model: None,
            journal: None,
            idle_timeout: DEFAULT_IDLE_TIMEOUT,
            search: SearchConfig::default(),
        }
    }
}

struct Slot {
    last_active: SyncMutex<Instant>,
    session: Mutex<Session>,
}

impl Slot {
    fn new(session: Session) -> Arc<Slot> {
        Arc::new(Slot {
            last_active: SyncMutex::new(Instant::now()),
            session: Mutex::new(session),
        })
    }

    fn idle_for(&self) -> Duration {
        self.last_active.lock().expect("clock lock poisoned").elapsed()
    }

    fn touch(&self) {
        *self.last_active.lock().expect("clock lock poisoned") = Instant::now();
    }
}

pub struct AppState {
    space: &'static ProgramSpace,
    config: ServiceConfig,
    sessions: SyncMutex<HashMap<String, Arc<Slot>>>,
    journal: Option<Journal>,
}

impl AppState {
    /// Loads the program table and replays the journal, if configured.
    pub fn new(config: ServiceConfig) -> io::Result<Arc<AppState>> {
        let (journal, sessions) = match &config.journal {
            Some(path) => {
                let (journal, events) = Journal::open(path)?;
                (Some(journal), replay(&events))
            }
            None => (None, Vec::new()),
        };
        let sessions = sessions.into_iter().map(|s| (s.id.clone(), Slot::new(s))).collect();
        Ok(Arc::new(AppState {
            space: ProgramSpace::dsl(),
            config,
            sessions: SyncMutex::new(sessions),
            journal,
        }))
    }

    pub fn session_count(&self) -> usize {
        self.sessions.lock().expect("session map poisoned").len()
    }

    fn record(&self, event: JournalEvent) -> Result<(), ApiError> {
        match &self.journal {
            Some(j) => j
                .append(&event)
                .map_err(|e| ApiError::internal(format!("journal write failed: {e}"))),
            None => Ok(()),
        }
    }

    fn lookup(&self, id: &str) -> Result<Arc<Slot>, ApiError> {
        let mut map = self.sessions.lock().expect("session map poisoned");
        let slot = map.get(id).cloned().ok_or_else(|| ApiError::not_found(id))?;
        if slot.idle_for() > self.config.idle_timeout {
            map.remove(id);
            drop(map);
            self.record(JournalEvent::Expire { id: id.to_string() })?;
            return Err(ApiError::not_found(id));
        }
        slot.touch();
        Ok(slot)
    }

    /// Drops sessions idle for longer than the configured timeout.
    pub fn sweep(&self) -> usize {
        let expired: Vec<String> = {
            let mut map = self.sessions.lock().expect("session map poisoned");
            let ids: Vec<String> = map
                .iter()
                .filter(|(_, slot)| slot.idle_for() > self.config.idle_timeout)
                .map(|(id, _)| id.clone())
                .collect();
            for id in &ids {
                map.remove(id);
            }
            ids
        };
        for id in &expired {
            let _ = self.record(JournalEvent::Expire { id: id.clone() });
        }
        expired.len()
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/healthz", get(healthz))
        .route("/games", post(create_game))
        .route("/games/{id}", get(summary))
        .route("/games/{id}/reveals", post(reveal))
        .route("/games/{id}/giveup", post(give_up))
        .route("/games/{id}/export", get(export))
        .with_state(state)
}

/// Binds `addr` and serves until the process is stopped.
pub async fn serve(addr: SocketAddr, config: ServiceConfig) -> io::Result<()> {
    let state = tokio::task::spawn_blocking(move || AppState::new(config))
        .await
        .map_err(io::Error::other)??;
    let sweeper = state.clone();
    let period = (state.config.idle_timeout / 4).clamp(Duration::from_secs(1), Duration::from_secs(60));
    tokio::spawn(async move {
        let mut tick = tokio::time::interval(period);
        loop {
            tick.tick().await;
            sweeper.sweep();
        }
    });
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(state)).await
}

fn now_secs() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

fn with_target(mut body: Value, target: &Program) -> Value {
    body["target"] = json!(target);
    body["grid"] = json!(target.render());
    body
}

fn summary_body(s: &Session) -> Value {
    let body = json!({
        "v": API_VERSION,
        "id": s.id,
        "grid_size": pragsynth::dsl::GRID_SIZE,
        "listener": s.listener,
        "role": s.role,
        "status": s.status,
        "top_k": s.top_k,
        "created_at": s.created_at,
        "revealed": s.revealed,
        "n_revealed": s.revealed.len(),
    });
    if s.target_visible() {
        with_target(body, &s.target)
    } else {
        body
    }
}

async fn healthz(State(state): State<Arc<AppState>>) -> Json<Value> {
    Json(json!({
        "v": API_VERSION,
        "status": "ok",
        "programs": state.space.len(),
        "model_loaded": state.config.model.is_some(),
        "sessions": state.session_count(),
    }))
}

#[derive(Deserialize)]
struct CreateGame {
    listener: String,
    seed: Option<u64>,
    #[serde(default)]
    role: Role,
    top_k: Option<usize>,
}

async fn create_game(
    State(state): State<Arc<AppState>>,
    body: Result<Json<CreateGame>, JsonRejection>,
) -> Result<(StatusCode, Json<Value>), ApiError> {
    let Json(req) = body?;
    let listener: ListenerKind = req.listener.parse().map_err(|_| {
        ApiError::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            "unknown_listener",
            format!("unknown listener `{}`", req.listener),
        )
    })?;
    if listener.is_neural() && state.config.model.is_none() {
        return Err(ApiError::new(
            StatusCode::CONFLICT,
            "model_required",
            format!("listener {listener} needs a model checkpoint and none is loaded"),
        ));
    }
    let top_k = req.top_k.unwrap_or(DEFAULT_TOP_K);
    if !(1..=MAX_TOP_K).contains(&top_k) {
        return Err(ApiError::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            "invalid_top_k",
            format!("top_k must be in 1..={MAX_TOP_K}"),
        ));
    }
    let index = match req.seed {
        Some(seed) => ChaCha8Rng::seed_from_u64(seed).gen_range(0..state.space.len()),
        None => rand::thread_rng().gen_range(0..state.space.len()),
    };
    let target = Program::from_slice(state.space.choices(index)).map_err(|e| ApiError::internal(e.to_string()))?;
    let session = Session {
        id: format!("{:032x}", rand::random::<u128>()),
        target,
        listener,
        role: req.role,
        top_k,
        revealed: Default::default(),
        status: Status::Active,
        created_at: now_secs(),
    };
    state.record(JournalEvent::Create {
        id: session.id.clone(),
        listener,
        target,
        role: session.role,
        top_k,
        created_at: session.created_at,
    })?;
    let body = summary_body(&session);
    state
        .sessions
        .lock()
        .expect("session map poisoned")
        .insert(session.id.clone(), Slot::new(session));
    Ok((StatusCode::CREATED, Json(body)))
}

async fn summary(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Json<Value>, ApiError> {
    let slot = state.lookup(&id)?;
    let s = slot.session.lock().await;
    Ok(Json(summary_body(&s)))
}

#[derive(Deserialize)]
struct RevealRequest {
    x: u8,
    y: u8,
}

fn guess_body(space: &ProgramSpace, g: &Guess) -> Value {
    let program = Program::from_slice(space.choices(g.program)).expect("space holds valid programs");
    json!({ "program": program, "grid": program.render(), "score": g.score })
}

async fn reveal(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Result<Json<RevealRequest>, JsonRejection>,
) -> Result<Json<Value>, ApiError> {
    let slot = state.lookup(&id)?;
    let Json(RevealRequest { x, y }) = body?;
    let mut s = slot.session.lock().await;
    if s.status != Status::Active {
        return Err(ApiError::not_active(s.status.name()));
    }
    let size = pragsynth::dsl::GRID_SIZE as u8;
    if x >= size || y >= size {
        return Err(ApiError::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            "out_of_bounds",
            format!("({x}, {y}) is off the {size}x{size} grid"),
        ));
    }
    if s.revealed.contains_cell(x, y) {
        return Err(ApiError::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            "duplicate_cell",
            format!("({x}, {y}) was already revealed"),
        ));
    }
    let Some(content) = s.target.cell(x as usize, y as usize).content() else {
        return Err(ApiError::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            "empty_cell",
            format!("({x}, {y}) is empty"),
        ));
    };
    let utterance = Utterance::from_content(x as usize, y as usize, content);
    let mut revealed = s.revealed.clone();
    revealed
        .push(utterance)
        .map_err(|e| ApiError::internal(e.to_string()))?;

    let (space, model, search, kind, top_k) = (
        state.space,
        state.config.model.clone(),
        state.config.search,
        s.listener,
        s.top_k,
    );
    let ids = revealed.ids();
    let guesses = tokio::task::spawn_blocking(move || -> Result<Vec<Guess>, String> {
        let listener = Listener::new(kind, space, model.as_deref())
            .map_err(|e| e.to_string())?
            .with_search(search);
        Ok(listener.guesses(&ids, top_k).unwrap_or_default())
    })
    .await
    .map_err(|e| ApiError::internal(e.to_string()))?
    .map_err(ApiError::internal)?;

    let target = space
        .program_index(&s.target)
        .expect("target is a program of the space");
    let solved = guesses.first().is_some_and(|g| space.equivalent(g.program, target));
    let status = if solved { Status::Solved } else { Status::Active };
    state.record(JournalEvent::Reveal {
        id: id.clone(),
        x,
        y,
        status,
    })?;
    s.revealed = revealed;
    s.status = status;
    Ok(Json(json!({
        "v": API_VERSION,
        "cell": content,
        "utterance": utterance,
        "guesses": guesses.iter().map(|g| guess_body(space, g)).collect::<Vec<_>>(),
        "solved": solved,
        "status": status,
        "n_revealed": s.revealed.len(),
    })))
}

async fn give_up(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Json<Value>, ApiError> {
    let slot = state.lookup(&id)?;
    let mut s = slot.session.lock().await;
    if s.status != Status::Active {
        return Err(ApiError::not_active(s.status.name()));
    }
    state.record(JournalEvent::GiveUp { id: id.clone() })?;
    s.status = Status::GivenUp;
    Ok(Json(with_target(
        json!({ "v": API_VERSION, "status": s.status }),
        &s.target,
    )))
}

async fn export(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Json<Value>, ApiError> {
    let slot = state.lookup(&id)?;
    let s = slot.session.lock().await;
    if !s.target_visible() {
        return Err(ApiError::new(
            StatusCode::CONFLICT,
            "target_secret",
            "the export contains the target; finish or give up the game first",
        ));
    }
    let mut body = serde_json::to_value(s.trial()).map_err(|e| ApiError::internal(e.to_string()))?;
    body["v"] = json!(API_VERSION);
    Ok(Json(body))
}
