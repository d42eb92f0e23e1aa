//! HTTP API under `/api/v1`.
//!
//! Sessions live in memory and expire after an idle period. Each session
//! sits behind its own async mutex, so turns of one session run one at a
//! time while different sessions proceed in parallel. A turn runs on a
//! copy of the session, which is stored back only when the turn succeeds.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{Duration, Instant};

use axum::body::Bytes;
use axum::extract::rejection::JsonRejection;
use axum::extract::{DefaultBodyLimit, Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use prediag_core::classifier::{ClassifierError, Label, Subtype};
use prediag_core::dialogue::{
    ChatSettings, Chatbot, GoalStatus, RiskLevel, RuleSet, Session, Turn,
};
use prediag_core::KnowledgeGraph;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::container;
use crate::error::Error;
use crate::model::{predict_one, Snapshot};

/// Largest accepted feature container.
pub const MAX_UPLOAD: usize = 64 << 20;

#[derive(Debug, Clone, Deserialize)]
pub struct ChatRequest {
    #[serde(default)]
    pub session_id: Option<String>,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub session_id: String,
    pub reply: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matched_similarity: Option<f64>,
    pub goal_status: GoalStatus,
    pub risk_level: RiskLevel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifyResponse {
    pub model_id: String,
    pub sample_id: String,
    pub label: Label,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subtype: Option<Subtype>,
    pub confidence: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub session_id: String,
    pub goal_status: GoalStatus,
    pub risk_level: RiskLevel,
    /// Slot values as text; `null` while unanswered.
    pub slots: BTreeMap<String, Option<String>>,
    pub history: Vec<Turn>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub statements: usize,
    pub models: Vec<String>,
    pub sessions: usize,
}

#[derive(Debug, Deserialize)]
struct ClassifyQuery {
    model_id: Option<String>,
}

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (
            self.status,
            Json(serde_json::json!({ "error": self.message })),
        )
            .into_response()
    }
}

struct SessionEntry {
    session: Session,
    rng: ChaCha8Rng,
    last_used: Instant,
}

struct Shared {
    graph: KnowledgeGraph,
    rules: RuleSet,
    settings: ChatSettings,
    models: RwLock<BTreeMap<String, Arc<Snapshot>>>,
    sessions: Mutex<HashMap<String, Arc<tokio::sync::Mutex<SessionEntry>>>>,
    idle: Duration,
    seed: u64,
}

#[derive(Clone)]
pub struct AppState(Arc<Shared>);

impl AppState {
    pub fn new(
        graph: KnowledgeGraph,
        rules: RuleSet,
        settings: ChatSettings,
        models: BTreeMap<String, Snapshot>,
        idle: Duration,
        seed: u64,
    ) -> Self {
        let models = models.into_iter().map(|(k, v)| (k, Arc::new(v))).collect();
        Self(Arc::new(Shared {
            graph,
            rules,
            settings,
            models: RwLock::new(models),
            sessions: Mutex::new(HashMap::new()),
            idle,
            seed,
        }))
    }

    /// Swap in a new model set.
    pub fn replace_models(&self, models: BTreeMap<String, Snapshot>) {
        let models = models.into_iter().map(|(k, v)| (k, Arc::new(v))).collect();
        *self.0.models.write().expect("model lock") = models;
    }

    pub fn session_count(&self) -> usize {
        self.0.sessions.lock().expect("session lock").len()
    }

    fn model(&self, id: &str) -> Option<Arc<Snapshot>> {
        self.0.models.read().expect("model lock").get(id).cloned()
    }

    /// Drop idle sessions. Sessions in use are skipped.
    fn sweep(&self, now: Instant) {
        let idle = self.0.idle;
        self.0
            .sessions
            .lock()
            .expect("session lock")
            .retain(|_, e| match e.try_lock() {
                Ok(e) => now.duration_since(e.last_used) < idle,
                Err(_) => true,
            });
    }

    fn session(&self, id: &str) -> Option<Arc<tokio::sync::Mutex<SessionEntry>>> {
        self.0
            .sessions
            .lock()
            .expect("session lock")
            .get(id)
            .cloned()
    }

    fn new_session(&self) -> (String, Arc<tokio::sync::Mutex<SessionEntry>>) {
        let id = uuid::Uuid::new_v4().to_string();
        let entry = Arc::new(tokio::sync::Mutex::new(SessionEntry {
            session: Session::new(id.clone(), &self.0.rules),
            rng: ChaCha8Rng::seed_from_u64(self.0.seed),
            last_used: Instant::now(),
        }));
        self.0
            .sessions
            .lock()
            .expect("session lock")
            .insert(id.clone(), entry.clone());
        (id, entry)
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/v1/chat", post(chat))
        .route(
            "/api/v1/classify",
            post(classify).layer(DefaultBodyLimit::max(MAX_UPLOAD)),
        )
        .route("/api/v1/session/{id}", get(session))
        .route("/api/v1/health", get(health))
        .with_state(state)
}

async fn chat(
    State(state): State<AppState>,
    body: Result<Json<ChatRequest>, JsonRejection>,
) -> Result<Json<ChatResponse>, ApiError> {
    let Json(req) = body.map_err(|e| ApiError::new(e.status(), e.body_text()))?;
    if req.text.trim().is_empty() {
        return Err(ApiError::new(
            StatusCode::BAD_REQUEST,
            "text must not be empty",
        ));
    }
    state.sweep(Instant::now());
    // unknown or expired ids start over with a fresh session
    let (id, entry) = match req
        .session_id
        .as_deref()
        .and_then(|id| state.session(id).map(|e| (id.to_string(), e)))
    {
        Some(found) => found,
        None => state.new_session(),
    };
    let mut entry = entry.lock().await;
    let mut session = entry.session.clone();
    let mut rng = entry.rng.clone();
    let mut bot = Chatbot::new(&state.0.graph, &state.0.rules);
    bot.settings = state.0.settings;
    let reply = bot
        .handle_turn(&mut session, &req.text, &mut rng)
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
    let resp = ChatResponse {
        session_id: id,
        reply: reply.text,
        matched_similarity: reply.similarity.map(|s| s.value()),
        goal_status: session.goal_status,
        risk_level: session.risk_profile.risk_level,
    };
    entry.session = session;
    entry.rng = rng;
    entry.last_used = Instant::now();
    Ok(Json(resp))
}

async fn classify(
    State(state): State<AppState>,
    Query(q): Query<ClassifyQuery>,
    body: Bytes,
) -> Result<Json<ClassifyResponse>, ApiError> {
    let model_id = q.model_id.ok_or_else(|| {
        ApiError::new(StatusCode::BAD_REQUEST, "missing model_id query parameter")
    })?;
    let snap = state.model(&model_id).ok_or_else(|| {
        ApiError::new(StatusCode::NOT_FOUND, format!("unknown model {model_id:?}"))
    })?;
    let samples = container::decode(&body)
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, e.to_string()))?;
    let [(sample_id, features)] = <[_; 1]>::try_from(samples).map_err(|s: Vec<_>| {
        ApiError::new(
            StatusCode::BAD_REQUEST,
            format!("expected one sample, found {}", s.len()),
        )
    })?;
    let p = predict_one(&snap, &features).map_err(|e| match e {
        Error::Classifier(
            ClassifierError::BadInputShape(_) | ClassifierError::ShapeMismatch { .. },
        ) => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()),
        e => ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    })?;
    Ok(Json(ClassifyResponse {
        model_id,
        sample_id,
        label: p.label,
        subtype: p.subtype,
        confidence: p.confidence,
    }))
}

async fn session(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<SessionView>, ApiError> {
    state.sweep(Instant::now());
    let entry = state
        .session(&id)
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("unknown session {id:?}")))?;
    let entry = entry.lock().await;
    let s = &entry.session;
    Ok(Json(SessionView {
        session_id: s.id.clone(),
        goal_status: s.goal_status,
        risk_level: s.risk_profile.risk_level,
        slots: s
            .risk_profile
            .slots
            .iter()
            .map(|(k, v)| (k.clone(), v.map(|v| v.to_string())))
            .collect(),
        history: s.history.clone(),
    }))
}

async fn health(State(state): State<AppState>) -> Json<Health> {
    Json(Health {
        status: "ok".into(),
        statements: state.0.graph.len(),
        models: state
            .0
            .models
            .read()
            .expect("model lock")
            .keys()
            .cloned()
            .collect(),
        sessions: state.session_count(),
    })
}
