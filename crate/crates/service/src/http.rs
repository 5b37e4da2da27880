//! HTTP routes for the annotation study.

use std::future::Future;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::extract::{Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::json;
use tokio::net::TcpListener;
use tower_http::services::ServeDir;

use newsbias_core::eval::{AnnotatorGroup, Answer, TaskKind};

use crate::error::{Result, ServiceError};
use crate::session::Session;

#[derive(Debug, Clone)]
pub struct ServeConfig {
    pub tasks: PathBuf,
    pub log: PathBuf,
    /// Built UI bundle served at `/`.
    pub static_dir: Option<PathBuf>,
    pub addr: SocketAddr,
}

#[derive(Debug, Deserialize)]
pub struct NextQuery {
    pub annotator: String,
    pub group: String,
    pub kind: String,
}

#[derive(Debug, Deserialize)]
pub struct JudgmentBody {
    pub task_id: String,
    pub annotator: String,
    pub answer: Answer,
}

fn parse<T: std::str::FromStr<Err = newsbias_core::Error>>(s: &str) -> Result<T> {
    s.parse().map_err(|e: newsbias_core::Error| ServiceError::BadRequest(e.to_string()))
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T> + Send + 'static) -> Result<T> {
    tokio::task::spawn_blocking(f).await.map_err(|e| ServiceError::Io(std::io::Error::other(e)))?
}

async fn next_task(State(s): State<Arc<Session>>, Query(q): Query<NextQuery>) -> Result<Response> {
    let group: AnnotatorGroup = parse(&q.group)?;
    let kind: TaskKind = parse(&q.kind)?;
    match blocking(move || s.next_task(&q.annotator, group, kind)).await? {
        Some(payload) => Ok(Json(payload).into_response()),
        None => Ok(StatusCode::NO_CONTENT.into_response()),
    }
}

async fn submit(State(s): State<Arc<Session>>, Json(body): Json<JudgmentBody>) -> Result<Response> {
    let j = blocking(move || s.submit(&body.task_id, &body.annotator, body.answer)).await?;
    Ok((StatusCode::CREATED, Json(json!({ "task_id": j.task_id, "recorded_at": j.timestamp }))).into_response())
}

async fn metrics(State(s): State<Arc<Session>>) -> Result<Response> {
    let body = blocking(move || s.metrics()).await?;
    Ok(([(header::CONTENT_TYPE, "application/json")], body).into_response())
}

async fn health(State(s): State<Arc<Session>>) -> Json<serde_json::Value> {
    let h = s.health();
    Json(json!({ "status": "ok", "tasks": h.tasks, "assigned": h.assigned, "answered": h.answered }))
}

pub fn router(session: Arc<Session>, static_dir: Option<&Path>) -> Router {
    let api = Router::new()
        .route("/api/tasks/next", get(next_task))
        .route("/api/judgments", post(submit))
        .route("/api/metrics", get(metrics))
        .route("/api/health", get(health))
        .with_state(session);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

/// A bound but not yet running server.
pub struct Server {
    listener: TcpListener,
    router: Router,
    session: Arc<Session>,
}

impl Server {
    pub async fn bind(cfg: &ServeConfig) -> Result<Self> {
        let session = Arc::new(Session::load(&cfg.tasks, &cfg.log)?);
        let listener = TcpListener::bind(cfg.addr).await?;
        let router = router(session.clone(), cfg.static_dir.as_deref());
        Ok(Self { listener, router, session })
    }

    pub fn local_addr(&self) -> Result<SocketAddr> {
        Ok(self.listener.local_addr()?)
    }

    pub fn session(&self) -> Arc<Session> {
        self.session.clone()
    }

    /// Serves until `shutdown` resolves, then drains in-flight requests.
    /// Every judgment is synced to disk when it is recorded.
    pub async fn run(self, shutdown: impl Future<Output = ()> + Send + 'static) -> Result<()> {
        log::info!("listening on {}", self.listener.local_addr()?);
        axum::serve(self.listener, self.router).with_graceful_shutdown(shutdown).await?;
        Ok(())
    }
}

/// Binds and serves until Ctrl-C.
pub async fn serve(cfg: ServeConfig) -> Result<()> {
    let server = Server::bind(&cfg).await?;
    server
        .run(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
