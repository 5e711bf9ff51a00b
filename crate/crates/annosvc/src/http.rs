//! JSON-over-HTTP routes for the annotation UI.

use std::sync::Arc;

use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;
use weftcodec::midrep::MidRepKind;

use crate::state::{AnnotationState, Edit};
use crate::store::{ExportedFiles, SessionStore};
use crate::ServiceError;

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let status = match &self {
            ServiceError::UnknownSession(_) | ServiceError::UnknownImage(_) => StatusCode::NOT_FOUND,
            ServiceError::Conflict { .. } => StatusCode::CONFLICT,
            ServiceError::Rejected(_) | ServiceError::InvalidState(_) => StatusCode::UNPROCESSABLE_ENTITY,
            ServiceError::Core(e) => match e.root() {
                weftcodec::Error::Io { .. } => StatusCode::INTERNAL_SERVER_ERROR,
                _ => StatusCode::UNPROCESSABLE_ENTITY,
            },
            ServiceError::Task(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        let mut body = json!({ "error": self.to_string() });
        if let ServiceError::Conflict { current, .. } = self {
            body["current_revision"] = json!(current);
        }
        (status, Json(body)).into_response()
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct OpenRequest {
    pub image_id: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct OpenResponse {
    pub session: String,
    pub state: AnnotationState,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct EditRequest {
    pub edit: Edit,
    pub base_revision: u64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ExportRequest {
    pub kind: MidRepKind,
}

type Shared = State<Arc<SessionStore>>;

/// Runs blocking image work off the async executor.
async fn blocking<T: Send + 'static>(
    store: Arc<SessionStore>,
    f: impl FnOnce(&SessionStore) -> Result<T, ServiceError> + Send + 'static,
) -> Result<T, ServiceError> {
    tokio::task::spawn_blocking(move || f(&store))
        .await
        .map_err(|e| ServiceError::Task(e.to_string()))?
}

async fn list_images(State(store): Shared) -> Result<Json<Vec<String>>, ServiceError> {
    Ok(Json(store.list_images()?))
}

async fn image(State(store): Shared, Path(id): Path<String>) -> Result<Response, ServiceError> {
    let path = store.image_path(&id)?;
    let bytes = tokio::fs::read(&path).await.map_err(|e| weftcodec::Error::io(&path, e))?;
    Ok(([(header::CONTENT_TYPE, "image/png")], bytes).into_response())
}

async fn open(State(store): Shared, Json(req): Json<OpenRequest>) -> Result<Json<OpenResponse>, ServiceError> {
    let (session, state) = blocking(store, move |s| s.open_session(&req.image_id)).await?;
    Ok(Json(OpenResponse { session, state }))
}

async fn session_state(State(store): Shared, Path(id): Path<String>) -> Result<Json<AnnotationState>, ServiceError> {
    Ok(Json(store.state(&id)?))
}

async fn edit(State(store): Shared, Path(id): Path<String>, Json(req): Json<EditRequest>) -> Result<Json<AnnotationState>, ServiceError> {
    let state = blocking(store, move |s| s.apply(&id, &req.edit, req.base_revision)).await?;
    Ok(Json(state))
}

async fn export(State(store): Shared, Path(id): Path<String>, Json(req): Json<ExportRequest>) -> Result<Json<ExportedFiles>, ServiceError> {
    req.kind.validate()?;
    let files = blocking(store, move |s| s.export(&id, req.kind)).await?;
    Ok(Json(files))
}

pub fn router(store: Arc<SessionStore>) -> Router {
    Router::new()
        .route("/api/images", get(list_images))
        .route("/api/image/{id}", get(image))
        .route("/api/session", post(open))
        .route("/api/session/{id}", get(session_state))
        .route("/api/session/{id}/edit", post(edit))
        .route("/api/session/{id}/export", post(export))
        .with_state(store)
}

/// Serves the API on `127.0.0.1:port` until the process is stopped.
pub async fn serve(store: Arc<SessionStore>, port: u16) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(("127.0.0.1", port)).await?;
    axum::serve(listener, router(store)).await
}
