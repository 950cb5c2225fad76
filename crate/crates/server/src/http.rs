//! JSON API under `/api/v1`. Handlers are thin: parse, hand the work to the
//! blocking service on the blocking pool, render.

use std::collections::HashMap;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{delete, get, patch, post};
use axum::{Json, Router};
use retro_core::classify::TemplateId;
use retro_core::domain::{BoardStatus, Column};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{ErrorBody, ServiceError};
use crate::service::{KanbanItemInput, ResolveTarget, RetroService};

pub const API_PREFIX: &str = "/api/v1";
pub const DEFAULT_TEMPLATE: TemplateId = TemplateId::P2;

type Svc = Arc<RetroService>;

pub struct ApiError {
    status: StatusCode,
    body: ErrorBody,
}

impl ApiError {
    fn bad_request(field: &str, message: impl Into<String>) -> Self {
        Self {
            status: StatusCode::BAD_REQUEST,
            body: ErrorBody {
                code: "bad_request".into(),
                message: message.into(),
                field: Some(field.into()),
                current_version: None,
            },
        }
    }

    fn not_found(message: impl Into<String>) -> Self {
        Self {
            status: StatusCode::NOT_FOUND,
            body: ErrorBody {
                code: "not_found".into(),
                message: message.into(),
                field: None,
                current_version: None,
            },
        }
    }
}

impl From<ServiceError> for ApiError {
    fn from(e: ServiceError) -> Self {
        Self {
            status: StatusCode::from_u16(e.status()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR),
            body: e.envelope(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

type ApiResult = Result<Response, ApiError>;

async fn blocking<T, F>(status: StatusCode, f: F) -> ApiResult
where
    T: Serialize + Send + 'static,
    F: FnOnce() -> Result<T, ServiceError> + Send + 'static,
{
    let out = tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::from(ServiceError::Storage(format!("worker failed: {e}"))))??;
    Ok((status, Json(out)).into_response())
}

fn parse_body<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request("body", format!("invalid JSON body: {e}")))
}

/// Accepts `3`, `"3"` and `W/"3"`; `*` means no precondition.
pub fn parse_if_match(headers: &HeaderMap) -> Result<Option<u64>, ApiError> {
    let Some(raw) = headers.get(header::IF_MATCH) else {
        return Ok(None);
    };
    let text = raw
        .to_str()
        .map_err(|_| ApiError::bad_request("If-Match", "header is not ASCII"))?
        .trim();
    if text == "*" {
        return Ok(None);
    }
    let bare = text.trim_start_matches("W/").trim_matches('"');
    bare.parse()
        .map(Some)
        .map_err(|_| ApiError::bad_request("If-Match", format!("`{text}` is not a board version")))
}

pub fn router(service: Arc<RetroService>) -> Router {
    let api = Router::new()
        .route("/health", get(health))
        .route("/projects", get(list_projects).post(create_project))
        .route("/projects/{id}", get(get_project))
        .route("/projects/{id}/kanban", post(set_kanban))
        .route("/projects/{id}/boards", post(create_board))
        .route("/boards/{id}", get(get_board))
        .route("/boards/{id}/status", patch(set_status))
        .route("/boards/{id}/comments", post(submit_comment))
        .route("/boards/{id}/allocate", post(allocate))
        .route("/boards/{id}/manual-queue", get(manual_queue))
        .route("/boards/{id}/manual-queue/{cid}", post(resolve_manual))
        .route("/boards/{id}/groups", post(create_group))
        .route("/boards/{id}/group-suggestions", get(suggest_groups))
        .route("/groups/{gid}", delete(dissolve_group))
        .route("/boards/{id}/frequency", get(frequency))
        .route("/boards/{id}/actions", post(add_action))
        .route("/actions/{aid}", patch(toggle_action))
        .route("/boards/{id}/ratings", post(rate_board))
        .route("/dashboard", get(dashboard))
        .route("/boards/{id}/summary", get(summary))
        .with_state(service);
    Router::new()
        .nest(API_PREFIX, api)
        .fallback(|| async { ApiError::not_found("no such endpoint") })
}

async fn health() -> Json<serde_json::Value> {
    Json(serde_json::json!({"status": "ok"}))
}

#[derive(Deserialize)]
struct NameBody {
    name: String,
}

async fn create_project(State(s): State<Svc>, body: Bytes) -> ApiResult {
    let b: NameBody = parse_body(&body)?;
    blocking(StatusCode::CREATED, move || s.create_project(&b.name)).await
}

async fn list_projects(State(s): State<Svc>) -> ApiResult {
    blocking(StatusCode::OK, move || s.list_projects()).await
}

async fn get_project(State(s): State<Svc>, Path(id): Path<String>) -> ApiResult {
    blocking(StatusCode::OK, move || s.get_project(&id)).await
}

#[derive(Deserialize)]
struct KanbanBody {
    sprint_number: u32,
    items: Vec<KanbanItemInput>,
}

async fn set_kanban(State(s): State<Svc>, Path(id): Path<String>, body: Bytes) -> ApiResult {
    let b: KanbanBody = parse_body(&body)?;
    blocking(StatusCode::OK, move || s.set_kanban(&id, b.sprint_number, b.items)).await
}

#[derive(Deserialize)]
struct SprintBody {
    sprint_number: u32,
}

async fn create_board(State(s): State<Svc>, Path(id): Path<String>, body: Bytes) -> ApiResult {
    let b: SprintBody = parse_body(&body)?;
    blocking(StatusCode::CREATED, move || s.create_board(&id, b.sprint_number)).await
}

async fn get_board(State(s): State<Svc>, Path(id): Path<String>) -> ApiResult {
    let view = tokio::task::spawn_blocking(move || s.get_board(&id))
        .await
        .map_err(|e| ApiError::from(ServiceError::Storage(e.to_string())))??;
    let etag = HeaderValue::from_str(&format!("\"{}\"", view.version)).expect("digits are a valid header");
    Ok(([(header::ETAG, etag)], Json(view)).into_response())
}

#[derive(Deserialize)]
struct StatusBody {
    status: BoardStatus,
}

async fn set_status(State(s): State<Svc>, Path(id): Path<String>, headers: HeaderMap, body: Bytes) -> ApiResult {
    let b: StatusBody = parse_body(&body)?;
    let m = parse_if_match(&headers)?;
    blocking(StatusCode::OK, move || s.set_status(&id, b.status, m)).await
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CommentBody {
    text: String,
}

async fn submit_comment(State(s): State<Svc>, Path(id): Path<String>, headers: HeaderMap, body: Bytes) -> ApiResult {
    // Unknown fields are refused so that a client cannot attach a column,
    // category or submitter to a comment.
    let b: CommentBody = parse_body(&body)?;
    let m = parse_if_match(&headers)?;
    blocking(StatusCode::CREATED, move || s.submit_comment(&id, &b.text, m)).await
}

#[derive(Deserialize, Default)]
struct AllocateBody {
    #[serde(default, alias = "template_id")]
    template: Option<serde_json::Value>,
}

fn template_from(value: Option<serde_json::Value>) -> Result<TemplateId, ApiError> {
    let bad = |v: &serde_json::Value| {
        ApiError::from(ServiceError::validation("template", format!("unknown template {v}; use P1, P2 or P3")))
    };
    match value {
        None | Some(serde_json::Value::Null) => Ok(DEFAULT_TEMPLATE),
        Some(serde_json::Value::String(s)) => s.parse().map_err(|_| bad(&serde_json::Value::String(s))),
        Some(serde_json::Value::Number(n)) => n
            .as_u64()
            .and_then(|n| u8::try_from(n).ok())
            .and_then(TemplateId::from_number)
            .ok_or_else(|| bad(&serde_json::Value::Number(n))),
        Some(other) => Err(bad(&other)),
    }
}

async fn allocate(State(s): State<Svc>, Path(id): Path<String>, headers: HeaderMap, body: Bytes) -> ApiResult {
    let b: AllocateBody = if body.iter().all(u8::is_ascii_whitespace) {
        AllocateBody::default()
    } else {
        parse_body(&body)?
    };
    let template = template_from(b.template)?;
    let m = parse_if_match(&headers)?;
    blocking(StatusCode::OK, move || s.trigger_allocation(&id, template, m)).await
}

async fn manual_queue(State(s): State<Svc>, Path(id): Path<String>) -> ApiResult {
    blocking(StatusCode::OK, move || s.manual_queue(&id)).await
}

#[derive(Deserialize)]
struct ResolveBody {
    #[serde(default)]
    target: Option<String>,
    #[serde(default)]
    discard: bool,
}

async fn resolve_manual(
    State(s): State<Svc>,
    Path((id, cid)): Path<(String, String)>,
    headers: HeaderMap,
    body: Bytes,
) -> ApiResult {
    let b: ResolveBody = parse_body(&body)?;
    let target = match (b.target.as_deref(), b.discard) {
        (None, true) | (Some("discard"), _) => ResolveTarget::Discard,
        (Some(t), false) => ResolveTarget::parse(t)?,
        (Some(_), true) => {
            return Err(ServiceError::validation("target", "give either a target or discard, not both").into())
        }
        (None, false) => return Err(ServiceError::validation("target", "missing target").into()),
    };
    let m = parse_if_match(&headers)?;
    blocking(StatusCode::OK, move || s.resolve_manual(&id, &cid, target, m)).await
}

#[derive(Deserialize)]
struct GroupBody {
    column: Column,
    member_ids: Vec<String>,
    #[serde(default)]
    label: Option<String>,
}

async fn create_group(State(s): State<Svc>, Path(id): Path<String>, headers: HeaderMap, body: Bytes) -> ApiResult {
    let b: GroupBody = parse_body(&body)?;
    let m = parse_if_match(&headers)?;
    blocking(StatusCode::CREATED, move || s.create_group(&id, b.column, b.member_ids, b.label, m)).await
}

async fn dissolve_group(State(s): State<Svc>, Path(gid): Path<String>, headers: HeaderMap) -> ApiResult {
    let m = parse_if_match(&headers)?;
    blocking(StatusCode::OK, move || s.dissolve_group(&gid, m)).await
}

async fn suggest_groups(
    State(s): State<Svc>,
    Path(id): Path<String>,
    Query(q): Query<HashMap<String, String>>,
) -> ApiResult {
    let column = match q.get("column").map(String::as_str) {
        None | Some("went_well") => Column::WentWell,
        Some("did_not_go_well") => Column::DidNotGoWell,
        Some(other) => return Err(ServiceError::validation("column", format!("unknown column `{other}`")).into()),
    };
    let threshold = match q.get("threshold") {
        None => None,
        Some(t) => Some(
            t.parse::<f64>()
                .map_err(|_| ServiceError::validation("threshold", "not a number"))?,
        ),
    };
    blocking(StatusCode::OK, move || s.suggest_groups(&id, column, threshold)).await
}

async fn frequency(State(s): State<Svc>, Path(id): Path<String>) -> ApiResult {
    blocking(StatusCode::OK, move || s.frequency(&id)).await
}

#[derive(Deserialize)]
struct TextBody {
    text: String,
}

async fn add_action(State(s): State<Svc>, Path(id): Path<String>, headers: HeaderMap, body: Bytes) -> ApiResult {
    let b: TextBody = parse_body(&body)?;
    let m = parse_if_match(&headers)?;
    blocking(StatusCode::CREATED, move || s.add_action(&id, &b.text, m)).await
}

#[derive(Deserialize, Default)]
struct ToggleBody {
    #[serde(default)]
    done: Option<bool>,
}

async fn toggle_action(State(s): State<Svc>, Path(aid): Path<String>, headers: HeaderMap, body: Bytes) -> ApiResult {
    let b: ToggleBody = if body.iter().all(u8::is_ascii_whitespace) {
        ToggleBody::default()
    } else {
        parse_body(&body)?
    };
    let m = parse_if_match(&headers)?;
    blocking(StatusCode::OK, move || s.toggle_action(&aid, b.done, m)).await
}

#[derive(Deserialize)]
struct RatingBody {
    rating: i64,
}

async fn rate_board(State(s): State<Svc>, Path(id): Path<String>, headers: HeaderMap, body: Bytes) -> ApiResult {
    let b: RatingBody = parse_body(&body)?;
    let m = parse_if_match(&headers)?;
    blocking(StatusCode::CREATED, move || s.rate_board(&id, b.rating, m)).await
}

async fn dashboard(State(s): State<Svc>, Query(q): Query<HashMap<String, String>>) -> ApiResult {
    let status = match q.get("status").map(|s| s.trim().to_ascii_lowercase()) {
        None => None,
        Some(v) if v.is_empty() || v == "all" => None,
        Some(v) if v == "active" => Some(BoardStatus::Active),
        Some(v) if v == "inactive" => Some(BoardStatus::Inactive),
        Some(v) => return Err(ServiceError::validation("status", format!("unknown status `{v}`")).into()),
    };
    let query = q.get("query").cloned();
    let project = q.get("project").cloned().filter(|p| !p.is_empty());
    blocking(StatusCode::OK, move || s.dashboard(query.as_deref(), status, project.as_deref())).await
}

async fn summary(State(s): State<Svc>, Path(id): Path<String>) -> ApiResult {
    blocking(StatusCode::OK, move || s.sprint_summary(&id)).await
}
