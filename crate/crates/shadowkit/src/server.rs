//! HTTP annotation and preview service.
//!
//! Sessions live in memory, one per image id, and are only written to disk
//! on commit (as `<manifest dir>/annotations/<id>.json`). A later commit for
//! the same image replaces the earlier file.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use shadowkit_core::io::{dimensions, encode_rgb_png};
use shadowkit_core::{AnnotationRecord, AnnotationSession, GeometryError, LightEstimate, Point2, SessionState};

use crate::config::Config;
use crate::error::PipelineError;
use crate::manifest::{load_annotation, Manifest};
use crate::pipeline::render_onto;

pub struct AppState {
    pub manifest: Manifest,
    pub cfg: Config,
    sessions: Mutex<HashMap<String, AnnotationSession>>,
}

impl AppState {
    pub fn new(manifest: Manifest, cfg: Config) -> Arc<Self> {
        Arc::new(Self {
            manifest,
            cfg,
            sessions: Mutex::new(HashMap::new()),
        })
    }

    fn annotation_path(&self, id: &str) -> Option<PathBuf> {
        let default = self.manifest.default_annotation_path(id);
        if default.is_file() {
            Some(default)
        } else {
            self.manifest.annotation_path(id)
        }
    }
}

#[derive(Debug, Serialize)]
struct ErrorBody {
    code: &'static str,
    message: String,
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            code,
            message: message.into(),
        }
    }

    fn not_found(what: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, "NotFound", what)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = ErrorBody {
            code: self.code,
            message: self.message,
        };
        (self.status, Json(body)).into_response()
    }
}

impl From<GeometryError> for ApiError {
    fn from(e: GeometryError) -> Self {
        let (status, code) = match &e {
            GeometryError::BelowMinimum { .. } => (StatusCode::CONFLICT, "BelowMinimum"),
            GeometryError::SetFull => (StatusCode::CONFLICT, "SetFull"),
            GeometryError::SessionClosed => (StatusCode::CONFLICT, "SessionClosed"),
            GeometryError::EmptySession => (StatusCode::CONFLICT, "EmptySession"),
            GeometryError::OutOfBounds { .. } => (StatusCode::UNPROCESSABLE_ENTITY, "OutOfBounds"),
            GeometryError::NonFinite => (StatusCode::UNPROCESSABLE_ENTITY, "NonFinite"),
            _ => (StatusCode::UNPROCESSABLE_ENTITY, "InvalidGeometry"),
        };
        Self::new(status, code, e.to_string())
    }
}

impl From<PipelineError> for ApiError {
    fn from(e: PipelineError) -> Self {
        match e.root() {
            PipelineError::MissingFile { .. } | PipelineError::UnknownTuple(_) => {
                Self::new(StatusCode::NOT_FOUND, "NotFound", e.to_string())
            }
            PipelineError::Sta(_) | PipelineError::Render(_) | PipelineError::Geometry(_) => {
                Self::new(StatusCode::UNPROCESSABLE_ENTITY, "InvalidParameters", e.to_string())
            }
            _ => Self::new(StatusCode::INTERNAL_SERVER_ERROR, "Internal", e.to_string()),
        }
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "BadRequest", e.body_text())
    }
}

type ApiResult<T> = Result<T, ApiError>;

#[derive(Debug, Serialize)]
struct ImageEntry {
    image_id: String,
    width: u32,
    height: u32,
    annotated: bool,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct PointView {
    pub name: String,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct SessionView {
    pub image_id: String,
    pub next_keypoint: Option<String>,
    pub points: Vec<PointView>,
    pub committed: bool,
    pub k_min: usize,
    pub canvas: [u32; 2],
}

impl From<&AnnotationSession> for SessionView {
    fn from(s: &AnnotationSession) -> Self {
        let (w, h) = s.canvas();
        Self {
            image_id: s.image_id().to_string(),
            next_keypoint: s.next_name().map(|n| n.as_str().to_string()),
            points: s
                .points()
                .iter()
                .map(|(n, p)| PointView {
                    name: n.as_str().to_string(),
                    x: p.x,
                    y: p.y,
                })
                .collect(),
            committed: s.state() == SessionState::Committed,
            k_min: s.k_min(),
            canvas: [w, h],
        }
    }
}

#[derive(Debug, Deserialize)]
struct PointBody {
    x: f64,
    y: f64,
}

#[derive(Debug, Deserialize)]
struct PreviewBody {
    image_id: String,
    theta: f64,
    azimuth: [f64; 2],
    alpha: f64,
    sigma: f64,
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/api/images", get(list_images))
        .route("/api/image/{id}", get(image_png))
        .route("/api/session/{id}", get(get_session))
        .route("/api/session/{id}/point", post(add_point))
        .route("/api/session/{id}/undo", post(undo))
        .route("/api/session/{id}/commit", post(commit))
        .route("/api/session/{id}/reset", post(reset))
        .route("/api/preview/shadow", post(preview))
        .route("/api/annotation/{id}", get(annotation))
        .with_state(state)
}

async fn list_images(State(st): State<Arc<AppState>>) -> ApiResult<Json<Vec<ImageEntry>>> {
    let mut out = Vec::with_capacity(st.manifest.tuples.len());
    for t in &st.manifest.tuples {
        let (width, height) = dimensions(&t.composite).map_err(PipelineError::from)?;
        out.push(ImageEntry {
            image_id: t.tuple_id.clone(),
            width,
            height,
            annotated: st.annotation_path(&t.tuple_id).is_some(),
        });
    }
    Ok(Json(out))
}

fn png(bytes: Vec<u8>) -> Response {
    ([(header::CONTENT_TYPE, "image/png")], bytes).into_response()
}

async fn image_png(State(st): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Response> {
    let t = st.manifest.tuple(&id)?;
    let img = t.read_composite()?;
    Ok(png(encode_rgb_png(&img).map_err(PipelineError::from)?))
}

fn fresh_session(st: &AppState, id: &str) -> ApiResult<AnnotationSession> {
    let t = st.manifest.tuple(id)?;
    let (w, h) = dimensions(&t.composite).map_err(PipelineError::from)?;
    let [cw, ch] = st.cfg.canvas;
    Ok(AnnotationSession::new(id, cw, ch)?
        .with_original(w, h)?
        .with_k_min(st.cfg.k_min)?
        .with_width_ratio(st.cfg.width_ratio)?)
}

/// Applies `f` to the image's session (creating it if needed) under the
/// session lock, storing the result.
fn with_session<T>(
    st: &AppState,
    id: &str,
    f: impl FnOnce(&AnnotationSession) -> ApiResult<(AnnotationSession, T)>,
) -> ApiResult<T> {
    let mut sessions = st.sessions.lock().expect("session lock poisoned");
    let current = match sessions.get(id) {
        Some(s) => s.clone(),
        None => fresh_session(st, id)?,
    };
    let (next, out) = f(&current)?;
    sessions.insert(id.to_string(), next);
    Ok(out)
}

async fn get_session(State(st): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Json<SessionView>> {
    with_session(&st, &id, |s| Ok((s.clone(), Json(SessionView::from(s)))))
}

async fn add_point(
    State(st): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Result<Json<PointBody>, JsonRejection>,
) -> ApiResult<Json<SessionView>> {
    let Json(p) = body?;
    with_session(&st, &id, |s| {
        let next = s.add_point(Point2::new(p.x, p.y))?;
        let view = SessionView::from(&next);
        Ok((next, Json(view)))
    })
}

async fn undo(State(st): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Json<SessionView>> {
    with_session(&st, &id, |s| {
        let next = s.undo()?;
        let view = SessionView::from(&next);
        Ok((next, Json(view)))
    })
}

async fn reset(State(st): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Json<SessionView>> {
    let fresh = fresh_session(&st, &id)?;
    with_session(&st, &id, |_| {
        let view = SessionView::from(&fresh);
        Ok((fresh, Json(view)))
    })
}

async fn commit(State(st): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Response> {
    let record = with_session(&st, &id, |s| {
        let (next, record) = s.commit()?;
        let path = st.manifest.default_annotation_path(&id);
        if path.is_file() {
            log::warn!("{id}: replacing existing annotation {}", path.display());
        }
        let write = || -> std::io::Result<()> {
            std::fs::create_dir_all(path.parent().expect("annotation path has a parent"))?;
            std::fs::write(&path, record.to_json_pretty())
        };
        write().map_err(|e| ApiError::from(PipelineError::file(&path, e)))?;
        Ok((next, record))
    })?;
    Ok(json_record(&record))
}

fn json_record(rec: &AnnotationRecord) -> Response {
    ([(header::CONTENT_TYPE, "application/json")], rec.to_json_pretty()).into_response()
}

async fn annotation(State(st): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Response> {
    st.manifest.tuple(&id)?;
    let path = st
        .annotation_path(&id)
        .ok_or_else(|| ApiError::not_found(format!("no annotation for '{id}'")))?;
    Ok(json_record(&load_annotation(&path)?))
}

/// Record to preview: the committed annotation, else a complete session.
fn preview_record(st: &AppState, id: &str) -> ApiResult<AnnotationRecord> {
    if let Some(s) = st.sessions.lock().expect("session lock poisoned").get(id) {
        if s.state() == SessionState::Active && s.points().len() == 9 {
            return Ok(s.draft_record()?);
        }
    }
    match st.annotation_path(id) {
        Some(p) => Ok(load_annotation(&p)?),
        None => Err(ApiError::new(
            StatusCode::CONFLICT,
            "NotAnnotated",
            format!("'{id}' needs 9 keypoints or a committed annotation"),
        )),
    }
}

async fn preview(
    State(st): State<Arc<AppState>>,
    body: Result<Json<PreviewBody>, JsonRejection>,
) -> ApiResult<Response> {
    let Json(req) = body?;
    let tuple = st.manifest.tuple(&req.image_id)?.clone();
    let rec = preview_record(&st, &req.image_id)?;
    let [ax, ay] = req.azimuth;
    let n = ax.hypot(ay);
    if !(n.is_finite() && n > 0.0) {
        return Err(ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "InvalidParameters", "azimuth must be non-zero"));
    }
    let light = LightEstimate::from_theta(req.theta, Point2::new(ax / n, ay / n)).map_err(PipelineError::from)?;
    let mut params = st.cfg.render_params();
    params.alpha = req.alpha;
    params.sigma = req.sigma;
    params.validate().map_err(PipelineError::from)?;
    let topo = st.cfg.topology();
    let bytes = tokio::task::spawn_blocking(move || -> Result<Vec<u8>, PipelineError> {
        let base = tuple.read_composite()?;
        let fg = tuple.read_fg_mask()?;
        let (img, _, _) = render_onto(&base, &fg, &rec, &topo, &light, &params)?;
        Ok(encode_rgb_png(&img)?)
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "Internal", e.to_string()))??;
    Ok(png(bytes))
}

/// Binds `addr` and serves until Ctrl-C.
pub async fn serve(state: Arc<AppState>, addr: &str) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
