//! HTTP inference service over one loaded bundle.
//!
//! Routes: `GET /healthz`, `GET /api/metadata`, `POST /api/predict`.
//! Responses under `/api/` carry `Access-Control-Allow-Origin: *`.

use std::collections::BTreeMap;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Request, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use kosm_core::bundle::{ModelBundle, Prediction};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use tokio::net::TcpListener;

/// Largest accepted request body.
pub const MAX_BODY_BYTES: usize = 64 * 1024;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelInfo {
    pub arch_summary: String,
    pub validation_mae_idr: f64,
    pub format_version: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetadataResponse {
    pub cities: Vec<String>,
    pub areas_by_city: BTreeMap<String, Vec<String>>,
    pub types: Vec<String>,
    pub facilities: Vec<String>,
    pub model: ModelInfo,
}

impl MetadataResponse {
    pub fn from_bundle(bundle: &ModelBundle) -> Self {
        Self {
            cities: bundle.encoder.kota.tokens().to_vec(),
            areas_by_city: bundle.encoder.areas_by_city(),
            types: bundle.encoder.type_kos.tokens().to_vec(),
            facilities: bundle.facility_catalog.clone(),
            model: ModelInfo {
                arch_summary: bundle.metadata.arch_summary.clone(),
                validation_mae_idr: bundle.metadata.val_mae,
                format_version: bundle.metadata.format_version,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictRequest {
    pub kota: String,
    pub area: String,
    pub type_kos: String,
    #[serde(default)]
    pub facilities: Vec<String>,
}

/// Body of every 4xx answer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RequestError {
    pub field: &'static str,
    pub message: String,
}

impl IntoResponse for RequestError {
    fn into_response(self) -> Response {
        let body = ErrorBody {
            error: self.message,
            field: Some(self.field.to_string()),
        };
        (StatusCode::BAD_REQUEST, Json(body)).into_response()
    }
}

fn text_field(
    obj: &serde_json::Map<String, Value>,
    name: &'static str,
) -> Result<String, RequestError> {
    match obj.get(name) {
        Some(Value::String(s)) => Ok(s.clone()),
        Some(_) => Err(RequestError {
            field: name,
            message: format!("field `{name}` must be a string"),
        }),
        None => Err(RequestError {
            field: name,
            message: format!("missing field `{name}`"),
        }),
    }
}

/// Validates a predict body, naming the first offending field. `facilities`
/// may be absent or null, meaning no facilities.
pub fn parse_predict_request(body: &[u8]) -> Result<PredictRequest, RequestError> {
    let value: Value = serde_json::from_slice(body).map_err(|e| RequestError {
        field: "body",
        message: format!("body is not valid JSON: {e}"),
    })?;
    let Value::Object(obj) = value else {
        return Err(RequestError {
            field: "body",
            message: "body must be a JSON object".to_string(),
        });
    };
    let kota = text_field(&obj, "kota")?;
    let area = text_field(&obj, "area")?;
    let type_kos = text_field(&obj, "type_kos")?;
    let bad_facilities = || RequestError {
        field: "facilities",
        message: "field `facilities` must be a list of strings".to_string(),
    };
    let facilities = match obj.get("facilities") {
        None | Some(Value::Null) => Vec::new(),
        Some(Value::Array(items)) => items
            .iter()
            .map(|v| v.as_str().map(str::to_string).ok_or_else(bad_facilities))
            .collect::<Result<_, _>>()?,
        Some(_) => return Err(bad_facilities()),
    };
    Ok(PredictRequest {
        kota,
        area,
        type_kos,
        facilities,
    })
}

struct AppState {
    bundle: Arc<ModelBundle>,
    metadata: MetadataResponse,
}

async fn healthz(State(state): State<Arc<AppState>>) -> Json<Value> {
    Json(serde_json::json!({
        "status": "ok",
        "format_version": state.bundle.metadata.format_version,
    }))
}

async fn metadata(State(state): State<Arc<AppState>>) -> Json<MetadataResponse> {
    Json(state.metadata.clone())
}

async fn predict(
    State(state): State<Arc<AppState>>,
    body: Bytes,
) -> Result<Json<Prediction>, RequestError> {
    let req = parse_predict_request(&body)?;
    Ok(Json(state.bundle.predict(
        &req.kota,
        &req.area,
        &req.type_kos,
        &req.facilities,
    )))
}

async fn preflight() -> Response {
    (
        StatusCode::NO_CONTENT,
        [
            (header::ACCESS_CONTROL_ALLOW_METHODS, "GET, POST, OPTIONS"),
            (header::ACCESS_CONTROL_ALLOW_HEADERS, "content-type"),
            (header::ACCESS_CONTROL_MAX_AGE, "600"),
        ],
    )
        .into_response()
}

async fn allow_any_origin(req: Request, next: Next) -> Response {
    let mut res = next.run(req).await;
    res.headers_mut().insert(
        header::ACCESS_CONTROL_ALLOW_ORIGIN,
        HeaderValue::from_static("*"),
    );
    res
}

pub fn router(bundle: Arc<ModelBundle>) -> Router {
    let state = Arc::new(AppState {
        metadata: MetadataResponse::from_bundle(&bundle),
        bundle,
    });
    let api = Router::new()
        .route("/api/metadata", get(metadata).options(preflight))
        .route("/api/predict", post(predict).options(preflight))
        .layer(middleware::from_fn(allow_any_origin));
    Router::new()
        .route("/healthz", get(healthz))
        .merge(api)
        .layer(DefaultBodyLimit::max(MAX_BODY_BYTES))
        .with_state(state)
}

/// Serves until the listener fails or the task is dropped.
pub async fn serve(listener: TcpListener, bundle: Arc<ModelBundle>) -> std::io::Result<()> {
    axum::serve(listener, router(bundle)).await
}
