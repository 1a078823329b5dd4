//! HTTP front end. Handlers parse the request, call one [`Engine`] operation
//! on the blocking pool and encode its output; they hold no state of their
//! own.

use std::sync::Arc;

use atelier_core::merge::MergeRecipe;
use atelier_core::{ApparelId, ContentAddress, SegmentClass};
use axum::body::Bytes;
use axum::extract::multipart::MultipartRejection;
use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{FromRequest, Multipart, Path, Query, Request, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use tower_http::cors::CorsLayer;

use crate::engine::{encode_base64, Engine, StylizeRequest, VariationsRequest};
use crate::error::ApiError;

/// The published payload schema.
pub const SCHEMA: &str = include_str!("../schema/api.schema.json");

/// Upload size limit for multipart and JSON bodies.
const BODY_LIMIT: usize = 64 * 1024 * 1024;

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(self)).into_response()
    }
}

/// `Json` whose rejections are reported as an [`ApiError`].
pub struct ApiJson<T>(pub T);

impl<S, T> FromRequest<S> for ApiJson<T>
where
    T: DeserializeOwned,
    S: Send + Sync,
{
    type Rejection = ApiError;

    async fn from_request(req: Request, state: &S) -> Result<Self, Self::Rejection> {
        Json::<T>::from_request(req, state)
            .await
            .map(|Json(value)| Self(value))
            .map_err(|e: JsonRejection| ApiError::invalid_request(e.body_text()))
    }
}

type AppState = Arc<Engine>;

async fn run<T, F>(engine: &AppState, f: F) -> Result<T, ApiError>
where
    T: Send + 'static,
    F: FnOnce(&Engine) -> Result<T, ApiError> + Send + 'static,
{
    let engine = Arc::clone(engine);
    tokio::task::spawn_blocking(move || f(&engine))
        .await
        .map_err(|e| ApiError::io(format!("worker failed: {e}")))?
}

fn bytes_response(content_type: &'static str, body: Vec<u8>) -> Response {
    ([(header::CONTENT_TYPE, HeaderValue::from_static(content_type))], body).into_response()
}

fn png_response(body: Vec<u8>) -> Response {
    bytes_response("image/png", body)
}

fn apparel_id(raw: &str) -> Result<ApparelId, ApiError> {
    ApparelId::new(raw).map_err(|_| ApiError::not_found("UnknownApparel", format!("unknown apparel `{raw}`")))
}

fn address(raw: &str, what: &str) -> Result<ContentAddress, ApiError> {
    raw.parse()
        .map_err(|_| ApiError::not_found("NotFound", format!("`{raw}` is not a {what} address")))
}

pub fn result_url(id: &ContentAddress) -> String {
    format!("/results/{id}.png")
}

pub fn blob_url(id: &ContentAddress) -> String {
    format!("/blobs/{id}")
}

pub fn router(engine: Arc<Engine>) -> Router {
    Router::new()
        .route("/apparels", get(list_apparels).post(register_apparel))
        .route("/apparels/{id}", get(get_apparel))
        .route("/apparels/{id}/image.png", get(apparel_image))
        .route("/apparels/{id}/masks/{file}", get(apparel_mask))
        .route("/merge", post(merge))
        .route("/results/{file}", get(result_image))
        .route("/results/{id}/provenance.png", get(result_provenance))
        .route("/results/{id}/legend.json", get(result_legend))
        .route("/blobs/{address}", get(blob))
        .route("/stylize", post(stylize))
        .route("/variations", post(variations))
        .route("/insights/attributes", get(insights))
        .route("/insights/catalog", post(ingest_catalog))
        .route("/swatches", get(list_swatches))
        .route("/swatches/{name}", get(swatch))
        .route("/schema", get(schema))
        .fallback(|| async { ApiError::not_found("NotFound", "no such endpoint") })
        .layer(axum::extract::DefaultBodyLimit::max(BODY_LIMIT))
        .layer(CorsLayer::permissive())
        .with_state(engine)
}

pub async fn serve(engine: Arc<Engine>, addr: &str) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(engine))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

async fn schema() -> Response {
    bytes_response("application/schema+json", SCHEMA.as_bytes().to_vec())
}

async fn list_apparels(State(engine): State<AppState>) -> Result<Response, ApiError> {
    let apparels = run(&engine, |e| e.list_apparels()).await?;
    Ok(Json(serde_json::json!({ "apparels": apparels })).into_response())
}

async fn get_apparel(State(engine): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let id = apparel_id(&id)?;
    Ok(Json(run(&engine, move |e| e.apparel(&id)).await?).into_response())
}

async fn register_apparel(
    State(engine): State<AppState>,
    form: Result<Multipart, MultipartRejection>,
) -> Result<Response, ApiError> {
    let mut form = form.map_err(|e| ApiError::invalid_request(e.body_text()))?;
    let mut image = None;
    let mut annotation = None;
    while let Some(field) = form
        .next_field()
        .await
        .map_err(|e| ApiError::invalid_request(format!("multipart: {e}")))?
    {
        let name = field.name().unwrap_or_default().to_string();
        let data = field
            .bytes()
            .await
            .map_err(|e| ApiError::invalid_request(format!("multipart field `{name}`: {e}")))?;
        match name.as_str() {
            "image" => image = Some(data),
            "annotation" => annotation = Some(data),
            other => return Err(ApiError::invalid_request(format!("unknown multipart field `{other}`"))),
        }
    }
    let (Some(image), Some(annotation)) = (image, annotation) else {
        return Err(ApiError::invalid_request(
            "multipart body needs `image` and `annotation` fields",
        ));
    };
    let summary = run(&engine, move |e| e.register_upload(&image, &annotation)).await?;
    Ok((StatusCode::CREATED, Json(summary)).into_response())
}

async fn apparel_image(State(engine): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let id = apparel_id(&id)?;
    Ok(png_response(run(&engine, move |e| e.apparel_image(&id)).await?))
}

async fn apparel_mask(
    State(engine): State<AppState>,
    Path((id, file)): Path<(String, String)>,
) -> Result<Response, ApiError> {
    let id = apparel_id(&id)?;
    let name = file.strip_suffix(".png").unwrap_or(&file);
    let class = SegmentClass::parse(name)
        .map_err(|_| ApiError::not_found("UnknownClass", format!("unknown class `{name}`")))?;
    Ok(png_response(run(&engine, move |e| e.mask_png(&id, class)).await?))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct MergeResponse {
    pub result_id: ContentAddress,
    pub image_url: String,
    pub provenance_url: String,
    pub legend_url: String,
}

async fn merge(State(engine): State<AppState>, ApiJson(recipe): ApiJson<MergeRecipe>) -> Result<Response, ApiError> {
    let out = run(&engine, move |e| e.merge(&recipe)).await?;
    Ok(Json(MergeResponse {
        image_url: result_url(&out.result_id),
        provenance_url: format!("/results/{}/provenance.png", out.result_id),
        legend_url: format!("/results/{}/legend.json", out.result_id),
        result_id: out.result_id,
    })
    .into_response())
}

async fn result_image(State(engine): State<AppState>, Path(file): Path<String>) -> Result<Response, ApiError> {
    let id = address(file.strip_suffix(".png").unwrap_or(&file), "result")?;
    Ok(png_response(run(&engine, move |e| e.result_png(&id)).await?))
}

async fn result_provenance(State(engine): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let id = address(&id, "result")?;
    Ok(png_response(run(&engine, move |e| e.result_provenance_png(&id)).await?))
}

async fn result_legend(State(engine): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let id = address(&id, "result")?;
    let body = run(&engine, move |e| e.result_legend(&id)).await?;
    Ok(bytes_response("application/json", body))
}

async fn blob(State(engine): State<AppState>, Path(raw): Path<String>) -> Result<Response, ApiError> {
    let id = address(&raw, "blob")?;
    let body = run(&engine, move |e| e.blob(&id)).await?;
    let kind = if atelier_core::raster::png::is_png(&body) {
        "image/png"
    } else {
        "application/octet-stream"
    };
    Ok(bytes_response(kind, body))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct StylizeResponse {
    pub result_id: ContentAddress,
    pub image_url: String,
    pub style: ContentAddress,
}

async fn stylize(
    State(engine): State<AppState>,
    ApiJson(request): ApiJson<StylizeRequest>,
) -> Result<Response, ApiError> {
    let out = run(&engine, move |e| e.stylize_request(&request)).await?;
    Ok(Json(StylizeResponse {
        image_url: result_url(&out.result_id),
        result_id: out.result_id,
        style: out.style,
    })
    .into_response())
}

#[derive(Debug, Serialize, Deserialize)]
pub struct VariationItem {
    pub recipe: MergeRecipe,
    pub result_id: ContentAddress,
    pub image_url: String,
    pub thumbnail_url: String,
    pub thumbnail_png_base64: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct VariationsResponse {
    pub variations: Vec<VariationItem>,
}

async fn variations(
    State(engine): State<AppState>,
    ApiJson(request): ApiJson<VariationsRequest>,
) -> Result<Response, ApiError> {
    let out = run(&engine, move |e| e.variations(&request)).await?;
    let variations = out
        .into_iter()
        .map(|v| VariationItem {
            image_url: result_url(&v.result_id),
            thumbnail_url: blob_url(&v.thumbnail),
            thumbnail_png_base64: encode_base64(&v.thumbnail_png),
            recipe: v.recipe,
            result_id: v.result_id,
        })
        .collect();
    Ok(Json(VariationsResponse { variations }).into_response())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SeasonQuery {
    season: Option<String>,
}

async fn insights(
    State(engine): State<AppState>,
    query: Result<Query<SeasonQuery>, QueryRejection>,
) -> Result<Response, ApiError> {
    let Query(q) = query.map_err(|e| ApiError::invalid_request(e.body_text()))?;
    let season = q.season.filter(|s| !s.is_empty());
    Ok(Json(run(&engine, move |e| e.rank(season.as_deref())).await?).into_response())
}

async fn ingest_catalog(State(engine): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    Ok(Json(run(&engine, move |e| e.ingest_sales_catalog(&body)).await?).into_response())
}

async fn list_swatches(State(engine): State<AppState>) -> Result<Response, ApiError> {
    let names = run(&engine, |e| e.list_swatches()).await?;
    let swatches: Vec<_> = names
        .iter()
        .map(|n| serde_json::json!({ "name": n, "url": format!("/swatches/{n}") }))
        .collect();
    Ok(Json(serde_json::json!({ "swatches": swatches })).into_response())
}

async fn swatch(State(engine): State<AppState>, Path(name): Path<String>) -> Result<Response, ApiError> {
    Ok(png_response(run(&engine, move |e| e.swatch(&name)).await?))
}
