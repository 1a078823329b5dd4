#![allow(dead_code)]

use std::sync::Arc;

use atelier_core::annotation::write_via_project;
use atelier_core::fixtures::sample_apparel;
use atelier_core::raster::png::encode_rgb_png;
use atelier_server::engine::ApparelSummary;
use atelier_server::Engine;
use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use tempfile::TempDir;
use tower::ServiceExt;

pub const W: u32 = 96;
pub const H: u32 = 128;

/// Canonical PNG and single-image VIA project for fixture `id`.
pub fn upload(id: &str, variant: usize) -> (Vec<u8>, Vec<u8>) {
    let (record, image) = sample_apparel(id, variant, W, H);
    (encode_rgb_png(&image).unwrap(), write_via_project(&[record]).unwrap())
}

/// A fresh data dir with `ids[i]` registered as fixture variant `i`.
pub fn engine_with(ids: &[&str]) -> (TempDir, Arc<Engine>) {
    let dir = TempDir::new().unwrap();
    let engine = Engine::open(dir.path()).unwrap();
    for (i, id) in ids.iter().enumerate() {
        let (png, via) = upload(id, i);
        let summary: ApparelSummary = engine.register_upload(&png, &via).unwrap();
        assert_eq!(summary.apparel_id.as_str(), *id);
    }
    (dir, Arc::new(engine))
}

pub const BOUNDARY: &str = "atelier-test-boundary";

pub fn multipart(fields: &[(&str, &str, &[u8])]) -> Vec<u8> {
    let mut body = Vec::new();
    for (name, filename, data) in fields {
        body.extend_from_slice(format!("--{BOUNDARY}\r\n").as_bytes());
        body.extend_from_slice(
            format!("Content-Disposition: form-data; name=\"{name}\"; filename=\"{filename}\"\r\n\r\n").as_bytes(),
        );
        body.extend_from_slice(data);
        body.extend_from_slice(b"\r\n");
    }
    body.extend_from_slice(format!("--{BOUNDARY}--\r\n").as_bytes());
    body
}

pub struct Reply {
    pub status: StatusCode,
    pub content_type: Option<String>,
    pub headers: axum::http::HeaderMap,
    pub body: Vec<u8>,
}

impl Reply {
    pub fn json(&self) -> serde_json::Value {
        serde_json::from_slice(&self.body)
            .unwrap_or_else(|e| panic!("body is not JSON ({e}): {}", String::from_utf8_lossy(&self.body)))
    }
}

pub async fn send(app: &Router, request: Request<Body>) -> Reply {
    let response = app.clone().oneshot(request).await.unwrap();
    let status = response.status();
    let headers = response.headers().clone();
    let content_type = headers.get("content-type").map(|v| v.to_str().unwrap().to_string());
    let body = response.into_body().collect().await.unwrap().to_bytes().to_vec();
    Reply {
        status,
        content_type,
        headers,
        body,
    }
}

pub async fn get(app: &Router, uri: &str) -> Reply {
    send(app, Request::get(uri).body(Body::empty()).unwrap()).await
}

pub async fn post_json(app: &Router, uri: &str, body: &serde_json::Value) -> Reply {
    let request = Request::post(uri)
        .header("content-type", "application/json")
        .body(Body::from(serde_json::to_vec(body).unwrap()))
        .unwrap();
    send(app, request).await
}

pub async fn post_multipart(app: &Router, uri: &str, body: Vec<u8>) -> Reply {
    let request = Request::post(uri)
        .header("content-type", format!("multipart/form-data; boundary={BOUNDARY}"))
        .body(Body::from(body))
        .unwrap();
    send(app, request).await
}

pub fn sleeve_swap_recipe(a: &str, b: &str) -> serde_json::Value {
    serde_json::json!({
        "base": { "source": a, "part": "silhouette" },
        "steps": [
            { "source": b, "part": "sleeve_right" },
            { "source": b, "part": "sleeve_left" }
        ],
        "canvas": { "width": W, "height": H }
    })
}

/// Validates `value` against `$defs/<name>` of the published schema.
pub fn assert_schema(name: &str, value: &serde_json::Value) {
    let mut schema: serde_json::Value = serde_json::from_str(atelier_server::http::SCHEMA).unwrap();
    schema["$ref"] = serde_json::json!(format!("#/$defs/{name}"));
    let validator = jsonschema::validator_for(&schema).unwrap();
    let errors: Vec<String> = validator.iter_errors(value).map(|e| e.to_string()).collect();
    assert!(
        errors.is_empty(),
        "{name} payload violates the schema: {errors:?}\n{value:#}"
    );
}

pub fn schema_accepts(name: &str, value: &serde_json::Value) -> bool {
    let mut schema: serde_json::Value = serde_json::from_str(atelier_server::http::SCHEMA).unwrap();
    schema["$ref"] = serde_json::json!(format!("#/$defs/{name}"));
    jsonschema::validator_for(&schema).unwrap().is_valid(value)
}
