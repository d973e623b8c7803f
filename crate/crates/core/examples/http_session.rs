//! The HTTP API, exercised in-process against the built-in demo catalog.
//!
//! `cargo run -- serve --ui <dir>` serves the same routes on a socket.

use std::sync::Arc;

use axum::body::Body;
use axum::http::Request;
use certainty::service::{router, AppState};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

async fn post(app: &axum::Router, uri: &str, body: Value) -> anyhow::Result<Value> {
    let request = Request::post(uri)
        .header("content-type", "application/json")
        .body(Body::from(body.to_string()))?;
    let bytes = app
        .clone()
        .oneshot(request)
        .await?
        .into_body()
        .collect()
        .await?
        .to_bytes();
    Ok(serde_json::from_slice(&bytes)?)
}

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    let app = router(Arc::new(AppState::new()));
    let created = post(
        &app,
        "/v1/sessions",
        json!({"catalog_id": "demo", "policy": "core", "mode": "value"}),
    )
    .await?;
    let id = created["session_id"]
        .as_str()
        .unwrap_or_default()
        .to_string();
    println!("first query {}", created["first_query"]);

    // the user wants red and turns down the first red item offered
    let mut reply = Value::Null;
    for kind in ["yes", "no", "yes"] {
        reply = post(
            &app,
            &format!("/v1/sessions/{id}/answers"),
            json!({ "kind": kind }),
        )
        .await?;
        if !reply["outcome"].is_null() {
            break;
        }
        println!("next query  {}", reply["next_query"]);
    }
    println!("outcome     {}", reply["outcome"]);
    println!("recommend   {}", reply["recommendation"]);
    Ok(())
}
