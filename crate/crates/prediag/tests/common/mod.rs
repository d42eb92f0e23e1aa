#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use http_body_util::BodyExt;
use prediag::model::Snapshot;
use prediag::service::{router, AppState};
use prediag::{corpus, rules};
use prediag_core::classifier::{
    build_head, generate_synthetic_features, train_head, FeatureSet, HeadConfig, HeadKind,
    TrainHyper,
};
use prediag_core::dialogue::ChatSettings;
use prediag_core::KnowledgeGraph;
use tower::ServiceExt;

pub const SHAPE: [usize; 3] = [1, 1, 8];
pub const MODEL_ID: &str = "fixture";

pub fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data")
}

pub fn fixture_graph() -> KnowledgeGraph {
    let mut g = KnowledgeGraph::new(rules::load_preprocessor(None).unwrap());
    let files = corpus::corpus_files(&data_dir().join("corpus")).unwrap();
    corpus::train_from_files(&mut g, &files).unwrap();
    g
}

/// SA head trained on well separated synthetic features.
pub fn fixture_model() -> Snapshot {
    let train = generate_synthetic_features(2, 32, &SHAPE, 10.0, 100).unwrap();
    let val = generate_synthetic_features(2, 8, &SHAPE, 10.0, 101).unwrap();
    let mut model = build_head(
        &HeadConfig::new(HeadKind::EfficientNetV2SA, SHAPE.to_vec(), 2),
        7,
    )
    .unwrap();
    train_head(&mut model, &train, &val, &TrainHyper::default(), 8).unwrap();
    Snapshot::new(MODEL_ID, None, model).unwrap()
}

/// Held-out samples from the same distribution as the fixture model.
pub fn fixture_samples() -> FeatureSet {
    generate_synthetic_features(2, 4, &SHAPE, 10.0, 102).unwrap()
}

pub fn app(model: Snapshot) -> AppState {
    AppState::new(
        fixture_graph(),
        rules::default_rules(),
        ChatSettings::default(),
        BTreeMap::from([(model.model_id.clone(), model)]),
        Duration::from_secs(1800),
        0,
    )
}

pub async fn send(state: &AppState, req: Request<Body>) -> (StatusCode, serde_json::Value) {
    let resp = router(state.clone()).oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let json = serde_json::from_slice(&bytes).unwrap_or(serde_json::Value::Null);
    (status, json)
}

pub fn post_json(uri: &str, body: serde_json::Value) -> Request<Body> {
    Request::post(uri)
        .header("content-type", "application/json")
        .body(Body::from(body.to_string()))
        .unwrap()
}

pub fn post_bytes(uri: &str, body: Vec<u8>) -> Request<Body> {
    Request::post(uri)
        .header("content-type", "application/octet-stream")
        .body(Body::from(body))
        .unwrap()
}

pub fn get(uri: &str) -> Request<Body> {
    Request::get(uri).body(Body::empty()).unwrap()
}
