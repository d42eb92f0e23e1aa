mod common;

use std::collections::BTreeMap;
use std::time::Duration;

use common::*;
use prediag::container;
use prediag::service::{AppState, ChatResponse, ClassifyResponse, Health, SessionView};
use prediag_core::dialogue::{ChatSettings, GoalStatus, RiskLevel};
use prediag_core::nn::Tensor;
use serde_json::json;

fn sample(set: &prediag_core::classifier::FeatureSet, i: usize) -> Vec<u8> {
    let t = Tensor::new(SHAPE.to_vec(), set.sample(i).to_vec()).unwrap();
    container::encode(&[(format!("s{i}"), t)])
}

async fn chat(state: &AppState, session: Option<&str>, text: &str) -> ChatResponse {
    let (status, body) = send(
        state,
        post_json("/api/v1/chat", json!({"session_id": session, "text": text})),
    )
    .await;
    assert_eq!(status, 200, "{body}");
    serde_json::from_value(body).unwrap()
}

#[tokio::test]
async fn chat_creates_and_continues_sessions() {
    let state = app(fixture_model());
    let first = chat(&state, None, "Hello").await;
    assert!(first.reply.starts_with("Hi, I am M-Chatbot"));
    assert_eq!(first.matched_similarity, Some(1.0));
    assert_eq!(first.goal_status, GoalStatus::InProgress);

    let id = first.session_id.clone();
    let turns = [
        "I want to check my breast cancer risk",
        "52",
        "yes",
        "no",
        "no",
        "no",
    ];
    let mut last = first;
    for t in turns {
        last = chat(&state, Some(&id), t).await;
        assert_eq!(last.session_id, id);
    }
    assert_eq!(last.goal_status, GoalStatus::Completed);
    assert_eq!(last.risk_level, RiskLevel::Medium);
    assert!(last.reply.contains("/api/v1/classify"));

    let (status, body) = send(&state, get(&format!("/api/v1/session/{id}"))).await;
    assert_eq!(status, 200);
    let view: SessionView = serde_json::from_value(body).unwrap();
    assert_eq!(view.history.len(), 14);
    assert_eq!(view.slots["age"].as_deref(), Some("52"));
    assert_eq!(view.slots["family_history"].as_deref(), Some("yes"));
    assert_eq!(view.goal_status, GoalStatus::Completed);
}

#[tokio::test]
async fn gibberish_gets_fallback_without_similarity() {
    let state = app(fixture_model());
    let (status, body) = send(
        &state,
        post_json("/api/v1/chat", json!({"text": "qwzx vvkj plorp"})),
    )
    .await;
    assert_eq!(status, 200);
    assert_eq!(body["reply"], "-I am sorry, but I do not understand");
    assert!(body.get("matched_similarity").is_none());
    assert_eq!(body["goal_status"], "InProgress");
    assert_eq!(body["risk_level"], "unknown");
}

#[tokio::test]
async fn unknown_session_id_starts_a_new_one() {
    let state = app(fixture_model());
    let r = chat(&state, Some("not-a-session"), "Hi").await;
    assert_ne!(r.session_id, "not-a-session");
    let (status, _) = send(&state, get(&format!("/api/v1/session/{}", r.session_id))).await;
    assert_eq!(status, 200);
}

#[tokio::test]
async fn malformed_chat_requests() {
    let state = app(fixture_model());
    let (status, body) = send(&state, post_json("/api/v1/chat", json!({"text": "   "}))).await;
    assert_eq!(status, 400);
    assert!(body["error"].is_string());
    let (status, body) = send(&state, post_json("/api/v1/chat", json!({"session": "x"}))).await;
    assert!(status.is_client_error());
    assert!(body["error"].is_string());
    let req = axum::http::Request::post("/api/v1/chat")
        .header("content-type", "application/json")
        .body(axum::body::Body::from("{not json"))
        .unwrap();
    let (status, _) = send(&state, req).await;
    assert_eq!(status, 400);
    assert_eq!(state.session_count(), 0);
}

#[tokio::test]
async fn unknown_session_is_not_found() {
    let state = app(fixture_model());
    let (status, body) = send(&state, get("/api/v1/session/nope")).await;
    assert_eq!(status, 404);
    assert!(body["error"].as_str().unwrap().contains("nope"));
}

#[tokio::test]
async fn idle_sessions_expire() {
    let state = AppState::new(
        fixture_graph(),
        prediag::rules::default_rules(),
        ChatSettings::default(),
        BTreeMap::new(),
        Duration::from_millis(50),
        0,
    );
    let r = chat(&state, None, "Hello").await;
    tokio::time::sleep(Duration::from_millis(120)).await;
    let (status, _) = send(&state, get(&format!("/api/v1/session/{}", r.session_id))).await;
    assert_eq!(status, 404);
}

#[tokio::test]
async fn classify_benign_and_malignant() {
    let state = app(fixture_model());
    let set = fixture_samples();
    for i in 0..set.len() {
        let uri = format!("/api/v1/classify?model_id={MODEL_ID}");
        let (status, body) = send(&state, post_bytes(&uri, sample(&set, i))).await;
        assert_eq!(status, 200, "{body}");
        let r: ClassifyResponse = serde_json::from_value(body).unwrap();
        let want = if set.labels()[i] == 0 {
            "benign"
        } else {
            "malignant"
        };
        assert_eq!(r.label.as_str(), want);
        assert!(r.confidence[want] > 0.5);
        assert_eq!(r.subtype, None);
        assert_eq!(r.sample_id, format!("s{i}"));
        let sum: f64 = r.confidence.values().sum();
        assert!((sum - 1.0).abs() <= 1e-9);
        assert!(r.confidence.values().all(|p| *p >= 0.0));
    }
}

#[tokio::test]
async fn classify_errors() {
    let state = app(fixture_model());
    let set = fixture_samples();
    let (status, _) = send(
        &state,
        post_bytes("/api/v1/classify?model_id=other", sample(&set, 0)),
    )
    .await;
    assert_eq!(status, 404);
    let (status, _) = send(&state, post_bytes("/api/v1/classify", sample(&set, 0))).await;
    assert_eq!(status, 400);
    let uri = format!("/api/v1/classify?model_id={MODEL_ID}");
    let (status, _) = send(&state, post_bytes(&uri, b"garbage".to_vec())).await;
    assert_eq!(status, 400);
    let two = container::encode(&[
        ("a".into(), Tensor::zeros(&SHAPE)),
        ("b".into(), Tensor::zeros(&SHAPE)),
    ]);
    let (status, _) = send(&state, post_bytes(&uri, two)).await;
    assert_eq!(status, 400);
    let wrong = container::encode(&[("a".into(), Tensor::zeros(&[1, 1, 5]))]);
    let (status, body) = send(&state, post_bytes(&uri, wrong)).await;
    assert_eq!(status, 422, "{body}");
}

#[tokio::test]
async fn reload_gives_identical_outputs() {
    let model = fixture_model();
    let dir = tempfile::tempdir().unwrap();
    model.save(&dir.path().join("fixture.json")).unwrap();
    let set = fixture_samples();
    let uri = format!("/api/v1/classify?model_id={MODEL_ID}");
    let (_, before) = send(&app(model), post_bytes(&uri, sample(&set, 1))).await;
    let loaded = prediag::model::load_model_dir(dir.path()).unwrap();
    let reloaded = loaded.into_values().next().unwrap();
    let (_, after) = send(&app(reloaded), post_bytes(&uri, sample(&set, 1))).await;
    assert_eq!(before, after);
}

#[tokio::test]
async fn health_lists_models() {
    let state = app(fixture_model());
    let (status, body) = send(&state, get("/api/v1/health")).await;
    assert_eq!(status, 200);
    let h: Health = serde_json::from_value(body).unwrap();
    assert_eq!(h.status, "ok");
    assert_eq!(h.models, vec![MODEL_ID]);
    assert!(h.statements > 0);
    state.replace_models(BTreeMap::new());
    let (_, body) = send(&state, get("/api/v1/health")).await;
    assert_eq!(body["models"], json!([]));
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_sessions_keep_their_own_history() {
    let state = app(fixture_model());
    let mut ids = Vec::new();
    for _ in 0..8 {
        ids.push(chat(&state, None, "Hello").await.session_id);
    }
    let mut tasks = Vec::new();
    for (n, id) in ids.iter().enumerate() {
        for k in 0..5 {
            let state = state.clone();
            let id = id.clone();
            tasks.push(tokio::spawn(async move {
                chat(&state, Some(&id), &format!("session {n} message {k}")).await
            }));
        }
    }
    for t in tasks {
        t.await.unwrap();
    }
    for (n, id) in ids.iter().enumerate() {
        let (_, body) = send(&state, get(&format!("/api/v1/session/{id}"))).await;
        let view: SessionView = serde_json::from_value(body).unwrap();
        assert_eq!(view.history.len(), 12);
        for (i, turn) in view.history.iter().enumerate() {
            let user = i % 2 == 0;
            assert_eq!(turn.speaker == prediag_core::dialogue::Speaker::User, user);
            if user && i > 0 {
                assert!(
                    turn.text.starts_with(&format!("session {n} ")),
                    "{}",
                    turn.text
                );
            }
        }
    }
}
