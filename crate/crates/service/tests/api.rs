use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use cellgraph::{Direction, EngineKind, PatternSet, Range, SheetDump};
use cellgraph_service::{router, AppState};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

const FIXED_HEAD: &str = "C1\t=SUM($B$1:B1)+SUM($A$1:$A$4)\n\
                    C2\t=SUM($B$1:B2)+SUM($A$1:$A$4)\n\
                    C3\t=SUM($B$1:B3)+SUM($A$1:$A$4)\n\
                    C4\t=SUM($B$1:B4)\n\
                    D4\t=SUM(B1:B4)\n";

fn app() -> Router {
    router(AppState::new(EngineKind::Taco, PatternSet::all()))
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req
            .header("content-type", "application/json")
            .body(Body::from(b.to_string())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap()
    };
    (status, value)
}

async fn raw(app: &Router, method: &str, uri: &str, body: &str) -> (StatusCode, Value) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(Body::from(body.to_string()))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap())
}

async fn open(app: &Router, dump: &str) -> String {
    let (status, v) = call(app, "POST", "/sheets", Some(json!({ "dump": dump }))).await;
    assert_eq!(status, StatusCode::CREATED, "{v}");
    v["id"].as_str().unwrap().to_string()
}

async fn ranges(app: &Router, id: &str, query: &str) -> Vec<String> {
    let (status, v) = call(app, "GET", &format!("/sheets/{id}/trace?{query}"), None).await;
    assert_eq!(status, StatusCode::OK, "{v}");
    assert!(v["elapsed_us"].is_u64());
    serde_json::from_value(v["ranges"].clone()).unwrap()
}

#[tokio::test]
async fn trace_fixed_head_sheet() {
    let app = app();
    let id = open(&app, FIXED_HEAD).await;
    assert_eq!(ranges(&app, &id, "range=B2&dir=deps").await, ["C2:C4", "D4"]);
    assert_eq!(
        ranges(&app, &id, "range=B2&dir=deps&transitive=false").await,
        ["C2:C4", "D4"]
    );
    assert_eq!(ranges(&app, &id, "range=C4&dir=precs").await, ["B1:B4"]);
}

#[tokio::test]
async fn empty_sheet_traces_nothing() {
    let app = app();
    let id = open(&app, "").await;
    assert!(ranges(&app, &id, "range=A1&dir=deps").await.is_empty());
    let (_, stats) = call(&app, "GET", &format!("/sheets/{id}/stats"), None).await;
    assert_eq!(stats["edges"], 0);
    assert_eq!(stats["raw_edges"], 0);
}

#[tokio::test]
async fn first_layer_only_when_not_transitive() {
    let app = app();
    let id = open(&app, "B1\t=A1\nB2\t=A2+B1\nB3\t=A3+B2\n").await;
    assert_eq!(ranges(&app, &id, "range=A1&dir=deps").await, ["B1", "B2:B3"]);
    assert_eq!(ranges(&app, &id, "range=A1&dir=deps&transitive=false").await, ["B1"]);
}

#[tokio::test]
async fn trace_matches_library() {
    let w = cellgraph::generate(&cellgraph::WorkloadSpec::random(20, 4, 0.2)).unwrap();
    let text = w.dump.to_text();
    let app = app();
    let id = open(&app, &text).await;
    let g = SheetDump::parse(&text)
        .unwrap()
        .load(EngineKind::Taco, PatternSet::all())
        .unwrap();
    for q in ["A1", "A5:A9", "B3", "C10:D12", "E20"] {
        let r: Range = q.parse().unwrap();
        for (dir, name) in [(Direction::Dependents, "deps"), (Direction::Precedents, "precs")] {
            let want: Vec<String> = g.traverse(&r, dir, true).sorted().iter().map(Range::to_string).collect();
            assert_eq!(ranges(&app, &id, &format!("range={q}&dir={name}")).await, want);
        }
    }
}

#[tokio::test]
async fn edits_are_reflected() {
    let app = app();
    let id = open(&app, "A1\t1\nA2\t2\nB1\t=A1\nB2\t=A1\n").await;
    assert!(ranges(&app, &id, "range=A2&dir=deps").await.is_empty());
    let (status, v) = call(
        &app,
        "POST",
        &format!("/sheets/{id}/edits"),
        Some(json!({ "ops": [{ "op": "set", "cell": "B2", "content": "=A2" }] })),
    )
    .await;
    assert_eq!(status, StatusCode::OK, "{v}");
    assert_eq!(v["version"], 1);
    assert_eq!(v["raw_edges"], 2);
    assert_eq!(ranges(&app, &id, "range=A2&dir=deps").await, ["B2"]);

    let (status, v) = call(
        &app,
        "POST",
        &format!("/sheets/{id}/edits"),
        Some(json!({ "ops": [{ "op": "clear", "range": "B1:B2" }], "base_version": 1 })),
    )
    .await;
    assert_eq!(status, StatusCode::OK, "{v}");
    assert_eq!(v["edges"], 0);
    let (_, grid) = call(&app, "GET", &format!("/sheets/{id}/grid?window=A1:Z9"), None).await;
    assert_eq!(
        grid,
        json!({ "cells": [{ "addr": "A1", "content": "1" }, { "addr": "A2", "content": "2" }] })
    );
}

#[tokio::test]
async fn grid_is_clipped() {
    let app = app();
    let id = open(&app, FIXED_HEAD).await;
    let (status, v) = call(&app, "GET", &format!("/sheets/{id}/grid?window=C3:D4"), None).await;
    assert_eq!(status, StatusCode::OK);
    let addrs: Vec<&str> = v["cells"].as_array().unwrap().iter().map(|c| c["addr"].as_str().unwrap()).collect();
    assert_eq!(addrs, ["C3", "C4", "D4"]);
}

#[tokio::test]
async fn stale_base_version_conflicts() {
    let app = app();
    let id = open(&app, "B1\t=A1\n").await;
    let uri = format!("/sheets/{id}/edits");
    let set = |v: u64| json!({ "ops": [{ "op": "set", "cell": "C1", "content": "=B1" }], "base_version": v });
    assert_eq!(call(&app, "POST", &uri, Some(set(0))).await.0, StatusCode::OK);
    let (status, v) = call(&app, "POST", &uri, Some(set(0))).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(v["path"], "base_version");
    let (_, stats) = call(&app, "GET", &format!("/sheets/{id}/stats"), None).await;
    assert_eq!(stats["raw_edges"], 2);
}

#[tokio::test]
async fn unknown_sessions_are_404() {
    let app = app();
    for (m, uri) in [
        ("GET", "/sheets/nope/stats"),
        ("GET", "/sheets/nope/trace?range=A1&dir=deps"),
        ("GET", "/sheets/nope/grid?window=A1"),
        ("DELETE", "/sheets/nope"),
    ] {
        assert_eq!(call(&app, m, uri, None).await.0, StatusCode::NOT_FOUND, "{m} {uri}");
    }
    let id = open(&app, "").await;
    assert_eq!(call(&app, "DELETE", &format!("/sheets/{id}"), None).await.0, StatusCode::NO_CONTENT);
    assert_eq!(
        call(&app, "GET", &format!("/sheets/{id}/stats"), None).await.0,
        StatusCode::NOT_FOUND
    );
}

#[tokio::test]
async fn bad_input_is_400_with_a_path() {
    let app = app();
    let (status, v) = raw(&app, "POST", "/sheets", r#"{"dump": 5}"#).await;
    assert_eq!((status, v["path"].as_str()), (StatusCode::BAD_REQUEST, Some("dump")));
    let (status, v) = call(&app, "POST", "/sheets", Some(json!({ "dump": "A1\t1\nnot a record\n" }))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert!(v["error"].as_str().unwrap().starts_with("line 2"), "{v}");
    let (status, _) = raw(&app, "POST", "/sheets", "{").await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    let id = open(&app, "B1\t=A1\n").await;
    let uri = format!("/sheets/{id}/edits");
    let cases = [
        (json!({ "ops": [{ "op": "set", "cell": "B2" }] }), "ops[0]"),
        (json!({ "ops": [{ "op": "move", "range": "A1" }] }), "ops[0]"),
        (json!({ "ops": [{ "op": "clear", "range": "A1" }, { "op": "clear", "range": "A0" }] }), "ops[1].range"),
        (json!({ "ops": [{ "op": "set", "cell": "B2:B3", "content": "1" }] }), "ops[0].cell"),
        (json!({ "ops": [{ "op": "clear", "range": "B1" }, { "op": "set", "cell": "B2", "content": "=B2" }] }), "ops[1]"),
        (json!({ "ops": [], "extra": true }), "extra"),
    ];
    for (body, path) in cases {
        let (status, v) = call(&app, "POST", &uri, Some(body.clone())).await;
        assert_eq!(status, StatusCode::BAD_REQUEST, "{body}");
        assert!(v["path"].as_str().unwrap().starts_with(path), "{body}: {v}");
    }
    // rejected batches change nothing
    assert_eq!(ranges(&app, &id, "range=A1&dir=deps").await, ["B1"]);

    for query in ["range=A1", "dir=deps", "range=A1&dir=up", "range=1A&dir=deps", "range=A1&dir=deps&transitive=maybe"] {
        let (status, v) = call(&app, "GET", &format!("/sheets/{id}/trace?{query}"), None).await;
        assert_eq!(status, StatusCode::BAD_REQUEST, "{query}");
        assert!(v["path"].is_string());
    }
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_edits_are_serialized() {
    let state = AppState::new(EngineKind::Taco, PatternSet::all());
    let app = router(Arc::clone(&state));
    let id = open(&app, "").await;
    let mut tasks = Vec::new();
    for i in 1..=20u32 {
        let writer = app.clone();
        let uri = format!("/sheets/{id}/edits");
        tasks.push(tokio::spawn(async move {
            let body = json!({ "ops": [
                { "op": "set", "cell": format!("B{i}"), "content": format!("=A{i}") },
                { "op": "set", "cell": format!("C{i}"), "content": format!("=B{i}") },
            ]});
            call(&writer, "POST", &uri, Some(body)).await
        }));
        let reader = app.clone();
        let uri = format!("/sheets/{id}/stats");
        tasks.push(tokio::spawn(async move { call(&reader, "GET", &uri, None).await }));
    }
    let mut versions = Vec::new();
    for t in tasks {
        let (status, v) = t.await.unwrap();
        assert_eq!(status, StatusCode::OK);
        // both halves of a batch are always visible together
        assert_eq!(v["raw_edges"].as_u64().unwrap() % 2, 0, "{v}");
        if let Some(ver) = v["version"].as_u64() {
            versions.push(ver);
        }
    }
    versions.sort();
    assert_eq!(versions, (1..=20).collect::<Vec<_>>());
    let (_, stats) = call(&app, "GET", &format!("/sheets/{id}/stats"), None).await;
    assert_eq!(stats["raw_edges"], 40);
    let found = ranges(&app, &id, "range=A1:A20&dir=deps").await;
    let cells: u64 = found.iter().map(|r| r.parse::<Range>().unwrap().area()).sum();
    assert_eq!(cells, 40);
}
