mod support;

use std::collections::HashSet;
use std::net::SocketAddr;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use chainstory_core::{canonical_chain_id, ImageId};
use chainstory_server::{bind, router, Config, ServeError, ROUTES};
use serde_json::{json, Value};
use support::{log_records, TestServer};
use tower::ServiceExt;

fn img(v: &Value) -> String {
    v["image_id"].as_str().unwrap().to_owned()
}

fn chain_of(v: &Value) -> String {
    match v["outcome"].as_str().unwrap() {
        "created" => v["chain"]["chain_id"].as_str().unwrap().to_owned(),
        _ => v["chain_id"].as_str().unwrap().to_owned(),
    }
}

#[tokio::test]
async fn empty_data_dir_serves_empty_state() {
    let dir = tempfile::tempdir().unwrap();
    let s = TestServer::start(dir.path()).await;
    let (st, images) = s.get("/images").await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(images["total"], 0);
    assert_eq!(images["limit"], 50);
    let (_, chains) = s.get("/chains").await;
    assert_eq!(chains["total"], 0);
    let (_, board) = s.get("/leaderboard").await;
    assert_eq!(board["entries"], json!([]));
    s.stop().await;
}

#[tokio::test]
async fn image_round_trip_and_idempotent_upload() {
    let dir = tempfile::tempdir().unwrap();
    let s = TestServer::start(dir.path()).await;
    let (_, token) = s.register("ana").await;
    let (st, up) = s.upload(&token, b"\x89PNG fake bytes", "a lighthouse at dusk").await;
    assert_eq!(st, StatusCode::CREATED);
    assert_eq!(up["created"], true);
    assert_eq!(img(&up), ImageId::of_bytes(b"\x89PNG fake bytes").as_str());
    let (st, got) = s.get(&format!("/images/{}", img(&up))).await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(got["description"], "a lighthouse at dusk");
    assert_eq!(got["image_id"], up["image_id"]);
    assert_eq!(got["origin"], "worker_upload");

    let before = log_records(dir.path());
    let (st, again) = s.upload(&token, b"\x89PNG fake bytes", "other words").await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(again["created"], false);
    assert_eq!(again["description"], "a lighthouse at dusk");
    assert_eq!(log_records(dir.path()), before);

    let blob = s
        .client
        .get(s.url(&format!("/images/{}/blob", img(&up))))
        .send()
        .await
        .unwrap();
    assert_eq!(blob.status(), StatusCode::OK);
    assert_eq!(&blob.bytes().await.unwrap()[..], b"\x89PNG fake bytes");

    let (st, err) = s.upload(&token, b"", "empty").await;
    assert_eq!(st, StatusCode::BAD_REQUEST);
    assert_eq!(err["error"]["code"], "EMPTY_BLOB");
    let (st, err) = s.upload(&token, b"x", "  ").await;
    assert_eq!(st, StatusCode::BAD_REQUEST);
    assert_eq!(err["error"]["code"], "EMPTY_DESCRIPTION");
    s.stop().await;
}

#[tokio::test]
async fn unauthorized_mutations_append_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let s = TestServer::start(dir.path()).await;
    let (_, token) = s.register("ana").await;
    let (_, up) = s.upload(&token, b"one", "one").await;
    let before = log_records(dir.path());

    let (st, err) = s
        .post(Some("not-a-token"), "/chains", json!({ "base_image_id": img(&up) }))
        .await;
    assert_eq!(st, StatusCode::UNAUTHORIZED);
    assert_eq!(err["error"]["code"], "UNAUTHORIZED");
    let (st, _) = s.post(None, "/chains", json!({ "base_image_id": img(&up) })).await;
    assert_eq!(st, StatusCode::UNAUTHORIZED);
    let resp = s
        .client
        .post(s.url("/images"))
        .header("authorization", "Basic abc")
        .send()
        .await
        .unwrap();
    assert_eq!(resp.status(), StatusCode::UNAUTHORIZED);
    assert_eq!(log_records(dir.path()), before);
    s.stop().await;
}

#[tokio::test]
async fn chain_operations_and_dedup_over_http() {
    let dir = tempfile::tempdir().unwrap();
    let s = TestServer::start(dir.path()).await;
    let (w1, t1) = s.register("ana").await;
    let (_, t2) = s.register("ben").await;
    let mut ids = Vec::new();
    for name in ["a", "b", "c", "d"] {
        ids.push(img(&s.upload(&t1, name.as_bytes(), name).await.1));
    }
    let (a, b, c, d) = (&ids[0], &ids[1], &ids[2], &ids[3]);

    let (st, started) = s.post(Some(&t1), "/chains", json!({ "base_image_id": a })).await;
    assert_eq!(st, StatusCode::CREATED);
    assert_eq!(started["outcome"], "created");
    let ca = chain_of(&started);
    assert_eq!(started["chain"]["contributors"], json!([w1]));

    let (st, ext) = s
        .post(Some(&t1), &format!("/chains/{ca}/extend"), json!({ "images": [b, c] }))
        .await;
    assert_eq!(st, StatusCode::CREATED);
    let cabc = chain_of(&ext);
    let expected = canonical_chain_id(&[a.parse().unwrap(), b.parse().unwrap(), c.parse().unwrap()]).unwrap();
    assert_eq!(cabc, expected.as_str());
    assert_eq!(ext["chain"]["provenance"]["type"], "branch_of");

    let events = s.event_count();
    let (st, dup) = s
        .post(Some(&t2), &format!("/chains/{ca}/extend"), json!({ "images": [b, c] }))
        .await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(
        dup,
        json!({ "outcome": "duplicate_voted", "chain_id": cabc, "implicit_votes": 1 })
    );
    assert_eq!(s.event_count(), events + 1);

    let (st, br) = s
        .post(
            Some(&t2),
            &format!("/chains/{cabc}/branch"),
            json!({ "prefix_len": 2, "images": [d] }),
        )
        .await;
    assert_eq!(st, StatusCode::CREATED);
    assert_eq!(br["chain"]["sequence"], json!([a, b, d]));

    let (st, cc) = s.post(Some(&t2), "/chains", json!({ "base_image_id": c })).await;
    assert_eq!(st, StatusCode::CREATED);
    // seam collapse gives [a, b, c] again
    let (st, merged) = s
        .post(
            Some(&t2),
            "/chains/merge",
            json!({ "first": cabc, "second": chain_of(&cc) }),
        )
        .await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(merged["outcome"], "duplicate_voted");
    let cd = s.post(Some(&t2), "/chains", json!({ "base_image_id": d })).await.1;
    let (st, merged) = s
        .post(
            Some(&t2),
            "/chains/merge",
            json!({ "first": cabc, "second": chain_of(&cd) }),
        )
        .await;
    assert_eq!(st, StatusCode::CREATED);
    assert_eq!(merged["chain"]["sequence"], json!([a, b, c, d]));

    let (st, got) = s.get(&format!("/chains/{cabc}")).await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(got["implicit_votes"], 2);
    assert_eq!(got["score"], 2);
    assert_eq!(got["story_count"], 0);

    let (_, long) = s.get("/chains?min_len=3").await;
    assert_eq!(long["total"], 3);
    let (_, with_d) = s.get(&format!("/chains?containing_image={d}")).await;
    assert_eq!(with_d["total"], 3);
    let (_, page) = s.get("/chains?offset=1&limit=2").await;
    assert_eq!(page["items"].as_array().unwrap().len(), 2);
    assert_eq!(page["offset"], 1);

    let (st, err) = s
        .post(
            Some(&t1),
            &format!("/chains/{cabc}/branch"),
            json!({ "prefix_len": 9, "images": [d] }),
        )
        .await;
    assert_eq!(st, StatusCode::BAD_REQUEST);
    assert_eq!(err["error"]["code"], "PREFIX_OUT_OF_RANGE");
    let (st, err) = s
        .post(Some(&t1), &format!("/chains/{cabc}/extend"), json!({ "images": [] }))
        .await;
    assert_eq!(st, StatusCode::BAD_REQUEST);
    assert_eq!(err["error"]["code"], "EMPTY_EXTENSION");
    let unknown = "0".repeat(64);
    let (st, err) = s.get(&format!("/chains/{unknown}")).await;
    assert_eq!(st, StatusCode::NOT_FOUND);
    assert_eq!(err["error"]["code"], "UNKNOWN_CHAIN");
    let (st, err) = s.get("/chains/not-hex").await;
    assert_eq!(st, StatusCode::BAD_REQUEST);
    assert_eq!(err["error"]["code"], "MALFORMED_ID");
    let (st, err) = s.post(Some(&t1), "/chains", json!({ "base_image_id": unknown })).await;
    assert_eq!(st, StatusCode::NOT_FOUND);
    assert_eq!(err["error"]["code"], "UNKNOWN_IMAGE");
    let (st, err) = s.post(Some(&t1), "/chains", json!({ "base": 3 })).await;
    assert!(st.is_client_error());
    assert_eq!(err["error"]["code"], "INVALID_BODY");
    s.stop().await;
}

#[tokio::test]
async fn stories_votes_recommendations_and_leaderboard() {
    let dir = tempfile::tempdir().unwrap();
    let s = TestServer::start(dir.path()).await;
    let (w1, t1) = s.register("ana").await;
    let (w2, t2) = s.register("ben").await;
    let a = img(&s.upload(&t1, b"a", "a").await.1);
    let b = img(&s.upload(&t1, b"b", "b").await.1);
    let c1 = chain_of(&s.post(Some(&t1), "/chains", json!({ "base_image_id": a })).await.1);
    let c2 = chain_of(&s.post(Some(&t1), "/chains", json!({ "base_image_id": b })).await.1);

    let (st, s1) = s
        .post(Some(&t1), &format!("/chains/{c1}/stories"), json!({ "body": "first" }))
        .await;
    assert_eq!(st, StatusCode::CREATED);
    assert_eq!(s1["version"], 1);
    assert_eq!(s1["votes"], 0);
    let s1id = s1["story_id"].as_str().unwrap().to_owned();
    let (_, s2) = s
        .post(
            Some(&t1),
            &format!("/chains/{c1}/stories"),
            json!({ "body": "second", "derived_from": s1id }),
        )
        .await;
    assert_eq!(s2["version"], 2);
    assert_eq!(s2["derived_from"], s1id.as_str());
    let s2id = s2["story_id"].as_str().unwrap().to_owned();
    let (st, err) = s
        .post(Some(&t1), &format!("/chains/{c1}/stories"), json!({ "body": " " }))
        .await;
    assert_eq!(st, StatusCode::BAD_REQUEST);
    assert_eq!(err["error"]["code"], "EMPTY_BODY");
    let (st, err) = s
        .post(
            Some(&t1),
            &format!("/chains/{c2}/stories"),
            json!({ "body": "x", "derived_from": s1id }),
        )
        .await;
    assert_eq!(st, StatusCode::BAD_REQUEST);
    assert_eq!(err["error"]["code"], "CROSS_CHAIN_DERIVATION");

    let (st, v) = s.post(Some(&t2), &format!("/stories/{s2id}/vote"), json!(null)).await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(v["voter"], w2.as_str());
    let events = s.event_count();
    s.post(Some(&t2), &format!("/stories/{s2id}/vote"), json!(null)).await;
    assert_eq!(s.event_count(), events, "repeat vote is a no-op");
    let (st, err) = s.post(Some(&t2), "/stories/s99/vote", json!(null)).await;
    assert_eq!(st, StatusCode::NOT_FOUND);
    assert_eq!(err["error"]["code"], "UNKNOWN_STORY");

    let (_, listed) = s.get(&format!("/chains/{c1}/stories")).await;
    let order: Vec<&str> = listed["items"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x["story_id"].as_str().unwrap())
        .collect();
    assert_eq!(order, [s2id.as_str(), s1id.as_str()]);
    assert_eq!(listed["items"][0]["votes"], 1);
    let (_, by_time) = s.get(&format!("/chains/{c1}/stories?ordering=by_time_asc")).await;
    assert_eq!(by_time["items"][0]["story_id"], s1id.as_str());
    let (st, _) = s.get(&format!("/chains/{c1}/stories?ordering=sideways")).await;
    assert_eq!(st, StatusCode::BAD_REQUEST);
    let (_, one) = s.get(&format!("/stories/{s2id}")).await;
    assert_eq!(one["votes"], 1);

    let (_, top) = s.get("/recommendations?mode=top&k=5").await;
    assert_eq!(top["items"][0]["chain"]["chain_id"], c1.as_str());
    assert_eq!(top["items"][0]["score"], 1);
    assert_eq!(top["items"][0]["story"]["story_id"], s2id.as_str());
    let (_, r1) = s.get("/recommendations?mode=sampled&k=2&seed=17").await;
    let (_, r2) = s.get("/recommendations?mode=sampled&k=2&seed=17").await;
    assert_eq!(r1, r2);
    assert_eq!(r1["seed"], 17);
    assert_eq!(r1["items"].as_array().unwrap().len(), 2);
    let (_, fresh) = s.get("/recommendations?mode=sampled").await;
    assert!(fresh["seed"].is_u64());

    let (_, board) = s.get("/leaderboard?k=10").await;
    // ana: 2 uploads + 2 chains + 2 stories + 1 vote received x2
    assert_eq!(board["entries"][0], json!({ "worker": w1, "score": 8, "rank": 1 }));
    assert_eq!(board["entries"].as_array().unwrap().len(), 1);

    let (st, summary) = s.get("/analytics/summary").await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(summary["config"]["threshold"], 5);
    // single-image chains are outside the analysed population
    assert_eq!(summary["lengths"]["count"], 0);
    assert_eq!(summary["story_count"], 0);
    let tsv = s
        .client
        .get(s.url("/analytics/summary?format=tsv"))
        .send()
        .await
        .unwrap();
    assert!(tsv.headers()["content-type"]
        .to_str()
        .unwrap()
        .starts_with("text/tab-separated-values"));
    let text = tsv.text().await.unwrap();
    assert!(text.starts_with("quantity\tvalue\n"));
    assert_eq!(text.lines().count(), 7);
    s.stop().await;
}

#[tokio::test]
async fn tokens_never_appear_in_reads() {
    let dir = tempfile::tempdir().unwrap();
    let s = TestServer::start(dir.path()).await;
    let (_, token) = s.register("ana").await;
    let a = img(&s.upload(&token, b"a", "a").await.1);
    let c = chain_of(&s.post(Some(&token), "/chains", json!({ "base_image_id": a })).await.1);
    let st = s
        .post(Some(&token), &format!("/chains/{c}/stories"), json!({ "body": "once" }))
        .await
        .1;
    s.post(
        Some(&token),
        &format!("/stories/{}/vote", st["story_id"].as_str().unwrap()),
        json!(null),
    )
    .await;
    for path in [
        "/images".to_owned(),
        format!("/images/{a}"),
        "/chains".to_owned(),
        format!("/chains/{c}"),
        format!("/chains/{c}/stories"),
        "/recommendations".to_owned(),
        "/leaderboard".to_owned(),
        "/analytics/summary".to_owned(),
    ] {
        let text = s.client.get(s.url(&path)).send().await.unwrap().text().await.unwrap();
        assert!(!text.contains(&token), "{path} leaks the token");
    }
    let log = std::fs::read_to_string(dir.path().join("events.log")).unwrap();
    assert!(!log.contains(&token));
    s.stop().await;
}

#[tokio::test]
async fn each_successful_mutation_appends_one_record() {
    let dir = tempfile::tempdir().unwrap();
    let s = TestServer::start(dir.path()).await;
    let mut expected = 0;
    let (_, t) = s.register("ana").await;
    expected += 1;
    assert_eq!(log_records(dir.path()), expected);
    let a = img(&s.upload(&t, b"a", "a").await.1);
    expected += 1;
    assert_eq!(log_records(dir.path()), expected);
    let c = chain_of(&s.post(Some(&t), "/chains", json!({ "base_image_id": a })).await.1);
    expected += 1;
    assert_eq!(log_records(dir.path()), expected);
    s.post(Some(&t), "/chains", json!({ "base_image_id": a })).await;
    expected += 1;
    assert_eq!(log_records(dir.path()), expected);
    let story = s
        .post(Some(&t), &format!("/chains/{c}/stories"), json!({ "body": "b" }))
        .await
        .1;
    expected += 1;
    assert_eq!(log_records(dir.path()), expected);
    s.post(
        Some(&t),
        &format!("/stories/{}/vote", story["story_id"].as_str().unwrap()),
        json!(null),
    )
    .await;
    expected += 1;
    assert_eq!(log_records(dir.path()), expected);
    // failures append nothing
    s.post(Some(&t), &format!("/chains/{c}/extend"), json!({ "images": [] }))
        .await;
    assert_eq!(log_records(dir.path()), expected);
    s.stop().await;
}

#[tokio::test]
async fn restart_replays_identical_state() {
    let dir = tempfile::tempdir().unwrap();
    let s = TestServer::start(dir.path()).await;
    let (_, t) = s.register("ana").await;
    let a = img(&s.upload(&t, b"a", "a").await.1);
    let b = img(&s.upload(&t, b"b", "b").await.1);
    let c = chain_of(&s.post(Some(&t), "/chains", json!({ "base_image_id": a })).await.1);
    s.post(Some(&t), &format!("/chains/{c}/extend"), json!({ "images": [b] }))
        .await;
    s.post(Some(&t), &format!("/chains/{c}/extend"), json!({ "images": [b] }))
        .await;
    let story = s
        .post(Some(&t), &format!("/chains/{c}/stories"), json!({ "body": "b" }))
        .await
        .1;
    s.post(
        Some(&t),
        &format!("/stories/{}/vote", story["story_id"].as_str().unwrap()),
        json!(null),
    )
    .await;
    let before = s.state.store.snapshot();
    let reads: Vec<Value> = {
        let mut v = Vec::new();
        for p in ["/images", "/chains", "/leaderboard", "/analytics/summary"] {
            v.push(s.get(p).await.1);
        }
        v
    };
    s.stop().await;

    let s = TestServer::start(dir.path()).await;
    assert_eq!(s.state.store.snapshot(), before);
    for (p, old) in ["/images", "/chains", "/leaderboard", "/analytics/summary"]
        .iter()
        .zip(&reads)
    {
        assert_eq!(&s.get(p).await.1, old, "{p}");
    }
    // the token still works after restart
    let (st, _) = s.post(Some(&t), "/chains", json!({ "base_image_id": b })).await;
    assert_eq!(st, StatusCode::CREATED);
    s.stop().await;
}

#[tokio::test]
async fn startup_refuses_corrupt_log_and_busy_port() {
    let dir = tempfile::tempdir().unwrap();
    let s = TestServer::start(dir.path()).await;
    s.register("ana").await;
    s.register("ben").await;
    s.stop().await;
    let path = dir.path().join("events.log");
    let text = std::fs::read_to_string(&path).unwrap();
    std::fs::write(&path, &text[..text.len() - 5]).unwrap();
    let config = Config::with_data_dir(dir.path(), SocketAddr::from(([127, 0, 0, 1], 0)));
    assert!(matches!(bind(&config).await, Err(ServeError::CorruptLog(_))));

    let other = tempfile::tempdir().unwrap();
    let taken = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let config = Config::with_data_dir(other.path(), taken.local_addr().unwrap());
    assert!(matches!(bind(&config).await, Err(ServeError::PortInUse(_))));
}

fn concrete(path: &str) -> String {
    path.replace(
        "{id}",
        "0000000000000000000000000000000000000000000000000000000000000000",
    )
}

#[tokio::test]
async fn route_table_is_exhaustive_and_never_deletes() {
    let dir = tempfile::tempdir().unwrap();
    let bound = bind(&Config::with_data_dir(
        dir.path(),
        SocketAddr::from(([127, 0, 0, 1], 0)),
    ))
    .await
    .unwrap();
    let app = router(bound.state.clone());
    let paths: HashSet<&str> = ROUTES.iter().map(|(_, p)| *p).collect();
    for (method, _) in ROUTES {
        assert!(matches!(*method, "GET" | "POST"), "{method} is not allowed");
    }
    for path in &paths {
        for method in [Method::GET, Method::POST, Method::PUT, Method::PATCH, Method::DELETE] {
            let listed = ROUTES.contains(&(method.as_str(), *path));
            let resp = app
                .clone()
                .oneshot(
                    Request::builder()
                        .method(method.clone())
                        .uri(concrete(path))
                        .body(Body::empty())
                        .unwrap(),
                )
                .await
                .unwrap();
            let not_routed = resp.status() == StatusCode::METHOD_NOT_ALLOWED;
            assert_eq!(!listed, not_routed, "{method} {path} -> {}", resp.status());
        }
    }
    let resp = app
        .oneshot(Request::builder().uri("/admin").body(Body::empty()).unwrap())
        .await
        .unwrap();
    assert_eq!(resp.status(), StatusCode::NOT_FOUND);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_identical_creations_yield_one_chain() {
    let dir = tempfile::tempdir().unwrap();
    let s = TestServer::start(dir.path()).await;
    let (_, t1) = s.register("ana").await;
    let (_, t2) = s.register("ben").await;
    let a = img(&s.upload(&t1, b"a", "a").await.1);
    let mut tasks = Vec::new();
    for t in [t1, t2] {
        let client = s.client.clone();
        let url = s.url("/chains");
        let a = a.clone();
        tasks.push(tokio::spawn(async move {
            let resp = client
                .post(url)
                .bearer_auth(t)
                .json(&json!({ "base_image_id": a }))
                .send()
                .await
                .unwrap();
            let body: Value = resp.json().await.unwrap();
            body["outcome"].as_str().unwrap().to_owned()
        }));
    }
    let mut outcomes = Vec::new();
    for t in tasks {
        outcomes.push(t.await.unwrap());
    }
    outcomes.sort();
    assert_eq!(outcomes, ["created", "duplicate_voted"]);
    s.stop().await;
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn simulator_drives_the_service() {
    let dir = tempfile::tempdir().unwrap();
    let s = TestServer::start(dir.path()).await;
    let base = s.base.clone();
    let run = tokio::task::spawn_blocking(move || {
        chainstory_sim::run_simulation(
            6,
            120,
            3,
            &chainstory_sim::BehaviorProfile::default(),
            &chainstory_sim::Target::Service(base),
        )
    })
    .await
    .unwrap()
    .expect("service-mode run passes its invariant scans");
    let c = run.report.counts;
    assert_eq!(c.starts + c.extends + c.branches + c.merges + c.stories + c.votes, 120);
    let created = s.state.store.read(|p| p.chains().chain_count()) as u64;
    assert_eq!(created, c.chains_created);
    s.stop().await;
}
