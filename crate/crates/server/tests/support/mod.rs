#![allow(dead_code)]

use std::net::SocketAddr;
use std::path::Path;

use chainstory_server::{bind, AppState, Config};
use reqwest::multipart::{Form, Part};
use reqwest::{Client, StatusCode};
use serde_json::{json, Value};
use tokio::sync::oneshot;
use tokio::task::JoinHandle;

pub struct TestServer {
    pub base: String,
    pub state: AppState,
    pub client: Client,
    stop: Option<oneshot::Sender<()>>,
    handle: Option<JoinHandle<()>>,
}

impl TestServer {
    pub async fn start(dir: &Path) -> Self {
        let config = Config::with_data_dir(dir, SocketAddr::from(([127, 0, 0, 1], 0)));
        let bound = bind(&config).await.expect("service starts");
        let addr = bound.local_addr().unwrap();
        let state = bound.state.clone();
        let (tx, rx) = oneshot::channel::<()>();
        let handle = tokio::spawn(async move {
            bound
                .run(async {
                    let _ = rx.await;
                })
                .await
                .unwrap();
        });
        Self {
            base: format!("http://{addr}"),
            state,
            client: Client::new(),
            stop: Some(tx),
            handle: Some(handle),
        }
    }

    pub async fn stop(mut self) {
        if let Some(tx) = self.stop.take() {
            let _ = tx.send(());
        }
        if let Some(h) = self.handle.take() {
            h.await.unwrap();
        }
    }

    pub fn url(&self, path: &str) -> String {
        format!("{}{path}", self.base)
    }

    pub async fn get(&self, path: &str) -> (StatusCode, Value) {
        let resp = self.client.get(self.url(path)).send().await.unwrap();
        let status = resp.status();
        (status, resp.json().await.unwrap_or(Value::Null))
    }

    pub async fn post(&self, token: Option<&str>, path: &str, body: Value) -> (StatusCode, Value) {
        let mut req = self.client.post(self.url(path)).json(&body);
        if let Some(t) = token {
            req = req.bearer_auth(t);
        }
        let resp = req.send().await.unwrap();
        let status = resp.status();
        (status, resp.json().await.unwrap_or(Value::Null))
    }

    pub async fn register(&self, name: &str) -> (String, String) {
        let (status, body) = self.post(None, "/workers", json!({ "display_name": name })).await;
        assert_eq!(status, StatusCode::CREATED, "{body}");
        (
            body["worker_id"].as_str().unwrap().to_owned(),
            body["token"].as_str().unwrap().to_owned(),
        )
    }

    pub async fn upload(&self, token: &str, blob: &[u8], description: &str) -> (StatusCode, Value) {
        let form = Form::new()
            .part("blob", Part::bytes(blob.to_vec()).file_name("img.png"))
            .text("description", description.to_owned());
        let resp = self
            .client
            .post(self.url("/images"))
            .bearer_auth(token)
            .multipart(form)
            .send()
            .await
            .unwrap();
        let status = resp.status();
        (status, resp.json().await.unwrap())
    }

    pub fn event_count(&self) -> u64 {
        self.state.store.read(|p| p.last_seq())
    }
}

/// Number of record lines in a log file (the header excluded).
pub fn log_records(dir: &Path) -> usize {
    let text = std::fs::read_to_string(dir.join("events.log")).unwrap_or_default();
    text.lines().count().saturating_sub(1)
}
