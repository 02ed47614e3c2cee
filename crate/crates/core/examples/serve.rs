//! Starts the HTTP service on the shipped scenarios and walks a session
//! through registration over real HTTP requests.
//!
//! ```text
//! cargo run --example serve -- [port]
//! ```

use std::sync::Arc;

use serde_json::{json, Value};
use tokio::io::{AsyncReadExt, AsyncWriteExt};
use ventronav::cli::default_scenarios_dir;
use ventronav::service::{serve, AppState, ScenarioRegistry};

async fn request(addr: &str, method: &str, path: &str, body: Option<Value>) -> std::io::Result<(u16, String)> {
    let mut stream = tokio::net::TcpStream::connect(addr).await?;
    let body = body.map(|b| b.to_string()).unwrap_or_default();
    let req = format!(
        "{method} {path} HTTP/1.1\r\nHost: {addr}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
        body.len()
    );
    stream.write_all(req.as_bytes()).await?;
    let mut raw = String::new();
    stream.read_to_string(&mut raw).await?;
    let status = raw.split_whitespace().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let body = raw.split_once("\r\n\r\n").map(|(_, b)| b.to_string()).unwrap_or_default();
    Ok((status, body))
}

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let port: u16 = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(0);
    let registry = ScenarioRegistry::load_dir(&default_scenarios_dir())?;
    let phantom = registry.get("phantom").ok_or("phantom scenario missing")?.clone();
    let listener = tokio::net::TcpListener::bind(("127.0.0.1", port)).await?;
    let addr = listener.local_addr()?.to_string();
    tokio::spawn(serve(listener, Arc::new(AppState::new(registry))));
    println!("serving on http://{addr}");

    let (_, handle) = request(&addr, "POST", "/sessions", Some(json!({ "scenario": "phantom" }))).await?;
    let id = serde_json::from_str::<Value>(&handle)?["id"].as_str().unwrap_or_default().to_string();
    let events = format!("/sessions/{id}/events");

    let (status, body) = request(&addr, "POST", &events, Some(json!({ "type": "confirm" }))).await?;
    println!("confirm before register -> {status} {body}");

    for (_, p) in phantom.scene.true_world_landmarks().iter() {
        request(&addr, "POST", &events, Some(json!({ "type": "acquire", "point": [p.x, p.y, p.z] }))).await?;
        request(&addr, "POST", &events, Some(json!({ "type": "next" }))).await?;
    }
    let (status, body) = request(&addr, "POST", &events, Some(json!({ "type": "register" }))).await?;
    let v: Value = serde_json::from_str(&body)?;
    println!("register -> {status}, RMSE {} mm, prompt {}", v["snapshot"]["rmse_mm"], v["snapshot"]["prompt"]);
    let (_, log) = request(&addr, "GET", &format!("/sessions/{id}/log"), None).await?;
    println!("event log has {} lines", log.lines().count());

    if port != 0 {
        println!("still serving; press Ctrl-C to stop");
        tokio::signal::ctrl_c().await?;
    }
    Ok(())
}
