//! HTTP front end: a websocket endpoint that feeds a shared [`Hub`], a
//! background ticker, and a few JSON routes for room management.
//!
//! Routes:
//! - `GET /ws` upgrades to the wire protocol.
//! - `POST /rooms` with optional body `{"mode":"feed"|"game"}` creates a room.
//! - `GET /rooms/{code}/snapshot` returns the room's current final snapshot.
//! - `GET /manifest` returns the served manifest.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use tokio::sync::mpsc;

use crate::model::RoomCode;
use crate::service::config::{RoomMode, RoomSetup};
use crate::service::hub::{ConnId, Envelope, Hub};

struct Shared {
    hub: Mutex<Hub>,
    outboxes: Mutex<HashMap<ConnId, mpsc::UnboundedSender<String>>>,
    setup: RoomSetup,
}

type AppState = Arc<Shared>;

impl Shared {
    fn deliver(&self, frames: Vec<Envelope>) {
        let outboxes = self.outboxes.lock().expect("outbox lock");
        for f in frames {
            if let Some(tx) = outboxes.get(&f.conn) {
                // a closed receiver means the socket is going away
                let _ = tx.send(f.text);
            }
        }
    }
}

pub fn router(hub: Hub, setup: RoomSetup) -> (Router, impl std::future::Future<Output = ()>) {
    let tick_ms = setup.config.tick_interval_ms;
    let state = Arc::new(Shared {
        hub: Mutex::new(hub),
        outboxes: Mutex::new(HashMap::new()),
        setup,
    });
    let ticker = {
        let state = state.clone();
        async move {
            let mut every = tokio::time::interval(Duration::from_millis(tick_ms));
            every.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Skip);
            loop {
                every.tick().await;
                let frames = state.hub.lock().expect("hub lock").tick();
                state.deliver(frames);
            }
        }
    };
    let app = Router::new()
        .route("/ws", get(ws_upgrade))
        .route("/rooms", post(create_room))
        .route("/rooms/{code}/snapshot", get(snapshot))
        .route("/manifest", get(manifest))
        .with_state(state);
    (app, ticker)
}

/// Serves until Ctrl-C.
pub async fn serve(addr: SocketAddr, hub: Hub, setup: RoomSetup) -> std::io::Result<()> {
    let (app, ticker) = router(hub, setup);
    let ticker = tokio::spawn(ticker);
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(%addr, "listening");
    let result = axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await;
    ticker.abort();
    result
}

fn error_response(status: StatusCode, err: &crate::Error) -> Response {
    (
        status,
        Json(serde_json::json!({ "code": err.code(), "message": err.to_string() })),
    )
        .into_response()
}

#[derive(Debug, Default, Deserialize)]
struct CreateRoom {
    mode: Option<RoomMode>,
}

async fn create_room(State(state): State<AppState>, body: Option<Json<CreateRoom>>) -> Response {
    let mode = body.and_then(|Json(b)| b.mode).unwrap_or(state.setup.config.mode);
    let created = state
        .setup
        .with_mode(mode)
        .and_then(|setup| state.hub.lock().expect("hub lock").create_room(setup));
    match created {
        Ok(code) => (StatusCode::CREATED, Json(serde_json::json!({ "room": code }))).into_response(),
        Err(e) => error_response(StatusCode::BAD_REQUEST, &e),
    }
}

async fn snapshot(State(state): State<AppState>, Path(code): Path<String>) -> Response {
    let hub = state.hub.lock().expect("hub lock");
    let room = RoomCode::new(code)
        .map_err(crate::Error::from)
        .and_then(|c| {
            hub.room(&c).ok_or(crate::Error::UnknownReference {
                kind: "room",
                id: c.to_string(),
            })
        });
    match room.and_then(|r| r.final_snapshot()) {
        Ok(s) => Json(s).into_response(),
        Err(e) => error_response(StatusCode::NOT_FOUND, &e),
    }
}

async fn manifest(State(state): State<AppState>) -> Response {
    Json(state.setup.manifest.as_ref().clone()).into_response()
}

async fn ws_upgrade(ws: WebSocketUpgrade, State(state): State<AppState>) -> Response {
    ws.on_upgrade(move |socket| client_loop(socket, state))
}

async fn client_loop(mut socket: WebSocket, state: AppState) {
    let conn = state.hub.lock().expect("hub lock").connect();
    let (tx, mut rx) = mpsc::unbounded_channel::<String>();
    state.outboxes.lock().expect("outbox lock").insert(conn, tx);
    tracing::debug!(conn = conn.0, "connected");

    loop {
        tokio::select! {
            outgoing = rx.recv() => match outgoing {
                Some(text) => {
                    if socket.send(Message::Text(text.into())).await.is_err() {
                        break;
                    }
                }
                None => break,
            },
            incoming = socket.recv() => match incoming {
                Some(Ok(Message::Text(text))) => {
                    let frames = state.hub.lock().expect("hub lock").handle_text(conn, text.as_str());
                    state.deliver(frames);
                }
                Some(Ok(Message::Binary(_))) => {
                    let err = crate::service::protocol::ServerMessage::error(
                        "malformed_json",
                        "binary frames are not supported",
                    );
                    state.deliver(vec![Envelope { conn, text: err.to_json() }]);
                }
                Some(Ok(Message::Close(_))) | None | Some(Err(_)) => break,
                Some(Ok(_)) => {}
            },
        }
    }

    state.outboxes.lock().expect("outbox lock").remove(&conn);
    state.hub.lock().expect("hub lock").disconnect(conn);
    tracing::debug!(conn = conn.0, "disconnected");
}
