//! HTTP surface: `/ws/dashboard`, `GET /api/state`, `GET /api/metrics`.

use std::future::Future;
use std::time::Duration;

use axum::extract::ws::{CloseFrame, Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Query, State};
use axum::response::Response;
use axum::routing::get;
use axum::{Json, Router};
use futures::{SinkExt, StreamExt};
use serde::Deserialize;
use tokio::net::TcpListener;

use super::messages::{ClientFrame, ErrorFrame};
use super::{Broker, MetricsSnapshot, Topic};
use crate::adapt::{CurrentState, StateStore};

/// Close code sent to a dashboard whose queue overflowed.
pub const ERROR_CLOSE_SLOW_CLIENT: u16 = 4001;
/// Close code sent when the gateway shuts down.
pub const CLOSE_GOING_AWAY: u16 = 1001;

#[derive(Clone)]
struct AppState {
    broker: Broker,
    store: StateStore,
}

#[derive(Debug, Default, Deserialize)]
struct WsQuery {
    /// Resume the adaptation feed from this seq if it is still retained.
    from_seq: Option<u64>,
}

pub fn router(broker: Broker, store: StateStore) -> Router {
    Router::new()
        .route("/ws/dashboard", get(ws_handler))
        .route("/api/state", get(state_handler))
        .route("/api/metrics", get(metrics_handler))
        .with_state(AppState { broker, store })
}

/// Serve `router` on `listener` until `shutdown` resolves.
pub async fn serve_http(
    listener: TcpListener,
    router: Router,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router).with_graceful_shutdown(shutdown).await
}

async fn state_handler(State(app): State<AppState>) -> Json<CurrentState> {
    Json(app.store.current_state())
}

async fn metrics_handler(State(app): State<AppState>) -> Json<MetricsSnapshot> {
    Json(app.broker.metrics())
}

async fn ws_handler(ws: WebSocketUpgrade, Query(q): Query<WsQuery>, State(app): State<AppState>) -> Response {
    ws.on_upgrade(move |socket| dashboard_socket(socket, app, q.from_seq))
}

fn error_text(message: String) -> Message {
    Message::Text(serde_json::to_string(&ErrorFrame::Error { message }).unwrap_or_default().into())
}

async fn dashboard_socket(socket: WebSocket, app: AppState, from_seq: Option<u64>) {
    let (mut sink, mut stream) = socket.split();
    let mut sub = match app.broker.subscribe(Topic::AdaptationConfig, from_seq) {
        Ok(sub) => sub,
        Err(e) => {
            let _ = sink.send(error_text(e.to_string())).await;
            match app.broker.subscribe(Topic::AdaptationConfig, None) {
                Ok(sub) => sub,
                Err(_) => return,
            }
        }
    };

    loop {
        tokio::select! {
            env = sub.recv() => match env {
                Some(env) => {
                    let text = match serde_json::to_string(&*env) {
                        Ok(t) => t,
                        Err(_) => continue,
                    };
                    if sink.send(Message::Text(text.into())).await.is_err() {
                        return;
                    }
                }
                None => {
                    let (code, reason) = if sub.overflowed() {
                        tracing::warn!("closing slow dashboard connection");
                        (ERROR_CLOSE_SLOW_CLIENT, "client too slow")
                    } else {
                        (CLOSE_GOING_AWAY, "gateway shutting down")
                    };
                    let close = Message::Close(Some(CloseFrame { code, reason: reason.into() }));
                    let _ = tokio::time::timeout(Duration::from_secs(1), sink.send(close)).await;
                    return;
                }
            },
            msg = stream.next() => match msg {
                Some(Ok(Message::Text(text))) => {
                    if let Err(message) = handle_client_text(&app, text.as_str()) {
                        if sink.send(error_text(message)).await.is_err() {
                            return;
                        }
                    }
                }
                Some(Ok(Message::Binary(_))) => {
                    if sink.send(error_text("binary frames are not supported".into())).await.is_err() {
                        return;
                    }
                }
                Some(Ok(Message::Close(_))) | Some(Err(_)) | None => return,
                Some(Ok(_)) => {}
            },
        }
    }
}

fn handle_client_text(app: &AppState, text: &str) -> Result<u64, String> {
    let frame: ClientFrame = serde_json::from_str(text).map_err(|e| format!("malformed frame: {e}"))?;
    match frame {
        ClientFrame::Behavior { mut payload } => {
            if let Some(obj) = payload.as_object_mut() {
                if !obj.contains_key("session_id") {
                    if let Some(session) = app.store.current_state().session_id {
                        obj.insert("session_id".into(), session.into());
                    }
                }
            }
            app.broker.publish_value(Topic::BehaviorEvents, payload).map_err(|e| e.to_string())
        }
    }
}
