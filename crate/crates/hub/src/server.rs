//! Live hub service.
//!
//! * UDP: one encoded peripheral packet per datagram.
//! * `GET /snapshot`: the current [`SessionSnapshot`].
//! * `GET /summary?week=YYYY-MM-DD`: weekly summary starting at `week`
//!   (default: the seven days ending today) plus the rendered table.
//! * `GET /events?since=N`: buffered events with `seq >= N`.
//! * `GET /ws?since=N`: WebSocket. The hub pushes [`ServerMessage`]s; the
//!   client sends [`ClientMessage`]s. Without `since` only new events are sent.
//!
//! One hub behind a mutex. Every emitted event is broadcast while the lock is
//! held, so subscribers see events in `seq` order.

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Query, State};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use chrono::{Days, NaiveDate, NaiveDateTime};
use homesense_core::hub::{Command, CommandError, Hub, HubConfig, HubEvent, SessionSnapshot};
use homesense_core::metrics::WeeklySummary;
use serde::{Deserialize, Serialize};
use std::future::Future;
use std::net::{IpAddr, SocketAddr};
use std::path::PathBuf;
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::Instant;
use thiserror::Error;
use tokio::net::{TcpListener, UdpSocket};
use tokio::sync::{broadcast, watch};

/// Client to hub. `id` is echoed in the acknowledgement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClientMessage {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<u64>,
    #[serde(flatten)]
    pub command: Command,
}

/// Hub to client.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    Event(HubEvent),
    Ack {
        id: Option<u64>,
        ok: bool,
        snapshot: Option<SessionSnapshot>,
        error: Option<CommandError>,
    },
    /// Events from `requested` up to `oldest - 1` were evicted from the ring.
    Gap { requested: u64, oldest: u64 },
    Error { message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryResponse {
    pub summary: WeeklySummary,
    pub table: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventsResponse {
    pub events: Vec<HubEvent>,
    pub evicted: bool,
}

#[derive(Debug, Error)]
pub enum ServeError {
    #[error("cannot listen on {addr}: {source}")]
    BindHttp { addr: SocketAddr, source: std::io::Error },
    #[error("cannot bind UDP ingest on {addr}: {source}")]
    BindUdp { addr: SocketAddr, source: std::io::Error },
    #[error("cannot open store: {0}")]
    Store(String),
    #[error("server failed: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone)]
pub struct ServeOptions {
    pub bind: IpAddr,
    pub port: u16,
    pub udp_port: u16,
    pub store: PathBuf,
    pub start_at: NaiveDateTime,
}

struct Shared {
    hub: Mutex<Hub>,
    events: broadcast::Sender<HubEvent>,
    clock: Instant,
}

impl Shared {
    fn lock(&self) -> MutexGuard<'_, Hub> {
        self.hub.lock().unwrap_or_else(|e| e.into_inner())
    }

    fn now_ms(&self) -> u64 {
        self.clock.elapsed().as_millis() as u64
    }

    /// Runs `f` on the hub and broadcasts the events it returns.
    fn with_hub<R>(&self, f: impl FnOnce(&mut Hub, u64) -> (R, Vec<HubEvent>)) -> R {
        let mut hub = self.lock();
        let (r, events) = f(&mut hub, self.now_ms());
        for e in events {
            let _ = self.events.send(e);
        }
        r
    }
}

#[derive(Clone)]
struct AppState {
    shared: Arc<Shared>,
    shutdown: watch::Receiver<bool>,
}

pub struct Server {
    http: TcpListener,
    udp: UdpSocket,
    shared: Arc<Shared>,
    tick_ms: u64,
}

impl Server {
    pub async fn bind(config: HubConfig, opts: &ServeOptions) -> Result<Self, ServeError> {
        let http_addr = SocketAddr::new(opts.bind, opts.port);
        let udp_addr = SocketAddr::new(opts.bind, opts.udp_port);
        let http = TcpListener::bind(http_addr).await.map_err(|source| ServeError::BindHttp { addr: http_addr, source })?;
        let udp = UdpSocket::bind(udp_addr).await.map_err(|source| ServeError::BindUdp { addr: udp_addr, source })?;
        let tick_ms = config.hub.tick_ms;
        let hub = Hub::open(config, &opts.store, opts.start_at).map_err(ServeError::Store)?;
        let (events, _) = broadcast::channel(1024);
        let shared = Arc::new(Shared { hub: Mutex::new(hub), events, clock: Instant::now() });
        Ok(Self { http, udp, shared, tick_ms })
    }

    pub fn http_addr(&self) -> SocketAddr {
        self.http.local_addr().expect("bound listener has an address")
    }

    pub fn udp_addr(&self) -> SocketAddr {
        self.udp.local_addr().expect("bound socket has an address")
    }

    /// Serves until `shutdown` resolves, then flushes the hub and checkpoints the store.
    pub async fn run(self, shutdown: impl Future<Output = ()> + Send + 'static) -> Result<(), ServeError> {
        let Server { http, udp, shared, tick_ms } = self;
        shared.with_hub(|h, _| ((), h.start()));

        let ingest = {
            let shared = shared.clone();
            tokio::spawn(async move {
                let mut buf = vec![0u8; 64 * 1024];
                loop {
                    match udp.recv_from(&mut buf).await {
                        Ok((n, _)) => shared.with_hub(|h, now| ((), h.receive_bytes(&buf[..n], now))),
                        Err(e) => eprintln!("udp receive failed: {e}"),
                    }
                }
            })
        };
        let ticker = {
            let shared = shared.clone();
            tokio::spawn(async move {
                let mut every = tokio::time::interval(std::time::Duration::from_millis(tick_ms.max(1)));
                every.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Skip);
                loop {
                    every.tick().await;
                    shared.with_hub(|h, now| ((), h.advance(now)));
                }
            })
        };

        let (stop_tx, stop_rx) = watch::channel(false);
        let state = AppState { shared: shared.clone(), shutdown: stop_rx };
        let app = router(state);
        let result = axum::serve(http, app)
            .with_graceful_shutdown(async move {
                shutdown.await;
                let _ = stop_tx.send(true);
            })
            .await;
        ingest.abort();
        ticker.abort();
        shared.with_hub(|h, now| {
            let mut events = h.advance(now);
            events.extend(h.finish());
            ((), events)
        });
        result.map_err(ServeError::Io)
    }
}

fn router(state: AppState) -> Router {
    Router::new()
        .route("/snapshot", get(snapshot))
        .route("/summary", get(summary))
        .route("/events", get(events))
        .route("/ws", get(ws))
        .with_state(state)
}

async fn snapshot(State(st): State<AppState>) -> Json<SessionSnapshot> {
    Json(st.shared.lock().snapshot())
}

#[derive(Debug, Deserialize)]
struct WeekQuery {
    week: Option<NaiveDate>,
}

async fn summary(State(st): State<AppState>, Query(q): Query<WeekQuery>) -> Json<SummaryResponse> {
    let hub = st.shared.lock();
    let today = hub.local_time(hub.now_ms() as i64).date();
    let week = q.week.unwrap_or(today - Days::new(6));
    let summary = WeeklySummary::build(hub.store(), week, hub.goal().goal, hub.config().progression.comparator);
    let table = summary.render_table();
    Json(SummaryResponse { summary, table })
}

#[derive(Debug, Deserialize)]
struct SinceQuery {
    since: Option<u64>,
}

async fn events(State(st): State<AppState>, Query(q): Query<SinceQuery>) -> Json<EventsResponse> {
    let (events, evicted) = st.shared.lock().events_since(q.since.unwrap_or(1));
    Json(EventsResponse { events, evicted })
}

async fn ws(ws: WebSocketUpgrade, State(st): State<AppState>, Query(q): Query<SinceQuery>) -> Response {
    ws.on_upgrade(move |socket| client(socket, st, q.since)).into_response()
}

async fn send(socket: &mut WebSocket, msg: &ServerMessage) -> bool {
    let text = serde_json::to_string(msg).expect("message serializes");
    socket.send(Message::Text(text.into())).await.is_ok()
}

/// Sends buffered events from `from`, reporting evictions. Returns the last
/// seq sent, or `None` when the socket failed.
async fn backfill(socket: &mut WebSocket, shared: &Shared, from: u64, mut last: u64) -> Option<u64> {
    let (backlog, evicted) = shared.lock().events_since(from);
    if evicted {
        let oldest = backlog.first().map_or(from, |e| e.seq);
        if !send(socket, &ServerMessage::Gap { requested: from, oldest }).await {
            return None;
        }
    }
    for e in backlog {
        if e.seq <= last {
            continue;
        }
        last = e.seq;
        if !send(socket, &ServerMessage::Event(e)).await {
            return None;
        }
    }
    Some(last)
}

async fn client(mut socket: WebSocket, st: AppState, since: Option<u64>) {
    let shared = st.shared.clone();
    let mut shutdown = st.shutdown.clone();
    let (mut sub, from) = {
        let hub = shared.lock();
        (shared.events.subscribe(), since.unwrap_or(hub.last_seq() + 1).max(1))
    };
    let Some(mut last) = backfill(&mut socket, &shared, from, from - 1).await else { return };
    loop {
        tokio::select! {
            r = sub.recv() => match r {
                Ok(e) if e.seq > last => {
                    last = e.seq;
                    if !send(&mut socket, &ServerMessage::Event(e)).await {
                        break;
                    }
                }
                Ok(_) => {}
                Err(broadcast::error::RecvError::Lagged(_)) => match backfill(&mut socket, &shared, last + 1, last).await {
                    Some(l) => last = l,
                    None => break,
                },
                Err(broadcast::error::RecvError::Closed) => break,
            },
            m = socket.recv() => match m {
                Some(Ok(Message::Text(text))) => {
                    let reply = handle_command(&shared, text.as_str());
                    if !send(&mut socket, &reply).await {
                        break;
                    }
                }
                Some(Ok(Message::Close(_))) | Some(Err(_)) | None => break,
                Some(Ok(_)) => {}
            },
            _ = shutdown.changed() => break,
        }
    }
    let _ = socket.send(Message::Close(None)).await;
}

fn handle_command(shared: &Shared, text: &str) -> ServerMessage {
    let msg: ClientMessage = match serde_json::from_str(text) {
        Ok(m) => m,
        Err(e) => return ServerMessage::Error { message: format!("bad command: {e}") },
    };
    let result = shared.with_hub(|h, now| (h.command(msg.command, now), Vec::new()));
    match result {
        Ok(snapshot) => ServerMessage::Ack { id: msg.id, ok: true, snapshot: Some(snapshot), error: None },
        Err(e) => ServerMessage::Ack { id: msg.id, ok: false, snapshot: None, error: Some(e) },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use homesense_core::hub::EventBody;

    #[test]
    fn client_message_json() {
        let m: ClientMessage = serde_json::from_str(r#"{"id":7,"type":"accept_goal","value":4}"#).unwrap();
        assert_eq!(m, ClientMessage { id: Some(7), command: Command::AcceptGoal { value: Some(4) } });
        let m: ClientMessage = serde_json::from_str(r#"{"type":"pause"}"#).unwrap();
        assert_eq!(m.command, Command::Pause);
    }

    #[test]
    fn event_message_is_flat() {
        let at = NaiveDate::from_ymd_opt(2026, 3, 2).unwrap().and_hms_opt(9, 0, 0).unwrap();
        let body = EventBody::SensorStatus { source: "seat:0".into(), status: "active".into(), detail: None };
        let msg = ServerMessage::Event(HubEvent { seq: 3, at, trigger_ms: Some(5), body });
        let v: serde_json::Value = serde_json::to_value(&msg).unwrap();
        assert_eq!(v["type"], "event");
        assert_eq!(v["kind"], "sensor_status");
        assert_eq!(v["seq"], 3);
        let back: ServerMessage = serde_json::from_value(v).unwrap();
        assert_eq!(back, msg);
    }
}
