use chrono::NaiveDate;
use futures_util::{SinkExt, StreamExt};
use homesense_core::hub::{EventBody, HubConfig, HubEvent, SessionMode, SessionSnapshot};
use homesense_core::sim::{apply_faults, synthesize_with, FaultProfile, FirmwareConfig, ScenarioScript};
use homesense_core::wire::encode_packet;
use homesense_hub::report;
use homesense_hub::server::{EventsResponse, ServeOptions, ServerMessage, Server, SummaryResponse};
use std::net::{IpAddr, Ipv4Addr, SocketAddr};
use std::time::Duration;
use tokio::net::UdpSocket;
use tokio::time::{timeout, Instant};
use tokio_tungstenite::tungstenite::Message;

type Ws = tokio_tungstenite::WebSocketStream<tokio_tungstenite::MaybeTlsStream<tokio::net::TcpStream>>;

fn config() -> HubConfig {
    let mut c = HubConfig::default();
    c.detection.double_gap_s = 2.0;
    c
}

fn day() -> NaiveDate {
    NaiveDate::from_ymd_opt(2026, 3, 2).unwrap()
}

async fn next(ws: &mut Ws) -> ServerMessage {
    loop {
        let msg = timeout(Duration::from_secs(15), ws.next()).await.expect("message in time").unwrap().unwrap();
        if let Message::Text(t) = msg {
            return serde_json::from_str(t.as_str()).unwrap();
        }
    }
}

async fn send(ws: &mut Ws, text: &str) {
    ws.send(Message::Text(text.into())).await.unwrap();
}

/// Sends the scenario's packets over UDP at their simulated arrival times.
async fn play(scenario: &str, cfg: &HubConfig, to: SocketAddr) {
    let script = ScenarioScript::parse(scenario).unwrap();
    let synthesis = synthesize_with(&script, 3, &cfg.detection, &FirmwareConfig::default()).unwrap();
    let deliveries = apply_faults(&synthesis.streams, &FaultProfile::none(), 3);
    let sock = UdpSocket::bind("127.0.0.1:0").await.unwrap();
    let t0 = Instant::now();
    for d in deliveries {
        tokio::time::sleep_until(t0 + Duration::from_millis(d.arrival_ms)).await;
        sock.send_to(&encode_packet(&d.packet).unwrap(), to).await.unwrap();
    }
    sock.send_to(b"garbage", to).await.unwrap();
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn live_session_over_udp_websocket_and_http() {
    let cfg = config();
    let dir = tempfile::tempdir().unwrap();
    let opts = ServeOptions {
        bind: IpAddr::V4(Ipv4Addr::LOCALHOST),
        port: 0,
        udp_port: 0,
        store: dir.path().to_path_buf(),
        start_at: day().and_hms_opt(9, 0, 0).unwrap(),
    };
    let server = Server::bind(cfg.clone(), &opts).await.unwrap();
    let (http, udp) = (server.http_addr(), server.udp_addr());
    let (stop, stopped) = tokio::sync::oneshot::channel::<()>();
    let running = tokio::spawn(server.run(async move {
        let _ = stopped.await;
    }));
    let base = format!("http://{http}");

    let snap: SessionSnapshot = reqwest::get(format!("{base}/snapshot")).await.unwrap().json().await.unwrap();
    assert_eq!(snap.mode, SessionMode::Active);
    assert_eq!(snap.goal, 1);

    let (mut ws, _) = tokio_tungstenite::connect_async(format!("ws://{http}/ws?since=1")).await.unwrap();
    play("sit 4\nrise 1.5\nstand 1\nlower 1.5\nsit 4\n", &cfg, udp).await;

    let mut events: Vec<HubEvent> = Vec::new();
    while !events.iter().any(|e| matches!(e.body, EventBody::RepetitionLogged { .. })) {
        match next(&mut ws).await {
            ServerMessage::Event(e) => events.push(e),
            other => panic!("unexpected {other:?}"),
        }
    }
    let seqs: Vec<u64> = events.iter().map(|e| e.seq).collect();
    assert_eq!(seqs, (1..=seqs.len() as u64).collect::<Vec<_>>());
    let stages: Vec<u8> = events
        .iter()
        .filter_map(|e| match e.body {
            EventBody::StageChanged { stage, .. } => Some(stage),
            _ => None,
        })
        .collect();
    assert_eq!(stages, [1, 2, 3, 4, 0]);
    assert!(events.iter().any(|e| matches!(&e.body, EventBody::SensorStatus { status, .. } if status == "calibrated")));

    send(&mut ws, r#"{"id":1,"type":"pause"}"#).await;
    match next(&mut ws).await {
        ServerMessage::Ack { id: Some(1), ok: true, snapshot: Some(s), .. } => assert_eq!(s.mode, SessionMode::Paused),
        other => panic!("unexpected {other:?}"),
    }
    send(&mut ws, r#"{"id":2,"type":"decline_goal"}"#).await;
    assert!(matches!(next(&mut ws).await, ServerMessage::Ack { id: Some(2), ok: false, error: Some(_), .. }));
    send(&mut ws, r#"{"type":"jump"}"#).await;
    assert!(matches!(next(&mut ws).await, ServerMessage::Error { .. }));
    send(&mut ws, r#"{"id":3,"type":"resume"}"#).await;
    assert!(matches!(next(&mut ws).await, ServerMessage::Ack { id: Some(3), ok: true, .. }));

    let snap: SessionSnapshot = reqwest::get(format!("{base}/snapshot")).await.unwrap().json().await.unwrap();
    assert_eq!(snap.mode, SessionMode::Active);
    assert_eq!(snap.today.as_ref().map(|t| t.singles), Some(1));
    assert_eq!(snap.stats.decode_errors, 1);

    // A second display resuming mid-session gets every event from its seq on.
    let (mut late, _) = tokio_tungstenite::connect_async(format!("ws://{http}/ws?since=3")).await.unwrap();
    let mut resumed = Vec::new();
    while resumed.len() < (snap.last_seq - 2) as usize {
        match next(&mut late).await {
            ServerMessage::Event(e) => resumed.push(e.seq),
            other => panic!("unexpected {other:?}"),
        }
    }
    assert_eq!(resumed, (3..=snap.last_seq).collect::<Vec<_>>());

    let all: EventsResponse = reqwest::get(format!("{base}/events?since=1")).await.unwrap().json().await.unwrap();
    assert!(!all.evicted);
    assert_eq!(all.events[..events.len()], events[..]);

    let summary: SummaryResponse =
        reqwest::get(format!("{base}/summary?week=2026-03-02")).await.unwrap().json().await.unwrap();
    assert_eq!(summary.summary.total_singles, 1);

    drop(ws);
    drop(late);
    stop.send(()).unwrap();
    timeout(Duration::from_secs(10), running).await.unwrap().unwrap().unwrap();

    let cli_table = report::report(dir.path(), day(), &cfg).unwrap();
    assert_eq!(summary.table, cli_table);
}

#[tokio::test]
async fn bind_reports_occupied_port() {
    let taken = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let dir = tempfile::tempdir().unwrap();
    let opts = ServeOptions {
        bind: IpAddr::V4(Ipv4Addr::LOCALHOST),
        port: taken.local_addr().unwrap().port(),
        udp_port: 0,
        store: dir.path().to_path_buf(),
        start_at: day().and_hms_opt(9, 0, 0).unwrap(),
    };
    let err = Server::bind(config(), &opts).await.err().expect("port is taken");
    assert!(err.to_string().starts_with("cannot listen on 127.0.0.1:"), "{err}");
}
