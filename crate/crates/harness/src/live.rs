//! Runs a scenario against a server over real sockets.
//!
//! Scripted times are compressed unless a pace is given. Page loads are
//! skipped and byte conservation is not checked; the report is rebuilt
//! from the fetched log.

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Duration;

use anyhow::{anyhow, bail, Context};
use futures_util::{SinkExt, StreamExt};
use mediasync_core::protocol::EventMessage;
use mediasync_core::session::{decode_log, join_message, SessionLogEntry};
use tokio::net::TcpStream;
use tokio::sync::mpsc::{unbounded_channel, UnboundedReceiver};
use tokio::time::{sleep, timeout, Instant};
use tokio_tungstenite::tungstenite::Message;
use tokio_tungstenite::{connect_async, MaybeTlsStream, WebSocketStream};

use crate::gen;
use crate::logreport::report_from_log;
use crate::mirror::Mirror;
use crate::oracle::{fold, state_texts};
use crate::runner::{add_material, check_mirrors, check_replay, encode, resync_request, schedule, Action, HarnessResult, RunOptions};
use crate::scenario::Scenario;

const QUIESCENCE: Duration = Duration::from_secs(10);

type Sink = futures_util::stream::SplitSink<WebSocketStream<MaybeTlsStream<TcpStream>>, Message>;

struct LiveClient {
    sink: Sink,
    rx: UnboundedReceiver<Arc<str>>,
    mirror: Mirror,
    seq: u64,
}

impl LiveClient {
    fn drain(&mut self) {
        while let Ok(text) = self.rx.try_recv() {
            self.mirror.on_frame(text);
        }
    }

    async fn send_text(&mut self, text: String) -> anyhow::Result<()> {
        self.sink.send(Message::text(text)).await.context("socket send")
    }

    async fn send_message(&mut self, mut message: EventMessage, at: u64) -> anyhow::Result<()> {
        match &mut message {
            EventMessage::Media(m) => (m.seq_id, m.timestamp) = (self.seq, at),
            EventMessage::Control(c) => (c.seq_id, c.timestamp) = (self.seq, at),
        }
        self.seq += 1;
        self.send_text(encode(&message)).await
    }
}

/// `http://host:port` to `ws://host:port/ws`.
pub fn socket_url(base: &str) -> String {
    let base = base.trim_end_matches('/');
    match base.split_once("://") {
        Some(("https", rest)) => format!("wss://{rest}/ws"),
        Some((_, rest)) => format!("ws://{rest}/ws"),
        None => format!("ws://{base}/ws"),
    }
}

pub async fn create_session(http: &reqwest::Client, base: &str, presenter: &str) -> anyhow::Result<String> {
    let body = serde_json::json!({ "presenter": presenter }).to_string();
    let response = http
        .post(format!("{}/sessions", base.trim_end_matches('/')))
        .header("content-type", "application/json")
        .body(body)
        .send()
        .await?
        .error_for_status()?;
    let value: serde_json::Value = serde_json::from_str(&response.text().await?)?;
    value
        .get("session-id")
        .and_then(|v| v.as_str())
        .map(str::to_string)
        .ok_or_else(|| anyhow!("no session-id in {value}"))
}

pub async fn fetch_log(http: &reqwest::Client, base: &str, session_id: &str) -> anyhow::Result<Vec<SessionLogEntry>> {
    let text = http
        .get(format!("{}/sessions/{session_id}/log", base.trim_end_matches('/')))
        .send()
        .await?
        .error_for_status()?
        .text()
        .await?;
    Ok(decode_log(&text)?)
}

async fn connect(base: &str, id: &str) -> anyhow::Result<LiveClient> {
    let (stream, _) = connect_async(socket_url(base)).await.with_context(|| format!("connecting {id}"))?;
    let (sink, mut source) = stream.split();
    let (tx, rx) = unbounded_channel();
    tokio::spawn(async move {
        while let Some(Ok(frame)) = source.next().await {
            if let Message::Text(text) = frame {
                if tx.send(Arc::<str>::from(text.as_str())).is_err() {
                    break;
                }
            }
        }
    });
    Ok(LiveClient {
        sink,
        rx,
        mirror: Mirror::new(id),
        seq: 1,
    })
}

/// Waits until `pred` holds for the client, draining frames as they come.
async fn wait_for(client: &mut LiveClient, mut pred: impl FnMut(&Mirror) -> bool) -> bool {
    let deadline = Instant::now() + QUIESCENCE;
    loop {
        client.drain();
        if pred(&client.mirror) {
            return true;
        }
        match timeout(deadline.saturating_duration_since(Instant::now()), client.rx.recv()).await {
            Ok(Some(text)) => client.mirror.on_frame(text),
            _ => return pred(&client.mirror),
        }
    }
}

/// Runs `scenario` against the server at `base` (`http://host:port`).
/// With `pace`, scripted times are honoured at that speed.
pub async fn run_live(base: &str, scenario: &Scenario, options: &RunOptions, pace: Option<f64>) -> anyhow::Result<HarnessResult> {
    let http = reqwest::Client::new();
    let presenter = scenario.presenter().map_or("host", |p| p.id.as_str());
    let session_id = create_session(&http, base, presenter).await?;
    let mut rng = gen::rng(options.seed);
    let extra: Vec<String> = (scenario.clients.len()..options.clients).map(|i| format!("viewer{i}")).collect();
    let actions = schedule(scenario, options, &extra, &mut rng);

    let started = Instant::now();
    let mut clients: BTreeMap<String, LiveClient> = BTreeMap::new();
    let mut order: Vec<String> = Vec::new();
    let mut probes_pending = Vec::new();
    let mut divergences = Vec::new();

    for (at, action) in actions {
        if let Some(pace) = pace {
            sleep((started + Duration::from_secs_f64(at as f64 / 1000.0 / pace)).saturating_duration_since(Instant::now())).await;
        }
        match action {
            Action::Join(id, role) => {
                let mut client = connect(base, &id).await?;
                client
                    .send_text(encode(&join_message(&session_id, &id, role, at).into()))
                    .await?;
                if !wait_for(&mut client, Mirror::joined).await {
                    bail!("{id} received no join ack");
                }
                order.push(id.clone());
                clients.insert(id, client);
            }
            Action::Materials => {
                let p = clients.get_mut(presenter).ok_or_else(|| anyhow!("presenter not connected"))?;
                for m in &scenario.materials {
                    p.send_message(add_material(&m.media_id, m.media_type.as_str(), &m.source), at).await?;
                }
            }
            Action::Asset(_) => {}
            Action::Send(i) => {
                let event = &scenario.script[i];
                let c = clients.get_mut(&event.client_id).ok_or_else(|| anyhow!("{} not connected", event.client_id))?;
                c.send_message(event.message.clone(), at).await?;
            }
            Action::Probe => {
                let Some(id) = order.last().cloned() else { continue };
                let c = clients.get_mut(&id).expect("connected");
                for m in &scenario.materials {
                    let before = c.mirror.resyncs.len();
                    c.send_message(resync_request(&m.media_id), at).await?;
                    if wait_for(c, |mirror| mirror.resyncs.len() > before).await {
                        probes_pending.push((m.media_id.clone(), c.mirror.resyncs[before].seq_id));
                    } else {
                        divergences.push(format!("no resync reply for `{}`", m.media_id));
                    }
                }
            }
        }
        for c in clients.values_mut() {
            c.drain();
        }
    }

    // quiescence: every client has seen the whole log, and the log has
    // stopped growing
    let mut log = fetch_log(&http, base, &session_id).await?;
    for _ in 0..3 {
        for c in clients.values_mut() {
            let len = log.len() as u64;
            if !wait_for(c, |m| m.next_seq() >= len).await {
                divergences.push(format!("{} stalled at global_seq {}", c.mirror.client_id, c.mirror.next_seq()));
            }
        }
        let again = fetch_log(&http, base, &session_id).await?;
        if again.len() == log.len() {
            break;
        }
        log = again;
    }

    let server_states = state_texts(&fold(&log));
    let mirrors: Vec<&Mirror> = order.iter().map(|id| &clients[id].mirror).collect();
    let checked = check_mirrors(scenario, &log, &server_states, &mirrors, &probes_pending);
    divergences.extend(checked.divergences);
    let replay = check_replay(&log, &server_states, &mut rng);
    let replay_equivalent = replay.is_empty();
    divergences.extend(replay);
    let received = order.iter().map(|id| (id.clone(), clients[id].mirror.received.clone())).collect();
    let rejected = log.iter().filter(|e| e.error.is_some()).count();

    for c in clients.values_mut() {
        let _ = c.sink.close().await;
    }
    Ok(HarnessResult {
        scenario: scenario.name.clone(),
        report: report_from_log(&session_id, &log),
        session_id,
        log,
        received,
        final_states: checked.final_states,
        server_states,
        probes: checked.probes,
        rejected,
        replay_equivalent,
        divergences,
    })
}
