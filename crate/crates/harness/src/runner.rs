//! Runs a scenario against an in-process server with a manual clock.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;

use mediasync_core::bandwidth::BandwidthReport;
use mediasync_core::handler::HandlerTree;
use mediasync_core::media::{deserialize_state, serialize_state};
use mediasync_core::protocol::{keys, serialize, ControlEventMessage, ControlType, Data, EventMessage, Value};
use mediasync_core::replay::{ReplayClock, Replayer, VirtualClock};
use mediasync_core::session::{
    decode_log, encode_log, join_message, load_log, persist_log, Connection, ManualClock, MemoryStore, Role, RolePolicy,
    SessionError, SessionLogEntry, SessionServer,
};
use rand::seq::SliceRandom;
use rand::Rng;
use serde_json::Value as Json;
use tokio::sync::mpsc::{unbounded_channel, UnboundedReceiver};

use crate::gen;
use crate::mirror::Mirror;
use crate::oracle::{fold, fold_prefix, state_texts};
use crate::scenario::Scenario;

/// Epoch time the manual clock starts at.
pub const EPOCH_MS: u64 = 1_700_000_000_000;
pub const LATE_JOINER: &str = "late";
pub const PACES: [f64; 2] = [1.0, 4.0];
pub const SEEK_PATTERNS: usize = 3;

#[derive(Clone, Debug)]
pub struct RunOptions {
    /// Total clients. Extra audience clients join at 0 when the scenario
    /// declares fewer.
    pub clients: usize,
    pub seed: u64,
    pub policy: RolePolicy,
    pub late_join_at: Option<u64>,
    /// When set, one client requests a resync of every block at this time.
    pub probe_at: Option<u64>,
    /// Number of stale or malformed frames slipped between scripted sends.
    pub faults: usize,
    /// Persist the log here and replay from the file instead of memory.
    pub log_path: Option<PathBuf>,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            clients: 1,
            seed: 0,
            policy: RolePolicy::PresenterOnly,
            late_join_at: None,
            probe_at: None,
            faults: 0,
            log_path: None,
        }
    }
}

/// Answer to one mid-session resync request.
#[derive(Clone, Debug, PartialEq)]
pub struct Probe {
    pub media_id: String,
    pub global_seq: u64,
    pub matches_oracle: bool,
}

#[derive(Debug)]
pub struct HarnessResult {
    pub scenario: String,
    pub session_id: String,
    pub log: Vec<SessionLogEntry>,
    pub received: BTreeMap<String, Vec<u64>>,
    pub final_states: BTreeMap<String, BTreeMap<String, String>>,
    pub server_states: BTreeMap<String, String>,
    pub report: BandwidthReport,
    pub probes: Vec<Probe>,
    pub rejected: usize,
    pub replay_equivalent: bool,
    pub divergences: Vec<String>,
}

impl HarnessResult {
    pub fn passed(&self) -> bool {
        self.divergences.is_empty()
    }

    pub fn summary(&self) -> String {
        let mut out = format!(
            "{}: {} entries ({} rejected), {} clients, replay {}, {} event bytes up\n",
            self.scenario,
            self.log.len(),
            self.rejected,
            self.received.len(),
            if self.replay_equivalent { "equivalent" } else { "DIVERGED" },
            self.report.event_bytes_up(),
        );
        for d in &self.divergences {
            out.push_str("  divergence: ");
            out.push_str(d);
            out.push('\n');
        }
        out
    }
}

#[derive(Clone, Debug)]
pub(crate) enum Action {
    Join(String, Role),
    Materials,
    Asset(u64),
    Send(usize),
    Probe,
}

struct Client {
    id: String,
    conn: Connection,
    rx: UnboundedReceiver<Arc<str>>,
    mirror: Mirror,
    seq: u64,
    bytes_up: u64,
}

impl Client {
    fn drain(&mut self) {
        while let Ok(text) = self.rx.try_recv() {
            self.mirror.on_frame(text);
        }
    }

    fn send(&mut self, text: &str) -> Result<(), SessionError> {
        self.bytes_up += text.len() as u64;
        self.conn.handle_text(text).map(|_| ())
    }

    fn send_message(&mut self, mut message: EventMessage, at: u64) -> Result<(), SessionError> {
        match &mut message {
            EventMessage::Media(m) => {
                m.seq_id = self.seq;
                m.timestamp = at;
            }
            EventMessage::Control(c) => {
                c.seq_id = self.seq;
                c.timestamp = at;
            }
        }
        let text = encode(&message);
        self.seq += 1;
        self.send(&text)
    }
}

pub(crate) fn encode(message: &EventMessage) -> String {
    String::from_utf8(serialize(message).expect("scripted messages are valid")).expect("canonical encoding is UTF-8")
}

pub(crate) fn resync_request(media_id: &str) -> EventMessage {
    ControlEventMessage {
        control_type: ControlType::Resync,
        seq_id: 0,
        timestamp: 0,
        description: format!("resync {media_id}"),
        data: Some(Data::from([
            (keys::MEDIA_ID.to_string(), Value::from(media_id)),
            (keys::MEDIA_STATE.to_string(), Value::from("")),
        ])),
    }
    .into()
}

pub(crate) fn add_material(media_id: &str, media_type: &str, source: &str) -> EventMessage {
    ControlEventMessage {
        control_type: ControlType::AddMaterial,
        seq_id: 0,
        timestamp: 0,
        description: format!("add {media_id}"),
        data: Some(Data::from([
            (keys::MEDIA_ID.to_string(), Value::from(media_id)),
            (keys::MEDIA_TYPE.to_string(), Value::from(media_type)),
            (keys::SOURCE.to_string(), Value::from(source)),
        ])),
    }
    .into()
}

/// Scheduled actions in execution order. Actions due at the same
/// millisecond are interleaved across clients by the seed, keeping each
/// client's own order.
pub(crate) fn schedule(scenario: &Scenario, options: &RunOptions, extra: &[String], rng: &mut impl Rng) -> Vec<(u64, Action)> {
    let mut timed: Vec<(u64, u8, String, Action)> = Vec::new();
    for c in &scenario.clients {
        timed.push((c.join_at, 0, c.id.clone(), Action::Join(c.id.clone(), c.role)));
    }
    for id in extra {
        timed.push((0, 0, id.clone(), Action::Join(id.clone(), Role::Audience)));
    }
    if let Some(at) = options.late_join_at {
        timed.push((at, 0, LATE_JOINER.into(), Action::Join(LATE_JOINER.into(), Role::Audience)));
    }
    if let Some(p) = scenario.presenter() {
        if !scenario.materials.is_empty() {
            timed.push((p.join_at, 1, p.id.clone(), Action::Materials));
        }
    }
    for a in &scenario.assets {
        timed.push((a.at_ms, 2, String::new(), Action::Asset(a.bytes)));
    }
    for (i, e) in scenario.script.iter().enumerate() {
        timed.push((e.at_ms, 3, e.client_id.clone(), Action::Send(i)));
    }
    if let Some(at) = options.probe_at {
        timed.push((at, 4, String::new(), Action::Probe));
    }
    timed.sort_by_key(|(at, phase, _, _)| (*at, *phase));

    let mut out = Vec::with_capacity(timed.len());
    let mut i = 0;
    while i < timed.len() {
        let key = (timed[i].0, timed[i].1);
        let mut j = i;
        while j < timed.len() && (timed[j].0, timed[j].1) == key {
            j += 1;
        }
        // one slot per action, shuffled, then each slot filled with that
        // client's next action
        let group = &timed[i..j];
        let mut owners: Vec<&str> = group.iter().map(|g| g.2.as_str()).collect();
        owners.shuffle(rng);
        let mut queues: BTreeMap<&str, std::collections::VecDeque<&Action>> = BTreeMap::new();
        for g in group {
            queues.entry(g.2.as_str()).or_default().push_back(&g.3);
        }
        for owner in owners {
            let action = queues.get_mut(owner).and_then(|q| q.pop_front()).expect("one slot per action");
            out.push((key.0, action.clone()));
        }
        i = j;
    }
    out
}

pub fn run_scenario(scenario: &Scenario, options: &RunOptions) -> HarnessResult {
    let mut rng = gen::rng(options.seed);
    let clock = ManualClock::new(EPOCH_MS);
    let server = Arc::new(SessionServer::new(Arc::new(clock.clone()), Arc::new(MemoryStore::new()), options.policy));
    let presenter = scenario.presenter().map_or("host", |p| p.id.as_str());
    let session_id = server.create_session(presenter);

    let extra: Vec<String> = (scenario.clients.len()..options.clients).map(|i| format!("viewer{i}")).collect();
    let actions = schedule(scenario, options, &extra, &mut rng);
    let mut fault_at: Vec<usize> = (0..options.faults).map(|_| rng.random_range(0..scenario.script.len().max(1))).collect();
    fault_at.sort_unstable();

    let mut clients: Vec<Client> = Vec::new();
    let mut divergences = Vec::new();
    let mut probes_pending: Vec<(String, u64)> = Vec::new();
    let mut rejected = 0;

    for (at, action) in actions {
        clock.set(EPOCH_MS + at);
        match action {
            Action::Join(id, role) => {
                let (tx, rx) = unbounded_channel();
                let mut client = Client {
                    id: id.clone(),
                    conn: Connection::new(server.clone(), tx),
                    rx,
                    mirror: Mirror::new(&id),
                    seq: 1,
                    bytes_up: 0,
                };
                let join = EventMessage::from(join_message(&session_id, &id, role, at));
                if let Err(e) = client.send(&encode(&join)) {
                    divergences.push(format!("{id} could not join at {at} ms: {e}"));
                }
                clients.push(client);
            }
            Action::Materials => {
                let p = clients.iter_mut().find(|c| c.id == presenter).expect("presenter joined");
                for m in &scenario.materials {
                    let msg = add_material(&m.media_id, m.media_type.as_str(), &m.source);
                    if let Err(e) = p.send_message(msg, at) {
                        divergences.push(format!("material `{}` not registered: {e}", m.media_id));
                    }
                }
            }
            Action::Asset(bytes) => {
                for c in &mut clients {
                    if server.record_asset(&session_id, bytes).is_ok() {
                        c.mirror.bytes_down += bytes;
                    }
                }
            }
            Action::Send(i) => {
                let event = &scenario.script[i];
                let c = clients.iter_mut().find(|c| c.id == event.client_id).expect("sender joined");
                match c.send_message(event.message.clone(), at) {
                    Ok(()) => {}
                    Err(SessionError::Rejected { .. }) => rejected += 1,
                    Err(SessionError::Forbidden(_)) if options.policy == RolePolicy::PresenterOnly => {}
                    Err(e) => divergences.push(format!("scripted event {i} from {} refused: {e}", c.id)),
                }
                while fault_at.first() == Some(&i) {
                    fault_at.remove(0);
                    let before = server.next_global_seq(&session_id).unwrap_or(0);
                    let stale = c.seq.saturating_sub(1);
                    let mut dup = event.message.clone();
                    if let EventMessage::Media(m) = &mut dup {
                        m.seq_id = stale;
                    } else if let EventMessage::Control(ctl) = &mut dup {
                        ctl.seq_id = stale;
                    }
                    let text = if rng.random_bool(0.5) { encode(&dup) } else { "{\"kind\":".to_string() };
                    match c.send(&text) {
                        Err(SessionError::SeqGap { .. } | SessionError::BadMessage(_)) => {}
                        other => divergences.push(format!("fault frame from {} was not refused: {other:?}", c.id)),
                    }
                    if server.next_global_seq(&session_id).unwrap_or(0) != before {
                        divergences.push(format!("fault frame from {} was logged", c.id));
                    }
                }
            }
            Action::Probe => {
                let prober = clients.iter_mut().rev().find(|c| c.mirror.joined());
                if let Some(c) = prober {
                    for m in &scenario.materials {
                        let before = c.mirror.resyncs.len();
                        if let Err(e) = c.send_message(resync_request(&m.media_id), at) {
                            divergences.push(format!("resync of `{}` refused: {e}", m.media_id));
                        }
                        c.drain();
                        match c.mirror.resyncs.get(before) {
                            Some(reply) => probes_pending.push((m.media_id.clone(), reply.seq_id)),
                            None => divergences.push(format!("no resync reply for `{}`", m.media_id)),
                        }
                    }
                }
            }
        }
        for c in &mut clients {
            c.drain();
        }
    }
    clock.set(EPOCH_MS + scenario.duration_ms.max(clock_elapsed(&server, &session_id)));
    for c in &mut clients {
        c.drain();
    }

    let log = server.log(&session_id).unwrap_or_default();
    let server_states = state_texts(&server.states(&session_id).unwrap_or_default());
    let report = server.report(&session_id).expect("session exists");

    let mirrors: Vec<&Mirror> = clients.iter().map(|c| &c.mirror).collect();
    let checked = check_mirrors(scenario, &log, &server_states, &mirrors, &probes_pending);
    divergences.extend(checked.divergences);
    let (final_states, probes) = (checked.final_states, checked.probes);

    // conservation
    let up: u64 = clients.iter().map(|c| c.bytes_up).sum();
    let down: u64 = clients.iter().map(|c| c.mirror.bytes_down).sum();
    if up != report.total_bytes_up || down != report.total_bytes_down {
        divergences.push(format!(
            "meter recorded {}/{} B up/down, clients framed {up}/{down} B",
            report.total_bytes_up, report.total_bytes_down
        ));
    }
    if !report.is_consistent() {
        divergences.push("bandwidth report totals are inconsistent".into());
    }

    // replay from the persisted log
    let restored = match &options.log_path {
        Some(path) => persist_log(path, &log).map_err(|e| e.to_string()).and_then(|()| load_log(path).map_err(|e| e.to_string())),
        None => decode_log(&encode_log(&log)).map_err(|e| e.to_string()),
    };
    let replay_problems = match restored {
        Ok(entries) if entries == log => check_replay(&entries, &server_states, &mut rng),
        Ok(_) => vec!["persisted log differs from the live log".to_string()],
        Err(e) => vec![format!("persisted log unreadable: {e}")],
    };
    let replay_equivalent = replay_problems.is_empty();
    divergences.extend(replay_problems);

    let received = clients.iter().map(|c| (c.id.clone(), c.mirror.received.clone())).collect();
    drop(clients);

    HarnessResult {
        scenario: scenario.name.clone(),
        session_id,
        log,
        received,
        final_states,
        server_states,
        report,
        probes,
        rejected,
        replay_equivalent,
        divergences,
    }
}

pub(crate) struct Checked {
    pub final_states: BTreeMap<String, BTreeMap<String, String>>,
    pub probes: Vec<Probe>,
    pub divergences: Vec<String>,
}

/// Received sequences, client and server states against the fold oracle,
/// expectations and resync probes. The last joined mirror is the prober.
pub(crate) fn check_mirrors(
    scenario: &Scenario,
    log: &[SessionLogEntry],
    server_states: &BTreeMap<String, String>,
    mirrors: &[&Mirror],
    probes_pending: &[(String, u64)],
) -> Checked {
    let mut divergences = Vec::new();
    let full: Vec<u64> = (0..log.len() as u64).collect();
    let mut reference: Option<(&str, &[Arc<str>])> = None;
    for m in mirrors {
        divergences.extend(m.problems.iter().cloned());
        let first = (m.first_seq.unwrap_or(0) as usize).min(full.len());
        if m.received != full[first..] {
            divergences.push(first_gap(&m.client_id, &m.received, &full[first..]));
        }
        if first == 0 {
            match reference {
                None => reference = Some((&m.client_id, &m.entries)),
                Some((id, entries)) => {
                    if let Some(k) = (0..entries.len().max(m.entries.len())).find(|k| entries.get(*k) != m.entries.get(*k)) {
                        divergences.push(format!("{} and {id} differ first at global_seq {k}", m.client_id));
                    }
                }
            }
        }
    }

    let oracle = state_texts(&fold(log));
    divergences.extend(compare_states("server", server_states, "fold oracle", &oracle));
    let mut final_states = BTreeMap::new();
    for m in mirrors {
        let texts = m.state_texts();
        divergences.extend(compare_states(&m.client_id, &texts, "server", server_states));
        final_states.insert(m.client_id.clone(), texts);
    }
    divergences.extend(check_expectations(scenario, server_states));

    let mut probes = Vec::new();
    let prober = mirrors.iter().rev().find(|m| m.joined());
    for (media_id, global_seq) in probes_pending {
        let reply = prober.and_then(|p| {
            p.resyncs
                .iter()
                .find(|r| r.seq_id == *global_seq && r.get_str(keys::MEDIA_ID) == Some(media_id.as_str()))
        });
        let expected = fold_prefix(log, *global_seq).get(media_id).map(serialize_state);
        let got = reply.and_then(|r| r.get_str(keys::MEDIA_STATE)).map(str::to_string);
        let matches_oracle = expected.is_some() && expected == got;
        if !matches_oracle {
            divergences.push(format!("resync of `{media_id}` at global_seq {global_seq} differs from the fold oracle"));
        }
        probes.push(Probe {
            media_id: media_id.clone(),
            global_seq: *global_seq,
            matches_oracle,
        });
    }
    Checked {
        final_states,
        probes,
        divergences,
    }
}

fn clock_elapsed(server: &SessionServer, session_id: &str) -> u64 {
    server
        .log(session_id)
        .ok()
        .and_then(|l| l.last().map(|e| e.received_at))
        .unwrap_or(0)
}

fn first_gap(client: &str, got: &[u64], want: &[u64]) -> String {
    match (0..got.len().max(want.len())).find(|k| got.get(*k) != want.get(*k)) {
        Some(k) => format!(
            "{client}: position {k} holds global_seq {:?}, expected {:?}",
            got.get(k),
            want.get(k)
        ),
        None => format!("{client}: received sequence differs"),
    }
}

/// Differences between two state maps, naming the first differing key of
/// each block.
pub fn compare_states(
    left_name: &str,
    left: &BTreeMap<String, String>,
    right_name: &str,
    right: &BTreeMap<String, String>,
) -> Vec<String> {
    let mut out = Vec::new();
    for id in left.keys().chain(right.keys()).collect::<std::collections::BTreeSet<_>>() {
        match (left.get(id), right.get(id)) {
            (Some(a), Some(b)) if a == b => {}
            (Some(a), Some(b)) => out.push(format!("`{id}`: {left_name} and {right_name} differ at {}", first_key_difference(a, b))),
            (Some(_), None) => out.push(format!("`{id}` only in {left_name}")),
            (None, _) => out.push(format!("`{id}` only in {right_name}")),
        }
    }
    out
}

fn first_key_difference(a: &str, b: &str) -> String {
    let entries = |s: &str| serde_json::from_str::<Json>(s).ok().and_then(|v| v.get("entries").cloned());
    match (entries(a), entries(b)) {
        (Some(Json::Object(x)), Some(Json::Object(y))) => x
            .keys()
            .chain(y.keys())
            .find(|k| x.get(*k) != y.get(*k))
            .map_or("serialization".to_string(), |k| format!("key `{k}`")),
        _ => "the state text".to_string(),
    }
}

fn lookup(mut value: &Json, path: &str) -> Option<Json> {
    for part in path.split('.') {
        if part == "len" {
            if let Json::Array(items) = value {
                return Some(Json::from(items.len()));
            }
        }
        value = value.get(part)?;
    }
    Some(value.clone())
}

fn numbers_equal(a: &Json, b: &Json) -> bool {
    match (a.as_f64(), b.as_f64()) {
        (Some(x), Some(y)) => (x - y).abs() <= 1e-9 * x.abs().max(1.0),
        _ => a == b,
    }
}

pub fn check_expectations(scenario: &Scenario, states: &BTreeMap<String, String>) -> Vec<String> {
    let mut out = Vec::new();
    for e in &scenario.expected {
        let actual = states
            .get(&e.media_id)
            .and_then(|s| serde_json::from_str::<Json>(s).ok())
            .and_then(|v| v.get("entries").and_then(|entries| lookup(entries, &e.key)));
        match actual {
            Some(v) if numbers_equal(&v, &e.value) => {}
            other => out.push(format!("expected `{}` {} = {}, found {:?}", e.media_id, e.key, e.value, other)),
        }
    }
    out
}

/// Replays `log` straight through, paced on a virtual clock and through
/// seeded seek patterns, comparing against `live` and the fold oracle.
pub fn check_replay(log: &[SessionLogEntry], live: &BTreeMap<String, String>, rng: &mut impl Rng) -> Vec<String> {
    let tree = HandlerTree::standard();
    let mut out = Vec::new();

    let mut replayer = Replayer::new(log.to_vec(), &tree);
    replayer.replay_to_end();
    out.extend(compare_states("replay", &state_texts(replayer.states()), "live", live));

    for pace in PACES {
        let mut replayer = Replayer::new(log.to_vec(), &tree);
        let clock = VirtualClock::new();
        let origin = clock.now();
        let mut order = Vec::new();
        let mut late = None;
        let mut sink = |entry: &SessionLogEntry, at: std::time::Duration| {
            let ideal = entry.received_at as f64 / pace;
            let actual = (at - origin).as_secs_f64() * 1000.0;
            if (actual - ideal).abs() > 1e-6 && late.is_none() {
                late = Some(entry.global_seq);
            }
            order.push(entry.global_seq);
            Ok(())
        };
        match replayer.run_timed(pace, &clock, &mut sink) {
            Ok(run) if run.emitted == log.len() => {}
            Ok(run) => out.push(format!("pace {pace}: emitted {} of {} entries", run.emitted, log.len())),
            Err(e) => out.push(format!("pace {pace}: {e}")),
        }
        if let Some(seq) = late {
            out.push(format!("pace {pace}: global_seq {seq} emitted off schedule"));
        }
        if order != (0..log.len() as u64).collect::<Vec<_>>() {
            out.push(format!("pace {pace}: entries emitted out of order"));
        }
        for d in compare_states(&format!("replay at pace {pace}"), &state_texts(replayer.states()), "live", live) {
            out.push(d);
        }
    }

    let end = log.last().map_or(0, |e| e.received_at);
    for pattern in 0..SEEK_PATTERNS {
        let mut replayer = Replayer::new(log.to_vec(), &tree);
        let targets: Vec<u64> = (0..6).map(|_| rng.random_range(0..=end + 1000)).collect();
        for t in &targets {
            let states = state_texts(replayer.seek(*t));
            let upto = log.iter().take_while(|e| e.received_at <= *t).count() as u64;
            let oracle = state_texts(&fold_prefix(log, upto));
            out.extend(compare_states(&format!("seek pattern {pattern} at {t} ms"), &states, "fold oracle", &oracle));
        }
        replayer.seek(end);
        out.extend(compare_states(&format!("seek pattern {pattern} at end"), &state_texts(replayer.states()), "live", live));
    }

    // every live state string must parse back to itself
    for (id, text) in live {
        if deserialize_state(text).map(|s| serialize_state(&s)).as_deref() != Ok(text.as_str()) {
            out.push(format!("`{id}`: live state text does not round-trip"));
        }
    }
    out
}
