//! Session sequencer: membership, total ordering, fanout, resync and the
//! session log.
//!
//! Each session runs as one serial stream behind its own lock. Every
//! accepted message gets the next `global_seq`, is appended to the log and
//! the [`LogStore`], applied through the [`HandlerTree`] and then sent to
//! every joined client, the sender included. Outgoing frames go to each
//! client's [`Outbox`]; the transport drains it.

mod clock;
mod connection;
mod frame;
mod log;
mod store;

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, MutexGuard, RwLock};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tokio::sync::mpsc::UnboundedSender;
use url::Url;

use crate::bandwidth::{BandwidthReport, Direction, Traffic};
use crate::handler::HandlerTree;
use crate::media::{serialize_state, MediaBody, MediaState, StateMap};
use crate::protocol::{
    deserialize, keys, serialize, ControlEventMessage, ControlType, Data, EventMessage, MediaEventMessage,
    MediaType, ProtocolError, Value,
};
use crate::replay::Replayer;

pub use clock::{Clock, ManualClock, SystemClock};
pub use connection::Connection;
pub use frame::{ErrorNotice, JoinAck, ServerFrame};
pub use log::{decode_entry, decode_log, encode_entry, encode_log, load_log, persist_log, LogError, SessionLogEntry};
pub use store::{FileStore, LogStore, MemoryStore};

/// Per-client queue of outgoing text frames.
pub type Outbox = UnboundedSender<Arc<str>>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Role {
    Presenter,
    Audience,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Presenter => "presenter",
            Role::Audience => "audience",
        }
    }
}

impl FromStr for Role {
    type Err = ProtocolError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "presenter" => Ok(Role::Presenter),
            "audience" => Ok(Role::Audience),
            other => Err(ProtocolError::UnknownEnumerant {
                field: "role".into(),
                value: other.into(),
            }),
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Who may submit media events, add materials and start or end replays.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum RolePolicy {
    #[default]
    PresenterOnly,
    AllParticipants,
}

impl FromStr for RolePolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "presenter-only" => Ok(RolePolicy::PresenterOnly),
            "all-participants" => Ok(RolePolicy::AllParticipants),
            other => Err(format!("unknown role policy `{other}` (expected presenter-only or all-participants)")),
        }
    }
}

/// A static asset registered with a session.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct MaterialDescriptor {
    pub media_id: String,
    pub media_type: MediaType,
    pub source: String,
    /// Milliseconds since session start.
    pub added_at: u64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SessionError {
    #[error("unknown session `{0}`")]
    UnknownSession(String),
    #[error("client `{0}` already joined")]
    DuplicateClient(String),
    #[error("client `{0}` has not joined")]
    NotJoined(String),
    #[error("the first frame must be a join control event")]
    JoinRequired,
    #[error("invalid message: {0}")]
    BadMessage(#[from] ProtocolError),
    #[error("expected seq-id {expected}, got {got}")]
    SeqGap { expected: u64, got: u64 },
    #[error("{0}")]
    Forbidden(String),
    #[error("unknown media block `{0}`")]
    UnknownMedia(String),
    #[error("entry {global_seq} not applied: {reason}")]
    Rejected { global_seq: u64, reason: String },
    #[error("log store failure: {0}")]
    Store(String),
}

impl SessionError {
    pub fn code(&self) -> &'static str {
        match self {
            SessionError::UnknownSession(_) => "unknown-session",
            SessionError::DuplicateClient(_) => "duplicate-client",
            SessionError::NotJoined(_) => "not-joined",
            SessionError::JoinRequired => "join-required",
            SessionError::BadMessage(_) => "bad-message",
            SessionError::SeqGap { .. } => "seq-gap",
            SessionError::Forbidden(_) => "forbidden",
            SessionError::UnknownMedia(_) => "unknown-media",
            SessionError::Rejected { .. } => "rejected",
            SessionError::Store(_) => "store",
        }
    }

    pub fn notice(&self) -> ErrorNotice {
        ErrorNotice {
            code: self.code().to_string(),
            message: self.to_string(),
            expected_seq: match self {
                SessionError::SeqGap { expected, .. } => Some(*expected),
                _ => None,
            },
            global_seq: match self {
                SessionError::Rejected { global_seq, .. } => Some(*global_seq),
                _ => None,
            },
        }
    }
}

impl From<LogError> for SessionError {
    fn from(e: LogError) -> Self {
        SessionError::Store(e.to_string())
    }
}

/// Result of an accepted submission.
#[derive(Clone, Debug, PartialEq)]
pub enum Outcome {
    /// The message was logged and broadcast at this position.
    Logged(u64),
    /// A resync request, answered to the sender only.
    Resync(ControlEventMessage),
}

impl Outcome {
    pub fn global_seq(&self) -> Option<u64> {
        match self {
            Outcome::Logged(seq) => Some(*seq),
            Outcome::Resync(_) => None,
        }
    }
}

struct ClientSlot {
    role: Role,
    next_seq: u64,
    outbox: Outbox,
}

struct Session {
    id: String,
    started_at: u64,
    materials: BTreeMap<String, MaterialDescriptor>,
    states: StateMap,
    clients: BTreeMap<String, ClientSlot>,
    log: Vec<SessionLogEntry>,
    meter: BandwidthReport,
    last_received_at: u64,
}

impl Session {
    fn new(id: String, started_at: u64) -> Self {
        Session {
            meter: BandwidthReport::new(&id, 0),
            id,
            started_at,
            materials: BTreeMap::new(),
            states: StateMap::new(),
            clients: BTreeMap::new(),
            log: Vec::new(),
            last_received_at: 0,
        }
    }

    fn stamp(&mut self, clock: &dyn Clock) -> u64 {
        let elapsed = clock.now_ms().saturating_sub(self.started_at);
        self.last_received_at = self.last_received_at.max(elapsed);
        self.last_received_at
    }

    fn snapshot(&self) -> BTreeMap<String, String> {
        self.states.iter().map(|(id, s)| (id.clone(), serialize_state(s))).collect()
    }

    fn send(&mut self, client_id: &str, text: Arc<str>, traffic: &Traffic, at: u64) {
        if let Some(slot) = self.clients.get(client_id) {
            if slot.outbox.send(text.clone()).is_ok() {
                self.meter.record(Direction::Down, text.len() as u64, traffic, at);
            }
        }
    }

    fn broadcast(&mut self, entry: &SessionLogEntry) {
        let (text, message_len) = log::encode_entry_with_span(entry);
        let frame_len = text.len() as u64;
        let text: Arc<str> = text.into();
        let class = traffic_class(&entry.message);
        for slot in self.clients.values() {
            if slot.outbox.send(text.clone()).is_err() {
                continue;
            }
            match &class {
                Traffic::Event(_) => {
                    self.meter.record(Direction::Down, message_len as u64, &class, entry.received_at);
                    self.meter.record(Direction::Down, frame_len - message_len as u64, &Traffic::Overhead, entry.received_at);
                }
                other => self.meter.record(Direction::Down, frame_len, other, entry.received_at),
            }
        }
    }

    fn notify(&mut self, client_id: &str, error: &SessionError, at: u64) {
        let text: Arc<str> = ServerFrame::Error(error.notice()).encode().into();
        self.send(client_id, text, &Traffic::Overhead, at);
    }
}

/// Accounting class of a client message.
fn traffic_class(msg: &EventMessage) -> Traffic {
    match msg {
        EventMessage::Media(m) => Traffic::event(&m.event_type),
        EventMessage::Control(c) => match c.control_type {
            ControlType::Join | ControlType::Resync | ControlType::AddMaterial => Traffic::Bootstrap,
            ControlType::Leave | ControlType::StartReplay | ControlType::EndReplay => Traffic::event(c.control_type.as_str()),
        },
    }
}

/// Join control event as a client would send it.
pub fn join_message(session_id: &str, client_id: &str, role: Role, timestamp: u64) -> ControlEventMessage {
    ControlEventMessage {
        control_type: ControlType::Join,
        seq_id: 0,
        timestamp,
        description: format!("{client_id} joins as {role}"),
        data: Some(Data::from([
            (keys::CLIENT_ID.to_string(), Value::from(client_id)),
            (keys::ROLE.to_string(), Value::from(role.as_str())),
            (keys::SESSION_ID.to_string(), Value::from(session_id)),
        ])),
    }
}

/// A navigation is allowed to the origin already shown or to a declared
/// material.
fn navigation_allowed(current: &str, target: &str, materials: &BTreeMap<String, MaterialDescriptor>) -> bool {
    if materials.values().any(|m| m.source == target) {
        return true;
    }
    match (Url::parse(current), Url::parse(target)) {
        (Ok(a), Ok(b)) => b.origin().is_tuple() && a.origin() == b.origin(),
        _ => false,
    }
}

pub struct SessionServer {
    sessions: RwLock<BTreeMap<String, Arc<Mutex<Session>>>>,
    clock: Arc<dyn Clock>,
    store: Arc<dyn LogStore>,
    tree: HandlerTree,
    policy: RolePolicy,
    next_id: AtomicU64,
}

impl fmt::Debug for SessionServer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SessionServer")
            .field("sessions", &self.session_ids())
            .field("policy", &self.policy)
            .finish()
    }
}

impl SessionServer {
    pub fn new(clock: Arc<dyn Clock>, store: Arc<dyn LogStore>, policy: RolePolicy) -> Self {
        SessionServer {
            sessions: RwLock::new(BTreeMap::new()),
            clock,
            store,
            tree: HandlerTree::standard(),
            policy,
            next_id: AtomicU64::new(1),
        }
    }

    /// In-memory server on the system clock with the default policy.
    pub fn in_memory() -> Self {
        Self::new(Arc::new(SystemClock), Arc::new(MemoryStore::new()), RolePolicy::default())
    }

    pub fn with_tree(mut self, tree: HandlerTree) -> Self {
        self.tree = tree;
        self
    }

    pub fn tree(&self) -> &HandlerTree {
        &self.tree
    }

    pub fn policy(&self) -> RolePolicy {
        self.policy
    }

    pub fn session_ids(&self) -> Vec<String> {
        self.sessions.read().unwrap_or_else(|e| e.into_inner()).keys().cloned().collect()
    }

    /// Opens an empty session. `presenter_id` is informational; the
    /// presenter still joins like any other client.
    pub fn create_session(&self, presenter_id: &str) -> String {
        let _ = presenter_id;
        let mut sessions = self.sessions.write().unwrap_or_else(|e| e.into_inner());
        let id = loop {
            let candidate = format!("s{}", self.next_id.fetch_add(1, Ordering::Relaxed));
            if !sessions.contains_key(&candidate) {
                break candidate;
            }
        };
        let session = Session::new(id.clone(), self.clock.now_ms());
        sessions.insert(id.clone(), Arc::new(Mutex::new(session)));
        id
    }

    fn session(&self, session_id: &str) -> Result<Arc<Mutex<Session>>, SessionError> {
        self.sessions
            .read()
            .unwrap_or_else(|e| e.into_inner())
            .get(session_id)
            .cloned()
            .ok_or_else(|| SessionError::UnknownSession(session_id.to_string()))
    }

    fn with_session<T>(&self, session_id: &str, f: impl FnOnce(&mut Session) -> T) -> Result<T, SessionError> {
        let session = self.session(session_id)?;
        let mut guard: MutexGuard<'_, Session> = session.lock().unwrap_or_else(|e| e.into_inner());
        Ok(f(&mut guard))
    }

    /// Joins `client_id` with a synthesized join message.
    pub fn join(&self, session_id: &str, client_id: &str, role: Role, outbox: Outbox) -> Result<JoinAck, SessionError> {
        let msg = join_message(session_id, client_id, role, 0);
        self.join_with(&msg, 0, outbox)
    }

    /// Joins using the text of a client's first frame.
    pub fn join_frame(&self, text: &str, outbox: Outbox) -> Result<JoinAck, SessionError> {
        match deserialize(text.as_bytes())? {
            EventMessage::Control(c) if c.control_type == ControlType::Join => self.join_with(&c, text.len(), outbox),
            _ => Err(SessionError::JoinRequired),
        }
    }

    fn join_with(&self, msg: &ControlEventMessage, frame_len: usize, outbox: Outbox) -> Result<JoinAck, SessionError> {
        msg.validate()?;
        let session_id = msg.get_str(keys::SESSION_ID).unwrap_or_default();
        let client_id = msg.get_str(keys::CLIENT_ID).unwrap_or_default().to_string();
        let role: Role = msg.get_str(keys::ROLE).unwrap_or_default().parse()?;
        if client_id.is_empty() {
            return Err(ProtocolError::invalid("data.client_id", "must not be empty").into());
        }
        let session = self.session(session_id)?;
        let mut s = session.lock().unwrap_or_else(|e| e.into_inner());
        if s.clients.contains_key(&client_id) {
            return Err(SessionError::DuplicateClient(client_id));
        }
        if msg.seq_id != 0 {
            return Err(SessionError::SeqGap { expected: 0, got: msg.seq_id });
        }
        let at = s.stamp(self.clock.as_ref());
        s.meter.record(Direction::Up, frame_len as u64, &Traffic::Bootstrap, at);

        let ack = JoinAck {
            session_id: s.id.clone(),
            client_id: client_id.clone(),
            started_at: s.started_at,
            global_seq: s.log.len() as u64,
            materials: s.materials.values().cloned().collect(),
            snapshot: s.snapshot(),
        };
        let entry = self.append(&mut s, &client_id, EventMessage::Control(msg.clone()), None, at)?;
        s.clients.insert(client_id.clone(), ClientSlot { role, next_seq: 1, outbox });
        let text: Arc<str> = ServerFrame::JoinAck(ack.clone()).encode().into();
        s.send(&client_id, text, &Traffic::Bootstrap, at);
        s.broadcast(&entry);
        Ok(ack)
    }

    /// Submits a message already in memory. Its canonical size is metered
    /// as upload.
    pub fn submit(&self, session_id: &str, client_id: &str, msg: &EventMessage) -> Result<Outcome, SessionError> {
        let bytes = serialize(msg)?;
        self.submit_frame(session_id, client_id, std::str::from_utf8(&bytes).expect("canonical encoding is UTF-8"))
    }

    /// Submits one client text frame.
    pub fn submit_frame(&self, session_id: &str, client_id: &str, text: &str) -> Result<Outcome, SessionError> {
        let session = self.session(session_id)?;
        let mut s = session.lock().unwrap_or_else(|e| e.into_inner());
        if !s.clients.contains_key(client_id) {
            return Err(SessionError::NotJoined(client_id.to_string()));
        }
        let at = s.stamp(self.clock.as_ref());
        let result = match deserialize(text.as_bytes()) {
            Err(e) => {
                s.meter.record(Direction::Up, text.len() as u64, &Traffic::Overhead, at);
                Err(SessionError::BadMessage(e))
            }
            Ok(msg) => {
                s.meter.record(Direction::Up, text.len() as u64, &traffic_class(&msg), at);
                self.process(&mut s, client_id, msg, at)
            }
        };
        if let Err(e) = &result {
            s.notify(client_id, e, at);
        }
        result
    }

    /// Removes a client, logging a synthesized leave.
    pub fn leave(&self, session_id: &str, client_id: &str) -> Result<u64, SessionError> {
        let session = self.session(session_id)?;
        let mut s = session.lock().unwrap_or_else(|e| e.into_inner());
        let seq_id = s
            .clients
            .get(client_id)
            .map(|slot| slot.next_seq)
            .ok_or_else(|| SessionError::NotJoined(client_id.to_string()))?;
        let at = s.stamp(self.clock.as_ref());
        let msg = ControlEventMessage {
            control_type: ControlType::Leave,
            seq_id,
            timestamp: at,
            description: format!("{client_id} left"),
            data: None,
        };
        match self.process(&mut s, client_id, msg.into(), at)? {
            Outcome::Logged(seq) => Ok(seq),
            Outcome::Resync(_) => unreachable!("leave is always logged"),
        }
    }

    /// Current state of one block, as a resync control event sent to the
    /// requesting client.
    pub fn resync(&self, session_id: &str, client_id: &str, media_id: &str) -> Result<ControlEventMessage, SessionError> {
        let session = self.session(session_id)?;
        let mut s = session.lock().unwrap_or_else(|e| e.into_inner());
        if !s.clients.contains_key(client_id) {
            return Err(SessionError::NotJoined(client_id.to_string()));
        }
        let at = s.stamp(self.clock.as_ref());
        Self::answer_resync(&mut s, client_id, media_id, at)
    }

    fn answer_resync(s: &mut Session, client_id: &str, media_id: &str, at: u64) -> Result<ControlEventMessage, SessionError> {
        let state = s
            .states
            .get(media_id)
            .ok_or_else(|| SessionError::UnknownMedia(media_id.to_string()))?;
        let reply = ControlEventMessage {
            control_type: ControlType::Resync,
            seq_id: s.log.len() as u64,
            timestamp: at,
            description: format!("resync {media_id}"),
            data: Some(Data::from([
                (keys::MEDIA_ID.to_string(), Value::from(media_id)),
                (keys::MEDIA_STATE.to_string(), Value::from(serialize_state(state))),
            ])),
        };
        let text: Arc<str> = ServerFrame::Resync(reply.clone()).encode().into();
        s.send(client_id, text, &Traffic::Bootstrap, at);
        Ok(reply)
    }

    fn may_drive(&self, role: Role) -> bool {
        self.policy == RolePolicy::AllParticipants || role == Role::Presenter
    }

    fn process(&self, s: &mut Session, client_id: &str, msg: EventMessage, at: u64) -> Result<Outcome, SessionError> {
        let slot = s.clients.get_mut(client_id).ok_or_else(|| SessionError::NotJoined(client_id.to_string()))?;
        if msg.seq_id() != slot.next_seq {
            return Err(SessionError::SeqGap {
                expected: slot.next_seq,
                got: msg.seq_id(),
            });
        }
        slot.next_seq += 1;
        let role = slot.role;

        match msg {
            EventMessage::Media(m) => {
                if !self.may_drive(role) {
                    return Err(SessionError::Forbidden(format!("{role} clients may not submit media events")));
                }
                let outcome = self.check_navigation(s, &m).and_then(|()| {
                    self.tree.route(&s.states, &m).map_err(|e| e.to_string())
                });
                match outcome {
                    Ok(result) => {
                        let entry = self.append(s, client_id, m.into(), None, at)?;
                        s.states.insert(result.media_id, result.new_state);
                        s.broadcast(&entry);
                        Ok(Outcome::Logged(entry.global_seq))
                    }
                    Err(reason) => self.append_rejected(s, client_id, m.into(), reason, at),
                }
            }
            EventMessage::Control(c) => match c.control_type {
                ControlType::Join => Err(SessionError::DuplicateClient(client_id.to_string())),
                ControlType::Resync => {
                    let media_id = c.get_str(keys::MEDIA_ID).unwrap_or_default().to_string();
                    Self::answer_resync(s, client_id, &media_id, at).map(Outcome::Resync)
                }
                ControlType::AddMaterial => {
                    if !self.may_drive(role) {
                        return Err(SessionError::Forbidden(format!("{role} clients may not add materials")));
                    }
                    let media_id = c.get_str(keys::MEDIA_ID).unwrap_or_default().to_string();
                    if s.materials.contains_key(&media_id) {
                        return self.append_rejected(s, client_id, c.into(), format!("media id `{media_id}` already registered"), at);
                    }
                    let media_type: MediaType = c.get_str(keys::MEDIA_TYPE).unwrap_or_default().parse()?;
                    let source = c.get_str(keys::SOURCE).unwrap_or_default().to_string();
                    let entry = self.append(s, client_id, c.into(), None, at)?;
                    s.states.insert(media_id.clone(), MediaState::initial(&media_id, media_type, &source));
                    s.materials.insert(
                        media_id.clone(),
                        MaterialDescriptor {
                            media_id,
                            media_type,
                            source,
                            added_at: at,
                        },
                    );
                    s.broadcast(&entry);
                    Ok(Outcome::Logged(entry.global_seq))
                }
                ControlType::Leave => {
                    let entry = self.append(s, client_id, c.into(), None, at)?;
                    s.broadcast(&entry);
                    s.clients.remove(client_id);
                    Ok(Outcome::Logged(entry.global_seq))
                }
                ControlType::StartReplay | ControlType::EndReplay => {
                    if !self.may_drive(role) {
                        return Err(SessionError::Forbidden(format!("{role} clients may not control replay")));
                    }
                    let entry = self.append(s, client_id, c.into(), None, at)?;
                    s.broadcast(&entry);
                    Ok(Outcome::Logged(entry.global_seq))
                }
            },
        }
    }

    fn check_navigation(&self, s: &Session, m: &MediaEventMessage) -> Result<(), String> {
        if m.media_type != MediaType::Webpage || m.event_type != "navigate" {
            return Ok(());
        }
        let Some(MediaBody::Webpage(page)) = s.states.get(&m.media_id).map(|st| &st.body) else {
            return Ok(());
        };
        let target = m.get("url").and_then(Value::as_str).unwrap_or_default();
        if navigation_allowed(&page.url, target, &s.materials) {
            Ok(())
        } else {
            Err(format!("navigation to `{target}` leaves the page origin and is not a declared material"))
        }
    }

    fn append(
        &self,
        s: &mut Session,
        sender_id: &str,
        message: EventMessage,
        error: Option<String>,
        at: u64,
    ) -> Result<SessionLogEntry, SessionError> {
        let entry = SessionLogEntry {
            global_seq: s.log.len() as u64,
            sender_id: sender_id.to_string(),
            received_at: at,
            message,
            error,
        };
        self.store.append(&s.id, &entry)?;
        s.log.push(entry.clone());
        Ok(entry)
    }

    fn append_rejected(
        &self,
        s: &mut Session,
        sender_id: &str,
        message: EventMessage,
        reason: String,
        at: u64,
    ) -> Result<Outcome, SessionError> {
        let entry = self.append(s, sender_id, message, Some(reason.clone()), at)?;
        s.broadcast(&entry);
        Err(SessionError::Rejected {
            global_seq: entry.global_seq,
            reason,
        })
    }

    pub fn log(&self, session_id: &str) -> Result<Vec<SessionLogEntry>, SessionError> {
        self.with_session(session_id, |s| s.log.clone())
    }

    pub fn states(&self, session_id: &str) -> Result<StateMap, SessionError> {
        self.with_session(session_id, |s| s.states.clone())
    }

    pub fn materials(&self, session_id: &str) -> Result<Vec<MaterialDescriptor>, SessionError> {
        self.with_session(session_id, |s| s.materials.values().cloned().collect())
    }

    pub fn clients(&self, session_id: &str) -> Result<Vec<(String, Role)>, SessionError> {
        self.with_session(session_id, |s| s.clients.iter().map(|(id, c)| (id.clone(), c.role)).collect())
    }

    pub fn next_global_seq(&self, session_id: &str) -> Result<u64, SessionError> {
        self.with_session(session_id, |s| s.log.len() as u64)
    }

    /// Next `seq-id` the server expects from a joined client.
    pub fn expected_seq(&self, session_id: &str, client_id: &str) -> Result<u64, SessionError> {
        self.with_session(session_id, |s| s.clients.get(client_id).map(|c| c.next_seq))?
            .ok_or_else(|| SessionError::NotJoined(client_id.to_string()))
    }

    pub fn started_at(&self, session_id: &str) -> Result<u64, SessionError> {
        self.with_session(session_id, |s| s.started_at)
    }

    /// Byte accounting so far, padded to the elapsed session time.
    pub fn report(&self, session_id: &str) -> Result<BandwidthReport, SessionError> {
        let now = self.clock.now_ms();
        self.with_session(session_id, |s| {
            let mut report = s.meter.clone();
            report.extend_to(now.saturating_sub(s.started_at).div_ceil(1000));
            report
        })
    }

    /// Meters one download of a page or asset served outside the socket.
    pub fn record_asset(&self, session_id: &str, bytes: u64) -> Result<(), SessionError> {
        let session = self.session(session_id)?;
        let mut s = session.lock().unwrap_or_else(|e| e.into_inner());
        let at = s.stamp(self.clock.as_ref());
        s.meter.record(Direction::Down, bytes, &Traffic::Bootstrap, at);
        Ok(())
    }

    pub fn persist_log(&self, session_id: &str, path: &Path) -> Result<(), SessionError> {
        let log = self.log(session_id)?;
        persist_log(path, &log).map_err(|e| SessionError::Store(e.to_string()))
    }

    /// Rebuilds a session from its log. Membership starts empty and time
    /// resumes after the last entry.
    pub fn restore(&self, session_id: &str, entries: Vec<SessionLogEntry>) -> Result<(), SessionError> {
        let mut replayer = Replayer::new(entries.clone(), &self.tree);
        replayer.replay_to_end();
        let last = entries.last().map_or(0, |e| e.received_at);
        let mut session = Session::new(session_id.to_string(), self.clock.now_ms().saturating_sub(last));
        session.materials = replayer.materials().clone();
        session.states = replayer.states().clone();
        session.log = entries;
        session.last_received_at = last;
        let mut sessions = self.sessions.write().unwrap_or_else(|e| e.into_inner());
        if sessions.contains_key(session_id) {
            return Err(SessionError::Store(format!("session `{session_id}` already exists")));
        }
        sessions.insert(session_id.to_string(), Arc::new(Mutex::new(session)));
        Ok(())
    }

    /// Restores every session found in the store. Returns how many.
    pub fn restore_from_store(&self) -> Result<usize, SessionError> {
        let ids = self.store.session_ids()?;
        for id in &ids {
            let entries = self.store.load(id)?;
            self.restore(id, entries)?;
        }
        Ok(ids.len())
    }
}
