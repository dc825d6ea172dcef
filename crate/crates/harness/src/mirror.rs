//! Client-side view of a session, rebuilt from server frames alone.

use std::sync::Arc;

use mediasync_core::handler::HandlerTree;
use mediasync_core::media::{deserialize_state, serialize_state, MediaState, StateMap};
use mediasync_core::protocol::{keys, ControlEventMessage, ControlType, EventMessage, MediaType};
use mediasync_core::session::{ErrorNotice, ServerFrame};

use crate::oracle::state_texts;

pub struct Mirror {
    pub client_id: String,
    tree: HandlerTree,
    pub states: StateMap,
    /// Global seq announced by the join ack.
    pub first_seq: Option<u64>,
    next_seq: u64,
    pub entries: Vec<Arc<str>>,
    pub received: Vec<u64>,
    pub resyncs: Vec<ControlEventMessage>,
    pub notices: Vec<ErrorNotice>,
    pub bytes_down: u64,
    pub problems: Vec<String>,
}

impl Mirror {
    pub fn new(client_id: &str) -> Self {
        Mirror {
            client_id: client_id.to_string(),
            tree: HandlerTree::standard(),
            states: StateMap::new(),
            first_seq: None,
            next_seq: 0,
            entries: Vec::new(),
            received: Vec::new(),
            resyncs: Vec::new(),
            notices: Vec::new(),
            bytes_down: 0,
            problems: Vec::new(),
        }
    }

    pub fn joined(&self) -> bool {
        self.first_seq.is_some()
    }

    /// Global seq of the next entry this client should receive.
    pub fn next_seq(&self) -> u64 {
        self.next_seq
    }

    pub fn state_texts(&self) -> std::collections::BTreeMap<String, String> {
        state_texts(&self.states)
    }

    pub fn on_frame(&mut self, text: Arc<str>) {
        self.bytes_down += text.len() as u64;
        let frame = match ServerFrame::decode(&text) {
            Ok(frame) => frame,
            Err(e) => return self.problem(format!("undecodable frame: {e}")),
        };
        match frame {
            ServerFrame::JoinAck(ack) => {
                if self.first_seq.is_some() {
                    return self.problem("second join ack".into());
                }
                self.first_seq = Some(ack.global_seq);
                self.next_seq = ack.global_seq;
                for (media_id, state) in &ack.snapshot {
                    match deserialize_state(state) {
                        Ok(s) => {
                            self.states.insert(media_id.clone(), s);
                        }
                        Err(e) => self.problem(format!("bad snapshot for `{media_id}`: {e}")),
                    }
                }
            }
            ServerFrame::Entry(entry) => {
                if !self.joined() {
                    return self.problem(format!("entry {} before join ack", entry.global_seq));
                }
                if entry.global_seq != self.next_seq {
                    self.problem(format!("expected global_seq {}, got {}", self.next_seq, entry.global_seq));
                }
                self.next_seq = entry.global_seq + 1;
                self.received.push(entry.global_seq);
                self.entries.push(text);
                if entry.error.is_some() {
                    return;
                }
                match &entry.message {
                    EventMessage::Media(m) => {
                        if let Err(e) = self.tree.dispatch(&mut self.states, m) {
                            self.problem(format!("cannot apply global_seq {}: {e}", entry.global_seq));
                        }
                    }
                    EventMessage::Control(c) if c.control_type == ControlType::AddMaterial => {
                        let media_id = c.get_str(keys::MEDIA_ID).unwrap_or_default();
                        let source = c.get_str(keys::SOURCE).unwrap_or_default();
                        if let Some(t) = c.get_str(keys::MEDIA_TYPE).and_then(|t| t.parse::<MediaType>().ok()) {
                            self.states
                                .entry(media_id.to_string())
                                .or_insert_with(|| MediaState::initial(media_id, t, source));
                        }
                    }
                    EventMessage::Control(_) => {}
                }
            }
            ServerFrame::Resync(reply) => {
                let media_id = reply.get_str(keys::MEDIA_ID).unwrap_or_default().to_string();
                let text = reply.get_str(keys::MEDIA_STATE).unwrap_or_default();
                match deserialize_state(text) {
                    Ok(state) => {
                        let local = self.states.get(&media_id).map(serialize_state);
                        if local.as_deref() != Some(text) {
                            self.problem(format!("resync of `{media_id}` differs from the local state"));
                        }
                        self.states.insert(media_id, state);
                    }
                    Err(e) => self.problem(format!("bad resync state for `{media_id}`: {e}")),
                }
                self.resyncs.push(reply);
            }
            ServerFrame::Error(notice) => self.notices.push(notice),
        }
    }

    fn problem(&mut self, what: String) {
        self.problems.push(format!("{}: {what}", self.client_id));
    }
}
