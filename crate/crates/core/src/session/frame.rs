//! Server-to-client text frames.
//!
//! | frame        | shape                                                        |
//! |--------------|--------------------------------------------------------------|
//! | log entry    | `{"global-seq":N,"sender-id":S,"received-at":T,"message":{}}` |
//! | join ack     | `{"kind":"join-ack","session-id":..,"snapshot":{..},..}`      |
//! | error notice | `{"kind":"error","code":..,"message":..}`                     |
//! | resync reply | a canonical `resync` control event                           |

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value as Json;

use super::log::{decode_entry, encode_entry, SessionLogEntry};
use super::MaterialDescriptor;
use crate::protocol::{deserialize, serialize, ControlEventMessage, ControlType, EventMessage, ProtocolError};

/// Reply to a join: everything a client needs to mirror the live session.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct JoinAck {
    pub session_id: String,
    pub client_id: String,
    /// Session start, milliseconds since the Unix epoch.
    pub started_at: u64,
    /// Sequence number of the first entry the client will receive.
    pub global_seq: u64,
    pub materials: Vec<MaterialDescriptor>,
    /// Serialized state of every block, keyed by media id.
    pub snapshot: BTreeMap<String, String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct ErrorNotice {
    pub code: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected_seq: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub global_seq: Option<u64>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
enum Tagged {
    JoinAck(JoinAck),
    Error(ErrorNotice),
}

#[derive(Clone, Debug, PartialEq)]
pub enum ServerFrame {
    Entry(SessionLogEntry),
    JoinAck(JoinAck),
    Error(ErrorNotice),
    Resync(ControlEventMessage),
}

impl ServerFrame {
    pub fn encode(&self) -> String {
        match self {
            ServerFrame::Entry(entry) => encode_entry(entry),
            ServerFrame::JoinAck(ack) => tagged(Tagged::JoinAck(ack.clone())),
            ServerFrame::Error(notice) => tagged(Tagged::Error(notice.clone())),
            ServerFrame::Resync(msg) => {
                let bytes = serialize(&EventMessage::Control(msg.clone())).expect("resync reply is valid");
                String::from_utf8(bytes).expect("canonical encoding is UTF-8")
            }
        }
    }

    pub fn decode(text: &str) -> Result<ServerFrame, ProtocolError> {
        let value: Json = serde_json::from_str(text).map_err(|e| ProtocolError::Malformed(e.to_string()))?;
        let Json::Object(map) = &value else {
            return Err(ProtocolError::invalid("frame", "expected object"));
        };
        if !map.contains_key("kind") && map.contains_key("global-seq") {
            return decode_entry(text).map(ServerFrame::Entry);
        }
        match map.get("kind").and_then(Json::as_str) {
            Some("control-event") => match deserialize(text.as_bytes())? {
                EventMessage::Control(c) if c.control_type == ControlType::Resync => Ok(ServerFrame::Resync(c)),
                _ => Err(ProtocolError::invalid("frame", "unexpected control event")),
            },
            Some("join-ack" | "error") => match serde_json::from_value::<Tagged>(value) {
                Ok(Tagged::JoinAck(ack)) => Ok(ServerFrame::JoinAck(ack)),
                Ok(Tagged::Error(notice)) => Ok(ServerFrame::Error(notice)),
                Err(e) => Err(ProtocolError::Malformed(e.to_string())),
            },
            Some(other) => Err(ProtocolError::UnknownKind(other.to_string())),
            None => Err(ProtocolError::MissingField("kind".into())),
        }
    }
}

fn tagged(frame: Tagged) -> String {
    serde_json::to_string(&frame).expect("frame serialization")
}
