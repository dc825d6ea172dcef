//! Media and control event messages and their canonical wire encoding.
//!
//! Every message is one UTF-8 JSON object with a fixed key order
//! (`kind`, the message fields, then `data`) and no whitespace:
//!
//! ```text
//! {"kind":"media-event","media-type":"image","media-id":"image-block","event-type":"mouse-scroll","seq-id":8,"timestamp":5000,"description":"zoom out an image","data":{"delta":-1.5}}
//! ```
//!
//! [`deserialize`] accepts only canonical encodings: anything that would not
//! re-encode to the same bytes is rejected.

mod codec;
mod value;

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::media::taxonomy;

pub(crate) use codec::{decode_message, write_message, write_str, JsonObject};
pub use codec::{deserialize, serialize, wire_size};
pub use value::{Data, DataKind, Num, Scalar, Value, NUM_LIMIT};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProtocolError {
    #[error("missing document")]
    MissingDocument,
    #[error("malformed encoding: {0}")]
    Malformed(String),
    #[error("missing field `{0}`")]
    MissingField(String),
    #[error("invalid field `{field}`: {reason}")]
    InvalidField { field: String, reason: String },
    #[error("unknown kind `{0}`")]
    UnknownKind(String),
    #[error("unknown {field} `{value}`")]
    UnknownEnumerant { field: String, value: String },
    #[error("unknown field `{0}`")]
    UnknownField(String),
    #[error("non-canonical encoding")]
    NonCanonical,
}

impl ProtocolError {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        ProtocolError::InvalidField {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MediaType {
    Video,
    Image,
    Pdf,
    Webpage,
    Whiteboard,
}

impl MediaType {
    pub const ALL: [MediaType; 5] = [
        MediaType::Video,
        MediaType::Image,
        MediaType::Pdf,
        MediaType::Webpage,
        MediaType::Whiteboard,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MediaType::Video => "video",
            MediaType::Image => "image",
            MediaType::Pdf => "pdf",
            MediaType::Webpage => "webpage",
            MediaType::Whiteboard => "whiteboard",
        }
    }
}

impl FromStr for MediaType {
    type Err = ProtocolError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        MediaType::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| ProtocolError::UnknownEnumerant {
                field: "media-type".into(),
                value: s.into(),
            })
    }
}

impl fmt::Display for MediaType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl serde::Serialize for MediaType {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

impl<'de> serde::Deserialize<'de> for MediaType {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = <std::borrow::Cow<'de, str>>::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ControlType {
    Resync,
    Join,
    Leave,
    AddMaterial,
    StartReplay,
    EndReplay,
}

impl ControlType {
    pub const ALL: [ControlType; 6] = [
        ControlType::Resync,
        ControlType::Join,
        ControlType::Leave,
        ControlType::AddMaterial,
        ControlType::StartReplay,
        ControlType::EndReplay,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ControlType::Resync => "resync",
            ControlType::Join => "join",
            ControlType::Leave => "leave",
            ControlType::AddMaterial => "add-material",
            ControlType::StartReplay => "start-replay",
            ControlType::EndReplay => "end-replay",
        }
    }

    /// Data keys this control type requires. No other keys are permitted.
    pub fn data_keys(self) -> &'static [&'static str] {
        match self {
            ControlType::Resync => &[keys::MEDIA_ID, keys::MEDIA_STATE],
            ControlType::Join => &[keys::SESSION_ID, keys::CLIENT_ID, keys::ROLE],
            ControlType::AddMaterial => &[keys::MEDIA_ID, keys::MEDIA_TYPE, keys::SOURCE],
            ControlType::Leave | ControlType::StartReplay | ControlType::EndReplay => &[],
        }
    }
}

impl FromStr for ControlType {
    type Err = ProtocolError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ControlType::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| ProtocolError::UnknownEnumerant {
                field: "control-type".into(),
                value: s.into(),
            })
    }
}

impl fmt::Display for ControlType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Data keys used by control events.
pub mod keys {
    pub const MEDIA_ID: &str = "media-id";
    pub const MEDIA_STATE: &str = "media-state";
    pub const MEDIA_TYPE: &str = "media-type";
    pub const SOURCE: &str = "source";
    pub const SESSION_ID: &str = "session_id";
    pub const CLIENT_ID: &str = "client_id";
    pub const ROLE: &str = "role";
}

/// An action on one media block.
#[derive(Clone, Debug, PartialEq)]
pub struct MediaEventMessage {
    pub media_type: MediaType,
    pub media_id: String,
    pub event_type: String,
    pub seq_id: u64,
    pub timestamp: u64,
    pub description: String,
    pub data: Option<Data>,
}

impl MediaEventMessage {
    /// Looks up a data value by key.
    pub fn get(&self, key: &str) -> Option<&Value> {
        self.data.as_ref().and_then(|d| d.get(key))
    }

    pub fn validate(&self) -> Result<(), ProtocolError> {
        if self.media_id.is_empty() {
            return Err(ProtocolError::invalid("media-id", "must not be empty"));
        }
        let entry = taxonomy::lookup(self.media_type, &self.event_type).ok_or_else(|| {
            ProtocolError::UnknownEnumerant {
                field: "event-type".into(),
                value: format!("{}/{}", self.media_type, self.event_type),
            }
        })?;
        if let Some(data) = &self.data {
            for (key, value) in data {
                let kind = entry.kind_of(key).ok_or_else(|| {
                    ProtocolError::invalid(format!("data.{key}"), "key not permitted for this event")
                })?;
                if !value.conforms(kind) {
                    return Err(ProtocolError::invalid(format!("data.{key}"), format!("expected {kind}")));
                }
            }
        }
        Ok(())
    }
}

/// A session-level action.
#[derive(Clone, Debug, PartialEq)]
pub struct ControlEventMessage {
    pub control_type: ControlType,
    pub seq_id: u64,
    pub timestamp: u64,
    pub description: String,
    pub data: Option<Data>,
}

impl ControlEventMessage {
    pub fn get(&self, key: &str) -> Option<&Value> {
        self.data.as_ref().and_then(|d| d.get(key))
    }

    /// String data value, if present.
    pub fn get_str(&self, key: &str) -> Option<&str> {
        self.get(key).and_then(Value::as_str)
    }

    pub fn validate(&self) -> Result<(), ProtocolError> {
        let allowed = self.control_type.data_keys();
        let empty = Data::new();
        let data = self.data.as_ref().unwrap_or(&empty);
        for key in data.keys() {
            if !allowed.contains(&key.as_str()) {
                return Err(ProtocolError::invalid(format!("data.{key}"), "key not permitted for this control event"));
            }
        }
        for key in allowed {
            match data.get(*key) {
                None => return Err(ProtocolError::MissingField(format!("data.{key}"))),
                Some(value) if value.as_str().is_none() => {
                    return Err(ProtocolError::invalid(format!("data.{key}"), "expected string"))
                }
                Some(_) => {}
            }
        }
        if self.control_type == ControlType::AddMaterial {
            let media_type = self.get_str(keys::MEDIA_TYPE).unwrap_or_default();
            media_type.parse::<MediaType>()?;
            if self.get_str(keys::MEDIA_ID).is_some_and(str::is_empty) {
                return Err(ProtocolError::invalid("data.media-id", "must not be empty"));
            }
        }
        if self.control_type == ControlType::Join {
            let role = self.get_str(keys::ROLE).unwrap_or_default();
            if !matches!(role, "presenter" | "audience") {
                return Err(ProtocolError::UnknownEnumerant {
                    field: "data.role".into(),
                    value: role.into(),
                });
            }
        }
        Ok(())
    }
}

/// The unit of collaboration on the wire.
#[derive(Clone, Debug, PartialEq)]
pub enum EventMessage {
    Media(MediaEventMessage),
    Control(ControlEventMessage),
}

impl EventMessage {
    pub fn kind(&self) -> &'static str {
        match self {
            EventMessage::Media(_) => "media-event",
            EventMessage::Control(_) => "control-event",
        }
    }

    pub fn seq_id(&self) -> u64 {
        match self {
            EventMessage::Media(m) => m.seq_id,
            EventMessage::Control(c) => c.seq_id,
        }
    }

    pub fn timestamp(&self) -> u64 {
        match self {
            EventMessage::Media(m) => m.timestamp,
            EventMessage::Control(c) => c.timestamp,
        }
    }

    /// The event or control type name, used as the accounting key.
    pub fn type_name(&self) -> &str {
        match self {
            EventMessage::Media(m) => &m.event_type,
            EventMessage::Control(c) => c.control_type.as_str(),
        }
    }

    pub fn validate(&self) -> Result<(), ProtocolError> {
        match self {
            EventMessage::Media(m) => m.validate(),
            EventMessage::Control(c) => c.validate(),
        }
    }
}

impl From<MediaEventMessage> for EventMessage {
    fn from(value: MediaEventMessage) -> Self {
        EventMessage::Media(value)
    }
}

impl From<ControlEventMessage> for EventMessage {
    fn from(value: ControlEventMessage) -> Self {
        EventMessage::Control(value)
    }
}
