//! Log entries and the newline-delimited log file format.
//!
//! One envelope per line, LF-terminated:
//!
//! ```text
//! {"global-seq":0,"sender-id":"alice","received-at":0,"message":{"kind":"control-event",...}}
//! ```
//!
//! An entry whose message was rejected by dispatch carries a trailing
//! `"error"` field with the reason.

use std::fs;
use std::io;
use std::path::Path;

use serde_json::Value as Json;
use thiserror::Error;

use crate::protocol::{decode_message, write_message, write_str, EventMessage, JsonObject, ProtocolError};

/// A server-stamped message: the unit of recording and replay.
#[derive(Clone, Debug, PartialEq)]
pub struct SessionLogEntry {
    pub global_seq: u64,
    pub sender_id: String,
    /// Milliseconds since session start.
    pub received_at: u64,
    pub message: EventMessage,
    /// Set when the message was ordered but could not be applied.
    pub error: Option<String>,
}

impl SessionLogEntry {
    pub fn is_error(&self) -> bool {
        self.error.is_some()
    }
}

#[derive(Debug, Error)]
pub enum LogError {
    #[error("line {line}: {reason}")]
    Corrupt { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl LogError {
    /// The 1-based line at fault, if the log content is to blame.
    pub fn line(&self) -> Option<usize> {
        match self {
            LogError::Corrupt { line, .. } => Some(*line),
            LogError::Io(_) => None,
        }
    }
}

/// Canonical envelope text of one entry, without a line terminator.
pub fn encode_entry(entry: &SessionLogEntry) -> String {
    let mut out = String::with_capacity(256);
    write_envelope(&mut out, entry, None);
    out
}

/// Envelope text together with the byte span of the embedded message.
pub(crate) fn encode_entry_with_span(entry: &SessionLogEntry) -> (String, usize) {
    let mut out = String::with_capacity(256);
    let mut len = 0;
    write_envelope(&mut out, entry, Some(&mut len));
    (out, len)
}

fn write_envelope(out: &mut String, entry: &SessionLogEntry, message_len: Option<&mut usize>) {
    out.push_str("{\"global-seq\":");
    out.push_str(&entry.global_seq.to_string());
    out.push_str(",\"sender-id\":");
    write_str(out, &entry.sender_id);
    out.push_str(",\"received-at\":");
    out.push_str(&entry.received_at.to_string());
    out.push_str(",\"message\":");
    let start = out.len();
    write_message(out, &entry.message);
    if let Some(len) = message_len {
        *len = out.len() - start;
    }
    if let Some(error) = &entry.error {
        out.push_str(",\"error\":");
        write_str(out, error);
    }
    out.push('}');
}

/// Parses one canonical envelope.
pub fn decode_entry(text: &str) -> Result<SessionLogEntry, ProtocolError> {
    let obj = JsonObject::parse(text.as_bytes())?;
    let entry = entry_from_object(obj)?;
    if encode_entry(&entry) != text {
        return Err(ProtocolError::NonCanonical);
    }
    Ok(entry)
}

pub(crate) fn entry_from_object(mut obj: JsonObject) -> Result<SessionLogEntry, ProtocolError> {
    let global_seq = obj.take_u64("global-seq")?;
    let sender_id = obj.take_str("sender-id")?;
    let received_at = obj.take_u64("received-at")?;
    let message = decode_message(JsonObject::from_json(obj.take("message")?, "message")?)?;
    let error = match obj.take_opt("error") {
        None => None,
        Some(Json::String(s)) => Some(s),
        Some(_) => return Err(ProtocolError::invalid("error", "expected string")),
    };
    obj.finish()?;
    Ok(SessionLogEntry {
        global_seq,
        sender_id,
        received_at,
        message,
        error,
    })
}

/// Log file content for `entries`.
pub fn encode_log(entries: &[SessionLogEntry]) -> String {
    let mut out = String::new();
    for entry in entries {
        write_envelope(&mut out, entry, None);
        out.push('\n');
    }
    out
}

/// Parses log file content. Sequence numbers must run from 0 without gaps
/// and receive times must not decrease.
pub fn decode_log(text: &str) -> Result<Vec<SessionLogEntry>, LogError> {
    let mut entries = Vec::new();
    let mut rest = text;
    let mut line_no = 0;
    while !rest.is_empty() {
        line_no += 1;
        let corrupt = |reason: String| LogError::Corrupt { line: line_no, reason };
        let Some(end) = rest.find('\n') else {
            return Err(corrupt("truncated line: missing LF terminator".into()));
        };
        let line = &rest[..end];
        rest = &rest[end + 1..];
        let entry = decode_entry(line).map_err(|e| corrupt(e.to_string()))?;
        if entry.global_seq != entries.len() as u64 {
            return Err(corrupt(format!("global-seq {} where {} was expected", entry.global_seq, entries.len())));
        }
        if let Some(prev) = entries.last().map(|e: &SessionLogEntry| e.received_at) {
            if entry.received_at < prev {
                return Err(corrupt(format!("received-at {} precedes {prev}", entry.received_at)));
            }
        }
        entries.push(entry);
    }
    Ok(entries)
}

pub fn persist_log(path: &Path, entries: &[SessionLogEntry]) -> io::Result<()> {
    fs::write(path, encode_log(entries))
}

pub fn load_log(path: &Path) -> Result<Vec<SessionLogEntry>, LogError> {
    let text = fs::read_to_string(path)?;
    decode_log(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::{ControlEventMessage, ControlType, Data, MediaEventMessage, MediaType, Value};

    fn entries() -> Vec<SessionLogEntry> {
        let join = ControlEventMessage {
            control_type: ControlType::Join,
            seq_id: 0,
            timestamp: 0,
            description: "join".into(),
            data: Some(Data::from([
                ("client_id".into(), Value::from("alice")),
                ("role".into(), Value::from("presenter")),
                ("session_id".into(), Value::from("s1")),
            ])),
        };
        let play = MediaEventMessage {
            media_type: MediaType::Video,
            media_id: "video-block".into(),
            event_type: "play".into(),
            seq_id: 1,
            timestamp: 1200,
            description: "play".into(),
            data: None,
        };
        vec![
            SessionLogEntry {
                global_seq: 0,
                sender_id: "alice".into(),
                received_at: 0,
                message: join.into(),
                error: None,
            },
            SessionLogEntry {
                global_seq: 1,
                sender_id: "alice".into(),
                received_at: 1210,
                message: play.into(),
                error: Some("unknown media block `video-block`".into()),
            },
        ]
    }

    #[test]
    fn envelope_layout() {
        let text = encode_entry(&entries()[1]);
        assert_eq!(
            text,
            r#"{"global-seq":1,"sender-id":"alice","received-at":1210,"message":{"kind":"media-event","media-type":"video","media-id":"video-block","event-type":"play","seq-id":1,"timestamp":1200,"description":"play"},"error":"unknown media block `video-block`"}"#
        );
        assert_eq!(decode_entry(&text).unwrap(), entries()[1]);
        let (again, message_len) = encode_entry_with_span(&entries()[1]);
        assert_eq!(again, text);
        assert_eq!(message_len, crate::protocol::wire_size(&entries()[1].message).unwrap());
    }

    #[test]
    fn persist_then_load_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s1.log");
        persist_log(&path, &entries()).unwrap();
        assert_eq!(load_log(&path).unwrap(), entries());
        let size = fs::metadata(&path).unwrap().len() as usize;
        assert_eq!(size, entries().iter().map(|e| encode_entry(e).len() + 1).sum::<usize>());
    }

    #[test]
    fn truncated_final_line_is_reported() {
        let text = encode_log(&entries());
        let cut = &text[..text.len() - 10];
        let err = decode_log(cut).unwrap_err();
        assert_eq!(err.line(), Some(2));
        let unterminated = &text[..text.len() - 1];
        assert_eq!(decode_log(unterminated).unwrap_err().line(), Some(2));
    }

    #[test]
    fn gaps_and_reordering_are_rejected() {
        let mut list = entries();
        list[1].global_seq = 2;
        assert_eq!(decode_log(&encode_log(&list)).unwrap_err().line(), Some(2));
        let mut list = entries();
        list[0].received_at = 5000;
        assert_eq!(decode_log(&encode_log(&list)).unwrap_err().line(), Some(2));
        assert!(decode_log("").unwrap().is_empty());
    }

    #[test]
    fn whitespace_variants_are_not_canonical() {
        let text = encode_entry(&entries()[0]).replacen(":", ": ", 1);
        assert_eq!(decode_entry(&text), Err(ProtocolError::NonCanonical));
    }
}
