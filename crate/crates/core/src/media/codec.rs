//! State strings: canonical JSON with lexicographically sorted keys.
//!
//! `{"entries":{...},"media_id":"video-block","media_type":"video"}`
//!
//! Numbers use the shortest text that parses back to the same `f64`, so a
//! state survives any number of round-trips bit for bit.

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value as Json;

use super::{MediaBody, MediaState, StateError};
use crate::protocol::{write_str, JsonObject, MediaType};

pub fn serialize_state(state: &MediaState) -> String {
    let entries = match &state.body {
        MediaBody::Video(v) => to_json(v),
        MediaBody::Image(i) => to_json(i),
        MediaBody::Pdf(p) => to_json(p),
        MediaBody::Webpage(w) => to_json(w),
        MediaBody::Whiteboard(w) => to_json(w),
    };
    let mut out = String::with_capacity(160);
    out.push_str("{\"entries\":");
    write_sorted(&mut out, &entries);
    out.push_str(",\"media_id\":");
    write_str(&mut out, &state.media_id);
    out.push_str(",\"media_type\":");
    write_str(&mut out, state.media_type().as_str());
    out.push('}');
    out
}

pub fn deserialize_state(text: &str) -> Result<MediaState, StateError> {
    let malformed = |e: crate::protocol::ProtocolError| StateError::Malformed(e.to_string());
    let mut obj = JsonObject::parse(text.as_bytes()).map_err(malformed)?;
    let media_id = obj.take_str("media_id").map_err(malformed)?;
    let media_type: MediaType = obj.take_str("media_type").map_err(malformed)?.parse().map_err(malformed)?;
    let entries = obj.take("entries").map_err(malformed)?;
    obj.finish().map_err(malformed)?;

    let body = match media_type {
        MediaType::Video => MediaBody::Video(from_json(entries)?),
        MediaType::Image => MediaBody::Image(from_json(entries)?),
        MediaType::Pdf => MediaBody::Pdf(from_json(entries)?),
        MediaType::Webpage => MediaBody::Webpage(from_json(entries)?),
        MediaType::Whiteboard => MediaBody::Whiteboard(from_json(entries)?),
    };
    let state = MediaState { media_id, body };
    state.validate()?;
    Ok(state)
}

fn to_json<T: Serialize>(value: &T) -> Json {
    // the state structs hold only strings, finite numbers, bools and vectors
    serde_json::to_value(value).expect("state serialization")
}

fn from_json<T: DeserializeOwned>(value: Json) -> Result<T, StateError> {
    serde_json::from_value(value).map_err(|e| StateError::Malformed(e.to_string()))
}

fn write_sorted(out: &mut String, value: &Json) {
    match value {
        Json::Object(map) => {
            let mut fields: Vec<_> = map.iter().collect();
            fields.sort_by(|a, b| a.0.cmp(b.0));
            out.push('{');
            for (i, (key, v)) in fields.into_iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_str(out, key);
                out.push(':');
                write_sorted(out, v);
            }
            out.push('}');
        }
        Json::Array(items) => {
            out.push('[');
            for (i, v) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_sorted(out, v);
            }
            out.push(']');
        }
        Json::String(s) => write_str(out, s),
        other => out.push_str(&other.to_string()),
    }
}
