use serde_json::{Map, Value as Json};

use super::{
    ControlEventMessage, ControlType, Data, EventMessage, MediaEventMessage, MediaType, Num,
    ProtocolError, Scalar, Value,
};

/// Encodes a message into its canonical bytes.
pub fn serialize(msg: &EventMessage) -> Result<Vec<u8>, ProtocolError> {
    msg.validate()?;
    let mut out = String::with_capacity(192);
    write_message(&mut out, msg);
    Ok(out.into_bytes())
}

/// Length in bytes of the canonical encoding.
pub fn wire_size(msg: &EventMessage) -> Result<usize, ProtocolError> {
    serialize(msg).map(|bytes| bytes.len())
}

/// Decodes canonical bytes into a message.
pub fn deserialize(bytes: &[u8]) -> Result<EventMessage, ProtocolError> {
    let msg = decode_message(JsonObject::parse(bytes)?)?;
    let mut canonical = String::with_capacity(bytes.len());
    write_message(&mut canonical, &msg);
    if canonical.as_bytes() != bytes {
        return Err(ProtocolError::NonCanonical);
    }
    Ok(msg)
}

/// Decodes and validates a parsed message object without the canonical
/// byte check.
pub(crate) fn decode_message(mut obj: JsonObject) -> Result<EventMessage, ProtocolError> {
    let msg = match obj.take_str("kind")?.as_str() {
        "media-event" => {
            let media_type = obj.take_str("media-type")?.parse::<MediaType>()?;
            EventMessage::Media(MediaEventMessage {
                media_type,
                media_id: obj.take_str("media-id")?,
                event_type: obj.take_str("event-type")?,
                seq_id: obj.take_u64("seq-id")?,
                timestamp: obj.take_u64("timestamp")?,
                description: obj.take_str("description")?,
                data: obj.take_opt("data").map(|v| decode_data(v, "data")).transpose()?,
            })
        }
        "control-event" => {
            let control_type = obj.take_str("control-type")?.parse::<ControlType>()?;
            EventMessage::Control(ControlEventMessage {
                control_type,
                seq_id: obj.take_u64("seq-id")?,
                timestamp: obj.take_u64("timestamp")?,
                description: obj.take_str("description")?,
                data: obj.take_opt("data").map(|v| decode_data(v, "data")).transpose()?,
            })
        }
        other => return Err(ProtocolError::UnknownKind(other.to_string())),
    };
    obj.finish()?;
    msg.validate()?;
    Ok(msg)
}

pub(crate) fn write_message(out: &mut String, msg: &EventMessage) {
    out.push_str("{\"kind\":");
    write_str(out, msg.kind());
    match msg {
        EventMessage::Media(m) => {
            out.push_str(",\"media-type\":");
            write_str(out, m.media_type.as_str());
            out.push_str(",\"media-id\":");
            write_str(out, &m.media_id);
            out.push_str(",\"event-type\":");
            write_str(out, &m.event_type);
            write_tail(out, m.seq_id, m.timestamp, &m.description, m.data.as_ref());
        }
        EventMessage::Control(c) => {
            out.push_str(",\"control-type\":");
            write_str(out, c.control_type.as_str());
            write_tail(out, c.seq_id, c.timestamp, &c.description, c.data.as_ref());
        }
    }
    out.push('}');
}

fn write_tail(out: &mut String, seq_id: u64, timestamp: u64, description: &str, data: Option<&Data>) {
    out.push_str(",\"seq-id\":");
    out.push_str(&seq_id.to_string());
    out.push_str(",\"timestamp\":");
    out.push_str(&timestamp.to_string());
    out.push_str(",\"description\":");
    write_str(out, description);
    if let Some(data) = data {
        out.push_str(",\"data\":");
        write_data(out, data);
    }
}

pub(crate) fn write_str(out: &mut String, s: &str) {
    // serializing a str cannot fail
    out.push_str(&serde_json::to_string(s).expect("string serialization"));
}

pub(crate) fn write_data(out: &mut String, data: &Data) {
    out.push('{');
    for (i, (key, value)) in data.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        write_str(out, key);
        out.push(':');
        match value {
            Value::Scalar(s) => write_scalar(out, s),
            Value::Array(items) => {
                out.push('[');
                for (j, item) in items.iter().enumerate() {
                    if j > 0 {
                        out.push(',');
                    }
                    write_scalar(out, item);
                }
                out.push(']');
            }
        }
    }
    out.push('}');
}

fn write_scalar(out: &mut String, scalar: &Scalar) {
    match scalar {
        Scalar::Number(n) => out.push_str(&n.canonical()),
        Scalar::String(s) => write_str(out, s),
        Scalar::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
    }
}

pub(crate) fn decode_data(value: Json, field: &str) -> Result<Data, ProtocolError> {
    let Json::Object(map) = value else {
        return Err(ProtocolError::invalid(field, "expected object"));
    };
    let mut data = Data::new();
    for (key, value) in map {
        let path = format!("{field}.{key}");
        let decoded = match value {
            Json::Array(items) => Value::Array(
                items
                    .into_iter()
                    .map(|item| decode_scalar(item, &path))
                    .collect::<Result<_, _>>()?,
            ),
            other => Value::Scalar(decode_scalar(other, &path)?),
        };
        data.insert(key, decoded);
    }
    Ok(data)
}

fn decode_scalar(value: Json, path: &str) -> Result<Scalar, ProtocolError> {
    match value {
        Json::Number(n) => n
            .as_f64()
            .and_then(Num::new)
            .map(Scalar::Number)
            .ok_or_else(|| ProtocolError::invalid(path, "number out of range")),
        Json::String(s) => Ok(Scalar::String(s)),
        Json::Bool(b) => Ok(Scalar::Bool(b)),
        Json::Null => Err(ProtocolError::invalid(path, "null is not a value")),
        Json::Array(_) | Json::Object(_) => Err(ProtocolError::invalid(path, "nested values are not allowed")),
    }
}

/// A parsed JSON object whose fields are consumed one by one.
pub(crate) struct JsonObject {
    map: Map<String, Json>,
}

impl JsonObject {
    pub(crate) fn parse(bytes: &[u8]) -> Result<Self, ProtocolError> {
        if bytes.iter().all(u8::is_ascii_whitespace) {
            return Err(ProtocolError::MissingDocument);
        }
        let value: Json = serde_json::from_slice(bytes).map_err(|e| ProtocolError::Malformed(e.to_string()))?;
        Self::from_json(value, "document")
    }

    pub(crate) fn from_json(value: Json, field: &str) -> Result<Self, ProtocolError> {
        match value {
            Json::Object(map) => Ok(JsonObject { map }),
            _ => Err(ProtocolError::invalid(field, "expected object")),
        }
    }

    pub(crate) fn take(&mut self, key: &str) -> Result<Json, ProtocolError> {
        self.map.remove(key).ok_or_else(|| ProtocolError::MissingField(key.to_string()))
    }

    pub(crate) fn take_opt(&mut self, key: &str) -> Option<Json> {
        self.map.remove(key)
    }

    pub(crate) fn take_str(&mut self, key: &str) -> Result<String, ProtocolError> {
        match self.take(key)? {
            Json::String(s) => Ok(s),
            _ => Err(ProtocolError::invalid(key, "expected string")),
        }
    }

    pub(crate) fn take_u64(&mut self, key: &str) -> Result<u64, ProtocolError> {
        self.take(key)?
            .as_u64()
            .ok_or_else(|| ProtocolError::invalid(key, "expected non-negative integer"))
    }

    pub(crate) fn finish(self) -> Result<(), ProtocolError> {
        match self.map.into_iter().next() {
            Some((key, _)) => Err(ProtocolError::UnknownField(key)),
            None => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const IMAGE_ZOOM: &str = r#"{"kind":"media-event","media-type":"image","media-id":"image-block","event-type":"mouse-scroll","seq-id":8,"timestamp":5000,"description":"zoom out an image","data":{"delta":-1.5}}"#;

    fn image_zoom() -> EventMessage {
        EventMessage::Media(MediaEventMessage {
            media_type: MediaType::Image,
            media_id: "image-block".into(),
            event_type: "mouse-scroll".into(),
            seq_id: 8,
            timestamp: 5000,
            description: "zoom out an image".into(),
            data: Some(Data::from([("delta".to_string(), Value::num(-1.5))])),
        })
    }

    #[test]
    fn encodes_image_zoom_exactly() {
        assert_eq!(serialize(&image_zoom()).unwrap(), IMAGE_ZOOM.as_bytes());
        assert_eq!(deserialize(IMAGE_ZOOM.as_bytes()).unwrap(), image_zoom());
    }

    #[test]
    fn absent_data_is_omitted() {
        let msg = EventMessage::Media(MediaEventMessage {
            media_type: MediaType::Video,
            media_id: "video-block".into(),
            event_type: "play".into(),
            seq_id: 1,
            timestamp: 10,
            description: String::new(),
            data: None,
        });
        let text = String::from_utf8(serialize(&msg).unwrap()).unwrap();
        assert!(!text.contains("data"));
        assert_eq!(deserialize(text.as_bytes()).unwrap(), msg);
    }

    #[test]
    fn empty_input_is_missing_document() {
        assert_eq!(deserialize(b""), Err(ProtocolError::MissingDocument));
        assert_eq!(deserialize(b"  \n"), Err(ProtocolError::MissingDocument));
    }

    #[test]
    fn errors_name_the_offending_field() {
        let missing = IMAGE_ZOOM.replace(r#""seq-id":8,"#, "");
        assert_eq!(deserialize(missing.as_bytes()), Err(ProtocolError::MissingField("seq-id".into())));

        let bad_type = IMAGE_ZOOM.replace(r#""image","media-id""#, r#""audio","media-id""#);
        assert!(matches!(
            deserialize(bad_type.as_bytes()),
            Err(ProtocolError::UnknownEnumerant { field, value }) if field == "media-type" && value == "audio"
        ));

        let bad_kind = IMAGE_ZOOM.replace("media-event", "cursor-event");
        assert_eq!(deserialize(bad_kind.as_bytes()), Err(ProtocolError::UnknownKind("cursor-event".into())));

        let negative_seq = IMAGE_ZOOM.replace(r#""seq-id":8"#, r#""seq-id":-8"#);
        assert!(matches!(
            deserialize(negative_seq.as_bytes()),
            Err(ProtocolError::InvalidField { field, .. }) if field == "seq-id"
        ));

        let extra = IMAGE_ZOOM.replace(r#""seq-id":8,"#, r#""seq-id":8,"x":1,"#);
        assert_eq!(deserialize(extra.as_bytes()), Err(ProtocolError::UnknownField("x".into())));

        let wrong_key = IMAGE_ZOOM.replace(r#"{"delta""#, r#"{"dx""#);
        assert!(matches!(
            deserialize(wrong_key.as_bytes()),
            Err(ProtocolError::InvalidField { field, .. }) if field == "data.dx"
        ));
    }

    #[test]
    fn non_canonical_text_is_rejected() {
        let spaced = IMAGE_ZOOM.replace(r#""seq-id":8"#, r#""seq-id": 8"#);
        assert_eq!(deserialize(spaced.as_bytes()), Err(ProtocolError::NonCanonical));

        let reordered = IMAGE_ZOOM.replace(
            r#""seq-id":8,"timestamp":5000"#,
            r#""timestamp":5000,"seq-id":8"#,
        );
        assert_eq!(deserialize(reordered.as_bytes()), Err(ProtocolError::NonCanonical));

        let long_number = IMAGE_ZOOM.replace("-1.5", "-1.50");
        assert_eq!(deserialize(long_number.as_bytes()), Err(ProtocolError::NonCanonical));

        let seven_digits = IMAGE_ZOOM.replace("-1.5", "-1.5000001");
        assert_eq!(deserialize(seven_digits.as_bytes()), Err(ProtocolError::NonCanonical));
    }

    #[test]
    fn serialize_rejects_invalid_messages() {
        let mut msg = image_zoom();
        if let EventMessage::Media(m) = &mut msg {
            m.event_type = "rotate".into();
        }
        assert!(matches!(serialize(&msg), Err(ProtocolError::UnknownEnumerant { .. })));

        let resync = EventMessage::Control(ControlEventMessage {
            control_type: ControlType::Resync,
            seq_id: 5,
            timestamp: 10000,
            description: "Resync a media block".into(),
            data: Some(Data::from([("media-id".to_string(), Value::from("video-block"))])),
        });
        assert_eq!(serialize(&resync), Err(ProtocolError::MissingField("data.media-state".into())));
    }
}
