//! Reference fold: sequential `apply_event` over a log, with no handler
//! tree, replay queue or server code involved.

use std::collections::BTreeMap;

use mediasync_core::media::{apply_event, serialize_state, MediaState};
use mediasync_core::protocol::{ControlType, EventMessage, MediaType};
use mediasync_core::session::SessionLogEntry;

/// States after every entry with `global_seq < upto` has been applied.
pub fn fold_prefix(log: &[SessionLogEntry], upto: u64) -> BTreeMap<String, MediaState> {
    let mut states = BTreeMap::new();
    let mut ordered: Vec<&SessionLogEntry> = log.iter().filter(|e| e.global_seq < upto).collect();
    ordered.sort_by_key(|e| e.global_seq);
    for entry in ordered {
        if entry.error.is_some() {
            continue;
        }
        match &entry.message {
            EventMessage::Control(c) if c.control_type == ControlType::AddMaterial => {
                let text = |key: &str| c.get_str(key).unwrap_or_default().to_string();
                let media_id = text("media-id");
                if let Ok(media_type) = text("media-type").parse::<MediaType>() {
                    states
                        .entry(media_id.clone())
                        .or_insert_with(|| MediaState::initial(&media_id, media_type, &text("source")));
                }
            }
            EventMessage::Media(m) => {
                if let Some(current) = states.get(&m.media_id) {
                    if let Ok(next) = apply_event(current, m) {
                        states.insert(m.media_id.clone(), next);
                    }
                }
            }
            EventMessage::Control(_) => {}
        }
    }
    states
}

pub fn fold(log: &[SessionLogEntry]) -> BTreeMap<String, MediaState> {
    fold_prefix(log, u64::MAX)
}

/// State strings keyed by media id.
pub fn state_texts(states: &BTreeMap<String, MediaState>) -> BTreeMap<String, String> {
    states.iter().map(|(id, s)| (id.clone(), serialize_state(s))).collect()
}
