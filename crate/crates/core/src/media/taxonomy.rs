//! The fixed table of media events and how each one is captured.

use std::fmt;
use std::sync::OnceLock;

use crate::protocol::{DataKind, MediaType};

/// How a client turns a user action into an event.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CaptureMode {
    /// The UI element acted on identifies the action.
    ObjectBased,
    /// Coordinates normalized to the media block's box.
    ProportionBased,
    /// A scalar change such as a wheel delta.
    ValueBased,
}

impl fmt::Display for CaptureMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CaptureMode::ObjectBased => "object-based",
            CaptureMode::ProportionBased => "proportion-based",
            CaptureMode::ValueBased => "value-based",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DataKey {
    pub name: String,
    pub kind: DataKind,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EventTaxonomyEntry {
    pub media_type: MediaType,
    pub event_type: String,
    pub capture_mode: CaptureMode,
    pub required_data_keys: Vec<DataKey>,
    pub optional_data_keys: Vec<DataKey>,
}

impl EventTaxonomyEntry {
    /// The declared kind of `key`, required or optional.
    pub fn kind_of(&self, key: &str) -> Option<DataKind> {
        self.required_data_keys
            .iter()
            .chain(&self.optional_data_keys)
            .find(|k| k.name == key)
            .map(|k| k.kind)
    }
}

const TARGET: (&str, DataKind) = ("target", DataKind::String);
const STROKE: [(&str, DataKind); 4] = [
    ("color", DataKind::String),
    ("points", DataKind::NumberArray),
    ("stroke_id", DataKind::String),
    ("width", DataKind::Number),
];

fn entry(
    media_type: MediaType,
    event_type: &str,
    capture_mode: CaptureMode,
    required: &[(&str, DataKind)],
    optional: &[(&str, DataKind)],
) -> EventTaxonomyEntry {
    let keys = |list: &[(&str, DataKind)]| {
        list.iter()
            .map(|(name, kind)| DataKey {
                name: (*name).to_string(),
                kind: *kind,
            })
            .collect()
    };
    EventTaxonomyEntry {
        media_type,
        event_type: event_type.to_string(),
        capture_mode,
        required_data_keys: keys(required),
        optional_data_keys: keys(optional),
    }
}

fn build() -> Vec<EventTaxonomyEntry> {
    use CaptureMode::*;
    use DataKind::*;
    use MediaType::*;

    let playback = [TARGET, ("current_time", Number)];
    vec![
        entry(Video, "play", ObjectBased, &[], &playback),
        entry(Video, "pause", ObjectBased, &[], &playback),
        entry(Video, "seek", ObjectBased, &[("current_time", Number)], &[TARGET]),
        entry(Video, "set-volume", ObjectBased, &[("volume", Number)], &[TARGET]),
        entry(Video, "toggle-mute", ObjectBased, &[], &[TARGET]),
        entry(Video, "set-rate", ObjectBased, &[("rate", Number)], &[TARGET]),
        entry(Video, "draw", ProportionBased, &STROKE, &[]),
        entry(Image, "mouse-scroll", ValueBased, &[("delta", Number)], &[]),
        entry(Image, "move", ProportionBased, &[("center_x", Number), ("center_y", Number)], &[]),
        entry(Image, "draw", ProportionBased, &STROKE, &[]),
        entry(Pdf, "page-next", ObjectBased, &[], &[TARGET]),
        entry(Pdf, "page-prev", ObjectBased, &[], &[TARGET]),
        entry(Pdf, "scroll", ValueBased, &[("scroll", Number)], &[]),
        entry(Pdf, "comment", ObjectBased, &[("page", Integer), ("text", String)], &[TARGET]),
        entry(Webpage, "navigate", ObjectBased, &[("url", String)], &[TARGET]),
        entry(Webpage, "scroll", ValueBased, &[("scroll", Number)], &[]),
        entry(Webpage, "highlight", ObjectBased, &[("selector", String)], &[("note", String)]),
        entry(Whiteboard, "draw", ProportionBased, &STROKE, &[]),
        entry(Whiteboard, "erase", ObjectBased, &[("stroke_id", String)], &[TARGET]),
    ]
}

fn table() -> &'static [EventTaxonomyEntry] {
    static TABLE: OnceLock<Vec<EventTaxonomyEntry>> = OnceLock::new();
    TABLE.get_or_init(build)
}

/// The full event taxonomy.
pub fn taxonomy() -> Vec<EventTaxonomyEntry> {
    table().to_vec()
}

pub fn lookup(media_type: MediaType, event_type: &str) -> Option<&'static EventTaxonomyEntry> {
    table()
        .iter()
        .find(|e| e.media_type == media_type && e.event_type == event_type)
}

/// Entries for one media type, in table order.
pub fn events_for(media_type: MediaType) -> impl Iterator<Item = &'static EventTaxonomyEntry> {
    table().iter().filter(move |e| e.media_type == media_type)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn capture_modes_match_examples() {
        assert_eq!(lookup(MediaType::Image, "mouse-scroll").unwrap().capture_mode, CaptureMode::ValueBased);
        assert_eq!(lookup(MediaType::Image, "move").unwrap().capture_mode, CaptureMode::ProportionBased);
        assert_eq!(lookup(MediaType::Video, "play").unwrap().capture_mode, CaptureMode::ObjectBased);
    }

    #[test]
    fn pairs_are_unique_and_every_type_is_covered() {
        let all = taxonomy();
        let pairs: HashSet<_> = all.iter().map(|e| (e.media_type, e.event_type.clone())).collect();
        assert_eq!(pairs.len(), all.len());
        assert_eq!(all.len(), 19);
        for media_type in MediaType::ALL {
            assert!(events_for(media_type).count() > 0, "{media_type} has no events");
        }
    }

    #[test]
    fn required_and_optional_keys_do_not_overlap() {
        for e in taxonomy() {
            for key in &e.required_data_keys {
                assert!(!e.optional_data_keys.iter().any(|k| k.name == key.name));
            }
        }
    }
}
