//! Per-media-type state snapshots and the pure transition function that
//! applies a media event to a snapshot.

mod codec;
pub mod taxonomy;
mod transition;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::protocol::MediaType;

pub use codec::{deserialize_state, serialize_state};
pub use taxonomy::{taxonomy, CaptureMode, DataKey, EventTaxonomyEntry};
pub use transition::{apply_event, decode_points, encode_points, TransitionError};

/// Zoom is kept within this closed range.
pub const ZOOM_RANGE: (f64, f64) = (0.05, 50.0);
/// Playback rate is kept within this closed range.
pub const RATE_RANGE: (f64, f64) = (0.0625, 16.0);
/// Stroke width, in proportional units of the block box.
pub const STROKE_WIDTH_RANGE: (f64, f64) = (0.0005, 0.25);
/// Stroke points travel as integers in thousandths of the block box.
pub const POINT_SCALE: f64 = 1000.0;

/// Current state of every media block in a session, keyed by media id.
pub type StateMap = BTreeMap<String, MediaState>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Stroke {
    pub stroke_id: String,
    /// `[x, y]` pairs normalized to the block box.
    pub points: Vec<[f64; 2]>,
    pub color: String,
    pub width: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Highlight {
    pub selector: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Comment {
    pub page: u32,
    pub text: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VideoState {
    pub source: String,
    /// Seconds from the start of the video.
    pub current_time: f64,
    pub playing: bool,
    pub muted: bool,
    pub volume: f64,
    pub playback_rate: f64,
    pub annotations: Vec<Stroke>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImageState {
    pub source: String,
    pub zoom: f64,
    pub center_x: f64,
    pub center_y: f64,
    pub annotations: Vec<Stroke>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PdfState {
    pub source: String,
    pub page: u32,
    /// Position within the current page.
    pub scroll: f64,
    pub annotations: Vec<Stroke>,
    pub comments: Vec<Comment>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WebpageState {
    pub url: String,
    pub scroll: f64,
    pub highlights: Vec<Highlight>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WhiteboardState {
    pub strokes: Vec<Stroke>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum MediaBody {
    Video(VideoState),
    Image(ImageState),
    Pdf(PdfState),
    Webpage(WebpageState),
    Whiteboard(WhiteboardState),
}

/// Snapshot of one media block.
#[derive(Clone, Debug, PartialEq)]
pub struct MediaState {
    pub media_id: String,
    pub body: MediaBody,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StateError {
    #[error("malformed state: {0}")]
    Malformed(String),
    #[error("{0} out of range")]
    OutOfRange(&'static str),
    #[error("invalid state: {0}")]
    Invalid(String),
}

impl MediaState {
    /// Canonical starting state for a newly added block.
    pub fn initial(media_id: &str, media_type: MediaType, source: &str) -> MediaState {
        let body = match media_type {
            MediaType::Video => MediaBody::Video(VideoState {
                source: source.to_string(),
                current_time: 0.0,
                playing: false,
                muted: false,
                volume: 1.0,
                playback_rate: 1.0,
                annotations: Vec::new(),
            }),
            MediaType::Image => MediaBody::Image(ImageState {
                source: source.to_string(),
                zoom: 1.0,
                center_x: 0.5,
                center_y: 0.5,
                annotations: Vec::new(),
            }),
            MediaType::Pdf => MediaBody::Pdf(PdfState {
                source: source.to_string(),
                page: 1,
                scroll: 0.0,
                annotations: Vec::new(),
                comments: Vec::new(),
            }),
            MediaType::Webpage => MediaBody::Webpage(WebpageState {
                url: source.to_string(),
                scroll: 0.0,
                highlights: Vec::new(),
            }),
            MediaType::Whiteboard => MediaBody::Whiteboard(WhiteboardState { strokes: Vec::new() }),
        };
        MediaState {
            media_id: media_id.to_string(),
            body,
        }
    }

    pub fn media_type(&self) -> MediaType {
        match self.body {
            MediaBody::Video(_) => MediaType::Video,
            MediaBody::Image(_) => MediaType::Image,
            MediaBody::Pdf(_) => MediaType::Pdf,
            MediaBody::Webpage(_) => MediaType::Webpage,
            MediaBody::Whiteboard(_) => MediaType::Whiteboard,
        }
    }

    /// Checks every range and shape invariant of the snapshot.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<(), StateError> {
        fn unit(value: f64, what: &'static str) -> Result<(), StateError> {
            if (0.0..=1.0).contains(&value) {
                Ok(())
            } else {
                Err(StateError::OutOfRange(what))
            }
        }
        fn strokes(list: &[Stroke]) -> Result<(), StateError> {
            for stroke in list {
                if stroke.points.is_empty() {
                    return Err(StateError::Invalid(format!("stroke {} has no points", stroke.stroke_id)));
                }
                for [x, y] in &stroke.points {
                    unit(*x, "stroke point")?;
                    unit(*y, "stroke point")?;
                }
                if !(stroke.width > 0.0) {
                    return Err(StateError::OutOfRange("stroke width"));
                }
            }
            Ok(())
        }

        if self.media_id.is_empty() {
            return Err(StateError::Invalid("empty media_id".into()));
        }
        match &self.body {
            MediaBody::Video(v) => {
                if !(v.current_time >= 0.0) {
                    return Err(StateError::OutOfRange("current_time"));
                }
                unit(v.volume, "volume")?;
                if !(v.playback_rate > 0.0) {
                    return Err(StateError::OutOfRange("playback_rate"));
                }
                strokes(&v.annotations)
            }
            MediaBody::Image(i) => {
                if !(i.zoom > 0.0) {
                    return Err(StateError::OutOfRange("zoom"));
                }
                unit(i.center_x, "center_x")?;
                unit(i.center_y, "center_y")?;
                strokes(&i.annotations)
            }
            MediaBody::Pdf(p) => {
                if p.page < 1 {
                    return Err(StateError::OutOfRange("page"));
                }
                if p.comments.iter().any(|c| c.page < 1) {
                    return Err(StateError::OutOfRange("comment page"));
                }
                unit(p.scroll, "scroll")?;
                strokes(&p.annotations)
            }
            MediaBody::Webpage(w) => {
                unit(w.scroll, "scroll")?;
                if w.highlights.iter().any(|h| h.selector.is_empty()) {
                    return Err(StateError::Invalid("empty highlight selector".into()));
                }
                Ok(())
            }
            MediaBody::Whiteboard(w) => strokes(&w.strokes),
        }
    }
}

/// Standalone form of [`MediaState::initial`].
pub fn initial_state(media_id: &str, media_type: MediaType, source: &str) -> MediaState {
    MediaState::initial(media_id, media_type, source)
}
