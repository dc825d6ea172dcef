use thiserror::Error;

use super::{
    taxonomy, Comment, Highlight, MediaBody, MediaState, Stroke, POINT_SCALE, RATE_RANGE, STROKE_WIDTH_RANGE,
    ZOOM_RANGE,
};
use crate::protocol::{MediaEventMessage, MediaType, Num};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TransitionError {
    #[error("message targets `{found}` but state is `{expected}`")]
    MediaIdMismatch { expected: String, found: String },
    #[error("message media type {found} does not match block type {expected}")]
    MediaTypeMismatch { expected: MediaType, found: MediaType },
    #[error("no {event_type} event for {media_type}")]
    UnknownEvent { media_type: MediaType, event_type: String },
    #[error("missing data key `{0}`")]
    MissingData(String),
    #[error("invalid data `{key}`: {reason}")]
    InvalidData { key: String, reason: String },
    #[error("unknown stroke `{0}`")]
    UnknownStroke(String),
}

fn invalid(key: &str, reason: impl Into<String>) -> TransitionError {
    TransitionError::InvalidData {
        key: key.to_string(),
        reason: reason.into(),
    }
}

struct Args<'a>(&'a MediaEventMessage);

impl Args<'_> {
    fn num(&self, key: &str) -> Result<f64, TransitionError> {
        match self.0.get(key) {
            None => Err(TransitionError::MissingData(key.to_string())),
            Some(v) => v.as_num().ok_or_else(|| invalid(key, "expected number")),
        }
    }

    fn opt_num(&self, key: &str) -> Result<Option<f64>, TransitionError> {
        match self.0.get(key) {
            None => Ok(None),
            Some(_) => self.num(key).map(Some),
        }
    }

    fn text(&self, key: &str) -> Result<&str, TransitionError> {
        match self.0.get(key) {
            None => Err(TransitionError::MissingData(key.to_string())),
            Some(v) => v.as_str().ok_or_else(|| invalid(key, "expected string")),
        }
    }

    fn non_empty(&self, key: &str) -> Result<&str, TransitionError> {
        let text = self.text(key)?;
        if text.is_empty() {
            return Err(invalid(key, "must not be empty"));
        }
        Ok(text)
    }

    fn stroke(&self) -> Result<Stroke, TransitionError> {
        let raw = match self.0.get("points") {
            None => return Err(TransitionError::MissingData("points".into())),
            Some(v) => v.as_numbers().ok_or_else(|| invalid("points", "expected number array"))?,
        };
        Ok(Stroke {
            stroke_id: self.non_empty("stroke_id")?.to_string(),
            points: decode_points(&raw)?,
            color: self.text("color")?.to_string(),
            width: self.num("width")?.clamp(STROKE_WIDTH_RANGE.0, STROKE_WIDTH_RANGE.1),
        })
    }
}

/// Encodes block-relative points for the wire: integer thousandths, the
/// first pair absolute and every later pair relative to its predecessor.
pub fn encode_points(points: &[[f64; 2]]) -> Vec<Num> {
    let mut out = Vec::with_capacity(points.len() * 2);
    let mut prev = (0i32, 0i32);
    for (i, [x, y]) in points.iter().enumerate() {
        let q = |v: f64| (v.clamp(0.0, 1.0) * POINT_SCALE).round() as i32;
        let cur = (q(*x), q(*y));
        if i == 0 {
            out.push(Num::from(cur.0));
            out.push(Num::from(cur.1));
        } else {
            out.push(Num::from(cur.0 - prev.0));
            out.push(Num::from(cur.1 - prev.1));
        }
        prev = cur;
    }
    out
}

/// Inverse of [`encode_points`]. Positions outside the box are clamped onto it.
pub fn decode_points(raw: &[f64]) -> Result<Vec<[f64; 2]>, TransitionError> {
    if raw.is_empty() || !raw.len().is_multiple_of(2) {
        return Err(invalid("points", "expected a non-empty list of x,y pairs"));
    }
    if raw.iter().any(|v| v.fract() != 0.0) {
        return Err(invalid("points", "expected integer thousandths"));
    }
    let mut acc = (0.0, 0.0);
    Ok(raw
        .chunks_exact(2)
        .enumerate()
        .map(|(i, pair)| {
            acc = if i == 0 { (pair[0], pair[1]) } else { (acc.0 + pair[0], acc.1 + pair[1]) };
            let unit = |v: f64| v.clamp(0.0, POINT_SCALE) / POINT_SCALE;
            [unit(acc.0), unit(acc.1)]
        })
        .collect())
}

/// Appends a stroke, or extends the existing stroke with the same id.
fn add_stroke(strokes: &mut Vec<Stroke>, stroke: Stroke) {
    match strokes.iter_mut().find(|s| s.stroke_id == stroke.stroke_id) {
        Some(existing) => existing.points.extend(stroke.points),
        None => strokes.push(stroke),
    }
}

/// Applies one media event to a snapshot, returning the next snapshot.
///
/// Continuous controls (volume, zoom, rate, positions, page) clamp to their
/// valid range; wrong identifiers and malformed data are rejected.
pub fn apply_event(state: &MediaState, msg: &MediaEventMessage) -> Result<MediaState, TransitionError> {
    if msg.media_id != state.media_id {
        return Err(TransitionError::MediaIdMismatch {
            expected: state.media_id.clone(),
            found: msg.media_id.clone(),
        });
    }
    if msg.media_type != state.media_type() {
        return Err(TransitionError::MediaTypeMismatch {
            expected: state.media_type(),
            found: msg.media_type,
        });
    }
    let entry = taxonomy::lookup(msg.media_type, &msg.event_type).ok_or_else(|| TransitionError::UnknownEvent {
        media_type: msg.media_type,
        event_type: msg.event_type.clone(),
    })?;
    for key in &entry.required_data_keys {
        if msg.get(&key.name).is_none() {
            return Err(TransitionError::MissingData(key.name.clone()));
        }
    }
    if let Some(data) = &msg.data {
        if let Some(key) = data.keys().find(|k| entry.kind_of(k).is_none()) {
            return Err(invalid(key, "key not permitted for this event"));
        }
    }

    let args = Args(msg);
    let mut next = state.clone();
    match (&mut next.body, msg.event_type.as_str()) {
        (MediaBody::Video(v), "play" | "pause") => {
            v.playing = msg.event_type == "play";
            if let Some(t) = args.opt_num("current_time")? {
                v.current_time = t.max(0.0);
            }
        }
        (MediaBody::Video(v), "seek") => v.current_time = args.num("current_time")?.max(0.0),
        (MediaBody::Video(v), "set-volume") => v.volume = args.num("volume")?.clamp(0.0, 1.0),
        (MediaBody::Video(v), "toggle-mute") => v.muted = !v.muted,
        (MediaBody::Video(v), "set-rate") => v.playback_rate = args.num("rate")?.clamp(RATE_RANGE.0, RATE_RANGE.1),
        (MediaBody::Video(v), "draw") => add_stroke(&mut v.annotations, args.stroke()?),

        (MediaBody::Image(i), "mouse-scroll") => {
            let delta = args.num("delta")?;
            i.zoom = (i.zoom * 2f64.powf(delta / 10.0)).clamp(ZOOM_RANGE.0, ZOOM_RANGE.1);
        }
        (MediaBody::Image(i), "move") => {
            i.center_x = args.num("center_x")?.clamp(0.0, 1.0);
            i.center_y = args.num("center_y")?.clamp(0.0, 1.0);
        }
        (MediaBody::Image(i), "draw") => add_stroke(&mut i.annotations, args.stroke()?),

        (MediaBody::Pdf(p), "page-next") => {
            p.page = p.page.saturating_add(1);
            p.scroll = 0.0;
        }
        (MediaBody::Pdf(p), "page-prev") => {
            if p.page > 1 {
                p.page -= 1;
                p.scroll = 0.0;
            }
        }
        (MediaBody::Pdf(p), "scroll") => p.scroll = args.num("scroll")?.clamp(0.0, 1.0),
        (MediaBody::Pdf(p), "comment") => {
            let page = args.num("page")?;
            if page.fract() != 0.0 {
                return Err(invalid("page", "expected integer"));
            }
            p.comments.push(Comment {
                page: page.clamp(1.0, f64::from(u32::MAX)) as u32,
                text: args.text("text")?.to_string(),
            });
        }

        (MediaBody::Webpage(w), "navigate") => {
            w.url = args.non_empty("url")?.to_string();
            w.scroll = 0.0;
            w.highlights.clear();
        }
        (MediaBody::Webpage(w), "scroll") => w.scroll = args.num("scroll")?.clamp(0.0, 1.0),
        (MediaBody::Webpage(w), "highlight") => {
            let selector = args.non_empty("selector")?.to_string();
            let note = match msg.get("note") {
                None => None,
                Some(_) => Some(args.text("note")?.to_string()),
            };
            match w.highlights.iter_mut().find(|h| h.selector == selector) {
                Some(existing) => existing.note = note,
                None => w.highlights.push(Highlight { selector, note }),
            }
        }

        (MediaBody::Whiteboard(w), "draw") => add_stroke(&mut w.strokes, args.stroke()?),
        (MediaBody::Whiteboard(w), "erase") => {
            let id = args.non_empty("stroke_id")?;
            let before = w.strokes.len();
            w.strokes.retain(|s| s.stroke_id != id);
            if w.strokes.len() == before {
                return Err(TransitionError::UnknownStroke(id.to_string()));
            }
        }

        _ => {
            return Err(TransitionError::UnknownEvent {
                media_type: msg.media_type,
                event_type: msg.event_type.clone(),
            })
        }
    }
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::media::initial_state;
    use crate::protocol::{Data, Value};

    fn event(media_type: MediaType, id: &str, event_type: &str, data: &[(&str, Value)]) -> MediaEventMessage {
        MediaEventMessage {
            media_type,
            media_id: id.into(),
            event_type: event_type.into(),
            seq_id: 1,
            timestamp: 0,
            description: String::new(),
            data: if data.is_empty() {
                None
            } else {
                Some(data.iter().map(|(k, v)| (k.to_string(), v.clone())).collect::<Data>())
            },
        }
    }

    fn image(state: &MediaState) -> &crate::media::ImageState {
        match &state.body {
            MediaBody::Image(i) => i,
            _ => panic!("not an image"),
        }
    }

    #[test]
    fn zoom_follows_exponential_law() {
        let state = initial_state("img", MediaType::Image, "x.png");
        let next = apply_event(&state, &event(MediaType::Image, "img", "mouse-scroll", &[("delta", Value::num(-1.5))])).unwrap();
        // 2^(-0.15), evaluated independently
        assert!((image(&next).zoom - 0.901_250_462_6).abs() < 1e-9);
        assert_eq!(image(&state).zoom, 1.0, "input must not change");
    }

    #[test]
    fn zoom_clamps_at_both_ends() {
        let mut state = initial_state("img", MediaType::Image, "x.png");
        for _ in 0..20 {
            state = apply_event(&state, &event(MediaType::Image, "img", "mouse-scroll", &[("delta", Value::num(30.0))])).unwrap();
        }
        assert_eq!(image(&state).zoom, ZOOM_RANGE.1);
        for _ in 0..40 {
            state = apply_event(&state, &event(MediaType::Image, "img", "mouse-scroll", &[("delta", Value::num(-30.0))])).unwrap();
        }
        assert_eq!(image(&state).zoom, ZOOM_RANGE.0);
    }

    #[test]
    fn play_only_touches_playing() {
        let state = initial_state("v", MediaType::Video, "talk.mp4");
        let next = apply_event(&state, &event(MediaType::Video, "v", "play", &[])).unwrap();
        let (MediaBody::Video(before), MediaBody::Video(after)) = (&state.body, &next.body) else { panic!() };
        assert!(after.playing);
        assert_eq!(crate::media::VideoState { playing: false, ..after.clone() }, *before);
    }

    #[test]
    fn page_prev_clamps_at_one() {
        let mut state = initial_state("doc", MediaType::Pdf, "slides.pdf");
        for _ in 0..2 {
            state = apply_event(&state, &event(MediaType::Pdf, "doc", "page-next", &[])).unwrap();
        }
        for _ in 0..3 {
            state = apply_event(&state, &event(MediaType::Pdf, "doc", "page-prev", &[])).unwrap();
        }
        let MediaBody::Pdf(p) = &state.body else { panic!() };
        assert_eq!(p.page, 1);
    }

    #[test]
    fn volume_clamps_and_erase_rejects_unknown_ids() {
        let state = initial_state("v", MediaType::Video, "talk.mp4");
        let loud = apply_event(&state, &event(MediaType::Video, "v", "set-volume", &[("volume", Value::num(1.7))])).unwrap();
        let MediaBody::Video(v) = &loud.body else { panic!() };
        assert_eq!(v.volume, 1.0);

        let wb = initial_state("wb", MediaType::Whiteboard, "");
        let err = apply_event(&wb, &event(MediaType::Whiteboard, "wb", "erase", &[("stroke_id", Value::from("nope"))])).unwrap_err();
        assert_eq!(err, TransitionError::UnknownStroke("nope".into()));
    }

    #[test]
    fn strokes_extend_by_id_and_erase() {
        let stroke = |id: &str, pts: &[[f64; 2]]| {
            vec![
                ("color", Value::from("#f00")),
                ("points", Value::from(encode_points(pts))),
                ("stroke_id", Value::from(id)),
                ("width", Value::num(0.004)),
            ]
        };
        let mut wb = initial_state("wb", MediaType::Whiteboard, "");
        wb = apply_event(&wb, &event(MediaType::Whiteboard, "wb", "draw", &stroke("s1", &[[0.1, 0.1], [0.2, 0.25]]))).unwrap();
        wb = apply_event(&wb, &event(MediaType::Whiteboard, "wb", "draw", &stroke("s1", &[[0.3, 0.3]]))).unwrap();
        wb = apply_event(&wb, &event(MediaType::Whiteboard, "wb", "draw", &stroke("s2", &[[0.9, 0.9]]))).unwrap();
        let MediaBody::Whiteboard(w) = &wb.body else { panic!() };
        assert_eq!(w.strokes.len(), 2);
        assert_eq!(w.strokes[0].points, vec![[0.1, 0.1], [0.2, 0.25], [0.3, 0.3]]);

        wb = apply_event(&wb, &event(MediaType::Whiteboard, "wb", "erase", &[("stroke_id", Value::from("s1"))])).unwrap();
        let MediaBody::Whiteboard(w) = &wb.body else { panic!() };
        assert_eq!(w.strokes.len(), 1);
        assert_eq!(w.strokes[0].stroke_id, "s2");
    }

    #[test]
    fn point_codec_is_delta_encoded() {
        let encoded: Vec<f64> = encode_points(&[[0.5, 0.5], [0.503, 0.498], [0.51, 0.49]]).iter().map(|n| n.get()).collect();
        assert_eq!(encoded, vec![500.0, 500.0, 3.0, -2.0, 7.0, -8.0]);
        assert_eq!(decode_points(&encoded).unwrap(), vec![[0.5, 0.5], [0.503, 0.498], [0.51, 0.49]]);
        assert!(decode_points(&[1.0]).is_err());
        assert!(decode_points(&[]).is_err());
        assert!(decode_points(&[1.5, 2.0]).is_err());
        assert_eq!(decode_points(&[990.0, 0.0, 50.0, -20.0]).unwrap(), vec![[0.99, 0.0], [1.0, 0.0]]);
    }

    #[test]
    fn mismatches_and_missing_data_are_rejected() {
        let state = initial_state("v", MediaType::Video, "talk.mp4");
        assert!(matches!(
            apply_event(&state, &event(MediaType::Video, "other", "play", &[])),
            Err(TransitionError::MediaIdMismatch { .. })
        ));
        assert!(matches!(
            apply_event(&state, &event(MediaType::Image, "v", "move", &[])),
            Err(TransitionError::MediaTypeMismatch { .. })
        ));
        assert_eq!(
            apply_event(&state, &event(MediaType::Video, "v", "seek", &[])),
            Err(TransitionError::MissingData("current_time".into()))
        );
        assert!(matches!(
            apply_event(&state, &event(MediaType::Video, "v", "rewind", &[])),
            Err(TransitionError::UnknownEvent { .. })
        ));
    }

    #[test]
    fn navigate_resets_scroll_and_highlights() {
        let mut web = initial_state("web", MediaType::Webpage, "https://a.example/");
        web = apply_event(&web, &event(MediaType::Webpage, "web", "scroll", &[("scroll", Value::num(0.6))])).unwrap();
        web = apply_event(&web, &event(MediaType::Webpage, "web", "highlight", &[("selector", Value::from("#intro"))])).unwrap();
        web = apply_event(&web, &event(MediaType::Webpage, "web", "navigate", &[("url", Value::from("https://a.example/2"))])).unwrap();
        let MediaBody::Webpage(w) = &web.body else { panic!() };
        assert_eq!((w.url.as_str(), w.scroll, w.highlights.len()), ("https://a.example/2", 0.0, 0));
    }
}
