//! The four one-minute presentation scenarios: video, PDF, image and
//! webpage. Each has one presenter and two viewers.

use mediasync_core::media::encode_points;
use mediasync_core::protocol::{Data, EventMessage, MediaEventMessage, MediaType, Value};
use mediasync_core::session::Role;
use serde_json::json;

use crate::scenario::{AssetLoad, ClientSpec, Expectation, MaterialSpec, Scenario, ScriptedEvent};

pub const PRESENTER: &str = "alice";
pub const DURATION_MS: u64 = 60_000;
pub const NAMES: [&str; 4] = ["video", "pdf", "image", "webpage"];

/// Points per drawing message and messages per second while drawing.
pub const POINTS_PER_DRAW: usize = 20;
pub const DRAWS_PER_SECOND: u64 = 4;

pub fn all() -> Vec<Scenario> {
    vec![video(), pdf(), image(), webpage()]
}

pub fn by_name(name: &str) -> Option<Scenario> {
    match name {
        "video" => Some(video()),
        "pdf" => Some(pdf()),
        "image" => Some(image()),
        "webpage" => Some(webpage()),
        _ => None,
    }
}

struct Builder {
    scenario: Scenario,
    media_type: MediaType,
    media_id: String,
}

impl Builder {
    fn new(name: &str, media_type: MediaType, media_id: &str, source: &str) -> Self {
        let clients = [(PRESENTER, Role::Presenter), ("bob", Role::Audience), ("carol", Role::Audience)]
            .into_iter()
            .map(|(id, role)| ClientSpec {
                id: id.to_string(),
                role,
                join_at: 0,
            })
            .collect();
        Builder {
            scenario: Scenario {
                name: name.to_string(),
                duration_ms: DURATION_MS,
                clients,
                materials: vec![MaterialSpec {
                    media_id: media_id.to_string(),
                    media_type,
                    source: source.to_string(),
                }],
                ..Scenario::default()
            },
            media_type,
            media_id: media_id.to_string(),
        }
    }

    fn event(&mut self, at_ms: u64, event_type: &str, description: &str, data: Vec<(&str, Value)>) -> &mut Self {
        let data: Data = data.into_iter().map(|(k, v)| (k.to_string(), v)).collect();
        let message = MediaEventMessage {
            media_type: self.media_type,
            media_id: self.media_id.clone(),
            event_type: event_type.to_string(),
            seq_id: 0,
            timestamp: at_ms,
            description: description.to_string(),
            data: (!data.is_empty()).then_some(data),
        };
        self.scenario.script.push(ScriptedEvent {
            client_id: PRESENTER.to_string(),
            at_ms,
            message: EventMessage::Media(message),
        });
        self
    }

    /// `messages` drawing messages at `DRAWS_PER_SECOND`, split evenly into
    /// `strokes` strokes that continue by id.
    fn drawing(&mut self, start_ms: u64, messages: usize, strokes: usize, points: usize) -> &mut Self {
        let per_stroke = messages.div_ceil(strokes);
        for k in 0..messages {
            let stroke = k / per_stroke;
            let part = k % per_stroke;
            let pts: Vec<[f64; 2]> = (0..points)
                .map(|p| {
                    let t = (part * points + p) as f64 / (per_stroke * points) as f64;
                    let x = 0.15 + 0.7 * t;
                    let y = 0.2 + 0.15 * stroke as f64 + 0.05 * (t * 12.0).sin();
                    [x, y]
                })
                .collect();
            let at = start_ms + k as u64 * 1000 / DRAWS_PER_SECOND;
            self.event(
                at,
                "draw",
                "draw",
                vec![
                    ("color", Value::from("#e33")),
                    ("points", Value::from(encode_points(&pts))),
                    ("stroke_id", Value::from(format!("k{stroke}"))),
                    ("width", Value::num(0.004)),
                ],
            );
        }
        self
    }

    fn expect(&mut self, key: &str, value: serde_json::Value) -> &mut Self {
        self.scenario.expected.push(Expectation {
            media_id: self.media_id.clone(),
            key: key.to_string(),
            value,
        });
        self
    }

    fn build(&mut self) -> Scenario {
        self.scenario.script.sort_by_key(|e| e.at_ms);
        self.scenario.clone()
    }
}

/// Play, pause, three seeks, mute and unmute, a volume change and ten
/// seconds of free drawing.
pub fn video() -> Scenario {
    let t = |s: f64| ("current_time", Value::num(s));
    let mut b = Builder::new("video", MediaType::Video, "video-block", "/assets/lecture.mp4");
    b.event(2_000, "play", "play", vec![("target", Value::from("play-btn")), t(0.0)])
        .event(6_000, "seek", "seek", vec![t(95.5)])
        .event(9_000, "toggle-mute", "mute", vec![])
        .event(12_000, "set-volume", "volume", vec![("volume", Value::num(0.6))])
        .event(15_000, "pause", "pause", vec![("target", Value::from("play-btn")), t(104.5)])
        .drawing(16_000, 40, 4, POINTS_PER_DRAW)
        .event(28_000, "toggle-mute", "unmute", vec![])
        .event(30_000, "play", "play", vec![("target", Value::from("play-btn")), t(104.5)])
        .event(40_000, "seek", "seek", vec![t(140.0)])
        .event(50_000, "seek", "seek", vec![t(20.0)])
        .event(58_000, "pause", "pause", vec![("target", Value::from("play-btn")), t(28.0)])
        .expect("playing", json!(false))
        .expect("current_time", json!(28.0))
        .expect("muted", json!(false))
        .expect("volume", json!(0.6))
        .expect("annotations.len", json!(4))
        .build()
}

/// Paging up and down, scrolling and commenting.
pub fn pdf() -> Scenario {
    let mut b = Builder::new("pdf", MediaType::Pdf, "pdf-block", "/assets/slides.pdf");
    let mut at = 3_000;
    for page in 0..4 {
        b.event(at, "page-next", "next page", vec![("target", Value::from("next-btn"))]);
        for k in 1..=5 {
            b.event(at + k * 700, "scroll", "scroll", vec![("scroll", Value::num(f64::from(k as u32) * 0.18))]);
        }
        if page % 2 == 1 {
            b.event(
                at + 5_000,
                "comment",
                "comment",
                vec![("page", Value::from(page + 2)), ("text", Value::from(format!("note on page {}", page + 2)))],
            );
        }
        at += 10_000;
    }
    b.event(44_000, "page-prev", "previous page", vec![("target", Value::from("prev-btn"))])
        .event(47_000, "page-prev", "previous page", vec![("target", Value::from("prev-btn"))])
        .event(50_000, "scroll", "scroll", vec![("scroll", Value::num(0.4))])
        .event(54_000, "comment", "comment", vec![("page", Value::from(3)), ("text", Value::from("see the table"))])
        .expect("page", json!(3))
        .expect("scroll", json!(0.4))
        .expect("comments.len", json!(3))
        .build()
}

/// Zooming in and out, moving and free drawing.
pub fn image() -> Scenario {
    let mut b = Builder::new("image", MediaType::Image, "image-block", "/assets/diagram.png");
    for k in 0..6u32 {
        b.event(2_000 + u64::from(k) * 400, "mouse-scroll", "zoom in", vec![("delta", Value::num(1.5))]);
    }
    for k in 0..6u32 {
        let f = f64::from(k + 1) / 10.0;
        b.event(8_000 + u64::from(k) * 500, "move", "move", vec![("center_x", Value::num(0.5 - f / 2.0)), ("center_y", Value::num(0.5 + f / 4.0))]);
    }
    b.drawing(14_000, 24, 3, 16);
    for k in 0..6u32 {
        b.event(40_000 + u64::from(k) * 400, "mouse-scroll", "zoom out", vec![("delta", Value::num(-1.5))]);
    }
    b.event(48_000, "move", "move", vec![("center_x", Value::num(0.5)), ("center_y", Value::num(0.5))])
        .expect("zoom", json!(1.0))
        .expect("center_x", json!(0.5))
        .expect("annotations.len", json!(3))
        .build()
}

/// Following two links, scrolling and highlighting. The two page loads are
/// counted in the bootstrap bucket.
pub fn webpage() -> Scenario {
    let origin = "https://docs.example.org/guide";
    let mut b = Builder::new("webpage", MediaType::Webpage, "webpage-block", &format!("{origin}/index.html"));
    b.scenario.assets = vec![
        AssetLoad {
            at_ms: 0,
            bytes: 182_000,
            url: format!("{origin}/index.html"),
        },
        AssetLoad {
            at_ms: 20_000,
            bytes: 236_000,
            url: format!("{origin}/install.html"),
        },
        AssetLoad {
            at_ms: 42_000,
            bytes: 151_000,
            url: format!("{origin}/faq.html"),
        },
    ];
    for k in 1..=6u32 {
        b.event(2_000 + u64::from(k) * 1_500, "scroll", "scroll", vec![("scroll", Value::num(f64::from(k) * 0.12))]);
    }
    b.event(14_000, "highlight", "highlight", vec![("selector", Value::from("#intro")), ("note", Value::from("key idea"))]);
    b.event(20_000, "navigate", "open link", vec![("url", Value::from(format!("{origin}/install.html"))), ("target", Value::from("link-install"))]);
    for k in 1..=5u32 {
        b.event(22_000 + u64::from(k) * 2_000, "scroll", "scroll", vec![("scroll", Value::num(f64::from(k) * 0.15))]);
    }
    b.event(36_000, "highlight", "highlight", vec![("selector", Value::from("#step-2"))])
        .event(42_000, "navigate", "open link", vec![("url", Value::from(format!("{origin}/faq.html"))), ("target", Value::from("link-faq"))])
        .event(46_000, "scroll", "scroll", vec![("scroll", Value::num(0.3))])
        .event(50_000, "highlight", "highlight", vec![("selector", Value::from("#q3")), ("note", Value::from("common issue"))])
        .expect("url", json!(format!("{origin}/faq.html")))
        .expect("scroll", json!(0.3))
        .expect("highlights.len", json!(1))
        .build()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scenarios_are_well_formed() {
        for s in all() {
            s.check().unwrap();
            assert!(s.script.iter().all(|e| e.at_ms < DURATION_MS), "{}", s.name);
            assert_eq!(Scenario::parse(&s.to_text()).unwrap(), s);
        }
    }

    #[test]
    fn video_fixture_has_the_described_events() {
        let counts = video().event_counts();
        assert_eq!(counts["play"], 2);
        assert_eq!(counts["pause"], 2);
        assert_eq!(counts["seek"], 3);
        assert_eq!(counts["toggle-mute"], 2);
        assert_eq!(counts["set-volume"], 1);
        assert_eq!(counts["draw"], 40);
        let draws: Vec<u64> = video().script.iter().filter(|e| e.message.type_name() == "draw").map(|e| e.at_ms).collect();
        assert_eq!(draws.first(), Some(&16_000));
        assert_eq!(draws.last().unwrap() - draws[0], 9_750);
    }
}
