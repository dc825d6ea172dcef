//! Three-level dispatch of media events: a root dispatcher routes on media
//! type, a media handler routes on event type, and exactly one leaf consumes
//! the message.
//!
//! Leaves never do state math of their own. They delegate to
//! [`apply_event`] and add the UI directives a client needs to mirror the
//! change on its widgets.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};

use thiserror::Error;

use crate::media::{apply_event, EventTaxonomyEntry, MediaBody, MediaState, StateMap, TransitionError};
use crate::protocol::{MediaEventMessage, MediaType};

/// Instruction for a client to update its view. Interpreted by the client,
/// never executed here.
#[derive(Clone, Debug, PartialEq)]
pub enum UiDirective {
    /// Fire a click on the element with this identifier.
    Click { element: String },
    /// Move the playback position.
    SetProgress { seconds: f64 },
    /// Set a slider control to a value.
    SetSlider { control: String, value: f64 },
    SetZoom { zoom: f64 },
    Pan { center_x: f64, center_y: f64 },
    ScrollTo { position: f64 },
    ShowPage { page: u32 },
    RenderStroke { stroke_id: String },
    RemoveStroke { stroke_id: String },
    LoadUrl { url: String },
    Highlight { selector: String },
    ShowComment { page: u32, text: String },
}

/// Produces UI directives for a leaf. Custom handlers can be registered
/// through [`HandlerTreeBuilder::handler`].
pub trait ActionHandler: Send + Sync {
    fn directives(&self, msg: &MediaEventMessage, new_state: &MediaState) -> Vec<UiDirective>;
}

/// Directive synthesis for the built-in taxonomy.
struct BuiltinLeaf;

impl BuiltinLeaf {
    fn target(msg: &MediaEventMessage) -> String {
        msg.get("target")
            .and_then(|v| v.as_str())
            .map(str::to_string)
            .unwrap_or_else(|| format!("{}-{}", msg.media_id, msg.event_type))
    }
}

impl ActionHandler for BuiltinLeaf {
    fn directives(&self, msg: &MediaEventMessage, new_state: &MediaState) -> Vec<UiDirective> {
        use UiDirective::*;
        let stroke_id = || {
            msg.get("stroke_id")
                .and_then(|v| v.as_str())
                .unwrap_or_default()
                .to_string()
        };
        match (&new_state.body, msg.event_type.as_str()) {
            (MediaBody::Video(v), "play" | "pause") => {
                let mut out = vec![Click { element: Self::target(msg) }];
                if msg.get("current_time").is_some() {
                    out.push(SetProgress { seconds: v.current_time });
                }
                out
            }
            (MediaBody::Video(v), "seek") => vec![SetProgress { seconds: v.current_time }],
            (MediaBody::Video(v), "set-volume") => vec![SetSlider {
                control: Self::target(msg),
                value: v.volume,
            }],
            (MediaBody::Video(_), "toggle-mute") => vec![Click { element: Self::target(msg) }],
            (MediaBody::Video(v), "set-rate") => vec![SetSlider {
                control: Self::target(msg),
                value: v.playback_rate,
            }],
            (MediaBody::Image(i), "mouse-scroll") => vec![SetZoom { zoom: i.zoom }],
            (MediaBody::Image(i), "move") => vec![Pan {
                center_x: i.center_x,
                center_y: i.center_y,
            }],
            (MediaBody::Pdf(p), "page-next" | "page-prev") => vec![ShowPage { page: p.page }],
            (MediaBody::Pdf(p), "scroll") => vec![ScrollTo { position: p.scroll }],
            (MediaBody::Pdf(p), "comment") => p
                .comments
                .last()
                .map(|c| ShowComment {
                    page: c.page,
                    text: c.text.clone(),
                })
                .into_iter()
                .collect(),
            (MediaBody::Webpage(w), "navigate") => vec![LoadUrl { url: w.url.clone() }],
            (MediaBody::Webpage(w), "scroll") => vec![ScrollTo { position: w.scroll }],
            (MediaBody::Webpage(_), "highlight") => vec![Highlight {
                selector: msg
                    .get("selector")
                    .and_then(|v| v.as_str())
                    .unwrap_or_default()
                    .to_string(),
            }],
            (_, "draw") => vec![RenderStroke { stroke_id: stroke_id() }],
            (MediaBody::Whiteboard(_), "erase") => vec![RemoveStroke { stroke_id: stroke_id() }],
            _ => Vec::new(),
        }
    }
}

struct Leaf {
    entry: EventTaxonomyEntry,
    handler: Box<dyn ActionHandler>,
    invocations: AtomicU64,
}

struct MediaHandler {
    leaves: BTreeMap<String, Leaf>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TreeError {
    #[error("duplicate taxonomy entry {media_type}/{event_type}")]
    Duplicate { media_type: MediaType, event_type: String },
    #[error("handler registered for {media_type}/{event_type} which is not in the taxonomy")]
    Orphan { media_type: MediaType, event_type: String },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DispatchError {
    #[error("no handler for media type {0}")]
    UnroutableMediaType(MediaType),
    #[error("no {media_type} handler for event {event_type}")]
    UnroutableEvent { media_type: MediaType, event_type: String },
    #[error("unknown media block `{0}`")]
    MissingBlock(String),
    #[error(transparent)]
    Transition(#[from] TransitionError),
}

impl DispatchError {
    /// Tree level at which routing stopped: 1 for media type, 2 for event type.
    pub fn routing_level(&self) -> Option<u8> {
        match self {
            DispatchError::UnroutableMediaType(_) => Some(1),
            DispatchError::UnroutableEvent { .. } => Some(2),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DispatchResult {
    pub media_id: String,
    pub new_state: MediaState,
    pub ui_directives: Vec<UiDirective>,
}

/// Registers taxonomy entries and optional custom leaf handlers, then builds
/// an immutable [`HandlerTree`].
#[derive(Default)]
pub struct HandlerTreeBuilder {
    entries: Vec<EventTaxonomyEntry>,
    handlers: Vec<(MediaType, String, Box<dyn ActionHandler>)>,
}

impl HandlerTreeBuilder {
    pub fn entries(mut self, entries: impl IntoIterator<Item = EventTaxonomyEntry>) -> Self {
        self.entries.extend(entries);
        self
    }

    pub fn handler(mut self, media_type: MediaType, event_type: &str, handler: Box<dyn ActionHandler>) -> Self {
        self.handlers.push((media_type, event_type.to_string(), handler));
        self
    }

    pub fn build(self) -> Result<HandlerTree, TreeError> {
        let mut media: BTreeMap<MediaType, MediaHandler> = BTreeMap::new();
        for entry in self.entries {
            let node = media.entry(entry.media_type).or_insert_with(|| MediaHandler {
                leaves: BTreeMap::new(),
            });
            if node.leaves.contains_key(&entry.event_type) {
                return Err(TreeError::Duplicate {
                    media_type: entry.media_type,
                    event_type: entry.event_type,
                });
            }
            node.leaves.insert(
                entry.event_type.clone(),
                Leaf {
                    entry,
                    handler: Box::new(BuiltinLeaf),
                    invocations: AtomicU64::new(0),
                },
            );
        }
        for (media_type, event_type, handler) in self.handlers {
            let leaf = media
                .get_mut(&media_type)
                .and_then(|m| m.leaves.get_mut(&event_type))
                .ok_or_else(|| TreeError::Orphan {
                    media_type,
                    event_type: event_type.clone(),
                })?;
            leaf.handler = handler;
        }
        Ok(HandlerTree {
            media,
            routing_errors: AtomicU64::new(0),
        })
    }
}

pub struct HandlerTree {
    media: BTreeMap<MediaType, MediaHandler>,
    routing_errors: AtomicU64,
}

impl std::fmt::Debug for HandlerTree {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HandlerTree")
            .field("media_handlers", &self.media.len())
            .field("leaves", &self.leaf_count())
            .finish()
    }
}

/// Builds a tree with one built-in leaf per taxonomy entry.
pub fn build_tree(taxonomy: &[EventTaxonomyEntry]) -> Result<HandlerTree, TreeError> {
    HandlerTree::builder().entries(taxonomy.iter().cloned()).build()
}

impl HandlerTree {
    pub fn builder() -> HandlerTreeBuilder {
        HandlerTreeBuilder::default()
    }

    /// Tree over the full built-in taxonomy.
    pub fn standard() -> HandlerTree {
        build_tree(&crate::media::taxonomy()).expect("built-in taxonomy has unique entries")
    }

    pub fn media_handler_count(&self) -> usize {
        self.media.len()
    }

    pub fn leaf_count(&self) -> usize {
        self.media.values().map(|m| m.leaves.len()).sum()
    }

    /// The taxonomy entry served by a leaf, if one exists.
    pub fn leaf_entry(&self, media_type: MediaType, event_type: &str) -> Option<&EventTaxonomyEntry> {
        self.media
            .get(&media_type)
            .and_then(|m| m.leaves.get(event_type))
            .map(|l| &l.entry)
    }

    /// How many messages a leaf has consumed.
    pub fn leaf_invocations(&self, media_type: MediaType, event_type: &str) -> u64 {
        self.media
            .get(&media_type)
            .and_then(|m| m.leaves.get(event_type))
            .map_or(0, |l| l.invocations.load(Ordering::Relaxed))
    }

    pub fn total_invocations(&self) -> u64 {
        self.media
            .values()
            .flat_map(|m| m.leaves.values())
            .map(|l| l.invocations.load(Ordering::Relaxed))
            .sum()
    }

    pub fn routing_errors(&self) -> u64 {
        self.routing_errors.load(Ordering::Relaxed)
    }

    /// Routes `msg` to its leaf and computes the next state of its block,
    /// without touching `states`.
    pub fn route(&self, states: &StateMap, msg: &MediaEventMessage) -> Result<DispatchResult, DispatchError> {
        let Some(media) = self.media.get(&msg.media_type) else {
            self.routing_errors.fetch_add(1, Ordering::Relaxed);
            return Err(DispatchError::UnroutableMediaType(msg.media_type));
        };
        let Some(leaf) = media.leaves.get(&msg.event_type) else {
            self.routing_errors.fetch_add(1, Ordering::Relaxed);
            return Err(DispatchError::UnroutableEvent {
                media_type: msg.media_type,
                event_type: msg.event_type.clone(),
            });
        };
        let current = states
            .get(&msg.media_id)
            .ok_or_else(|| DispatchError::MissingBlock(msg.media_id.clone()))?;
        leaf.invocations.fetch_add(1, Ordering::Relaxed);
        let new_state = apply_event(current, msg)?;
        let ui_directives = leaf.handler.directives(msg, &new_state);
        Ok(DispatchResult {
            media_id: msg.media_id.clone(),
            new_state,
            ui_directives,
        })
    }

    /// Routes `msg` and stores the new state. On error `states` is unchanged.
    pub fn dispatch(&self, states: &mut StateMap, msg: &MediaEventMessage) -> Result<DispatchResult, DispatchError> {
        let result = self.route(states, msg)?;
        states.insert(result.media_id.clone(), result.new_state.clone());
        Ok(result)
    }
}
