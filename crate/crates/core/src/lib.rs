//! Core of a real-time media collaboration service.
//!
//! Media controls travel as small event messages ([`protocol`]), a session
//! sequencer gives them a total order ([`session`]), a handler tree applies
//! them to per-block state ([`handler`], [`media`]), and a recorded session
//! log can be replayed deterministically ([`replay`]). Every frame is
//! metered ([`bandwidth`]).

pub mod bandwidth;
pub mod handler;
pub mod media;
pub mod protocol;
pub mod replay;
pub mod session;
