use std::sync::Arc;

use super::{Outbox, Outcome, ServerFrame, SessionError, SessionServer};

/// One client link, independent of the transport. The transport feeds
/// inbound text frames to [`Connection::handle_text`], drains the outbox and
/// calls [`Connection::close`] when the link drops.
pub struct Connection {
    server: Arc<SessionServer>,
    outbox: Outbox,
    joined: Option<(String, String)>,
}

impl Connection {
    pub fn new(server: Arc<SessionServer>, outbox: Outbox) -> Self {
        Connection {
            server,
            outbox,
            joined: None,
        }
    }

    /// Session and client id once the join handshake has succeeded.
    pub fn joined(&self) -> Option<(&str, &str)> {
        self.joined.as_ref().map(|(s, c)| (s.as_str(), c.as_str()))
    }

    /// Handles one inbound frame. The first frame must be a join. Errors are
    /// also reported to the client as error notices.
    pub fn handle_text(&mut self, text: &str) -> Result<Option<Outcome>, SessionError> {
        let Some((session_id, client_id)) = self.joined.clone() else {
            return match self.server.join_frame(text, self.outbox.clone()) {
                Ok(ack) => {
                    self.joined = Some((ack.session_id, ack.client_id));
                    Ok(None)
                }
                Err(e) => {
                    let _ = self.outbox.send(ServerFrame::Error(e.notice()).encode().into());
                    Err(e)
                }
            };
        };
        let outcome = self.server.submit_frame(&session_id, &client_id, text);
        if let Err(SessionError::NotJoined(_) | SessionError::UnknownSession(_)) = &outcome {
            self.joined = None;
        } else if self.server.expected_seq(&session_id, &client_id).is_err() {
            // a leave frame ends the membership
            self.joined = None;
        }
        outcome.map(Some)
    }

    /// Logs a leave for a client that disconnects without sending one.
    pub fn close(&mut self) {
        if let Some((session_id, client_id)) = self.joined.take() {
            let _ = self.server.leave(&session_id, &client_id);
        }
    }
}

impl Drop for Connection {
    fn drop(&mut self) {
        self.close();
    }
}
