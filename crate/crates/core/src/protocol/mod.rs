//! Newline-delimited JSON protocol that lets an external process act as the
//! policy, over a spawned child's stdio or a TCP connection.
//!
//! ```text
//! sim → {"kind":"hello","version":1}
//! sim ← {"kind":"hello","version":1}
//! sim → {"kind":"reset","episode_id":0}
//! sim → {"kind":"observe","step":0,"image":"img_00042.png","goal_distance":2.1,"goal_bearing":0.3,"prev_action":null}
//! sim ← {"kind":"act","action":"TURN_LEFT"}
//!       ...
//! sim → {"kind":"done","outcome":"success","final_distance":0.08}
//! ```
//!
//! Any malformed, out-of-order or late reply ends the session with an
//! `error` frame.

mod message;
mod session;
mod transport;

pub use message::{ImagePayload, Message, PROTOCOL_VERSION};
pub use session::{
    serve_policy_session, ClientEvent, ImageMode, ObservationFrame, PolicyClient, RemotePolicy, SessionOptions,
    SessionResult,
};
pub use transport::{duplex, Transport, DEFAULT_TIMEOUT};
