use std::path::PathBuf;
use std::time::Duration;

use base64::Engine as _;

use super::{ImagePayload, Message, Transport, DEFAULT_TIMEOUT, PROTOCOL_VERSION};
use crate::sim::{
    Action, EpisodeSpec, EpisodeSummary, Outcome, Policy, PolicyError, SimError, Simulator, StepObservation,
    Trajectory,
};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub enum ImageMode {
    /// Send the image reference as stored in the database.
    #[default]
    Path,
    /// Read the file (relative to `root`) and send it base64-encoded.
    Inline { root: PathBuf },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionOptions {
    pub timeout: Duration,
    pub image_mode: ImageMode,
    /// Announced in `hello` when the dataset provides it.
    pub image_size: Option<[u32; 2]>,
}

impl Default for SessionOptions {
    fn default() -> Self {
        Self {
            timeout: DEFAULT_TIMEOUT,
            image_mode: ImageMode::Path,
            image_size: None,
        }
    }
}

/// Simulator side of a session: a [`Policy`] whose decisions come from the
/// peer. Any protocol failure closes the session after telling the peer.
pub struct RemotePolicy {
    transport: Transport,
    opts: SessionOptions,
    failed: Option<PolicyError>,
}

impl RemotePolicy {
    /// Sends `hello` and waits for the peer's `hello`.
    pub fn handshake(mut transport: Transport, opts: SessionOptions) -> Result<Self, PolicyError> {
        transport.send(&Message::Hello {
            version: PROTOCOL_VERSION,
            image_size: opts.image_size,
        })?;
        let mut me = Self {
            transport,
            opts,
            failed: None,
        };
        match me.transport.recv(me.opts.timeout) {
            Ok(Message::Hello { version, .. }) if version == PROTOCOL_VERSION => Ok(me),
            Ok(Message::Hello { version, .. }) => {
                Err(me.fail(PolicyError::Protocol(format!("unsupported protocol version {version}"))))
            }
            Ok(other) => Err(me.fail(unexpected("hello", &other))),
            Err(e) => Err(me.fail(e)),
        }
    }

    /// Records the first error, tells the peer, and closes the transport.
    fn fail(&mut self, err: PolicyError) -> PolicyError {
        if self.failed.is_none() {
            let _ = self.transport.send(&Message::Error {
                message: err.to_string(),
            });
            self.transport.close();
            self.failed = Some(err.clone());
        }
        err
    }

    fn check_open(&self) -> Result<(), PolicyError> {
        match &self.failed {
            Some(e) => Err(PolicyError::Protocol(format!("session closed after earlier error: {e}"))),
            None => Ok(()),
        }
    }

    fn image_payload(&self, obs: &StepObservation) -> Result<ImagePayload, PolicyError> {
        let reference = obs.image_ref().to_string();
        match &self.opts.image_mode {
            ImageMode::Path => Ok(ImagePayload::Path(reference)),
            ImageMode::Inline { root } => {
                let path = root.join(&reference);
                let bytes = std::fs::read(&path)
                    .map_err(|e| PolicyError::Transport(format!("cannot read image {}: {e}", path.display())))?;
                Ok(ImagePayload::Inline {
                    encoding: "base64".into(),
                    data: base64::engine::general_purpose::STANDARD.encode(bytes),
                })
            }
        }
    }

    pub fn error(&self) -> Option<&PolicyError> {
        self.failed.as_ref()
    }

    pub fn close(&mut self) {
        self.transport.close();
    }
}

fn unexpected(expected: &str, got: &Message) -> PolicyError {
    match got {
        Message::Error { message } => PolicyError::Remote(message.clone()),
        other => PolicyError::Protocol(format!("expected {expected}, got {}", other.kind())),
    }
}

impl Policy for RemotePolicy {
    fn reset(&mut self, spec: &EpisodeSpec) -> Result<(), PolicyError> {
        self.check_open()?;
        let r = self.transport.send(&Message::Reset { episode_id: spec.id });
        r.map_err(|e| self.fail(e))
    }

    fn act(&mut self, obs: &StepObservation) -> Result<Action, PolicyError> {
        self.check_open()?;
        let image = self.image_payload(obs).map_err(|e| self.fail(e))?;
        let msg = Message::Observe {
            step: obs.step,
            image,
            goal_distance: obs.goal_distance,
            goal_bearing: obs.goal_bearing,
            prev_action: obs.prev_action.map(|a| a.wire_name().to_string()),
        };
        self.transport.send(&msg).map_err(|e| self.fail(e))?;
        match self.transport.recv(self.opts.timeout) {
            Ok(Message::Act { action }) => action
                .parse::<Action>()
                .map_err(|_| self.fail(PolicyError::InvalidAction(action))),
            Ok(other) => Err(self.fail(unexpected("act", &other))),
            Err(e) => Err(self.fail(e)),
        }
    }

    fn finish(&mut self, summary: &EpisodeSummary) -> Result<(), PolicyError> {
        self.check_open()?;
        let r = self.transport.send(&Message::Done {
            outcome: summary.outcome.name().to_string(),
            final_distance: summary.final_distance,
        });
        r.map_err(|e| self.fail(e))
    }
}

/// Result of driving one session over a list of episodes.
#[derive(Debug)]
pub struct SessionResult {
    pub trajectories: Vec<Trajectory>,
    /// The error that closed the session early, if any.
    pub error: Option<PolicyError>,
}

impl SessionResult {
    pub fn aborted_ids(&self) -> Vec<u64> {
        self.trajectories
            .iter()
            .filter(|t| matches!(t.outcome, Outcome::Aborted(_)))
            .map(|t| t.spec.id)
            .collect()
    }
}

/// Drives `hello → (reset → (observe → act)* → done)*` over `transport`,
/// one episode after another. Once the session fails every remaining
/// episode is recorded as aborted.
pub fn serve_policy_session(
    transport: Transport,
    sim: &Simulator<'_>,
    specs: &[EpisodeSpec],
    opts: SessionOptions,
) -> Result<SessionResult, SimError> {
    let mut policy = match RemotePolicy::handshake(transport, opts) {
        Ok(p) => p,
        Err(e) => {
            let trajectories = specs
                .iter()
                .map(|s| aborted_without_running(sim, s, &e))
                .collect::<Result<_, SimError>>()?;
            return Ok(SessionResult {
                trajectories,
                error: Some(e),
            });
        }
    };
    let mut trajectories = Vec::with_capacity(specs.len());
    for spec in specs {
        if let Some(e) = policy.error() {
            trajectories.push(aborted_without_running(sim, spec, e)?);
            continue;
        }
        trajectories.push(sim.run_episode(&mut policy, spec)?);
    }
    let error = policy.error().cloned();
    policy.close();
    Ok(SessionResult { trajectories, error })
}

fn aborted_without_running(sim: &Simulator<'_>, spec: &EpisodeSpec, err: &PolicyError) -> Result<Trajectory, SimError> {
    let mut state = sim.reset(spec)?;
    state.outcome = Some(Outcome::Aborted(format!("session closed: {err}")));
    Ok(state.into_trajectory())
}

/// Events a client sees, in session order.
#[derive(Debug, Clone, PartialEq)]
pub enum ClientEvent {
    Reset { episode_id: u64 },
    Observe(ObservationFrame),
    Done { outcome: String, final_distance: f64 },
    Error(String),
    /// The simulator closed the connection.
    Closed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObservationFrame {
    pub step: u32,
    pub image: ImagePayload,
    pub goal_distance: f64,
    pub goal_bearing: f64,
    pub prev_action: Option<String>,
}

/// Policy side of a session. Used by the bundled greedy client and tests;
/// any language can implement the same frames.
pub struct PolicyClient {
    transport: Transport,
    timeout: Duration,
    pub image_size: Option<[u32; 2]>,
}

impl PolicyClient {
    /// Waits for the simulator's `hello` and answers it.
    pub fn connect(mut transport: Transport, timeout: Duration) -> Result<Self, PolicyError> {
        match transport.recv(timeout)? {
            Message::Hello { version, image_size } if version == PROTOCOL_VERSION => {
                transport.send(&Message::hello())?;
                Ok(Self {
                    transport,
                    timeout,
                    image_size,
                })
            }
            other => Err(unexpected("hello", &other)),
        }
    }

    pub fn next_event(&mut self) -> Result<ClientEvent, PolicyError> {
        match self.transport.recv(self.timeout) {
            Ok(Message::Reset { episode_id }) => Ok(ClientEvent::Reset { episode_id }),
            Ok(Message::Observe {
                step,
                image,
                goal_distance,
                goal_bearing,
                prev_action,
            }) => Ok(ClientEvent::Observe(ObservationFrame {
                step,
                image,
                goal_distance,
                goal_bearing,
                prev_action,
            })),
            Ok(Message::Done { outcome, final_distance }) => Ok(ClientEvent::Done { outcome, final_distance }),
            Ok(Message::Error { message }) => Ok(ClientEvent::Error(message)),
            Ok(other) => Err(PolicyError::Protocol(format!("unexpected {} from simulator", other.kind()))),
            Err(PolicyError::Transport(_)) => Ok(ClientEvent::Closed),
            Err(e) => Err(e),
        }
    }

    pub fn act(&mut self, action: Action) -> Result<(), PolicyError> {
        self.transport.send(&Message::Act {
            action: action.wire_name().to_string(),
        })
    }

    /// Answers every observation with `decide` until the simulator hangs up.
    /// Returns the number of episodes completed.
    pub fn run<F: FnMut(&ObservationFrame) -> Action>(mut self, mut decide: F) -> Result<usize, PolicyError> {
        let mut episodes = 0;
        loop {
            match self.next_event()? {
                ClientEvent::Observe(frame) => self.act(decide(&frame))?,
                ClientEvent::Done { .. } => episodes += 1,
                ClientEvent::Reset { .. } => {}
                ClientEvent::Error(m) => return Err(PolicyError::Remote(m)),
                ClientEvent::Closed => return Ok(episodes),
            }
        }
    }
}
