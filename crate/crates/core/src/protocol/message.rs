use serde::{Deserialize, Serialize};

pub const PROTOCOL_VERSION: u32 = 1;

/// Observation image: a file path, or the bytes inline for remote clients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ImagePayload {
    Path(String),
    Inline { encoding: String, data: String },
}

/// One newline-delimited JSON frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Message {
    Hello {
        version: u32,
        /// `[width, height]` of the dataset images when known.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        image_size: Option<[u32; 2]>,
    },
    Reset {
        episode_id: u64,
    },
    Observe {
        step: u32,
        image: ImagePayload,
        goal_distance: f64,
        goal_bearing: f64,
        prev_action: Option<String>,
    },
    Act {
        action: String,
    },
    Done {
        outcome: String,
        final_distance: f64,
    },
    Error {
        message: String,
    },
}

impl Message {
    pub fn kind(&self) -> &'static str {
        match self {
            Message::Hello { .. } => "hello",
            Message::Reset { .. } => "reset",
            Message::Observe { .. } => "observe",
            Message::Act { .. } => "act",
            Message::Done { .. } => "done",
            Message::Error { .. } => "error",
        }
    }

    pub fn hello() -> Self {
        Message::Hello {
            version: PROTOCOL_VERSION,
            image_size: None,
        }
    }

    pub fn to_line(&self) -> String {
        let mut s = serde_json::to_string(self).expect("messages always serialize");
        s.push('\n');
        s
    }

    pub fn from_line(line: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(line.trim_end_matches(['\r', '\n']))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_wire_shapes() {
        assert_eq!(Message::hello().to_line(), "{\"kind\":\"hello\",\"version\":1}\n");
        assert_eq!(
            Message::Reset { episode_id: 4 }.to_line(),
            "{\"kind\":\"reset\",\"episode_id\":4}\n"
        );
        let obs = Message::Observe {
            step: 0,
            image: ImagePayload::Path("a.png".into()),
            goal_distance: 1.5,
            goal_bearing: -0.25,
            prev_action: None,
        };
        assert_eq!(
            obs.to_line(),
            "{\"kind\":\"observe\",\"step\":0,\"image\":\"a.png\",\"goal_distance\":1.5,\"goal_bearing\":-0.25,\"prev_action\":null}\n"
        );
        assert_eq!(
            Message::Act { action: "STOP".into() }.to_line(),
            "{\"kind\":\"act\",\"action\":\"STOP\"}\n"
        );
        assert_eq!(
            Message::Done {
                outcome: "success".into(),
                final_distance: 0.125
            }
            .to_line(),
            "{\"kind\":\"done\",\"outcome\":\"success\",\"final_distance\":0.125}\n"
        );
        assert_eq!(
            Message::Error { message: "x".into() }.to_line(),
            "{\"kind\":\"error\",\"message\":\"x\"}\n"
        );
        let sized = Message::Hello {
            version: 1,
            image_size: Some([256, 256]),
        };
        assert_eq!(sized.to_line(), "{\"kind\":\"hello\",\"version\":1,\"image_size\":[256,256]}\n");
    }

    #[test]
    fn parse_and_reject() {
        for m in [
            Message::hello(),
            Message::Act { action: "TURN_LEFT".into() },
            Message::Observe {
                step: 3,
                image: ImagePayload::Inline {
                    encoding: "base64".into(),
                    data: "AAEC".into(),
                },
                goal_distance: 0.1 + 0.2,
                goal_bearing: std::f64::consts::PI,
                prev_action: Some("MOVE_FORWARD".into()),
            },
        ] {
            assert_eq!(Message::from_line(&m.to_line()).unwrap(), m);
        }
        assert!(Message::from_line("{\"kind\":\"jump\"}").is_err());
        assert!(Message::from_line("not json").is_err());
        assert!(Message::from_line("{\"kind\":\"act\"}").is_err());
    }
}
