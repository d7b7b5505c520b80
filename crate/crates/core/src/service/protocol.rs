//! JSON wire protocol. Every message is an object with a top-level `type`.
//!
//! Client to server: `hello`, `pair`, `action`, `new_pairing_code`,
//! `advance_hint`, `draft_submit`, `publish_board`, `reveal`.
//!
//! Server to client: `welcome`, `pairing_code`, `paired`, `ack`, `feed`,
//! `log_tail`, `profile`, `queue`, `room_profiles`, `graph`, `hint`,
//! `draft_ack`, `board`, `reveal`, `error`.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::gamekit::{DraftInput, ProfileDraft, Solution};
use crate::model::{
    Action, AffinityProfile, EventRecord, ImageId, RecommendationSlot, Role, RoomCode, TopicLabel,
    UserId,
};
use crate::profiling::word_cloud;
use crate::service::config::RoomMode;
use crate::socialgraph::Graph;

/// Upper bound on one inbound message.
pub const MAX_MESSAGE_BYTES: usize = 64 * 1024;

/// Opaque session token handed out in `welcome`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SessionId(pub String);

impl fmt::Display for SessionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ClientMessage {
    Hello {
        room: RoomCode,
        role: Role,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        nickname: Option<String>,
        /// Resumes an earlier session after a reconnect.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        session: Option<SessionId>,
    },
    Pair {
        code: String,
    },
    Action {
        action: Action,
        /// Client-generated id; a repeated nonce from the same user is
        /// acknowledged again without logging a second event.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        nonce: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        ts_client: Option<u64>,
    },
    NewPairingCode,
    AdvanceHint,
    DraftSubmit {
        draft: DraftInput,
    },
    PublishBoard,
    Reveal,
}

const CLIENT_TYPES: &[&str] = &[
    "hello",
    "pair",
    "action",
    "new_pairing_code",
    "advance_hint",
    "draft_submit",
    "publish_board",
    "reveal",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Welcome {
    pub session: SessionId,
    pub role: Role,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub user: Option<UserId>,
    pub room: RoomCode,
    pub mode: RoomMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pairing_code: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CloudTerm {
    pub topic: TopicLabel,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileView {
    pub user: UserId,
    pub affinities: BTreeMap<TopicLabel, f64>,
    pub total: f64,
    pub word_cloud: Vec<CloudTerm>,
}

impl ProfileView {
    pub fn new(profile: &AffinityProfile, cloud_terms: usize) -> Self {
        Self {
            user: profile.user.clone(),
            affinities: profile.affinities.clone(),
            total: profile.total_engagement,
            word_cloud: word_cloud(profile, cloud_terms)
                .into_iter()
                .map(|(topic, weight)| CloudTerm { topic, weight })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GraphKind {
    Similarity,
    Coengagement,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireEdge {
    pub a: String,
    pub b: String,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphView {
    pub kind: GraphKind,
    pub nodes: Vec<String>,
    pub edges: Vec<WireEdge>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clusters: Option<Vec<Vec<String>>>,
}

impl GraphView {
    pub fn new<N, W>(kind: GraphKind, graph: &Graph<N, W>, clusters: Option<&[Vec<N>]>) -> Self
    where
        N: Ord + Clone + fmt::Display,
        W: Copy + Into<f64>,
    {
        Self {
            kind,
            nodes: graph.nodes.iter().map(ToString::to_string).collect(),
            edges: graph
                .edges
                .iter()
                .map(|((a, b), w)| WireEdge {
                    a: a.to_string(),
                    b: b.to_string(),
                    weight: (*w).into(),
                })
                .collect(),
            clusters: clusters.map(|cs| {
                cs.iter()
                    .map(|c| c.iter().map(ToString::to_string).collect())
                    .collect()
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    Welcome(Welcome),
    PairingCode {
        code: String,
        expires_ts: u64,
    },
    Paired {
        student: UserId,
    },
    Ack {
        event: EventRecord,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        nonce: Option<String>,
    },
    Feed {
        images: Vec<ImageId>,
    },
    LogTail {
        user: UserId,
        events: Vec<EventRecord>,
    },
    Profile(ProfileView),
    Queue {
        user: UserId,
        slots: Vec<RecommendationSlot>,
    },
    RoomProfiles {
        profiles: Vec<ProfileView>,
        classroom: BTreeMap<TopicLabel, f64>,
    },
    Graph(GraphView),
    Hint {
        index: usize,
        text: String,
        prompts: Vec<String>,
    },
    DraftAck {
        pair_id: String,
        version: u32,
    },
    Board {
        drafts: Vec<ProfileDraft>,
    },
    Reveal {
        solution: Solution,
    },
    Error {
        code: String,
        message: String,
    },
}

impl ServerMessage {
    pub fn error(code: impl Into<String>, message: impl Into<String>) -> Self {
        ServerMessage::Error {
            code: code.into(),
            message: message.into(),
        }
    }

    pub fn from_error(err: &crate::Error) -> Self {
        Self::error(err.code(), err.to_string())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("server messages always serialize")
    }
}

/// Why an inbound text frame could not be decoded.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProtocolError {
    /// One of `too_large`, `malformed_json`, `missing_type`,
    /// `unknown_type`, `invalid_message`.
    pub code: &'static str,
    pub message: String,
}

impl ProtocolError {
    fn new(code: &'static str, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }

    pub fn to_message(&self) -> ServerMessage {
        ServerMessage::error(self.code, self.message.clone())
    }
}

impl fmt::Display for ProtocolError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.code, self.message)
    }
}

impl std::error::Error for ProtocolError {}

/// Decodes one client frame, classifying every failure.
pub fn parse_client(text: &str) -> Result<ClientMessage, ProtocolError> {
    if text.len() > MAX_MESSAGE_BYTES {
        return Err(ProtocolError::new(
            "too_large",
            format!("message of {} bytes exceeds {MAX_MESSAGE_BYTES}", text.len()),
        ));
    }
    let value: serde_json::Value = serde_json::from_str(text)
        .map_err(|e| ProtocolError::new("malformed_json", e.to_string()))?;
    let Some(kind) = value.get("type") else {
        return Err(ProtocolError::new("missing_type", "message has no \"type\" field"));
    };
    let Some(kind) = kind.as_str() else {
        return Err(ProtocolError::new("missing_type", "\"type\" must be a string"));
    };
    if !CLIENT_TYPES.contains(&kind) {
        return Err(ProtocolError::new("unknown_type", format!("unknown message type {kind:?}")));
    }
    serde_json::from_value(value).map_err(|e| ProtocolError::new("invalid_message", e.to_string()))
}

/// Decodes one server frame (used by simulated clients and tests).
pub fn parse_server(text: &str) -> Result<ServerMessage, ProtocolError> {
    serde_json::from_str(text).map_err(|e| ProtocolError::new("invalid_message", e.to_string()))
}
