//! Domain vocabulary shared by every engine.
//!
//! All types here are plain immutable values. Constructors validate their
//! invariants and report the offending field through [`ValidationError`];
//! serde deserialization goes through the same constructors, so a value that
//! exists is a value that is valid.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

/// Upper bound on a single dwell report (one hour).
pub const MAX_DWELL_MS: u64 = 3_600_000;
pub const MAX_EMOJI_CODE_LEN: usize = 32;
pub const MAX_IDENT_LEN: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid {field}: {reason}")]
pub struct ValidationError {
    pub field: &'static str,
    pub reason: String,
}

impl ValidationError {
    pub fn new(field: &'static str, reason: impl Into<String>) -> Self {
        Self {
            field,
            reason: reason.into(),
        }
    }
}

fn check_ident(field: &'static str, value: &str) -> Result<(), ValidationError> {
    if value.is_empty() {
        return Err(ValidationError::new(field, "must not be empty"));
    }
    if value.chars().count() > MAX_IDENT_LEN {
        return Err(ValidationError::new(
            field,
            format!("longer than {MAX_IDENT_LEN} characters"),
        ));
    }
    if value.chars().any(char::is_control) {
        return Err(ValidationError::new(field, "contains control characters"));
    }
    Ok(())
}

macro_rules! string_newtype {
    ($(#[$meta:meta])* $name:ident, $field:literal, $check:expr) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(try_from = "String", into = "String")]
        pub struct $name(String);

        impl $name {
            pub fn new(value: impl Into<String>) -> Result<Self, ValidationError> {
                let value = value.into();
                let check: fn(&str) -> Result<(), ValidationError> = $check;
                check(&value)?;
                Ok(Self(value))
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl TryFrom<String> for $name {
            type Error = ValidationError;
            fn try_from(value: String) -> Result<Self, Self::Error> {
                Self::new(value)
            }
        }

        impl From<$name> for String {
            fn from(value: $name) -> String {
                value.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl std::borrow::Borrow<str> for $name {
            fn borrow(&self) -> &str {
                &self.0
            }
        }
    };
}

string_newtype!(
    /// Pseudonymous user identity, derived from a nickname.
    UserId,
    "user",
    |v| check_ident("user", v)
);

string_newtype!(ImageId, "image", |v| check_ident("image", v));

string_newtype!(
    /// Six uppercase alphanumerics.
    RoomCode,
    "room",
    |v| {
        if v.len() == 6 && v.bytes().all(|b| b.is_ascii_uppercase() || b.is_ascii_digit()) {
            Ok(())
        } else {
            Err(ValidationError::new("room", "must match [A-Z0-9]{6}"))
        }
    }
);

string_newtype!(
    /// Lowercase, trimmed, non-empty topic label.
    TopicLabel,
    "topic",
    |v| {
        check_ident("topic", v)?;
        if v.trim() != v {
            return Err(ValidationError::new("topic", "must be trimmed"));
        }
        if v.chars().any(char::is_uppercase) {
            return Err(ValidationError::new("topic", "must be lowercase"));
        }
        Ok(())
    }
);

impl TopicLabel {
    /// Trims and lowercases `raw` before validating it.
    pub fn normalized(raw: &str) -> Result<Self, ValidationError> {
        Self::new(raw.trim().to_lowercase())
    }
}

/// A feed image with its curated topic labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "ImageItemWire")]
pub struct ImageItem {
    pub id: ImageId,
    #[serde(rename = "path")]
    pub source_path: String,
    pub topics: Vec<TopicLabel>,
    pub author: String,
}

#[derive(Deserialize)]
struct ImageItemWire {
    id: ImageId,
    path: String,
    topics: Vec<TopicLabel>,
    author: String,
}

impl TryFrom<ImageItemWire> for ImageItem {
    type Error = ValidationError;
    fn try_from(w: ImageItemWire) -> Result<Self, Self::Error> {
        ImageItem::new(w.id, w.path, w.topics, w.author)
    }
}

impl ImageItem {
    pub fn new(
        id: ImageId,
        source_path: impl Into<String>,
        topics: Vec<TopicLabel>,
        author: impl Into<String>,
    ) -> Result<Self, ValidationError> {
        let source_path = source_path.into();
        if source_path.is_empty() {
            return Err(ValidationError::new("path", "must not be empty"));
        }
        if source_path.starts_with('/') {
            return Err(ValidationError::new("path", "must be relative"));
        }
        if topics.is_empty() {
            return Err(ValidationError::new("topics", "must not be empty"));
        }
        let unique: BTreeSet<_> = topics.iter().collect();
        if unique.len() != topics.len() {
            return Err(ValidationError::new("topics", "contains duplicates"));
        }
        let author = author.into();
        check_ident("author", &author)?;
        Ok(Self {
            id,
            source_path,
            topics,
            author,
        })
    }
}

/// The labeled image corpus a room serves from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "ManifestWire")]
pub struct Manifest {
    images: Vec<ImageItem>,
    #[serde(skip)]
    index: HashMap<ImageId, usize>,
}

#[derive(Deserialize)]
struct ManifestWire {
    images: Vec<ImageItem>,
}

impl TryFrom<ManifestWire> for Manifest {
    type Error = ValidationError;
    fn try_from(w: ManifestWire) -> Result<Self, Self::Error> {
        Manifest::new(w.images)
    }
}

impl Manifest {
    pub fn new(images: Vec<ImageItem>) -> Result<Self, ValidationError> {
        let mut index = HashMap::with_capacity(images.len());
        for (pos, item) in images.iter().enumerate() {
            if index.insert(item.id.clone(), pos).is_some() {
                return Err(ValidationError::new(
                    "images",
                    format!("duplicate image id {}", item.id),
                ));
            }
        }
        Ok(Self { images, index })
    }

    pub fn from_json(text: &str) -> Result<Self, crate::Error> {
        serde_json::from_str(text).map_err(|e| crate::Error::Parse {
            line: e.line(),
            message: e.to_string(),
        })
    }

    pub fn images(&self) -> &[ImageItem] {
        &self.images
    }

    pub fn get(&self, id: &str) -> Option<&ImageItem> {
        self.index.get(id).map(|&pos| &self.images[pos])
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    /// The manifest's topic set.
    pub fn topics(&self) -> BTreeSet<&TopicLabel> {
        self.images.iter().flat_map(|i| i.topics.iter()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    ViewDwell,
    Like,
    Unlike,
    Emoji,
    Comment,
    Share,
    Follow,
    Inactivity,
    /// An image was placed on the user's screen by the feed.
    Impression,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::ViewDwell => "view_dwell",
            EventKind::Like => "like",
            EventKind::Unlike => "unlike",
            EventKind::Emoji => "emoji",
            EventKind::Comment => "comment",
            EventKind::Share => "share",
            EventKind::Follow => "follow",
            EventKind::Inactivity => "inactivity",
            EventKind::Impression => "impression",
        }
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShareScope {
    Private,
    Friends,
    Public,
}

/// A user action before the server has sequenced it.
///
/// Comment text never reaches this type; only its length does.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "ActionWire", into = "ActionWire")]
pub enum Action {
    ViewDwell { image: ImageId, dwell_ms: u64 },
    Like { image: ImageId },
    Unlike { image: ImageId },
    Emoji { image: ImageId, emoji_code: String },
    Comment { image: ImageId, comment_len: u32 },
    Share { image: ImageId, share_scope: ShareScope },
    Follow { followee: UserId, image: Option<ImageId> },
    Inactivity { gap_ms: u64 },
    Impression { image: ImageId },
}

/// Flat wire shape of an action: `kind` plus the kind-specific fields.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ActionWire {
    pub kind: Option<EventKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image: Option<ImageId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dwell_ms: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub emoji_code: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comment_len: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub share_scope: Option<ShareScope>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub followee: Option<UserId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gap_ms: Option<u64>,
}

impl ActionWire {
    fn forbid<T>(field: &'static str, value: &Option<T>, kind: EventKind) -> Result<(), ValidationError> {
        match value {
            Some(_) => Err(ValidationError::new(
                field,
                format!("not allowed for kind {kind}"),
            )),
            None => Ok(()),
        }
    }

    fn require<T>(field: &'static str, value: Option<T>, kind: EventKind) -> Result<T, ValidationError> {
        value.ok_or_else(|| ValidationError::new(field, format!("required for kind {kind}")))
    }
}

impl TryFrom<ActionWire> for Action {
    type Error = ValidationError;

    fn try_from(w: ActionWire) -> Result<Self, Self::Error> {
        use EventKind as K;
        let kind = w
            .kind
            .ok_or_else(|| ValidationError::new("kind", "missing"))?;
        let allowed: &[&str] = match kind {
            K::ViewDwell => &["image", "dwell_ms"],
            K::Like | K::Unlike | K::Impression => &["image"],
            K::Emoji => &["image", "emoji_code"],
            K::Comment => &["image", "comment_len"],
            K::Share => &["image", "share_scope"],
            K::Follow => &["followee", "image"],
            K::Inactivity => &["gap_ms"],
        };
        let ok = |f: &str| allowed.contains(&f);
        if !ok("image") {
            ActionWire::forbid("image", &w.image, kind)?;
        }
        if !ok("dwell_ms") {
            ActionWire::forbid("dwell_ms", &w.dwell_ms, kind)?;
        }
        if !ok("emoji_code") {
            ActionWire::forbid("emoji_code", &w.emoji_code, kind)?;
        }
        if !ok("comment_len") {
            ActionWire::forbid("comment_len", &w.comment_len, kind)?;
        }
        if !ok("share_scope") {
            ActionWire::forbid("share_scope", &w.share_scope, kind)?;
        }
        if !ok("followee") {
            ActionWire::forbid("followee", &w.followee, kind)?;
        }
        if !ok("gap_ms") {
            ActionWire::forbid("gap_ms", &w.gap_ms, kind)?;
        }

        let action = match kind {
            K::ViewDwell => Action::ViewDwell {
                image: ActionWire::require("image", w.image, kind)?,
                dwell_ms: ActionWire::require("dwell_ms", w.dwell_ms, kind)?,
            },
            K::Like => Action::Like {
                image: ActionWire::require("image", w.image, kind)?,
            },
            K::Unlike => Action::Unlike {
                image: ActionWire::require("image", w.image, kind)?,
            },
            K::Impression => Action::Impression {
                image: ActionWire::require("image", w.image, kind)?,
            },
            K::Emoji => Action::Emoji {
                image: ActionWire::require("image", w.image, kind)?,
                emoji_code: ActionWire::require("emoji_code", w.emoji_code, kind)?,
            },
            K::Comment => Action::Comment {
                image: ActionWire::require("image", w.image, kind)?,
                comment_len: ActionWire::require("comment_len", w.comment_len, kind)?,
            },
            K::Share => Action::Share {
                image: ActionWire::require("image", w.image, kind)?,
                share_scope: ActionWire::require("share_scope", w.share_scope, kind)?,
            },
            K::Follow => Action::Follow {
                followee: ActionWire::require("followee", w.followee, kind)?,
                image: w.image,
            },
            K::Inactivity => Action::Inactivity {
                gap_ms: ActionWire::require("gap_ms", w.gap_ms, kind)?,
            },
        };
        action.validate()?;
        Ok(action)
    }
}

impl From<Action> for ActionWire {
    fn from(action: Action) -> Self {
        let mut w = ActionWire {
            kind: Some(action.kind()),
            ..ActionWire::default()
        };
        match action {
            Action::ViewDwell { image, dwell_ms } => {
                w.image = Some(image);
                w.dwell_ms = Some(dwell_ms);
            }
            Action::Like { image } | Action::Unlike { image } | Action::Impression { image } => {
                w.image = Some(image);
            }
            Action::Emoji { image, emoji_code } => {
                w.image = Some(image);
                w.emoji_code = Some(emoji_code);
            }
            Action::Comment { image, comment_len } => {
                w.image = Some(image);
                w.comment_len = Some(comment_len);
            }
            Action::Share { image, share_scope } => {
                w.image = Some(image);
                w.share_scope = Some(share_scope);
            }
            Action::Follow { followee, image } => {
                w.followee = Some(followee);
                w.image = image;
            }
            Action::Inactivity { gap_ms } => w.gap_ms = Some(gap_ms),
        }
        w
    }
}

impl Action {
    pub fn kind(&self) -> EventKind {
        match self {
            Action::ViewDwell { .. } => EventKind::ViewDwell,
            Action::Like { .. } => EventKind::Like,
            Action::Unlike { .. } => EventKind::Unlike,
            Action::Emoji { .. } => EventKind::Emoji,
            Action::Comment { .. } => EventKind::Comment,
            Action::Share { .. } => EventKind::Share,
            Action::Follow { .. } => EventKind::Follow,
            Action::Inactivity { .. } => EventKind::Inactivity,
            Action::Impression { .. } => EventKind::Impression,
        }
    }

    /// Image the action refers to, if any.
    pub fn image(&self) -> Option<&ImageId> {
        match self {
            Action::ViewDwell { image, .. }
            | Action::Like { image }
            | Action::Unlike { image }
            | Action::Emoji { image, .. }
            | Action::Comment { image, .. }
            | Action::Share { image, .. }
            | Action::Impression { image } => Some(image),
            Action::Follow { image, .. } => image.as_ref(),
            Action::Inactivity { .. } => None,
        }
    }

    pub fn validate(&self) -> Result<(), ValidationError> {
        match self {
            Action::ViewDwell { dwell_ms, .. } if *dwell_ms > MAX_DWELL_MS => Err(
                ValidationError::new("dwell_ms", format!("exceeds cap of {MAX_DWELL_MS} ms")),
            ),
            Action::Emoji { emoji_code, .. } => {
                if emoji_code.is_empty() {
                    Err(ValidationError::new("emoji_code", "must not be empty"))
                } else if emoji_code.chars().count() > MAX_EMOJI_CODE_LEN {
                    Err(ValidationError::new("emoji_code", "too long"))
                } else {
                    Ok(())
                }
            }
            Action::Inactivity { gap_ms: 0 } => {
                Err(ValidationError::new("gap_ms", "must be positive"))
            }
            _ => Ok(()),
        }
    }
}

/// One sequenced, server-timestamped user action: a data trace.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "EventWire", into = "EventWire")]
pub struct EventRecord {
    pub seq: u64,
    pub room: RoomCode,
    pub user: UserId,
    pub ts_server: u64,
    /// Advisory client clock; never used for ordering or scoring.
    pub ts_client: Option<u64>,
    pub action: Action,
}

#[derive(Serialize, Deserialize)]
struct EventWire {
    seq: u64,
    room: RoomCode,
    user: UserId,
    ts_server: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    ts_client: Option<u64>,
    #[serde(flatten)]
    action: ActionWire,
}

impl TryFrom<EventWire> for EventRecord {
    type Error = ValidationError;
    fn try_from(w: EventWire) -> Result<Self, Self::Error> {
        EventRecord::new(
            w.seq,
            w.room,
            w.user,
            w.ts_server,
            w.ts_client,
            Action::try_from(w.action)?,
        )
    }
}

impl From<EventRecord> for EventWire {
    fn from(e: EventRecord) -> Self {
        EventWire {
            seq: e.seq,
            room: e.room,
            user: e.user,
            ts_server: e.ts_server,
            ts_client: e.ts_client,
            action: e.action.into(),
        }
    }
}

impl EventRecord {
    pub fn new(
        seq: u64,
        room: RoomCode,
        user: UserId,
        ts_server: u64,
        ts_client: Option<u64>,
        action: Action,
    ) -> Result<Self, ValidationError> {
        if seq == 0 {
            return Err(ValidationError::new("seq", "must start at 1"));
        }
        action.validate()?;
        if let Action::Follow { followee, .. } = &action {
            if *followee == user {
                return Err(ValidationError::new("followee", "cannot follow oneself"));
            }
        }
        Ok(Self {
            seq,
            room,
            user,
            ts_server,
            ts_client,
            action,
        })
    }

    pub fn kind(&self) -> EventKind {
        self.action.kind()
    }

    pub fn image(&self) -> Option<&ImageId> {
        self.action.image()
    }

    /// One log line, without the trailing newline.
    pub fn to_log_line(&self) -> String {
        serde_json::to_string(self).expect("event records always serialize")
    }

    pub fn from_log_line(line: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(line)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GradeBand {
    G5,
    G8,
    Other,
}

/// Data a user volunteered explicitly.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GivenData {
    pub user: UserId,
    pub nickname: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grade_band: Option<GradeBand>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub declared_interests: Option<Vec<TopicLabel>>,
}

impl GivenData {
    pub fn new(
        user: UserId,
        nickname: impl Into<String>,
        grade_band: Option<GradeBand>,
        declared_interests: Option<Vec<TopicLabel>>,
        manifest: &Manifest,
    ) -> Result<Self, ValidationError> {
        let nickname = nickname.into();
        if nickname.trim().is_empty() {
            return Err(ValidationError::new("nickname", "must not be empty"));
        }
        if let Some(interests) = &declared_interests {
            let topics = manifest.topics();
            if let Some(bad) = interests.iter().find(|t| !topics.contains(t)) {
                return Err(ValidationError::new(
                    "declared_interests",
                    format!("{bad} is not a manifest topic"),
                ));
            }
        }
        Ok(Self {
            user,
            nickname,
            grade_band,
            declared_interests,
        })
    }
}

/// What a connected device is in the classroom.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Student,
    /// A second device mirroring one student's data.
    Analytics,
    Teacher,
}

/// Engagement of one user with one image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngagementCell {
    pub user: UserId,
    pub image: ImageId,
    pub score: f64,
    pub components: BTreeMap<EventKind, f64>,
}

/// A user's normalized topic affinities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffinityProfile {
    pub user: UserId,
    pub affinities: BTreeMap<TopicLabel, f64>,
    pub total_engagement: f64,
}

impl AffinityProfile {
    pub fn empty(user: UserId) -> Self {
        Self {
            user,
            affinities: BTreeMap::new(),
            total_engagement: 0.0,
        }
    }

    pub fn affinity(&self, topic: &TopicLabel) -> f64 {
        self.affinities.get(topic).copied().unwrap_or(0.0)
    }

    pub fn is_empty(&self) -> bool {
        self.affinities.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicContribution {
    pub topic: TopicLabel,
    pub contribution: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborContribution {
    pub user: UserId,
    pub similarity: f64,
    pub their_engagement: f64,
}

/// One queued recommendation with its explanation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecommendationSlot {
    pub image: ImageId,
    pub score: f64,
    pub content_part: f64,
    pub collab_part: f64,
    pub popularity_part: f64,
    pub explain_topics: Vec<TopicContribution>,
    pub explain_users: Vec<NeighborContribution>,
    pub explored: bool,
}
