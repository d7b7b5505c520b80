//! Folds an event log into per-(user, image) engagement scores.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::model::{
    Action, EngagementCell, EventKind, EventRecord, ImageId, Manifest, RoomCode, ShareScope,
    UserId, ValidationError,
};
use crate::{Error, Result};

/// Per-interaction contribution to an engagement score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WeightTable {
    /// Credit for one fully capped view.
    pub w_dwell: f64,
    pub dwell_cap_ms: u64,
    pub w_like: f64,
    pub w_emoji: f64,
    pub w_comment: f64,
    pub w_share_private: f64,
    pub w_share_friends: f64,
    pub w_share_public: f64,
    pub w_follow: f64,
}

impl Default for WeightTable {
    fn default() -> Self {
        Self {
            w_dwell: 1.0,
            dwell_cap_ms: 10_000,
            w_like: 2.0,
            w_emoji: 1.5,
            w_comment: 3.0,
            w_share_private: 2.0,
            w_share_friends: 3.0,
            w_share_public: 4.0,
            w_follow: 2.5,
        }
    }
}

impl WeightTable {
    pub fn validate(&self) -> Result<(), ValidationError> {
        let weights = [
            ("w_dwell", self.w_dwell),
            ("w_like", self.w_like),
            ("w_emoji", self.w_emoji),
            ("w_comment", self.w_comment),
            ("w_share_private", self.w_share_private),
            ("w_share_friends", self.w_share_friends),
            ("w_share_public", self.w_share_public),
            ("w_follow", self.w_follow),
        ];
        for (field, w) in weights {
            if !(w.is_finite() && w >= 0.0) {
                return Err(ValidationError::new(field, "must be a finite non-negative number"));
            }
        }
        if self.dwell_cap_ms == 0 {
            return Err(ValidationError::new("dwell_cap_ms", "must be positive"));
        }
        Ok(())
    }

    pub fn share(&self, scope: ShareScope) -> f64 {
        match scope {
            ShareScope::Private => self.w_share_private,
            ShareScope::Friends => self.w_share_friends,
            ShareScope::Public => self.w_share_public,
        }
    }

    /// Dwell credit for `total_ms` of accumulated viewing on one image.
    pub fn dwell_credit(&self, total_ms: u64) -> f64 {
        self.w_dwell * total_ms.min(self.dwell_cap_ms) as f64 / self.dwell_cap_ms as f64
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
struct CellAccum {
    dwell_ms: u64,
    components: BTreeMap<EventKind, f64>,
}

impl CellAccum {
    fn score(&self) -> f64 {
        self.components.values().sum()
    }

    fn add(&mut self, kind: EventKind, amount: f64) {
        *self.components.entry(kind).or_insert(0.0) += amount;
    }
}

/// Inactivity marker kept per user; never scored.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActivityMark {
    pub last_active_ts: u64,
    pub inactivity_periods: u64,
    pub inactivity_ms: u64,
}

/// Result of folding a room's log up to `last_seq`.
#[derive(Debug, Clone, PartialEq)]
pub struct EngagementState {
    known_images: Arc<BTreeSet<ImageId>>,
    room: Option<RoomCode>,
    last_seq: u64,
    cells: BTreeMap<(UserId, ImageId), CellAccum>,
    follows: BTreeSet<(UserId, UserId)>,
    activity: BTreeMap<UserId, ActivityMark>,
    impressions: BTreeMap<UserId, Vec<ImageId>>,
}

impl EngagementState {
    pub fn new(manifest: &Manifest) -> Self {
        Self {
            known_images: Arc::new(manifest.images().iter().map(|i| i.id.clone()).collect()),
            room: None,
            last_seq: 0,
            cells: BTreeMap::new(),
            follows: BTreeSet::new(),
            activity: BTreeMap::new(),
            impressions: BTreeMap::new(),
        }
    }

    /// Folds `events` in order from an empty state.
    pub fn fold<'a>(
        manifest: &Manifest,
        events: impl IntoIterator<Item = &'a EventRecord>,
        weights: &WeightTable,
    ) -> Result<Self> {
        let mut state = Self::new(manifest);
        for ev in events {
            state.apply(ev, weights)?;
        }
        Ok(state)
    }

    /// Applies one event in place. On error the state is left untouched.
    pub fn apply(&mut self, ev: &EventRecord, weights: &WeightTable) -> Result<()> {
        if ev.seq <= self.last_seq {
            return Err(Error::Sequence {
                expected: self.last_seq + 1,
                got: ev.seq,
            });
        }
        if let Some(room) = &self.room {
            if *room != ev.room {
                return Err(ValidationError::new("room", format!("event for {} applied to {room}", ev.room)).into());
            }
        }
        if let Some(image) = ev.image() {
            if !self.known_images.contains(image) {
                return Err(Error::unknown_image(image.as_str()));
            }
        }

        self.activity.entry(ev.user.clone()).or_default().last_active_ts = ev.ts_server;
        if self.room.is_none() {
            self.room = Some(ev.room.clone());
        }
        self.last_seq = ev.seq;

        let user = ev.user.clone();
        match &ev.action {
            Action::Inactivity { gap_ms } => {
                let mark = self.activity.get_mut(&user).expect("marked above");
                mark.inactivity_periods += 1;
                mark.inactivity_ms = mark.inactivity_ms.saturating_add(*gap_ms);
            }
            Action::Impression { image } => {
                self.impressions.entry(user).or_default().push(image.clone());
            }
            Action::Follow { followee, image } => {
                self.follows.insert((user.clone(), followee.clone()));
                if let Some(image) = image {
                    self.cell_mut(user, image).add(EventKind::Follow, weights.w_follow);
                }
            }
            Action::ViewDwell { image, dwell_ms } => {
                let cell = self.cell_mut(user, image);
                cell.dwell_ms = cell.dwell_ms.saturating_add(*dwell_ms);
                let credit = weights.dwell_credit(cell.dwell_ms);
                cell.components.insert(EventKind::ViewDwell, credit);
            }
            Action::Like { image } => {
                self.cell_mut(user, image)
                    .components
                    .insert(EventKind::Like, weights.w_like);
            }
            Action::Unlike { image } => {
                self.cell_mut(user, image).components.insert(EventKind::Like, 0.0);
            }
            Action::Emoji { image, .. } => {
                self.cell_mut(user, image).add(EventKind::Emoji, weights.w_emoji);
            }
            Action::Comment { image, .. } => {
                self.cell_mut(user, image).add(EventKind::Comment, weights.w_comment);
            }
            Action::Share { image, share_scope } => {
                self.cell_mut(user, image)
                    .add(EventKind::Share, weights.share(*share_scope));
            }
        }
        Ok(())
    }

    fn cell_mut(&mut self, user: UserId, image: &ImageId) -> &mut CellAccum {
        self.cells.entry((user, image.clone())).or_default()
    }

    pub fn last_seq(&self) -> u64 {
        self.last_seq
    }

    pub fn room(&self) -> Option<&RoomCode> {
        self.room.as_ref()
    }

    /// Current score of one cell (0 if never touched).
    pub fn score(&self, user: &UserId, image: &ImageId) -> f64 {
        self.cells
            .get(&(user.clone(), image.clone()))
            .map_or(0.0, CellAccum::score)
    }

    pub fn cell(&self, user: &UserId, image: &ImageId) -> Option<EngagementCell> {
        self.cells
            .get(&(user.clone(), image.clone()))
            .map(|acc| to_cell(user, image, acc))
    }

    /// All cells with a positive score, ordered by (user, image).
    pub fn engagement_table(&self) -> Vec<EngagementCell> {
        self.cells
            .iter()
            .filter(|(_, acc)| acc.score() > 0.0)
            .map(|((u, i), acc)| to_cell(u, i, acc))
            .collect()
    }

    /// Positive cells of one user.
    pub fn cells_for(&self, user: &UserId) -> Vec<EngagementCell> {
        self.engagement_table()
            .into_iter()
            .filter(|c| &c.user == user)
            .collect()
    }

    /// Every user that appears in the folded log, in order.
    pub fn users(&self) -> impl Iterator<Item = &UserId> {
        self.activity.keys()
    }

    pub fn activity(&self, user: &UserId) -> Option<ActivityMark> {
        self.activity.get(user).copied()
    }

    pub fn follows(&self) -> &BTreeSet<(UserId, UserId)> {
        &self.follows
    }

    pub fn impressions(&self, user: &UserId) -> &[ImageId] {
        self.impressions.get(user).map_or(&[], Vec::as_slice)
    }
}

fn to_cell(user: &UserId, image: &ImageId, acc: &CellAccum) -> EngagementCell {
    EngagementCell {
        user: user.clone(),
        image: image.clone(),
        score: acc.score(),
        components: acc.components.clone(),
    }
}

/// Pure form of [`EngagementState::apply`].
pub fn apply_event(
    mut state: EngagementState,
    ev: &EventRecord,
    weights: &WeightTable,
) -> Result<EngagementState> {
    state.apply(ev, weights)?;
    Ok(state)
}

pub fn engagement_table(state: &EngagementState) -> Vec<EngagementCell> {
    state.engagement_table()
}
