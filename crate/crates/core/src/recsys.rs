//! Explainable next-N recommendation queues.
//!
//! A slot's score blends three channels: how well the image's topics match
//! the user's own profile (content), how strongly similar users engaged with
//! it (collaborative), and how much the whole room engaged with it
//! (popularity).

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::engagement::EngagementState;
use crate::model::{
    AffinityProfile, EngagementCell, ImageId, ImageItem, Manifest, NeighborContribution,
    RecommendationSlot, RoomCode, TopicContribution, UserId, ValidationError,
};
use crate::profiling::{compute_profile, cosine_similarity};
use crate::{Error, Result};

const EXPLAIN_LIMIT: usize = 3;
const SIM_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RecConfig {
    /// Content (own profile) weight.
    pub alpha: f64,
    /// Collaborative weight.
    pub beta: f64,
    /// Popularity weight.
    pub gamma: f64,
    /// Per-slot probability of an exploration pick.
    pub epsilon_explore: f64,
    /// Number of most recent impressions barred from the queue.
    pub exclude_window: usize,
    pub queue_len: usize,
    pub rng_seed: u64,
}

impl Default for RecConfig {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            beta: 0.4,
            gamma: 0.1,
            epsilon_explore: 0.1,
            exclude_window: 50,
            queue_len: 5,
            rng_seed: 0x5EED_F00D,
        }
    }
}

impl RecConfig {
    pub fn validate(&self) -> Result<(), ValidationError> {
        for (field, v) in [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("gamma", self.gamma),
            ("epsilon_explore", self.epsilon_explore),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(ValidationError::new(field, "must lie in [0, 1]"));
            }
        }
        if (self.alpha + self.beta + self.gamma - 1.0).abs() > 1e-9 {
            return Err(ValidationError::new("alpha", "alpha + beta + gamma must equal 1"));
        }
        if self.queue_len == 0 {
            return Err(ValidationError::new("queue_len", "must be at least 1"));
        }
        Ok(())
    }

    /// The blended score; the single place the blend is evaluated.
    pub fn blend(&self, content: f64, collab: f64, popularity: f64) -> f64 {
        self.alpha * content + self.beta * collab + self.gamma * popularity
    }
}

/// Immutable view of a room at one log position: everything the
/// recommender and the classroom graphs read.
#[derive(Debug, Clone)]
pub struct RoomSnapshot {
    pub room: Option<RoomCode>,
    pub seq: u64,
    manifest: Arc<Manifest>,
    cells: Vec<EngagementCell>,
    scores: BTreeMap<(UserId, ImageId), f64>,
    profiles: BTreeMap<UserId, AffinityProfile>,
    image_totals: BTreeMap<ImageId, f64>,
    impressions: BTreeMap<UserId, Vec<ImageId>>,
    users: BTreeSet<UserId>,
    norm_min: f64,
    norm_max: f64,
}

impl RoomSnapshot {
    /// Builds a snapshot from a folded log, computing every user's profile.
    pub fn from_state(manifest: Arc<Manifest>, state: &EngagementState) -> Result<Self> {
        let cells = state.engagement_table();
        let mut by_user: BTreeMap<&UserId, Vec<EngagementCell>> = BTreeMap::new();
        for c in &cells {
            by_user.entry(&c.user).or_default().push(c.clone());
        }
        let mut profiles = BTreeMap::new();
        for (user, user_cells) in by_user {
            let p = compute_profile(user, &user_cells, &manifest)?;
            if p.total_engagement > 0.0 {
                profiles.insert(user.clone(), p);
            }
        }
        let users: BTreeSet<UserId> = state.users().cloned().collect();
        let impressions = users
            .iter()
            .map(|u| (u.clone(), state.impressions(u).to_vec()))
            .filter(|(_, v)| !v.is_empty())
            .collect();
        Ok(Self::assemble(
            state.room().cloned(),
            state.last_seq(),
            manifest,
            cells,
            profiles,
            impressions,
            users,
        ))
    }

    /// Builds a snapshot from explicit parts. Profiles are taken as given;
    /// empty profiles are dropped.
    pub fn from_parts(
        manifest: Arc<Manifest>,
        cells: Vec<EngagementCell>,
        profiles: Vec<AffinityProfile>,
        impressions: BTreeMap<UserId, Vec<ImageId>>,
    ) -> Self {
        let profiles: BTreeMap<_, _> = profiles
            .into_iter()
            .filter(|p| p.total_engagement > 0.0 && !p.is_empty())
            .map(|p| (p.user.clone(), p))
            .collect();
        let users = profiles
            .keys()
            .cloned()
            .chain(cells.iter().map(|c| c.user.clone()))
            .chain(impressions.keys().cloned())
            .collect();
        Self::assemble(None, 0, manifest, cells, profiles, impressions, users)
    }

    fn assemble(
        room: Option<RoomCode>,
        seq: u64,
        manifest: Arc<Manifest>,
        cells: Vec<EngagementCell>,
        profiles: BTreeMap<UserId, AffinityProfile>,
        impressions: BTreeMap<UserId, Vec<ImageId>>,
        users: BTreeSet<UserId>,
    ) -> Self {
        let mut scores = BTreeMap::new();
        let mut image_totals: BTreeMap<ImageId, f64> = BTreeMap::new();
        for c in &cells {
            scores.insert((c.user.clone(), c.image.clone()), c.score);
            *image_totals.entry(c.image.clone()).or_insert(0.0) += c.score;
        }

        // min-max over the full (profiled user x image) matrix, absent cells are 0
        let mut norm_min = f64::INFINITY;
        let mut norm_max = 0.0f64;
        let matrix_size = profiles.len() * manifest.len();
        let mut seen = 0usize;
        for ((u, _), &s) in &scores {
            if profiles.contains_key(u) {
                seen += 1;
                norm_min = norm_min.min(s);
                norm_max = norm_max.max(s);
            }
        }
        if seen < matrix_size || seen == 0 {
            norm_min = 0.0;
        }

        Self {
            room,
            seq,
            manifest,
            cells,
            scores,
            profiles,
            image_totals,
            impressions,
            users,
            norm_min,
            norm_max,
        }
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    pub fn cells(&self) -> &[EngagementCell] {
        &self.cells
    }

    /// Profiles of users with positive total engagement.
    pub fn profiles(&self) -> &BTreeMap<UserId, AffinityProfile> {
        &self.profiles
    }

    pub fn profile(&self, user: &UserId) -> Option<&AffinityProfile> {
        self.profiles.get(user)
    }

    /// Every user seen in the log, engaged or not.
    pub fn users(&self) -> &BTreeSet<UserId> {
        &self.users
    }

    pub fn engagement(&self, user: &UserId, image: &ImageId) -> f64 {
        self.scores
            .get(&(user.clone(), image.clone()))
            .copied()
            .unwrap_or(0.0)
    }

    /// Room min-max normalized engagement in [0, 1].
    pub fn normalized_engagement(&self, user: &UserId, image: &ImageId) -> f64 {
        let e = self.engagement(user, image);
        let span = self.norm_max - self.norm_min;
        if span > 0.0 {
            ((e - self.norm_min) / span).clamp(0.0, 1.0)
        } else if self.norm_max > 0.0 && e > 0.0 {
            1.0
        } else {
            0.0
        }
    }

    /// Total room engagement on `image` relative to the most engaged image.
    pub fn popularity(&self, image: &ImageId) -> f64 {
        let max = self.image_totals.values().copied().fold(0.0, f64::max);
        if max <= 0.0 {
            return 0.0;
        }
        self.image_totals.get(image).copied().unwrap_or(0.0) / max
    }

    pub fn impressions(&self, user: &UserId) -> &[ImageId] {
        self.impressions.get(user).map_or(&[], Vec::as_slice)
    }

    /// (neighbor, similarity) for every other profiled user.
    fn neighbors(&self, user: &UserId) -> Vec<(&UserId, f64)> {
        let own = self.profiles.get(user);
        self.profiles
            .iter()
            .filter(|(v, _)| *v != user)
            .map(|(v, p)| (v, own.map_or(0.0, |o| cosine_similarity(o, p))))
            .collect()
    }
}

/// Mean affinity of the user over the image's topics.
pub fn content_score(user: &AffinityProfile, image: &ImageItem) -> f64 {
    if image.topics.is_empty() {
        return 0.0;
    }
    image.topics.iter().map(|t| user.affinity(t)).sum::<f64>() / image.topics.len() as f64
}

/// Similarity-weighted mean of other users' normalized engagement with `image`.
pub fn collab_score(user: &UserId, image: &ImageId, snapshot: &RoomSnapshot) -> f64 {
    collab_with(&snapshot.neighbors(user), image, snapshot)
}

fn collab_with(neighbors: &[(&UserId, f64)], image: &ImageId, snapshot: &RoomSnapshot) -> f64 {
    if neighbors.is_empty() {
        return 0.0;
    }
    let sim_sum: f64 = neighbors.iter().map(|(_, s)| s).sum();
    let weighted: f64 = neighbors
        .iter()
        .map(|(v, s)| s * snapshot.normalized_engagement(v, image))
        .sum();
    weighted / sim_sum.max(SIM_FLOOR)
}

struct Candidate<'a> {
    item: &'a ImageItem,
    content: f64,
    collab: f64,
    popularity: f64,
    score: f64,
}

/// Deterministic exploration stream for one (seed, room, user, seq).
fn exploration_rng(cfg: &RecConfig, room: Option<&RoomCode>, user: &UserId, seq: u64) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(cfg.rng_seed.to_le_bytes());
    h.update(room.map_or("", RoomCode::as_str).as_bytes());
    h.update([0u8]);
    h.update(user.as_str().as_bytes());
    h.update([0u8]);
    h.update(seq.to_le_bytes());
    ChaCha8Rng::from_seed(h.finalize().into())
}

/// Builds `user`'s next queue from the snapshot.
pub fn next_queue(
    user: &UserId,
    snapshot: &RoomSnapshot,
    cfg: &RecConfig,
) -> Result<Vec<RecommendationSlot>> {
    let manifest = snapshot.manifest();
    if manifest.is_empty() {
        return Err(Error::Configuration("manifest has no images".into()));
    }

    let seen = snapshot.impressions(user);
    let window: HashSet<&ImageId> = seen[seen.len().saturating_sub(cfg.exclude_window)..]
        .iter()
        .collect();
    let mut pool: Vec<&ImageItem> = manifest
        .images()
        .iter()
        .filter(|i| !window.contains(&i.id))
        .collect();
    if pool.len() < cfg.queue_len.min(manifest.len()) {
        pool = manifest.images().iter().collect();
    }

    let empty = AffinityProfile::empty(user.clone());
    let own = snapshot.profile(user).unwrap_or(&empty);
    let neighbors = snapshot.neighbors(user);
    let sim_sum: f64 = neighbors.iter().map(|(_, s)| s).sum();

    let mut remaining: Vec<Candidate> = pool
        .into_iter()
        .map(|item| {
            let content = content_score(own, item);
            let collab = collab_with(&neighbors, &item.id, snapshot);
            let popularity = snapshot.popularity(&item.id);
            Candidate {
                item,
                content,
                collab,
                popularity,
                score: cfg.blend(content, collab, popularity),
            }
        })
        .collect();
    remaining.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then_with(|| a.item.id.cmp(&b.item.id))
    });

    let mut rng = exploration_rng(cfg, snapshot.room.as_ref(), user, snapshot.seq);
    let mut queue = Vec::with_capacity(cfg.queue_len);
    while queue.len() < cfg.queue_len && !remaining.is_empty() {
        let explore = cfg.epsilon_explore > 0.0 && rng.random::<f64>() < cfg.epsilon_explore;
        let pick = if explore {
            rng.random_range(0..remaining.len())
        } else {
            0
        };
        let c = remaining.remove(pick);
        queue.push(RecommendationSlot {
            image: c.item.id.clone(),
            score: c.score,
            content_part: c.content,
            collab_part: c.collab,
            popularity_part: c.popularity,
            explain_topics: explain_topics(own, c.item),
            explain_users: explain_users(&neighbors, sim_sum, &c.item.id, snapshot),
            explored: explore,
        });
    }
    Ok(queue)
}

fn explain_topics(own: &AffinityProfile, item: &ImageItem) -> Vec<TopicContribution> {
    let n = item.topics.len() as f64;
    let mut out: Vec<_> = item
        .topics
        .iter()
        .map(|t| TopicContribution {
            topic: t.clone(),
            contribution: own.affinity(t) / n,
        })
        .filter(|c| c.contribution > 0.0)
        .collect();
    out.sort_by(|a, b| {
        b.contribution
            .total_cmp(&a.contribution)
            .then_with(|| a.topic.cmp(&b.topic))
    });
    out.truncate(EXPLAIN_LIMIT);
    out
}

fn explain_users(
    neighbors: &[(&UserId, f64)],
    sim_sum: f64,
    image: &ImageId,
    snapshot: &RoomSnapshot,
) -> Vec<NeighborContribution> {
    let mut scored: Vec<_> = neighbors
        .iter()
        .map(|(v, s)| {
            let share = s * snapshot.normalized_engagement(v, image) / sim_sum.max(SIM_FLOOR);
            (share, *v, *s)
        })
        .filter(|(share, _, _)| *share > 0.0)
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(b.1)));
    scored
        .into_iter()
        .take(EXPLAIN_LIMIT)
        .map(|(_, v, s)| NeighborContribution {
            user: v.clone(),
            similarity: s,
            their_engagement: snapshot.engagement(v, image),
        })
        .collect()
}
