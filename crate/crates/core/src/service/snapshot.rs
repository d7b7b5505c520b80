//! Derived room state: the per-tick view and the final snapshot written by
//! `replay` and compared against live runs.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::engagement::{ActivityMark, EngagementState};
use crate::model::{AffinityProfile, EngagementCell, Manifest, RecommendationSlot, RoomCode, TopicLabel, UserId};
use crate::profiling::classroom_affinity;
use crate::recsys::{next_queue, RoomSnapshot};
use crate::service::config::{RoomConfig, RoomSetup};
use crate::service::log::{load_log, RoomLog};
use crate::service::protocol::{GraphKind, GraphView, ProfileView};
use crate::socialgraph::{clusters, co_engagement, similarity_graph, CoEngagementGraph, SimilarityGraph};
use crate::Result;

pub const SNAPSHOT_FORMAT: &str = "feedlab-snapshot";
pub const SNAPSHOT_VERSION: u32 = 1;

/// Everything a broadcast tick needs, recomputed from the folded log.
#[derive(Debug, Clone)]
pub struct RoomView {
    pub snapshot: RoomSnapshot,
    pub similarity: SimilarityGraph,
    pub clusters: Vec<Vec<UserId>>,
    pub coengagement: CoEngagementGraph,
    pub classroom: BTreeMap<TopicLabel, f64>,
}

impl RoomView {
    pub fn compute(manifest: Arc<Manifest>, state: &EngagementState, cfg: &RoomConfig) -> Result<Self> {
        let snapshot = RoomSnapshot::from_state(manifest, state)?;
        let similarity = similarity_graph(snapshot.profiles().values(), cfg.tau);
        let clusters = clusters(&similarity);
        let coengagement = co_engagement(snapshot.cells(), cfg.theta);
        let classroom = classroom_affinity(snapshot.profiles().values());
        Ok(Self {
            snapshot,
            similarity,
            clusters,
            coengagement,
            classroom,
        })
    }

    pub fn queue(&self, user: &UserId, cfg: &RoomConfig) -> Result<Vec<RecommendationSlot>> {
        next_queue(user, &self.snapshot, &cfg.rec)
    }

    /// Profile of `user`; empty when the user has no engagement yet.
    pub fn profile(&self, user: &UserId) -> AffinityProfile {
        self.snapshot
            .profile(user)
            .cloned()
            .unwrap_or_else(|| AffinityProfile::empty(user.clone()))
    }

    pub fn profile_views(&self, cloud_terms: usize) -> Vec<ProfileView> {
        self.snapshot
            .profiles()
            .values()
            .map(|p| ProfileView::new(p, cloud_terms))
            .collect()
    }

    pub fn similarity_view(&self) -> GraphView {
        GraphView::new(GraphKind::Similarity, &self.similarity, Some(&self.clusters))
    }

    pub fn coengagement_view(&self) -> GraphView {
        GraphView::new(GraphKind::Coengagement, &self.coengagement, None)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FollowEdge {
    pub follower: UserId,
    pub followee: UserId,
}

/// Canonical derived state of a room at the head of its log. Two logs with
/// the same events serialize to the same bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalSnapshot {
    pub format: String,
    pub version: u32,
    pub room: RoomCode,
    pub seq: u64,
    pub engagement: Vec<EngagementCell>,
    pub profiles: Vec<AffinityProfile>,
    pub classroom: BTreeMap<TopicLabel, f64>,
    /// Next queue of every user that appears in the log.
    pub queues: BTreeMap<UserId, Vec<RecommendationSlot>>,
    pub similarity: GraphView,
    pub coengagement: GraphView,
    pub follows: Vec<FollowEdge>,
    pub activity: BTreeMap<UserId, ActivityMark>,
}

impl FinalSnapshot {
    pub fn compute(room: RoomCode, setup: &RoomSetup, state: &EngagementState) -> Result<Self> {
        let view = RoomView::compute(setup.manifest.clone(), state, &setup.config)?;
        let users: Vec<UserId> = state.users().cloned().collect();
        let mut queues = BTreeMap::new();
        let mut activity = BTreeMap::new();
        for u in &users {
            queues.insert(u.clone(), view.queue(u, &setup.config)?);
            if let Some(mark) = state.activity(u) {
                activity.insert(u.clone(), mark);
            }
        }
        Ok(Self {
            format: SNAPSHOT_FORMAT.into(),
            version: SNAPSHOT_VERSION,
            room,
            seq: state.last_seq(),
            engagement: view.snapshot.cells().to_vec(),
            profiles: view.snapshot.profiles().values().cloned().collect(),
            classroom: view.classroom.clone(),
            queues,
            similarity: view.similarity_view(),
            coengagement: view.coengagement_view(),
            follows: state
                .follows()
                .iter()
                .map(|(a, b)| FollowEdge {
                    follower: a.clone(),
                    followee: b.clone(),
                })
                .collect(),
            activity,
        })
    }

    /// Pretty JSON with a trailing newline; the byte form compared by the
    /// replay check.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("snapshots always serialize");
        s.push('\n');
        s
    }
}

/// Folds a parsed log from scratch and computes its final snapshot.
pub fn replay(log: &RoomLog, setup: &RoomSetup) -> Result<FinalSnapshot> {
    let state = EngagementState::fold(&setup.manifest, &log.events, &setup.config.weights)?;
    FinalSnapshot::compute(log.header.room.clone(), setup, &state)
}

pub fn replay_file(path: &Path, setup: &RoomSetup) -> Result<FinalSnapshot> {
    replay(&load_log(path)?, setup)
}
