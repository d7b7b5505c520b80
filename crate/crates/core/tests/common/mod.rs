//! Helpers shared by the integration test targets.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::PathBuf;

use rand::seq::IndexedRandom;
use rand::Rng;

use feedlab::engagement::WeightTable;
use feedlab::sim::SimConfig;
use feedlab::model::{
    Action, EventKind, EventRecord, ImageId, ImageItem, Manifest, RoomCode, ShareScope, TopicLabel,
    UserId,
};

pub fn uid(s: &str) -> UserId {
    UserId::new(s).unwrap()
}

pub fn iid(s: &str) -> ImageId {
    ImageId::new(s).unwrap()
}

pub fn topic(s: &str) -> TopicLabel {
    TopicLabel::new(s).unwrap()
}

pub fn item(id: &str, topics: &[&str]) -> ImageItem {
    ImageItem::new(iid(id), format!("images/{id}.jpg"), topics.iter().map(|t| topic(t)).collect(), "tester")
        .unwrap()
}

pub fn fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(rel)
}

/// The recorded classroom behind `tests/golden/transcript.jsonl`.
pub fn golden_config() -> SimConfig {
    let mut cfg = SimConfig::new(RoomCode::new("GOLD01").unwrap(), 3, 6, 5);
    cfg.analytics_devices = 2;
    cfg.record_transcript = true;
    cfg
}

pub fn golden(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests").join("golden").join(rel)
}

/// Six images over four topics; enough overlap for non-trivial profiles.
pub fn small_manifest() -> Manifest {
    Manifest::new(vec![
        item("p1", &["cats"]),
        item("p2", &["dogs"]),
        item("p3", &["cats", "dogs"]),
        item("p4", &["chess"]),
        item("p5", &["soccer", "icehockey"]),
        item("p6", &["icehockey"]),
    ])
    .unwrap()
}

pub const USERS: [&str; 4] = ["ana", "ben", "cai", "dee"];

/// A random well-formed log of `len` events by `users` on the images of
/// `manifest`, covering every action kind.
pub fn random_log(rng: &mut impl Rng, manifest: &Manifest, users: &[&str], len: usize) -> Vec<EventRecord> {
    let room = RoomCode::new("TEST01").unwrap();
    let images: Vec<ImageId> = manifest.images().iter().map(|i| i.id.clone()).collect();
    let mut ts = 1_000u64;
    (1..=len as u64)
        .map(|seq| {
            let user = *users.choose(rng).unwrap();
            let image = images.choose(rng).unwrap().clone();
            let action = match rng.random_range(0..9) {
                0 => Action::ViewDwell { image, dwell_ms: rng.random_range(0..15_000) },
                1 => Action::Like { image },
                2 => Action::Unlike { image },
                3 => Action::Emoji { image, emoji_code: "heart".into() },
                4 => Action::Comment { image, comment_len: rng.random_range(0..200) },
                5 => Action::Share {
                    image,
                    share_scope: *[ShareScope::Private, ShareScope::Friends, ShareScope::Public]
                        .choose(rng)
                        .unwrap(),
                },
                6 => {
                    let others: Vec<&str> = users.iter().copied().filter(|u| *u != user).collect();
                    match others.choose(rng) {
                        Some(f) => Action::Follow { followee: uid(f), image: rng.random_bool(0.5).then_some(image) },
                        None => Action::Like { image },
                    }
                }
                7 => Action::Inactivity { gap_ms: rng.random_range(1..60_000) },
                _ => Action::Impression { image },
            };
            ts += rng.random_range(1..500);
            EventRecord::new(seq, room.clone(), uid(user), ts, None, action).unwrap()
        })
        .collect()
}

/// Recomputes every (user, image) score from scratch by scanning the whole
/// log once per cell, independently of the incremental fold.
pub fn brute_force_scores(events: &[EventRecord], w: &WeightTable) -> BTreeMap<(UserId, ImageId), f64> {
    let mut cells: Vec<(UserId, ImageId)> = events
        .iter()
        .filter(|e| !matches!(e.action, Action::Impression { .. }))
        .filter_map(|e| e.image().map(|i| (e.user.clone(), i.clone())))
        .collect();
    cells.sort();
    cells.dedup();

    let mut out = BTreeMap::new();
    for (user, image) in cells {
        let mine = || events.iter().filter(|e| e.user == user && e.image() == Some(&image));
        let dwell_ms: u64 = mine()
            .filter_map(|e| match e.action {
                Action::ViewDwell { dwell_ms, .. } => Some(dwell_ms),
                _ => None,
            })
            .sum();
        let viewed = mine().any(|e| e.kind() == EventKind::ViewDwell);
        let liked = mine()
            .rfind(|e| matches!(e.kind(), EventKind::Like | EventKind::Unlike))
            .map(|e| e.kind() == EventKind::Like);
        let count = |k: EventKind| mine().filter(|e| e.kind() == k).count() as f64;
        let shares: f64 = mine()
            .filter_map(|e| match e.action {
                Action::Share { share_scope, .. } => Some(w.share(share_scope)),
                _ => None,
            })
            .sum();

        // same component order as the fold: dwell, like, emoji, comment, share, follow
        let mut score = 0.0;
        if viewed {
            score += w.w_dwell * dwell_ms.min(w.dwell_cap_ms) as f64 / w.dwell_cap_ms as f64;
        }
        if liked == Some(true) {
            score += w.w_like;
        }
        score += count(EventKind::Emoji) * w.w_emoji;
        score += count(EventKind::Comment) * w.w_comment;
        score += shares;
        score += count(EventKind::Follow) * w.w_follow;
        out.insert((user, image), score);
    }
    out
}
