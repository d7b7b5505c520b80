//! Topic-affinity profiles inferred from engagement, plus the word cloud and
//! profile similarity built on top of them.

use std::collections::BTreeMap;

use crate::model::{AffinityProfile, EngagementCell, Manifest, TopicLabel, UserId};
use crate::{Error, Result};

/// Builds `user`'s profile from their engagement cells.
///
/// Each cell's score is split evenly across the image's topic labels, then
/// the per-topic totals are normalized to sum to one.
pub fn compute_profile(
    user: &UserId,
    cells: &[EngagementCell],
    manifest: &Manifest,
) -> Result<AffinityProfile> {
    let mut raw: BTreeMap<TopicLabel, f64> = BTreeMap::new();
    let mut total = 0.0;
    for cell in cells {
        let image = manifest
            .get(cell.image.as_str())
            .ok_or_else(|| Error::unknown_image(cell.image.as_str()))?;
        if cell.score <= 0.0 {
            continue;
        }
        total += cell.score;
        let share = cell.score / image.topics.len() as f64;
        for topic in &image.topics {
            *raw.entry(topic.clone()).or_insert(0.0) += share;
        }
    }
    if total <= 0.0 {
        return Ok(AffinityProfile::empty(user.clone()));
    }
    let raw_sum: f64 = raw.values().sum();
    let affinities = raw.into_iter().map(|(t, v)| (t, v / raw_sum)).collect();
    Ok(AffinityProfile {
        user: user.clone(),
        affinities,
        total_engagement: total,
    })
}

/// The `max_terms` strongest topics, by affinity descending then label.
pub fn word_cloud(profile: &AffinityProfile, max_terms: usize) -> Vec<(TopicLabel, f64)> {
    let mut terms: Vec<_> = profile
        .affinities
        .iter()
        .map(|(t, &w)| (t.clone(), w))
        .collect();
    terms.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    terms.truncate(max_terms);
    terms
}

/// Cosine similarity of two affinity vectors; 0 when either is empty.
pub fn cosine_similarity(p: &AffinityProfile, q: &AffinityProfile) -> f64 {
    if p.is_empty() || q.is_empty() {
        return 0.0;
    }
    let dot: f64 = p
        .affinities
        .iter()
        .filter_map(|(t, a)| q.affinities.get(t).map(|b| a * b))
        .sum();
    let norm = |x: &AffinityProfile| x.affinities.values().map(|v| v * v).sum::<f64>().sqrt();
    let denom = norm(p) * norm(q);
    if denom == 0.0 {
        return 0.0;
    }
    (dot / denom).clamp(0.0, 1.0)
}

/// Classroom-wide topic view: the mean of every non-empty profile's
/// affinities, so each student counts once.
pub fn classroom_affinity<'a>(
    profiles: impl IntoIterator<Item = &'a AffinityProfile>,
) -> BTreeMap<TopicLabel, f64> {
    let mut sum: BTreeMap<TopicLabel, f64> = BTreeMap::new();
    let mut n = 0usize;
    for p in profiles.into_iter().filter(|p| !p.is_empty()) {
        n += 1;
        for (t, w) in &p.affinities {
            *sum.entry(t.clone()).or_insert(0.0) += w;
        }
    }
    if n > 0 {
        sum.values_mut().for_each(|v| *v /= n as f64);
    }
    sum
}


#[cfg(test)]
mod proptests {
    use super::*;
    use crate::model::{ImageId, ImageItem};
    use proptest::prelude::*;

    const TOPICS: [&str; 5] = ["art", "cats", "dogs", "music", "soccer"];

    fn manifest() -> Manifest {
        // image k carries topics whose bit is set in k (k = 1..31)
        let items = (1..32u32)
            .map(|k| {
                let topics = (0..5)
                    .filter(|b| k & (1 << b) != 0)
                    .map(|b| TopicLabel::new(TOPICS[b]).unwrap())
                    .collect();
                ImageItem::new(ImageId::new(format!("i{k:02}")).unwrap(), "x.jpg", topics, "p").unwrap()
            })
            .collect();
        Manifest::new(items).unwrap()
    }

    fn arb_cells() -> impl Strategy<Value = Vec<EngagementCell>> {
        proptest::collection::btree_map(1..32u32, 0.0f64..20.0, 0..12).prop_map(|m| {
            m.into_iter()
                .map(|(k, score)| EngagementCell {
                    user: UserId::new("u").unwrap(),
                    image: ImageId::new(format!("i{k:02}")).unwrap(),
                    score,
                    components: Default::default(),
                })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn normalized_and_scale_invariant(cells in arb_cells(), c in 0.01f64..100.0) {
            let m = manifest();
            let u = UserId::new("u").unwrap();
            let p = compute_profile(&u, &cells, &m).unwrap();
            if p.total_engagement > 0.0 {
                let sum: f64 = p.affinities.values().sum();
                prop_assert!((sum - 1.0).abs() <= 1e-9);
                prop_assert!(p.affinities.values().all(|&a| (0.0..=1.0).contains(&a)));
            } else {
                prop_assert!(p.affinities.is_empty());
            }
            let scaled: Vec<_> = cells.iter().cloned().map(|mut x| { x.score *= c; x }).collect();
            let q = compute_profile(&u, &scaled, &m).unwrap();
            prop_assert_eq!(p.affinities.len(), q.affinities.len());
            for (t, a) in &p.affinities {
                prop_assert!((a - q.affinities[t]).abs() <= 1e-9);
            }
            prop_assert!((q.total_engagement - c * p.total_engagement).abs() <= 1e-9 * (1.0 + q.total_engagement));
        }

        #[test]
        fn similarity_symmetric_bounded(a in arb_cells(), b in arb_cells()) {
            let m = manifest();
            let u = UserId::new("u").unwrap();
            let p = compute_profile(&u, &a, &m).unwrap();
            let q = compute_profile(&u, &b, &m).unwrap();
            let s = cosine_similarity(&p, &q);
            prop_assert_eq!(s, cosine_similarity(&q, &p));
            prop_assert!((0.0..=1.0).contains(&s));
            if !p.is_empty() {
                prop_assert!((cosine_similarity(&p, &p) - 1.0).abs() < 1e-12);
            }
        }
    }
}
