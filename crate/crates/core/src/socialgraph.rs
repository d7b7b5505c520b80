//! Classroom-level graphs: profile similarity with clusters, picture
//! co-engagement, and the follow graph.

use std::collections::{BTreeMap, BTreeSet};

use petgraph::unionfind::UnionFind;
use serde::{Deserialize, Serialize};

use crate::engagement::EngagementState;
use crate::model::{AffinityProfile, EngagementCell, ImageId, UserId};
use crate::profiling::cosine_similarity;

pub const DEFAULT_TAU: f64 = 0.35;
pub const DEFAULT_THETA: f64 = 2.0;

/// Undirected weighted graph without self-loops. Edges are stored once,
/// keyed by `(a, b)` with `a < b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(
    serialize = "N: Serialize, W: Serialize",
    deserialize = "N: Deserialize<'de> + Ord, W: Deserialize<'de>"
))]
pub struct Graph<N: Ord, W> {
    pub nodes: BTreeSet<N>,
    #[serde(with = "edge_list")]
    pub edges: BTreeMap<(N, N), W>,
}

impl<N: Ord + Clone, W> Graph<N, W> {
    pub fn new() -> Self {
        Self {
            nodes: BTreeSet::new(),
            edges: BTreeMap::new(),
        }
    }

    /// Inserts edge `{a, b}`. Self-loops are ignored.
    pub fn add_edge(&mut self, a: N, b: N, weight: W) {
        if a == b {
            return;
        }
        self.nodes.insert(a.clone());
        self.nodes.insert(b.clone());
        let key = if a < b { (a, b) } else { (b, a) };
        self.edges.insert(key, weight);
    }

    pub fn weight(&self, a: &N, b: &N) -> Option<&W> {
        if a < b {
            self.edges.get(&(a.clone(), b.clone()))
        } else {
            self.edges.get(&(b.clone(), a.clone()))
        }
    }

    pub fn neighbors<'a>(&'a self, n: &'a N) -> impl Iterator<Item = &'a N> + 'a {
        self.edges.keys().filter_map(move |(a, b)| {
            if a == n {
                Some(b)
            } else if b == n {
                Some(a)
            } else {
                None
            }
        })
    }
}

impl<N: Ord + Clone, W> Default for Graph<N, W> {
    fn default() -> Self {
        Self::new()
    }
}

mod edge_list {
    use std::collections::BTreeMap;

    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Edge<N, W> {
        a: N,
        b: N,
        weight: W,
    }

    pub fn serialize<S, N, W>(edges: &BTreeMap<(N, N), W>, s: S) -> Result<S::Ok, S::Error>
    where
        S: Serializer,
        N: Serialize,
        W: Serialize,
    {
        s.collect_seq(edges.iter().map(|((a, b), weight)| Edge { a, b, weight }))
    }

    pub fn deserialize<'de, D, N, W>(d: D) -> Result<BTreeMap<(N, N), W>, D::Error>
    where
        D: Deserializer<'de>,
        N: Deserialize<'de> + Ord,
        W: Deserialize<'de>,
    {
        let list: Vec<Edge<N, W>> = Vec::deserialize(d)?;
        Ok(list
            .into_iter()
            .map(|e| {
                let key = if e.a < e.b { (e.a, e.b) } else { (e.b, e.a) };
                (key, e.weight)
            })
            .collect())
    }
}

pub type SimilarityGraph = Graph<UserId, f64>;
pub type CoEngagementGraph = Graph<ImageId, u32>;

/// Users with engagement, linked when their profile similarity reaches `tau`.
pub fn similarity_graph<'a>(
    profiles: impl IntoIterator<Item = &'a AffinityProfile>,
    tau: f64,
) -> SimilarityGraph {
    let engaged: Vec<&AffinityProfile> = profiles
        .into_iter()
        .filter(|p| p.total_engagement > 0.0)
        .collect();
    let mut g = Graph::new();
    for p in &engaged {
        g.nodes.insert(p.user.clone());
    }
    for (i, p) in engaged.iter().enumerate() {
        for q in &engaged[i + 1..] {
            let sim = cosine_similarity(p, q);
            if sim >= tau {
                g.add_edge(p.user.clone(), q.user.clone(), sim);
            }
        }
    }
    g
}

/// Connected components, largest first, then by smallest member.
pub fn clusters<N: Ord + Clone, W>(graph: &Graph<N, W>) -> Vec<Vec<N>> {
    let nodes: Vec<&N> = graph.nodes.iter().collect();
    let index: BTreeMap<&N, usize> = nodes.iter().enumerate().map(|(i, n)| (*n, i)).collect();
    let mut uf = UnionFind::<usize>::new(nodes.len());
    for (a, b) in graph.edges.keys() {
        if let (Some(&x), Some(&y)) = (index.get(a), index.get(b)) {
            uf.union(x, y);
        }
    }
    let mut groups: BTreeMap<usize, Vec<N>> = BTreeMap::new();
    for (i, n) in nodes.iter().enumerate() {
        groups.entry(uf.find(i)).or_default().push((*n).clone());
    }
    let mut out: Vec<Vec<N>> = groups.into_values().collect();
    // members are already ascending since nodes iterate in order
    out.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a[0].cmp(&b[0])));
    out
}

/// Image pairs weighted by how many users engaged at least `theta` with both.
pub fn co_engagement(cells: &[EngagementCell], theta: f64) -> CoEngagementGraph {
    let mut strong: BTreeMap<&UserId, BTreeSet<&ImageId>> = BTreeMap::new();
    for c in cells.iter().filter(|c| c.score >= theta) {
        strong.entry(&c.user).or_default().insert(&c.image);
    }
    let mut counts: BTreeMap<(ImageId, ImageId), u32> = BTreeMap::new();
    for images in strong.values() {
        let images: Vec<&&ImageId> = images.iter().collect();
        for (k, a) in images.iter().enumerate() {
            for b in &images[k + 1..] {
                *counts.entry(((**a).clone(), (**b).clone())).or_insert(0) += 1;
            }
        }
    }
    let mut g = Graph::new();
    for ((a, b), w) in counts {
        g.add_edge(a, b, w);
    }
    g
}

/// Directed follow edges as (follower, followee).
pub fn follow_graph(state: &EngagementState) -> Vec<(UserId, UserId)> {
    state.follows().iter().cloned().collect()
}
