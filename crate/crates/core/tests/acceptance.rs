//! Acceptance suite. Prints one PASS/FAIL line per primary criterion and
//! exits non-zero if any criterion fails. Runs without a harness so the
//! lines always reach the output.

mod common;

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use statrs::distribution::{ChiSquared, ContinuousCDF, StudentsT};

use feedlab::analytics::special::{chi_square_upper, student_t_two_tailed};
use feedlab::analytics::{
    category_distribution, chi_square, cohens_kappa, load_survey_csv, paired_t, Agreement,
    ContingencyTable, Phase, Survey,
};
use feedlab::engagement::{EngagementState, WeightTable};
use feedlab::model::{
    Action, AffinityProfile, EngagementCell, EventRecord, ImageId, Manifest,
    RecommendationSlot, RoomCode, UserId,
};
use feedlab::profiling::{compute_profile, cosine_similarity};
use feedlab::recsys::{collab_score, content_score, next_queue, RecConfig, RoomSnapshot};
use feedlab::service::protocol::{parse_client, parse_server, ServerMessage};
use feedlab::service::{replay_file, ConnId, Hub, ManualClock, RoomMode, RoomSetup};
use feedlab::sim::{simulate, Direction, SimConfig, SimReport, TranscriptLine};
use feedlab::socialgraph::{clusters, co_engagement, similarity_graph, Graph};

use common::{fixture, golden, golden_config, iid, item, random_log, uid, USERS};

type Check = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Check + 'a>);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {{
        let holds: bool = $cond;
        if !holds {
            return Err(format!($($msg)+));
        }
    }};
}

/// The soak classroom shared by the determinism and normalization checks.
struct Soak {
    report: SimReport,
    replayed: String,
    elapsed: Duration,
    _dir: tempfile::TempDir,
}

fn run_soak() -> Result<Soak, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let started = Instant::now();
    let cfg = SimConfig::new(RoomCode::new("SOAK30").unwrap(), 30, 500, 7);
    let report = simulate(RoomSetup::sample(), &cfg, Some(dir.path())).map_err(|e| e.to_string())?;
    let log = report.log_path.clone().ok_or("simulation wrote no log")?;
    let replayed = replay_file(&log, &RoomSetup::sample()).map_err(|e| e.to_string())?.to_json();
    let elapsed = started.elapsed();
    Ok(Soak { report, replayed, elapsed, _dir: dir })
}

fn replay_determinism(soak: &Soak) -> Check {
    let live = soak.report.snapshot.to_json();
    ensure!(soak.report.errors == 0, "{} error frames during the run", soak.report.errors);
    ensure!(live == soak.replayed, "replayed snapshot differs from the live one");
    let log = soak.report.log_path.as_ref().unwrap();
    let again = replay_file(log, &RoomSetup::sample()).map_err(|e| e.to_string())?.to_json();
    ensure!(again == soak.replayed, "two replays of the same log differ");
    ensure!(soak.elapsed < Duration::from_secs(10), "took {:.2?}, budget is 10 s", soak.elapsed);
    Ok(format!(
        "{} events, {} snapshot bytes identical, {:.2?}",
        soak.report.events,
        live.len(),
        soak.elapsed
    ))
}

fn engagement_oracle() -> Check {
    let manifest = common::small_manifest();
    let mut rng = ChaCha8Rng::seed_from_u64(0xE1);
    let tables = [
        WeightTable::default(),
        WeightTable {
            w_dwell: 0.5,
            dwell_cap_ms: 4_096,
            w_like: 1.0,
            w_emoji: 0.25,
            w_comment: 8.0,
            w_share_private: 0.5,
            w_share_friends: 1.0,
            w_share_public: 16.0,
            w_follow: 0.75,
        },
    ];
    let mut cells = 0;
    for k in 0..100 {
        let w = &tables[k % 2];
        let len = rng.random_range(0..=50);
        let log = random_log(&mut rng, &manifest, &USERS, len);
        let state = EngagementState::fold(&manifest, &log, w).map_err(|e| e.to_string())?;
        let expected = common::brute_force_scores(&log, w);
        for ((u, i), score) in &expected {
            let got = state.score(u, i);
            ensure!(got == *score, "log {k}: cell ({u}, {i}) folds to {got}, oracle says {score}");
        }
        for c in state.engagement_table() {
            ensure!(
                expected.contains_key(&(c.user.clone(), c.image.clone())),
                "log {k}: fold has a cell ({}, {}) the oracle never touched",
                c.user,
                c.image
            );
        }
        cells += expected.len();
    }
    Ok(format!("100 logs, {cells} cells equal exactly"))
}

fn profile_normalization(soak: &Soak) -> Check {
    let mut checked = 0;
    for p in &soak.report.snapshot.profiles {
        if p.total_engagement > 0.0 {
            let sum: f64 = p.affinities.values().sum();
            ensure!((sum - 1.0).abs() <= 1e-9, "profile of {} sums to {sum}", p.user);
            checked += 1;
        }
    }
    let engaged: BTreeSet<&UserId> = soak.report.snapshot.engagement.iter().map(|c| &c.user).collect();
    ensure!(checked == engaged.len(), "{} engaged users but {checked} profiles", engaged.len());
    ensure!(checked > 0, "soak run produced no profiles");

    let manifest = feedlab::service::sample_manifest();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5CA1E);
    let mut scaled = 0;
    for _ in 0..100 {
        let log = random_log(&mut rng, &manifest, &USERS, 40);
        let state = EngagementState::fold(&manifest, &log, &WeightTable::default()).map_err(|e| e.to_string())?;
        for user in USERS.map(uid) {
            let cells = state.cells_for(&user);
            let base = compute_profile(&user, &cells, &manifest).map_err(|e| e.to_string())?;
            for c in [0.5, 2.0, 10.0] {
                let scaled_cells: Vec<EngagementCell> = cells
                    .iter()
                    .map(|cell| EngagementCell { score: cell.score * c, ..cell.clone() })
                    .collect();
                let p = compute_profile(&user, &scaled_cells, &manifest).map_err(|e| e.to_string())?;
                ensure!(
                    p.affinities.keys().eq(base.affinities.keys()),
                    "scaling by {c} changed the topic set of {user}"
                );
                for (t, a) in &base.affinities {
                    ensure!((p.affinities[t] - a).abs() <= 1e-12, "scaling by {c} moved {user}/{t}");
                }
                ensure!(
                    (p.total_engagement - c * base.total_engagement).abs() <= 1e-9 * c * base.total_engagement.max(1.0),
                    "total engagement of {user} does not scale by {c}"
                );
                scaled += 1;
            }
        }
    }
    Ok(format!("{checked} soak profiles sum to 1, {scaled} scaled profiles unchanged"))
}

fn cf_scenario() -> Check {
    let manifest = Arc::new(
        Manifest::new(vec![
            item("art1", &["art"]),
            item("chess1", &["chess"]),
            item("hockey1", &["icehockey"]),
            item("hockey2", &["icehockey"]),
            item("music1", &["music"]),
            item("nature1", &["nature"]),
            item("soccer1", &["soccer"]),
        ])
        .unwrap(),
    );
    let room = RoomCode::new("CFDEMO").unwrap();
    let ev = |seq: u64, user: &str, image: &str| {
        EventRecord::new(seq, room.clone(), uid(user), seq * 1_000, None, Action::Like { image: iid(image) }).unwrap()
    };
    let with_neighbors = vec![
        ev(1, "a", "hockey1"),
        ev(2, "b", "hockey1"),
        ev(3, "b", "soccer1"),
        ev(4, "c", "hockey2"),
        ev(5, "c", "soccer1"),
    ];
    let alone = vec![ev(1, "a", "hockey1")];
    let cfg = RecConfig { epsilon_explore: 0.0, ..RecConfig::default() };
    let full = RecConfig { queue_len: manifest.len(), ..cfg.clone() };

    let ranked = |events: &[EventRecord], cfg: &RecConfig| -> Result<Vec<RecommendationSlot>, String> {
        let state = EngagementState::fold(&manifest, events, &WeightTable::default()).map_err(|e| e.to_string())?;
        let snap = RoomSnapshot::from_state(manifest.clone(), &state).map_err(|e| e.to_string())?;
        next_queue(&uid("a"), &snap, cfg).map_err(|e| e.to_string())
    };
    let pos = |q: &[RecommendationSlot], id: &str| q.iter().position(|s| s.image.as_str() == id);

    let order = ranked(&with_neighbors, &full)?;
    let soccer = pos(&order, "soccer1").ok_or("soccer image missing from the full ranking")?;
    let chess = pos(&order, "chess1").ok_or("chess image missing from the full ranking")?;
    ensure!(soccer < chess, "soccer ranks {soccer}, chess ranks {chess}");
    ensure!(order[soccer].content_part == 0.0, "A has no soccer affinity, content part must be 0");
    ensure!(order[soccer].collab_part > 0.0, "soccer image has no collaborative lift");

    let top5 = ranked(&with_neighbors, &cfg)?;
    ensure!(pos(&top5, "soccer1").is_some(), "soccer image not in A's five-slot queue");

    let lonely = ranked(&alone, &full)?;
    let s_alone = &lonely[pos(&lonely, "soccer1").ok_or("soccer image missing without neighbors")?];
    ensure!(
        s_alone.score < order[soccer].score,
        "removing B and C did not lower the soccer score ({} vs {})",
        s_alone.score,
        order[soccer].score
    );
    Ok(format!(
        "soccer #{} above chess #{}; score {:.4} drops to {:.4} without neighbors",
        soccer + 1,
        chess + 1,
        order[soccer].score,
        s_alone.score
    ))
}

/// Checks one queue against the contract: length, exclusion window and the
/// per-slot decomposition, each part recomputed from the snapshot.
fn check_queue(
    q: &[RecommendationSlot],
    user: &UserId,
    impressions: &[ImageId],
    manifest: &Manifest,
    cfg: &RecConfig,
    snap: Option<&RoomSnapshot>,
) -> Result<(), String> {
    ensure!(q.len() == cfg.queue_len, "queue for {user} has {} slots", q.len());
    let window: BTreeSet<&ImageId> = impressions[impressions.len().saturating_sub(cfg.exclude_window)..]
        .iter()
        .collect();
    let open = manifest.images().iter().filter(|i| !window.contains(&i.id)).count();
    if open >= cfg.queue_len {
        for s in q {
            ensure!(!window.contains(&s.image), "queue for {user} repeats {} from its window", s.image);
        }
    }
    let distinct: BTreeSet<&ImageId> = q.iter().map(|s| &s.image).collect();
    ensure!(distinct.len() == q.len(), "queue for {user} repeats an image");
    for s in q.iter().filter(|s| !s.explored) {
        let blend = cfg.alpha * s.content_part + cfg.beta * s.collab_part + cfg.gamma * s.popularity_part;
        ensure!((s.score - blend).abs() <= 1e-9, "slot {} of {user} breaks the blend", s.image);
    }
    if let Some(snap) = snap {
        let empty = AffinityProfile::empty(user.clone());
        let own = snap.profile(user).unwrap_or(&empty);
        for s in q {
            let img = manifest.get(s.image.as_str()).ok_or("queued image outside the manifest")?;
            let content = img.topics.iter().map(|t| own.affinity(t)).sum::<f64>() / img.topics.len() as f64;
            ensure!((s.content_part - content).abs() <= 1e-12, "content part of {} is off", s.image);
            ensure!(s.content_part == content_score(own, img), "content part disagrees with content_score");
            ensure!(
                (s.collab_part - collab_score(user, &s.image, snap)).abs() <= 1e-12,
                "collab part of {} is off",
                s.image
            );
            ensure!((s.popularity_part - snap.popularity(&s.image)).abs() <= 1e-12, "popularity part of {} is off", s.image);
        }
    }
    Ok(())
}

fn popularity_oracle(cells: &[EngagementCell]) -> BTreeMap<&ImageId, f64> {
    let mut totals: BTreeMap<&ImageId, f64> = BTreeMap::new();
    for c in cells {
        *totals.entry(&c.image).or_default() += c.score;
    }
    let max = totals.values().cloned().fold(0.0, f64::max);
    totals.into_iter().map(|(i, t)| (i, if max > 0.0 { t / max } else { 0.0 })).collect()
}

fn queue_contract() -> Check {
    // every queue frame of a recorded classroom
    let setup = RoomSetup::sample();
    let manifest = setup.manifest.clone();
    let mut cfg = SimConfig::new(RoomCode::new("QUEUE1").unwrap(), 12, 300, 11);
    cfg.record_transcript = true;
    let report = simulate(setup.clone(), &cfg, None).map_err(|e| e.to_string())?;
    let mut impressions: BTreeMap<UserId, Vec<ImageId>> = BTreeMap::new();
    let mut frames = 0;
    for line in report.transcript.iter().filter(|l| l.dir == Direction::Out) {
        match parse_server(&line.text).map_err(|e| e.to_string())? {
            ServerMessage::Ack { event, .. } => {
                if let Action::Impression { image } = event.action {
                    impressions.entry(event.user).or_default().push(image);
                }
            }
            ServerMessage::Queue { user, slots } => {
                let seen = impressions.get(&user).map_or(&[][..], Vec::as_slice);
                check_queue(&slots, &user, seen, &manifest, &setup.config.rec, None)?;
                frames += 1;
            }
            _ => {}
        }
    }
    ensure!(frames > 0, "the recorded classroom emitted no queue frames");

    // queues on random snapshots, parts recomputed independently
    let mut rng = ChaCha8Rng::seed_from_u64(0x0505);
    let users = ["u1", "u2", "u3", "u4", "u5", "u6"];
    let mut random = 0;
    for k in 0..100 {
        let len = rng.random_range(0..120);
        let log = random_log(&mut rng, &manifest, &users, len);
        let state = EngagementState::fold(&manifest, &log, &WeightTable::default()).map_err(|e| e.to_string())?;
        let snap = RoomSnapshot::from_state(manifest.clone(), &state).map_err(|e| e.to_string())?;
        let pop = popularity_oracle(snap.cells());
        let rec = RecConfig {
            epsilon_explore: [0.0, 0.1, 0.5][k % 3],
            exclude_window: [50, 5, 1][k % 3],
            ..RecConfig::default()
        };
        for u in users.map(uid) {
            let q = next_queue(&u, &snap, &rec).map_err(|e| e.to_string())?;
            check_queue(&q, &u, state.impressions(&u), &manifest, &rec, Some(&snap))?;
            for s in &q {
                let want = pop.get(&s.image).copied().unwrap_or(0.0);
                ensure!((s.popularity_part - want).abs() <= 1e-12, "popularity of {} disagrees with the oracle", s.image);
            }
            random += 1;
        }
    }
    Ok(format!("{frames} queue frames from a live classroom, {random} queues on random snapshots"))
}

fn check_graph<N: Ord + Clone + std::fmt::Debug, W: PartialEq>(g: &Graph<N, W>) -> Result<(), String> {
    for (a, b) in g.edges.keys() {
        ensure!(a < b, "edge {a:?}-{b:?} is a loop or stored out of order");
        ensure!(g.nodes.contains(a) && g.nodes.contains(b), "edge {a:?}-{b:?} has an unknown endpoint");
        ensure!(g.weight(a, b) == g.weight(b, a), "edge {a:?}-{b:?} is not symmetric");
    }
    for n in &g.nodes {
        ensure!(g.weight(n, n).is_none(), "self-loop on {n:?}");
    }
    let parts = clusters(g);
    let mut owner: BTreeMap<&N, usize> = BTreeMap::new();
    for (k, part) in parts.iter().enumerate() {
        ensure!(!part.is_empty(), "empty cluster");
        for n in part {
            ensure!(owner.insert(n, k).is_none(), "{n:?} is in two clusters");
        }
    }
    ensure!(owner.len() == g.nodes.len() && g.nodes.iter().all(|n| owner.contains_key(n)), "clusters do not cover the node set");
    for (a, b) in g.edges.keys() {
        ensure!(owner[a] == owner[b], "edge {a:?}-{b:?} crosses clusters");
    }
    for part in &parts {
        // each cluster is connected
        let mut reached = BTreeSet::from([&part[0]]);
        let mut todo = VecDeque::from([&part[0]]);
        while let Some(n) = todo.pop_front() {
            for m in g.neighbors(n) {
                if reached.insert(m) {
                    todo.push_back(m);
                }
            }
        }
        ensure!(reached.len() == part.len(), "cluster {:?} is not connected", part[0]);
    }
    Ok(())
}

fn subset<N: Ord, W>(small: &Graph<N, W>, big: &Graph<N, W>) -> bool {
    small.edges.keys().all(|k| big.edges.contains_key(k))
}

fn graph_properties() -> Check {
    let manifest = feedlab::service::sample_manifest();
    let users: Vec<String> = (0..10).map(|k| format!("s{k}")).collect();
    let users: Vec<&str> = users.iter().map(String::as_str).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(0x6AF);
    let (mut sim_edges, mut co_edges) = (0, 0);
    for k in 0..100 {
        let len = rng.random_range(0..200);
        let log = random_log(&mut rng, &manifest, &users, len);
        let state = EngagementState::fold(&manifest, &log, &WeightTable::default()).map_err(|e| e.to_string())?;
        let snap = RoomSnapshot::from_state(Arc::new(manifest.clone()), &state).map_err(|e| e.to_string())?;
        let profiles: Vec<&AffinityProfile> = snap.profiles().values().collect();

        let tau = rng.random_range(0.0..1.0);
        let tau_hi = tau + rng.random_range(0.0..(1.0 - tau));
        let sim = similarity_graph(profiles.iter().copied(), tau);
        let sim_hi = similarity_graph(profiles.iter().copied(), tau_hi);
        check_graph(&sim).map_err(|e| format!("snapshot {k}, similarity: {e}"))?;
        check_graph(&sim_hi).map_err(|e| format!("snapshot {k}, similarity: {e}"))?;
        ensure!(subset(&sim_hi, &sim), "snapshot {k}: raising tau {tau} -> {tau_hi} added an edge");
        for (i, p) in profiles.iter().enumerate() {
            for q in &profiles[i + 1..] {
                let linked = sim.weight(&p.user, &q.user).is_some();
                ensure!(linked == (cosine_similarity(p, q) >= tau), "snapshot {k}: edge {}-{} disagrees with tau", p.user, q.user);
            }
        }

        let theta = rng.random_range(0.0..8.0);
        let theta_hi = theta + rng.random_range(0.0..8.0);
        let co = co_engagement(snap.cells(), theta);
        let co_hi = co_engagement(snap.cells(), theta_hi);
        check_graph(&co).map_err(|e| format!("snapshot {k}, co-engagement: {e}"))?;
        check_graph(&co_hi).map_err(|e| format!("snapshot {k}, co-engagement: {e}"))?;
        ensure!(subset(&co_hi, &co), "snapshot {k}: raising theta {theta} -> {theta_hi} added an edge");
        sim_edges += sim.edges.len();
        co_edges += co.edges.len();
    }
    Ok(format!("100 snapshots, {sim_edges} similarity and {co_edges} co-engagement edges"))
}

fn statistics_fixtures() -> Check {
    let load = |name: &str| load_survey_csv(&fixture(&format!("survey/{name}"))).map_err(|e| e.to_string());
    let mut rows = load("pre.csv")?;
    rows.extend(load("post.csv")?);
    let survey = Survey::new(rows).map_err(|e| e.to_string())?;
    for (phase, n, pct) in [(Phase::Pre, 183, [15.3, 74.86, 9.84]), (Phase::Post, 191, [16.23, 52.88, 30.89])] {
        let d = category_distribution(&survey, 1, phase, None).map_err(|e| e.to_string())?;
        ensure!(d.n == n, "{phase:?} has {} answers, expected {n}", d.n);
        let got: Vec<f64> = d.pct.values().copied().collect();
        ensure!(got == pct, "{phase:?} percentages {got:?}, expected {pct:?}");
    }

    let chi = chi_square(&ContingencyTable::from_counts(vec![vec![10, 0], vec![0, 10]]).unwrap()).map_err(|e| e.to_string())?;
    ensure!((chi.chi2 - 20.0).abs() <= 1e-9, "chi2 is {}", chi.chi2);
    for (i, row) in chi.residuals.iter().enumerate() {
        for (j, r) in row.iter().enumerate() {
            let want = if i == j { 2.236 } else { -2.236 };
            ensure!((r - want).abs() <= 1e-3, "residual ({i}, {j}) is {r}");
        }
    }

    let k = cohens_kappa(&["A", "A", "B", "B"], &["A", "A", "B", "A"]).map_err(|e| e.to_string())?;
    ensure!((k.kappa - 0.5).abs() <= 1e-12, "hand example kappa is {}", k.kappa);
    ensure!(k.landis_koch_label == Agreement::Moderate, "hand example label is {:?}", k.landis_koch_label);

    let mut rng = ChaCha8Rng::seed_from_u64(0xD0D0);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let n = rng.random_range(2..60);
        let pre: Vec<f64> = (0..n).map(|_| rng.random_range(1..=5) as f64).collect();
        let post: Vec<f64> = pre.iter().map(|p| p + rng.random_range(-2.0..3.0)).collect();
        let t = paired_t(&pre, &post).map_err(|e| e.to_string())?;
        let gap = (t.cohen_d - t.t / (t.n as f64).sqrt()).abs();
        ensure!(gap <= 1e-9, "d differs from t/sqrt(n) by {gap}");
        worst = worst.max(gap);
    }

    let p_t = student_t_two_tailed(2.228, 10.0);
    let p_chi = chi_square_upper(3.841, 1.0);
    ensure!((p_t - 0.05).abs() <= 1e-3, "p(|t| > 2.228, df 10) = {p_t}");
    ensure!((p_chi - 0.05).abs() <= 1e-3, "p(chi2 > 3.841, df 1) = {p_chi}");
    let t_ref = 2.0 * (1.0 - StudentsT::new(0.0, 1.0, 10.0).unwrap().cdf(2.228));
    let chi_ref = 1.0 - ChiSquared::new(1.0).unwrap().cdf(3.841);
    ensure!((p_t - t_ref).abs() <= 1e-6, "t p-value {p_t} vs reference {t_ref}");
    ensure!((p_chi - chi_ref).abs() <= 1e-6, "chi-square p-value {p_chi} vs reference {chi_ref}");

    Ok(format!(
        "question 1 percentages exact, chi2 {:.1}, kappa 0.5, max |d - t/sqrt(n)| {worst:.1e}, p {p_t:.4} / {p_chi:.4}",
        chi.chi2
    ))
}

fn protocol_goldens() -> Check {
    let text = std::fs::read_to_string(golden("transcript.jsonl")).map_err(|e| format!("golden transcript: {e}"))?;
    let recorded: Vec<TranscriptLine> = text
        .lines()
        .map(serde_json::from_str)
        .collect::<Result<_, _>>()
        .map_err(|e| format!("golden transcript: {e}"))?;
    let mut kinds = BTreeSet::new();
    for (k, line) in recorded.iter().enumerate() {
        match line.dir {
            Direction::In => {
                let msg = parse_client(&line.text).map_err(|e| format!("line {}: {e}", k + 1))?;
                let again = parse_client(&serde_json::to_string(&msg).unwrap()).map_err(|e| e.to_string())?;
                ensure!(again == msg, "line {}: client frame does not round-trip", k + 1);
                kinds.insert(format!("in:{}", type_of(&line.text)));
            }
            Direction::Out => {
                let msg = parse_server(&line.text).map_err(|e| format!("line {}: {e}", k + 1))?;
                ensure!(msg.to_json() == line.text, "line {}: server frame re-serializes differently", k + 1);
                ensure!(parse_server(&msg.to_json()).ok() == Some(msg), "line {}: server frame does not round-trip", k + 1);
                kinds.insert(format!("out:{}", type_of(&line.text)));
            }
        }
    }
    for want in [
        "in:hello", "in:pair", "in:action", "out:welcome", "out:paired", "out:ack", "out:feed", "out:log_tail",
        "out:profile", "out:queue", "out:room_profiles", "out:graph",
    ] {
        ensure!(kinds.contains(want), "golden transcript has no {want} frame");
    }
    let fresh = simulate(RoomSetup::sample(), &golden_config(), None).map_err(|e| e.to_string())?;
    ensure!(fresh.transcript == recorded, "a fresh run no longer matches the golden transcript");

    // malformed frames: one structured error each, connection kept
    let clock = ManualClock::new(1_000);
    let mut hub = Hub::new(Arc::new(clock), 3, None);
    let room = hub.create_room(RoomSetup::sample()).map_err(|e| e.to_string())?;
    let conn = hub.connect();
    let cases: Vec<(String, &str)> = vec![
        ("{not json".into(), "malformed_json"),
        ("[1,2,3]".into(), "missing_type"),
        (r#"{"room":"ABC123"}"#.into(), "missing_type"),
        (r#"{"type":7}"#.into(), "missing_type"),
        (r#"{"type":"shout"}"#.into(), "unknown_type"),
        (r#"{"type":"hello","room":"ABC123","role":"wizard"}"#.into(), "invalid_message"),
        (r#"{"type":"hello","room":"ABC123","role":"student","extra":1}"#.into(), "invalid_message"),
        (format!(r#"{{"type":"pair","code":"{}"}}"#, "9".repeat(70_000)), "too_large"),
        (r#"{"type":"action","action":{"kind":"like","image":"img001"}}"#.into(), "session"),
        (json!({"type": "hello", "room": "ZZZZZZ", "role": "student", "nickname": "x"}).to_string(), "unknown_reference"),
    ];
    for (frame, code) in &cases {
        let out = hub.handle_text(conn, frame);
        ensure!(out.len() == 1 && out[0].conn == conn, "{code}: expected one reply to the sender, got {}", out.len());
        match parse_server(&out[0].text).map_err(|e| e.to_string())? {
            ServerMessage::Error { code: got, .. } => ensure!(got == *code, "expected {code}, got {got}"),
            other => return Err(format!("{code}: expected an error frame, got {other:?}")),
        }
        ensure!(hub.is_connected(conn), "{code}: connection dropped");
    }
    let out = hub.handle_text(conn, &json!({"type": "hello", "room": room, "role": "student", "nickname": "ok"}).to_string());
    ensure!(
        matches!(parse_server(&out[0].text), Ok(ServerMessage::Welcome(_))),
        "connection unusable after malformed frames"
    );
    Ok(format!("{} golden frames round-trip, {} malformed frames answered", recorded.len(), cases.len()))
}

fn type_of(text: &str) -> String {
    let v: serde_json::Value = serde_json::from_str(text).unwrap_or_default();
    v["type"].as_str().unwrap_or("?").to_string()
}

fn game_flow() -> Check {
    let clock = ManualClock::new(1_000);
    let mut hub = Hub::new(Arc::new(clock.clone()), 9, None);
    let setup = RoomSetup::sample().with_mode(RoomMode::Game).map_err(|e| e.to_string())?;
    let room = hub.create_room(setup).map_err(|e| e.to_string())?;
    let send = |hub: &mut Hub, conn: ConnId, msg: serde_json::Value| -> Result<Vec<ServerMessage>, String> {
        clock.advance(10);
        hub.handle_text(conn, &msg.to_string())
            .iter()
            .filter(|f| f.conn == conn)
            .map(|f| parse_server(&f.text).map_err(|e| e.to_string()))
            .collect()
    };
    let teacher = hub.connect();
    send(&mut hub, teacher, json!({"type": "hello", "room": room, "role": "teacher"}))?;
    let pairs: Vec<ConnId> = (0..4).map(|_| hub.connect()).collect();
    for (k, &p) in pairs.iter().enumerate() {
        send(&mut hub, p, json!({"type": "hello", "room": room, "role": "student", "nickname": format!("pair{k}")}))?;
    }

    let mut submitted: BTreeMap<usize, Vec<String>> = BTreeMap::new();
    for hint in 1..=3 {
        let out = send(&mut hub, teacher, json!({"type": "advance_hint"}))?;
        ensure!(
            matches!(out.as_slice(), [ServerMessage::Hint { index, .. }] if *index == hint),
            "hint {hint}: unexpected reply {out:?}"
        );
        for (k, &p) in pairs.iter().enumerate() {
            // pair k revises its draft k + 1 times per hint
            for rev in 0..=k {
                let guess = format!("hint{hint}-rev{rev}");
                let out = send(&mut hub, p, json!({"type": "draft_submit", "draft": {"fields": {"guess": guess}, "tags": [format!("h{hint}")]}}))?;
                let expect = submitted.get(&k).map_or(0, Vec::len) as u32 + 1;
                ensure!(
                    matches!(out.as_slice(), [ServerMessage::DraftAck { version, .. }] if *version == expect),
                    "pair {k}: unexpected draft reply {out:?}"
                );
                submitted.entry(k).or_default().push(guess);
            }
        }
    }
    let extra = send(&mut hub, teacher, json!({"type": "advance_hint"}))?;
    ensure!(matches!(extra.as_slice(), [ServerMessage::Error { .. }]), "a fourth hint was released");
    let stolen = send(&mut hub, pairs[0], json!({"type": "publish_board"}))?;
    ensure!(matches!(stolen.as_slice(), [ServerMessage::Error { .. }]), "a student published the board");

    let board = match send(&mut hub, teacher, json!({"type": "publish_board"}))?.as_slice() {
        [ServerMessage::Board { drafts }] => drafts.clone(),
        other => return Err(format!("publish_board replied {other:?}")),
    };
    let game = hub.room(&room).and_then(|r| r.game()).ok_or("room lost its game")?;
    ensure!(game.hint_index() == 3, "hint index is {}", game.hint_index());
    ensure!(board.len() == 4, "board has {} drafts", board.len());
    ensure!(board == game.board(), "published board differs from the game board");
    let mut history_len = 0;
    for (k, guesses) in &submitted {
        let user = format!("pair{k}");
        let latest = board.iter().find(|d| d.pair_id == user).ok_or(format!("{user} missing from the board"))?;
        ensure!(latest.version as usize == guesses.len(), "{user} board version {}", latest.version);
        ensure!(latest.fields["guess"] == *guesses.last().unwrap(), "{user} board shows a stale draft");
        let history = game.history(&user);
        ensure!(history.len() == guesses.len(), "{user} kept {} of {} drafts", history.len(), guesses.len());
        for (v, (d, g)) in history.iter().zip(guesses).enumerate() {
            ensure!(d.version as usize == v + 1 && d.fields["guess"] == *g, "{user} history entry {v} is wrong");
        }
        history_len += history.len();
    }

    // a late joiner catches up on the hint and the board
    let late = hub.connect();
    let out = send(&mut hub, late, json!({"type": "hello", "room": room, "role": "analytics"}))?;
    ensure!(out.iter().any(|m| matches!(m, ServerMessage::Hint { index: 3, .. })), "late joiner missed the hint");
    ensure!(out.iter().any(|m| matches!(m, ServerMessage::Board { drafts } if drafts.len() == 4)), "late joiner missed the board");
    Ok(format!("hint index 3, board of 4 latest drafts, {history_len} drafts in history"))
}

fn main() {
    let soak = run_soak();
    let with_soak = |f: fn(&Soak) -> Check| -> Check { soak.as_ref().map_err(Clone::clone).and_then(f) };
    let criteria: Vec<Criterion> = vec![
        ("replay determinism", Box::new(|| with_soak(replay_determinism))),
        ("engagement oracle", Box::new(engagement_oracle)),
        ("profile normalization", Box::new(|| with_soak(profile_normalization))),
        ("collaborative filtering scenario", Box::new(cf_scenario)),
        ("queue contract", Box::new(queue_contract)),
        ("graph properties", Box::new(graph_properties)),
        ("statistics fixtures", Box::new(statistics_fixtures)),
        ("protocol goldens", Box::new(protocol_goldens)),
        ("game flow", Box::new(game_flow)),
    ];
    let mut failed = 0;
    for (name, check) in &criteria {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match outcome {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(reason) => {
                failed += 1;
                println!("FAIL {name}: {reason}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
