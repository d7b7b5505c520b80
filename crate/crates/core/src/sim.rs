//! Seeded classroom simulator. Simulated students, analytics devices and a
//! teacher talk to a [`Hub`] only through JSON text frames, exactly as
//! browser clients would, on a manually advanced clock.

use std::collections::{BTreeSet, VecDeque};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::model::{ImageId, RoomCode, TopicLabel, UserId};
use crate::service::protocol::{parse_server, ServerMessage};
use crate::service::{ConnId, Envelope, FinalSnapshot, Hub, ManualClock, RoomSetup};
use crate::{Error, Result};

/// Simulated wall clock start (2024-01-01T00:00:00Z).
pub const SIM_EPOCH_MS: u64 = 1_704_067_200_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub room: RoomCode,
    pub students: usize,
    pub steps: usize,
    pub seed: u64,
    /// Simulated time between two steps.
    pub step_ms: u64,
    /// Number of students that get a paired analytics device.
    pub analytics_devices: usize,
    /// Keep every frame in the report's transcript.
    pub record_transcript: bool,
}

impl SimConfig {
    pub fn new(room: RoomCode, students: usize, steps: usize, seed: u64) -> Self {
        Self {
            room,
            students,
            steps,
            seed,
            step_ms: 40,
            analytics_devices: students.min(5),
            record_transcript: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    In,
    Out,
}

/// One recorded frame, from the server's point of view.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptLine {
    pub conn: u64,
    pub dir: Direction,
    pub text: String,
}

#[derive(Debug, Clone)]
pub struct SimReport {
    pub room: RoomCode,
    pub events: u64,
    pub frames_sent: usize,
    pub frames_received: usize,
    /// `error` frames the simulated clients received.
    pub errors: usize,
    pub snapshot: FinalSnapshot,
    pub log_path: Option<PathBuf>,
    pub transcript: Vec<TranscriptLine>,
}

struct Student {
    conn: ConnId,
    user: Option<UserId>,
    pairing_code: Option<String>,
    favorites: BTreeSet<TopicLabel>,
    upcoming: VecDeque<ImageId>,
    liked: BTreeSet<ImageId>,
    nonce: u64,
}

struct Classroom {
    hub: Hub,
    clock: ManualClock,
    rng: ChaCha8Rng,
    students: Vec<Student>,
    transcript: Option<Vec<TranscriptLine>>,
    frames_sent: usize,
    frames_received: usize,
    errors: usize,
}

impl Classroom {
    fn send(&mut self, conn: ConnId, msg: serde_json::Value) -> Vec<Envelope> {
        let text = msg.to_string();
        self.frames_sent += 1;
        if let Some(t) = &mut self.transcript {
            t.push(TranscriptLine { conn: conn.0, dir: Direction::In, text: text.clone() });
        }
        let out = self.hub.handle_text(conn, &text);
        self.receive(&out);
        out
    }

    /// Lets every simulated client react to the frames addressed to it.
    fn receive(&mut self, frames: &[Envelope]) {
        for f in frames {
            self.frames_received += 1;
            if let Some(t) = &mut self.transcript {
                t.push(TranscriptLine { conn: f.conn.0, dir: Direction::Out, text: f.text.clone() });
            }
            let msg = parse_server(&f.text).expect("server frames always parse");
            let Some(s) = self.students.iter_mut().find(|s| s.conn == f.conn) else {
                if matches!(msg, ServerMessage::Error { .. }) {
                    self.errors += 1;
                }
                continue;
            };
            match msg {
                ServerMessage::Welcome(w) => {
                    s.user = w.user;
                    s.pairing_code = w.pairing_code;
                }
                ServerMessage::Feed { images } => s.upcoming = images.into(),
                ServerMessage::Error { .. } => self.errors += 1,
                _ => {}
            }
        }
    }
}

/// Runs a simulated classroom in a fresh hub. With `data_dir`, the room log
/// is written to `<data_dir>/<CODE>.log`.
pub fn simulate(setup: RoomSetup, cfg: &SimConfig, data_dir: Option<&Path>) -> Result<SimReport> {
    if cfg.students == 0 {
        return Err(Error::Input("a classroom needs at least one student".into()));
    }
    let clock = ManualClock::new(SIM_EPOCH_MS);
    let mut hub = Hub::new(Arc::new(clock.clone()), cfg.seed, data_dir.map(Path::to_path_buf));
    let manifest = setup.manifest.clone();
    hub.create_room_with_code(cfg.room.clone(), setup)?;

    let mut class = Classroom {
        hub,
        clock,
        rng: ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x51C1_A55E),
        students: Vec::new(),
        transcript: cfg.record_transcript.then(Vec::new),
        frames_sent: 0,
        frames_received: 0,
        errors: 0,
    };
    let room = cfg.room.as_str();
    let topics: Vec<TopicLabel> = manifest.topics().into_iter().cloned().collect();

    let teacher = class.hub.connect();
    class.send(teacher, json!({"type": "hello", "room": room, "role": "teacher"}));

    for i in 0..cfg.students {
        let conn = class.hub.connect();
        let favorites = topics
            .choose_multiple(&mut class.rng, 2)
            .cloned()
            .collect();
        class.students.push(Student {
            conn,
            user: None,
            pairing_code: None,
            favorites,
            upcoming: VecDeque::new(),
            liked: BTreeSet::new(),
            nonce: 0,
        });
        // a few duplicate nicknames exercise the dedup rule
        let nickname = format!("student{}", i % (cfg.students.max(4) - 2).max(1));
        class.send(conn, json!({"type": "hello", "room": room, "role": "student", "nickname": nickname}));
    }

    for i in 0..cfg.analytics_devices.min(cfg.students) {
        let conn = class.hub.connect();
        class.send(conn, json!({"type": "hello", "room": room, "role": "analytics"}));
        if let Some(code) = class.students[i].pairing_code.clone() {
            class.send(conn, json!({"type": "pair", "code": code}));
        }
    }

    for _ in 0..cfg.steps {
        let who = class.rng.random_range(0..class.students.len());
        for action in plan_step(&mut class, who, &manifest) {
            let s = &mut class.students[who];
            s.nonce += 1;
            let nonce = format!("{}-{}", s.conn.0, s.nonce);
            let conn = s.conn;
            class.send(conn, json!({"type": "action", "action": action, "nonce": nonce}));
        }
        class.clock.advance(cfg.step_ms);
        let frames = class.hub.tick();
        class.receive(&frames);
    }
    // flush the final tick
    class.clock.advance(1_000);
    let frames = class.hub.tick();
    class.receive(&frames);

    let r = class.hub.room(&cfg.room).expect("room was created");
    Ok(SimReport {
        room: cfg.room.clone(),
        events: r.log().len() as u64,
        frames_sent: class.frames_sent,
        frames_received: class.frames_received,
        errors: class.errors,
        snapshot: r.final_snapshot()?,
        log_path: r.log_path().map(Path::to_path_buf),
        transcript: class.transcript.unwrap_or_default(),
    })
}

/// Actions of one student for one step: look at the next image in the
/// feed, linger according to taste, and maybe react.
fn plan_step(class: &mut Classroom, who: usize, manifest: &crate::model::Manifest) -> Vec<serde_json::Value> {
    let others: Vec<UserId> = class
        .students
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != who)
        .filter_map(|(_, s)| s.user.clone())
        .collect();
    let rng = &mut class.rng;
    let s = &mut class.students[who];
    let image = match s.upcoming.pop_front() {
        Some(i) => i,
        None => manifest.images()[rng.random_range(0..manifest.len())].id.clone(),
    };
    let item = manifest.get(image.as_str()).expect("feeds only carry manifest images");
    let keen = item.topics.iter().any(|t| s.favorites.contains(t));
    let mut out = vec![json!({"kind": "impression", "image": image})];

    if rng.random_bool(0.03) {
        out.push(json!({"kind": "inactivity", "gap_ms": rng.random_range(30_000..120_000u64)}));
    }
    let dwell = if keen {
        rng.random_range(2_000..12_000u64)
    } else {
        rng.random_range(150..1_500u64)
    };
    out.push(json!({"kind": "view_dwell", "image": image, "dwell_ms": dwell}));

    let p = if keen { 1.0 } else { 0.15 };
    if s.liked.contains(&image) && rng.random_bool(0.2) {
        out.push(json!({"kind": "unlike", "image": image}));
        s.liked.remove(&image);
    } else if rng.random_bool(0.6 * p) {
        out.push(json!({"kind": "like", "image": image}));
        s.liked.insert(image.clone());
    }
    if rng.random_bool(0.25 * p) {
        let emoji = ["heart", "laugh", "wow", "sad"].choose(rng).expect("non-empty");
        out.push(json!({"kind": "emoji", "image": image, "emoji_code": emoji}));
    }
    if rng.random_bool(0.15 * p) {
        out.push(json!({"kind": "comment", "image": image, "comment_len": rng.random_range(3..120u32)}));
    }
    if rng.random_bool(0.1 * p) {
        let scope = ["private", "friends", "public"].choose(rng).expect("non-empty");
        out.push(json!({"kind": "share", "image": image, "share_scope": scope}));
    }
    if rng.random_bool(0.05 * p) {
        if let Some(followee) = others.choose(rng) {
            out.push(json!({"kind": "follow", "followee": followee, "image": image}));
        }
    }
    out
}
