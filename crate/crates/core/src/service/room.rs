//! One classroom: its log, sessions, pairing codes and game.
//!
//! A room is a single-writer state machine. Every method that changes it
//! takes `&mut self`, so callers serialize access per room and all state
//! transitions happen one event at a time in seq order.

use std::collections::{BTreeMap, HashMap};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::engagement::EngagementState;
use crate::gamekit::{DraftInput, Game};
use crate::model::{Action, EventRecord, Role, RoomCode, UserId, ValidationError};
use crate::service::config::{RoomMode, RoomSetup, PAIRING_TTL_MS};
use crate::service::log::LogWriter;
use crate::service::protocol::{ProfileView, ServerMessage, SessionId};
use crate::service::snapshot::{FinalSnapshot, RoomView};
use crate::{Error, PairingFailure, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionInfo {
    pub session_id: SessionId,
    pub role: Role,
    /// Set for students.
    pub user: Option<UserId>,
    /// Student session mirrored by an analytics device.
    pub paired_with: Option<SessionId>,
    /// Most recent pairing code issued to a student.
    pub pairing_code: Option<String>,
}

#[derive(Debug, Clone)]
struct PairingTicket {
    student: SessionId,
    issued_ms: u64,
    used: bool,
}

/// A message addressed to one session.
#[derive(Debug, Clone, PartialEq)]
pub struct Outbound {
    pub to: SessionId,
    pub message: ServerMessage,
}

#[derive(Debug)]
pub struct Room {
    code: RoomCode,
    setup: RoomSetup,
    created_ts: u64,
    log: Vec<EventRecord>,
    state: EngagementState,
    writer: Option<LogWriter>,
    sessions: BTreeMap<SessionId, SessionInfo>,
    students: BTreeMap<UserId, SessionId>,
    tickets: HashMap<String, PairingTicket>,
    nonces: HashMap<(UserId, String), u64>,
    game: Option<Game>,
    last_tick_ms: Option<u64>,
    ticked_seq: u64,
}

impl Room {
    /// A room with an empty log. With a writer, every ingested event is
    /// durably appended before it is acknowledged.
    pub fn new(code: RoomCode, setup: RoomSetup, writer: Option<LogWriter>, now_ms: u64) -> Self {
        let state = EngagementState::new(&setup.manifest);
        let game = setup.script.clone().map(Game::new);
        Self {
            code,
            setup,
            created_ts: now_ms,
            log: Vec::new(),
            state,
            writer,
            sessions: BTreeMap::new(),
            students: BTreeMap::new(),
            tickets: HashMap::new(),
            nonces: HashMap::new(),
            game,
            last_tick_ms: None,
            ticked_seq: 0,
        }
    }

    pub fn code(&self) -> &RoomCode {
        &self.code
    }

    pub fn setup(&self) -> &RoomSetup {
        &self.setup
    }

    pub fn mode(&self) -> RoomMode {
        self.setup.config.mode
    }

    pub fn created_ts(&self) -> u64 {
        self.created_ts
    }

    pub fn log(&self) -> &[EventRecord] {
        &self.log
    }

    pub fn state(&self) -> &EngagementState {
        &self.state
    }

    pub fn game(&self) -> Option<&Game> {
        self.game.as_ref()
    }

    pub fn session(&self, id: &SessionId) -> Option<&SessionInfo> {
        self.sessions.get(id)
    }

    pub fn sessions(&self) -> impl Iterator<Item = &SessionInfo> {
        self.sessions.values()
    }

    pub fn log_path(&self) -> Option<&std::path::Path> {
        self.writer.as_ref().map(LogWriter::path)
    }

    fn session_ok(&self, id: &SessionId) -> Result<&SessionInfo> {
        self.sessions
            .get(id)
            .ok_or_else(|| Error::Session(format!("unknown session {id}")))
    }

    /// Registers a new session. Students get a user id derived from their
    /// nickname; a taken nickname gets a numeric suffix (`fox`, `fox-2`).
    pub fn join(&mut self, session_id: SessionId, role: Role, nickname: Option<&str>) -> Result<SessionInfo> {
        if self.sessions.contains_key(&session_id) {
            return Err(Error::Session(format!("session {session_id} already exists")));
        }
        let user = match role {
            Role::Teacher => {
                if self.sessions.values().any(|s| s.role == Role::Teacher) {
                    return Err(Error::Role("room already has a teacher".into()));
                }
                None
            }
            Role::Analytics => None,
            Role::Student => {
                let nick = nickname
                    .map(str::trim)
                    .filter(|n| !n.is_empty())
                    .ok_or_else(|| ValidationError::new("nickname", "students need a nickname"))?;
                Some(self.unique_user(nick)?)
            }
        };
        let info = SessionInfo {
            session_id: session_id.clone(),
            role,
            user: user.clone(),
            paired_with: None,
            pairing_code: None,
        };
        if let Some(u) = user {
            self.students.insert(u, session_id.clone());
        }
        self.sessions.insert(session_id, info.clone());
        Ok(info)
    }

    fn unique_user(&self, nick: &str) -> Result<UserId> {
        let base = UserId::new(nick)?;
        if !self.students.contains_key(&base) {
            return Ok(base);
        }
        (2..)
            .map(|n| UserId::new(format!("{nick}-{n}")))
            .find(|u| u.as_ref().map_or(true, |u| !self.students.contains_key(u)))
            .expect("suffixes are unbounded")
            .map_err(Error::from)
    }

    /// Issues a fresh single-use 6-digit code for a student session.
    /// Returns the code and its expiry time.
    pub fn issue_pairing_code(&mut self, student: &SessionId, now_ms: u64, rng: &mut impl Rng) -> Result<(String, u64)> {
        if self.session_ok(student)?.role != Role::Student {
            return Err(Error::Role("only students hand out pairing codes".into()));
        }
        let code = loop {
            let c = format!("{:06}", rng.random_range(0..1_000_000u32));
            if !self.tickets.contains_key(&c) {
                break c;
            }
        };
        self.tickets.insert(
            code.clone(),
            PairingTicket {
                student: student.clone(),
                issued_ms: now_ms,
                used: false,
            },
        );
        if let Some(s) = self.sessions.get_mut(student) {
            s.pairing_code = Some(code.clone());
        }
        Ok((code, now_ms + PAIRING_TTL_MS))
    }

    /// Binds an analytics session to the student that issued `code`.
    /// Returns the student's session.
    pub fn pair(&mut self, analytics: &SessionId, code: &str, now_ms: u64) -> Result<SessionInfo> {
        if self.session_ok(analytics)?.role != Role::Analytics {
            return Err(Error::Role("only analytics devices can pair".into()));
        }
        let ticket = self
            .tickets
            .get_mut(code)
            .ok_or(Error::Pairing(PairingFailure::Unknown))?;
        if ticket.used {
            return Err(Error::Pairing(PairingFailure::Used));
        }
        if now_ms.saturating_sub(ticket.issued_ms) >= PAIRING_TTL_MS {
            return Err(Error::Pairing(PairingFailure::Expired));
        }
        ticket.used = true;
        let student = ticket.student.clone();
        if let Some(a) = self.sessions.get_mut(analytics) {
            a.paired_with = Some(student.clone());
        }
        if let Some(s) = self.sessions.get_mut(&student) {
            if s.pairing_code.as_deref() == Some(code) {
                s.pairing_code = None;
            }
        }
        Ok(self.sessions[&student].clone())
    }

    /// Logs one student action. The event is durably written before this
    /// returns. A nonce already seen for this user returns the original
    /// event instead of logging a duplicate.
    pub fn ingest(
        &mut self,
        session: &SessionId,
        action: Action,
        nonce: Option<&str>,
        ts_client: Option<u64>,
        now_ms: u64,
    ) -> Result<EventRecord> {
        let info = self.session_ok(session)?;
        if info.role != Role::Student {
            return Err(Error::Role("only students can act on the feed".into()));
        }
        if self.mode() != RoomMode::Feed {
            return Err(Error::Mode("actions are only accepted in feed mode".into()));
        }
        let user = info.user.clone().expect("students always have a user");
        if let Some(n) = nonce {
            if let Some(&seq) = self.nonces.get(&(user.clone(), n.to_string())) {
                return Ok(self.log[seq as usize - 1].clone());
            }
        }
        if let Action::Follow { followee, .. } = &action {
            if !self.students.contains_key(followee) {
                return Err(Error::UnknownReference {
                    kind: "user",
                    id: followee.to_string(),
                });
            }
        }
        let seq = self.log.len() as u64 + 1;
        let ev = EventRecord::new(seq, self.code.clone(), user.clone(), now_ms, ts_client, action)?;

        // Validate against a scratch copy so a failed write leaves no trace.
        let mut next = self.state.clone();
        next.apply(&ev, &self.setup.config.weights)?;
        if let Some(w) = &mut self.writer {
            w.append(&ev)?;
        }
        self.state = next;
        self.log.push(ev.clone());
        if let Some(n) = nonce {
            self.nonces.insert((user, n.to_string()), seq);
        }
        Ok(ev)
    }

    /// Current feed queue of one student, for the `feed` message on join.
    pub fn feed_for(&self, user: &UserId) -> Result<ServerMessage> {
        let view = RoomView::compute(self.setup.manifest.clone(), &self.state, &self.setup.config)?;
        let slots = view.queue(user, &self.setup.config)?;
        Ok(ServerMessage::Feed {
            images: slots.into_iter().map(|s| s.image).collect(),
        })
    }

    /// Runs a broadcast tick if one is due: at least one new event since
    /// the last tick and at least the configured interval elapsed.
    pub fn tick(&mut self, now_ms: u64) -> Result<Vec<Outbound>> {
        let head = self.log.len() as u64;
        if head == self.ticked_seq {
            return Ok(Vec::new());
        }
        if let Some(last) = self.last_tick_ms {
            if now_ms.saturating_sub(last) < self.setup.config.tick_interval_ms {
                return Ok(Vec::new());
            }
        }
        let out = self.tick_messages()?;
        self.last_tick_ms = Some(now_ms);
        self.ticked_seq = head;
        Ok(out)
    }

    /// Messages for a tick at the current log head, without throttling.
    ///
    /// Each student and the analytics devices paired with it receive that
    /// student's own log tail, profile and queue; the student also gets a
    /// `feed`. The teacher receives all profiles and both graphs.
    pub fn tick_messages(&self) -> Result<Vec<Outbound>> {
        let cfg = &self.setup.config;
        let view = RoomView::compute(self.setup.manifest.clone(), &self.state, cfg)?;
        let mut out = Vec::new();

        let mut mirrors: BTreeMap<&SessionId, Vec<&SessionId>> = BTreeMap::new();
        for s in self.sessions.values() {
            if let Some(student) = &s.paired_with {
                mirrors.entry(student).or_default().push(&s.session_id);
            }
        }

        for (user, sid) in &self.students {
            let tail: Vec<EventRecord> = {
                let mut mine: Vec<&EventRecord> =
                    self.log.iter().rev().filter(|e| &e.user == user).take(cfg.log_tail_len).collect();
                mine.reverse();
                mine.into_iter().cloned().collect()
            };
            let slots = view.queue(user, cfg)?;
            let batch = [
                ServerMessage::LogTail {
                    user: user.clone(),
                    events: tail,
                },
                ServerMessage::Profile(ProfileView::new(&view.profile(user), cfg.word_cloud_terms)),
                ServerMessage::Queue {
                    user: user.clone(),
                    slots: slots.clone(),
                },
            ];
            for to in std::iter::once(sid).chain(mirrors.get(sid).into_iter().flatten().copied()) {
                for m in &batch {
                    out.push(Outbound {
                        to: to.clone(),
                        message: m.clone(),
                    });
                }
            }
            out.push(Outbound {
                to: sid.clone(),
                message: ServerMessage::Feed {
                    images: slots.into_iter().map(|s| s.image).collect(),
                },
            });
        }

        if let Some(teacher) = self.teacher() {
            for message in [
                ServerMessage::RoomProfiles {
                    profiles: view.profile_views(cfg.word_cloud_terms),
                    classroom: view.classroom.clone(),
                },
                ServerMessage::Graph(view.similarity_view()),
                ServerMessage::Graph(view.coengagement_view()),
            ] {
                out.push(Outbound {
                    to: teacher.clone(),
                    message,
                });
            }
        }
        Ok(out)
    }

    fn teacher(&self) -> Option<&SessionId> {
        self.sessions
            .values()
            .find(|s| s.role == Role::Teacher)
            .map(|s| &s.session_id)
    }

    fn to_all(&self, message: ServerMessage) -> Vec<Outbound> {
        self.sessions
            .keys()
            .map(|to| Outbound {
                to: to.clone(),
                message: message.clone(),
            })
            .collect()
    }

    fn game_parts(&mut self, session: &SessionId) -> Result<(Role, Option<UserId>, &mut Game)> {
        let info = self.session_ok(session)?;
        let (role, user) = (info.role, info.user.clone());
        let game = self
            .game
            .as_mut()
            .ok_or_else(|| Error::Mode("this room is not running a game".into()))?;
        Ok((role, user, game))
    }

    /// Releases the next hint to every session.
    pub fn advance_hint(&mut self, session: &SessionId) -> Result<Vec<Outbound>> {
        let (role, _, game) = self.game_parts(session)?;
        let (index, hint) = game.advance_hint(role)?;
        let msg = ServerMessage::Hint {
            index,
            text: hint.text.clone(),
            prompts: hint.prompts.clone(),
        };
        Ok(self.to_all(msg))
    }

    /// Stores a new draft for the submitting pair. The pair id is the
    /// student's user id, since one pair shares one device.
    pub fn submit_draft(&mut self, session: &SessionId, draft: DraftInput) -> Result<Vec<Outbound>> {
        let (role, user, game) = self.game_parts(session)?;
        if role != Role::Student {
            return Err(Error::Role("only student pairs submit drafts".into()));
        }
        let pair_id = user.expect("students always have a user").to_string();
        let version = game.submit_draft(&pair_id, draft)?;
        Ok(vec![Outbound {
            to: session.clone(),
            message: ServerMessage::DraftAck { pair_id, version },
        }])
    }

    pub fn publish_board(&mut self, session: &SessionId) -> Result<Vec<Outbound>> {
        let (role, _, game) = self.game_parts(session)?;
        let drafts = game.publish_board(role)?;
        Ok(self.to_all(ServerMessage::Board { drafts }))
    }

    pub fn reveal(&mut self, session: &SessionId) -> Result<Vec<Outbound>> {
        let (role, _, game) = self.game_parts(session)?;
        let solution = game.reveal(role)?.clone();
        Ok(self.to_all(ServerMessage::Reveal { solution }))
    }

    /// Game state a (re)joining session needs to catch up.
    pub fn game_catch_up(&self) -> Vec<ServerMessage> {
        let Some(game) = &self.game else {
            return Vec::new();
        };
        let mut out = Vec::new();
        if let Some(h) = game.current_hint() {
            out.push(ServerMessage::Hint {
                index: game.hint_index(),
                text: h.text.clone(),
                prompts: h.prompts.clone(),
            });
        }
        if game.is_board_published() {
            out.push(ServerMessage::Board { drafts: game.board() });
        }
        if game.is_revealed() {
            out.push(ServerMessage::Reveal {
                solution: game.script().solution.clone(),
            });
        }
        out
    }

    pub fn final_snapshot(&self) -> Result<FinalSnapshot> {
        FinalSnapshot::compute(self.code.clone(), &self.setup, &self.state)
    }
}
