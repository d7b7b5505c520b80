//! Transport-independent server core: rooms, connections and message
//! dispatch. The websocket server, the simulator and the C API all drive a
//! [`Hub`] with text frames and forward the frames it returns.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{Role, RoomCode};
use crate::service::clock::Clock;
use crate::service::config::RoomSetup;
use crate::service::log::{log_path, LogWriter};
use crate::service::protocol::{parse_client, ClientMessage, ServerMessage, SessionId, Welcome};
use crate::service::room::{Outbound, Room};
use crate::{Error, Result};

/// Handle of one client connection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ConnId(pub u64);

/// A serialized frame for one connection.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Envelope {
    pub conn: ConnId,
    pub text: String,
}

#[derive(Debug, Default)]
struct Conn {
    binding: Option<(RoomCode, SessionId)>,
}

const CODE_ALPHABET: &[u8] = b"ABCDEFGHJKLMNPQRSTUVWXYZ23456789";

pub struct Hub {
    clock: Arc<dyn Clock>,
    rng: ChaCha8Rng,
    data_dir: Option<PathBuf>,
    rooms: BTreeMap<RoomCode, Room>,
    conns: BTreeMap<ConnId, Conn>,
    next_conn: u64,
}

impl Hub {
    /// `seed` drives room codes, session tokens and pairing codes. With a
    /// `data_dir`, each room logs to `<data_dir>/<CODE>.log`.
    pub fn new(clock: Arc<dyn Clock>, seed: u64, data_dir: Option<PathBuf>) -> Self {
        Self {
            clock,
            rng: ChaCha8Rng::seed_from_u64(seed),
            data_dir,
            rooms: BTreeMap::new(),
            conns: BTreeMap::new(),
            next_conn: 1,
        }
    }

    pub fn now_ms(&self) -> u64 {
        self.clock.now_ms()
    }

    /// Creates a room under a fresh random code.
    pub fn create_room(&mut self, setup: RoomSetup) -> Result<RoomCode> {
        let code = loop {
            let raw: String = (0..6)
                .map(|_| CODE_ALPHABET[self.rng.random_range(0..CODE_ALPHABET.len())] as char)
                .collect();
            let code = RoomCode::new(raw)?;
            let on_disk = self.data_dir.as_ref().is_some_and(|d| log_path(d, &code).exists());
            if !self.rooms.contains_key(&code) && !on_disk {
                break code;
            }
        };
        self.create_room_with_code(code.clone(), setup)?;
        Ok(code)
    }

    /// Creates a room under a caller-chosen code.
    pub fn create_room_with_code(&mut self, code: RoomCode, setup: RoomSetup) -> Result<()> {
        if self.rooms.contains_key(&code) {
            return Err(Error::Configuration(format!("room {code} already exists")));
        }
        let writer = match &self.data_dir {
            Some(dir) => Some(LogWriter::create(&log_path(dir, &code), &code)?),
            None => None,
        };
        let now = self.now_ms();
        self.rooms.insert(code.clone(), Room::new(code, setup, writer, now));
        Ok(())
    }

    pub fn room(&self, code: &RoomCode) -> Option<&Room> {
        self.rooms.get(code)
    }

    pub fn rooms(&self) -> impl Iterator<Item = &Room> {
        self.rooms.values()
    }

    pub fn connect(&mut self) -> ConnId {
        let id = ConnId(self.next_conn);
        self.next_conn += 1;
        self.conns.insert(id, Conn::default());
        id
    }

    /// Forgets a connection. Its session stays in the room so the client
    /// can resume with `hello { session }`.
    pub fn disconnect(&mut self, conn: ConnId) {
        self.conns.remove(&conn);
    }

    pub fn is_connected(&self, conn: ConnId) -> bool {
        self.conns.contains_key(&conn)
    }

    /// Handles one inbound frame. Failures become an `error` frame to the
    /// sender; the connection is never dropped.
    pub fn handle_text(&mut self, conn: ConnId, text: &str) -> Vec<Envelope> {
        if !self.conns.contains_key(&conn) {
            return Vec::new();
        }
        let result = match parse_client(text) {
            Ok(msg) => self.handle(conn, msg),
            Err(e) => Ok(vec![Envelope {
                conn,
                text: e.to_message().to_json(),
            }]),
        };
        result.unwrap_or_else(|e| {
            vec![Envelope {
                conn,
                text: ServerMessage::from_error(&e).to_json(),
            }]
        })
    }

    fn binding(&self, conn: ConnId) -> Result<(RoomCode, SessionId)> {
        self.conns
            .get(&conn)
            .and_then(|c| c.binding.clone())
            .ok_or_else(|| Error::Session("send hello first".into()))
    }

    fn room_mut(&mut self, code: &RoomCode) -> Result<&mut Room> {
        self.rooms.get_mut(code).ok_or_else(|| Error::UnknownReference {
            kind: "room",
            id: code.to_string(),
        })
    }

    fn session_token(&mut self) -> SessionId {
        SessionId(format!("{:016x}", self.rng.random::<u64>()))
    }

    pub fn handle(&mut self, conn: ConnId, msg: ClientMessage) -> Result<Vec<Envelope>> {
        let now = self.now_ms();
        let reply = |m: ServerMessage| Envelope { conn, text: m.to_json() };
        match msg {
            ClientMessage::Hello { room, role, nickname, session } => {
                if self.conns.get(&conn).is_some_and(|c| c.binding.is_some()) {
                    return Err(Error::Session("already joined".into()));
                }
                let token = self.session_token();
                let mut pairing_rng = ChaCha8Rng::seed_from_u64(self.rng.random());
                let r = self.room_mut(&room)?;
                let info = match session {
                    Some(existing) => {
                        let info = r
                            .session(&existing)
                            .cloned()
                            .ok_or_else(|| Error::Session(format!("unknown session {existing}")))?;
                        if info.role != role {
                            return Err(Error::Role(format!("session {existing} is not a {role:?} session")));
                        }
                        info
                    }
                    None => r.join(token, role, nickname.as_deref())?,
                };
                let mut out = Vec::new();
                let pairing_code = if role == Role::Student && info.pairing_code.is_none() {
                    Some(r.issue_pairing_code(&info.session_id, now, &mut pairing_rng)?.0)
                } else {
                    info.pairing_code.clone()
                };
                out.push(reply(ServerMessage::Welcome(Welcome {
                    session: info.session_id.clone(),
                    role,
                    user: info.user.clone(),
                    room: room.clone(),
                    mode: r.mode(),
                    pairing_code,
                })));
                if let Some(user) = &info.user {
                    if r.mode() == crate::service::config::RoomMode::Feed {
                        out.push(reply(r.feed_for(user)?));
                    }
                }
                out.extend(r.game_catch_up().into_iter().map(reply));
                if let Some(c) = self.conns.get_mut(&conn) {
                    c.binding = Some((room, info.session_id));
                }
                Ok(out)
            }
            ClientMessage::Pair { code } => {
                let (room, sid) = self.binding(conn)?;
                let student = self.room_mut(&room)?.pair(&sid, &code, now)?;
                Ok(vec![reply(ServerMessage::Paired {
                    student: student.user.expect("pairing targets students"),
                })])
            }
            ClientMessage::NewPairingCode => {
                let (room, sid) = self.binding(conn)?;
                let mut pairing_rng = ChaCha8Rng::seed_from_u64(self.rng.random());
                let (code, expires_ts) = self.room_mut(&room)?.issue_pairing_code(&sid, now, &mut pairing_rng)?;
                Ok(vec![reply(ServerMessage::PairingCode { code, expires_ts })])
            }
            ClientMessage::Action { action, nonce, ts_client } => {
                let (room, sid) = self.binding(conn)?;
                let event = self
                    .room_mut(&room)?
                    .ingest(&sid, action, nonce.as_deref(), ts_client, now)?;
                Ok(vec![reply(ServerMessage::Ack { event, nonce })])
            }
            ClientMessage::AdvanceHint => self.game_call(conn, |r, s| r.advance_hint(s)),
            ClientMessage::DraftSubmit { draft } => self.game_call(conn, |r, s| r.submit_draft(s, draft)),
            ClientMessage::PublishBoard => self.game_call(conn, |r, s| r.publish_board(s)),
            ClientMessage::Reveal => self.game_call(conn, |r, s| r.reveal(s)),
        }
    }

    fn game_call(
        &mut self,
        conn: ConnId,
        f: impl FnOnce(&mut Room, &SessionId) -> Result<Vec<Outbound>>,
    ) -> Result<Vec<Envelope>> {
        let (room, sid) = self.binding(conn)?;
        let out = f(self.room_mut(&room)?, &sid)?;
        Ok(self.address(&room, out))
    }

    /// Turns session-addressed messages into frames for every connection
    /// currently bound to that session.
    fn address(&self, room: &RoomCode, out: Vec<Outbound>) -> Vec<Envelope> {
        let mut by_session: BTreeMap<&SessionId, Vec<ConnId>> = BTreeMap::new();
        for (id, c) in &self.conns {
            if let Some((r, s)) = &c.binding {
                if r == room {
                    by_session.entry(s).or_default().push(*id);
                }
            }
        }
        let mut frames = Vec::new();
        for o in out {
            if let Some(conns) = by_session.get(&o.to) {
                let text = o.message.to_json();
                frames.extend(conns.iter().map(|&conn| Envelope { conn, text: text.clone() }));
            }
        }
        frames
    }

    /// Runs due broadcast ticks in every room.
    pub fn tick(&mut self) -> Vec<Envelope> {
        let now = self.now_ms();
        let mut frames = Vec::new();
        let codes: Vec<RoomCode> = self.rooms.keys().cloned().collect();
        for code in codes {
            let out = match self.rooms.get_mut(&code).map(|r| r.tick(now)) {
                Some(Ok(out)) => out,
                Some(Err(e)) => {
                    tracing::error!(room = %code, error = %e, "tick failed");
                    continue;
                }
                None => continue,
            };
            frames.extend(self.address(&code, out));
        }
        frames
    }
}
