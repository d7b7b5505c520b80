//! The classroom server: room lifecycle, device pairing, ingestion,
//! throttled broadcast ticks, durable logs and replay.

pub mod clock;
pub mod config;
pub mod hub;
pub mod log;
pub mod protocol;
pub mod room;
pub mod server;
pub mod snapshot;

pub use clock::{Clock, ManualClock, SystemClock};
pub use config::{sample_manifest, RoomConfig, RoomMode, RoomSetup};
pub use hub::{ConnId, Envelope, Hub};
pub use log::{load_log, read_log, LogHeader, LogWriter, RoomLog};
pub use protocol::{parse_client, parse_server, ClientMessage, ServerMessage, SessionId};
pub use room::{Outbound, Room, SessionInfo};
pub use snapshot::{replay, replay_file, FinalSnapshot, RoomView};
