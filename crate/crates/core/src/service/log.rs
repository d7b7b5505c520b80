//! Append-only room log: a header line followed by one event per line.
//!
//! ```text
//! {"format":"feedlab-log","version":1,"room":"ABC123"}
//! {"seq":1,"room":"ABC123","user":"fox","ts_server":1000,"kind":"like","image":"img001"}
//! ```

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::model::{EventRecord, RoomCode};
use crate::{Error, Result};

pub const LOG_FORMAT: &str = "feedlab-log";
pub const LOG_VERSION: u32 = 1;
/// Environment variable naming the directory that holds room logs.
pub const DATA_DIR_ENV: &str = "FEEDLAB_DATA_DIR";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogHeader {
    pub format: String,
    pub version: u32,
    pub room: RoomCode,
}

impl LogHeader {
    pub fn new(room: RoomCode) -> Self {
        Self {
            format: LOG_FORMAT.into(),
            version: LOG_VERSION,
            room,
        }
    }
}

/// Log storage root: `$FEEDLAB_DATA_DIR`, else `./feedlab-data`.
pub fn data_dir() -> PathBuf {
    std::env::var_os(DATA_DIR_ENV).map_or_else(|| PathBuf::from("feedlab-data"), PathBuf::from)
}

pub fn log_path(data_dir: &Path, room: &RoomCode) -> PathBuf {
    data_dir.join(format!("{room}.log"))
}

/// Durable log writer. Every append is flushed and synced before it
/// returns, so an acknowledged event is always on disk.
#[derive(Debug)]
pub struct LogWriter {
    file: File,
    path: PathBuf,
}

impl LogWriter {
    /// Creates a new log file. An existing file is never overwritten.
    pub fn create(path: &Path, room: &RoomCode) -> Result<Self> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        let mut file = OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        let header = serde_json::to_string(&LogHeader::new(room.clone()))
            .expect("header always serializes");
        writeln!(file, "{header}")?;
        file.sync_all()?;
        Ok(Self {
            file,
            path: path.to_path_buf(),
        })
    }

    pub fn append(&mut self, ev: &EventRecord) -> Result<()> {
        let mut line = ev.to_log_line();
        line.push('\n');
        self.file.write_all(line.as_bytes())?;
        self.file.sync_data()?;
        Ok(())
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

/// A parsed, sequence-checked log.
#[derive(Debug, Clone, PartialEq)]
pub struct RoomLog {
    pub header: LogHeader,
    pub events: Vec<EventRecord>,
}

/// Parses a log. Line numbers in errors are 1-based and count the header.
/// Sequence numbers must run 1, 2, 3, ... without gaps.
pub fn read_log(reader: impl BufRead) -> Result<RoomLog> {
    let mut lines = reader.lines().enumerate();
    let header: LogHeader = match lines.next() {
        Some((_, line)) => serde_json::from_str(&line?).map_err(|e| Error::Parse {
            line: 1,
            message: format!("bad header: {e}"),
        })?,
        None => {
            return Err(Error::Parse {
                line: 1,
                message: "missing header".into(),
            })
        }
    };
    if header.format != LOG_FORMAT || header.version != LOG_VERSION {
        return Err(Error::Parse {
            line: 1,
            message: format!("unsupported log {} v{}", header.format, header.version),
        });
    }

    let mut events = Vec::new();
    for (idx, line) in lines {
        let line = line?;
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let ev = EventRecord::from_log_line(&line).map_err(|e| Error::Parse {
            line: lineno,
            message: e.to_string(),
        })?;
        let expected = events.len() as u64 + 1;
        if ev.seq != expected {
            return Err(Error::Sequence { expected, got: ev.seq });
        }
        if ev.room != header.room {
            return Err(Error::Parse {
                line: lineno,
                message: format!("event for room {} in log of {}", ev.room, header.room),
            });
        }
        events.push(ev);
    }
    Ok(RoomLog { header, events })
}

pub fn load_log(path: &Path) -> Result<RoomLog> {
    let file = File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    read_log(BufReader::new(file))
}
