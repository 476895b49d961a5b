//! Append-only event logs on disk, one newline-delimited file per session.

use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use rsl_core::events::{parse_log, EventRecord};
use rsl_core::session::Session;
use rsl_core::SessionError;

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("persistence failure at {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("corrupt log {path}: {message}")]
    Corrupt { path: PathBuf, message: String },
    #[error("log {path} does not replay: {source}")]
    Replay { path: PathBuf, source: SessionError },
}

#[derive(Clone, Debug)]
pub struct EventStore {
    root: PathBuf,
}

impl EventStore {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(|source| StoreError::Io {
            path: root.clone(),
            source,
        })?;
        Ok(Self { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path_for(&self, session_id: &str) -> PathBuf {
        self.root.join(format!("{session_id}.ndjson"))
    }

    pub fn exists(&self, session_id: &str) -> bool {
        self.path_for(session_id).exists()
    }

    /// Appends records one line at a time, syncing after each.
    pub fn append(&self, session_id: &str, records: &[EventRecord]) -> Result<(), StoreError> {
        let path = self.path_for(session_id);
        let io_err = |source| StoreError::Io {
            path: path.clone(),
            source,
        };
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(io_err)?;
        for r in records {
            let mut line = r.to_line();
            line.push('\n');
            file.write_all(line.as_bytes()).map_err(io_err)?;
            file.sync_data().map_err(io_err)?;
        }
        Ok(())
    }

    pub fn load(&self, session_id: &str) -> Result<Vec<EventRecord>, StoreError> {
        read_log(&self.path_for(session_id))
    }

    /// Rebuilds one session. Derived events lost after the last durable record
    /// are regenerated and appended.
    pub fn recover(&self, session_id: &str) -> Result<Session, StoreError> {
        let path = self.path_for(session_id);
        let records = read_log(&path)?;
        let session = Session::replay(&records).map_err(|source| StoreError::Replay {
            path: path.clone(),
            source,
        })?;
        if records.len() < session.events.len() && records.iter().any(|r| !r.event.is_input()) {
            self.append(session_id, &session.events[records.len()..])?;
        }
        Ok(session)
    }

    /// Every session with a log under the root.
    pub fn recover_all(&self) -> Result<Vec<Session>, StoreError> {
        let entries = fs::read_dir(&self.root).map_err(|source| StoreError::Io {
            path: self.root.clone(),
            source,
        })?;
        let mut ids = Vec::new();
        for entry in entries {
            let path = entry
                .map_err(|source| StoreError::Io {
                    path: self.root.clone(),
                    source,
                })?
                .path();
            if path.extension().is_some_and(|e| e == "ndjson") {
                if let Some(stem) = path.file_stem() {
                    ids.push(stem.to_string_lossy().into_owned());
                }
            }
        }
        ids.sort();
        ids.iter().map(|id| self.recover(id)).collect()
    }
}

pub fn read_log(path: &Path) -> Result<Vec<EventRecord>, StoreError> {
    let text = fs::read_to_string(path).map_err(|source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_log(&text).map_err(|e| StoreError::Corrupt {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

pub fn write_file(path: &Path, records: &[EventRecord]) -> Result<(), StoreError> {
    let io_err = |source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut f = File::create(path).map_err(io_err)?;
    f.write_all(rsl_core::events::write_log(records).as_bytes())
        .map_err(io_err)?;
    f.sync_all().map_err(io_err)
}
