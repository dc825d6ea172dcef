use std::collections::BTreeMap;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use super::log::{decode_log, encode_entry, LogError, SessionLogEntry};

/// Append-only persistence for session logs.
pub trait LogStore: Send + Sync {
    fn append(&self, session_id: &str, entry: &SessionLogEntry) -> Result<(), LogError>;
    fn load(&self, session_id: &str) -> Result<Vec<SessionLogEntry>, LogError>;
    fn session_ids(&self) -> Result<Vec<String>, LogError>;
}

/// Keeps log text in memory. Lost when the process exits.
#[derive(Debug, Default)]
pub struct MemoryStore {
    logs: Mutex<BTreeMap<String, String>>,
}

impl MemoryStore {
    pub fn new() -> Self {
        Self::default()
    }
}

impl LogStore for MemoryStore {
    fn append(&self, session_id: &str, entry: &SessionLogEntry) -> Result<(), LogError> {
        let mut logs = self.logs.lock().unwrap_or_else(|e| e.into_inner());
        let text = logs.entry(session_id.to_string()).or_default();
        text.push_str(&encode_entry(entry));
        text.push('\n');
        Ok(())
    }

    fn load(&self, session_id: &str) -> Result<Vec<SessionLogEntry>, LogError> {
        let logs = self.logs.lock().unwrap_or_else(|e| e.into_inner());
        logs.get(session_id).map_or(Ok(Vec::new()), |text| decode_log(text))
    }

    fn session_ids(&self) -> Result<Vec<String>, LogError> {
        Ok(self.logs.lock().unwrap_or_else(|e| e.into_inner()).keys().cloned().collect())
    }
}

/// One `<session_id>.log` file per session under a directory.
#[derive(Debug)]
pub struct FileStore {
    dir: PathBuf,
}

impl FileStore {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, LogError> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(FileStore { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_for(&self, session_id: &str) -> PathBuf {
        self.dir.join(format!("{session_id}.log"))
    }
}

impl LogStore for FileStore {
    fn append(&self, session_id: &str, entry: &SessionLogEntry) -> Result<(), LogError> {
        let mut line = encode_entry(entry);
        line.push('\n');
        let mut file = OpenOptions::new().create(true).append(true).open(self.path_for(session_id))?;
        file.write_all(line.as_bytes())?;
        Ok(())
    }

    fn load(&self, session_id: &str) -> Result<Vec<SessionLogEntry>, LogError> {
        match fs::read_to_string(self.path_for(session_id)) {
            Ok(text) => decode_log(&text),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Vec::new()),
            Err(e) => Err(e.into()),
        }
    }

    fn session_ids(&self) -> Result<Vec<String>, LogError> {
        let mut ids = Vec::new();
        for item in fs::read_dir(&self.dir)? {
            let path = item?.path();
            if path.extension().is_some_and(|e| e == "log") {
                if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                    ids.push(stem.to_string());
                }
            }
        }
        ids.sort();
        Ok(ids)
    }
}
