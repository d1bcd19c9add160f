use std::fs::{File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use log::warn;

use super::{CaseResult, CorpusError};

/// Append-only JSON Lines log of [`CaseResult`]s.
///
/// Appends from any thread are serialized through one file handle; each
/// record is written with a single `write_all` followed by `sync_data`.
#[derive(Debug)]
pub struct ResultStore {
    path: PathBuf,
    writer: Option<Mutex<File>>,
}

/// Outcome of reading a results log.
#[derive(Debug, Clone, Default)]
pub struct Replay {
    pub results: Vec<CaseResult>,
    /// A trailing partial record was found and ignored.
    pub dropped_torn_tail: bool,
    /// Interior lines that failed to parse and were skipped.
    pub skipped_lines: usize,
    /// Byte length of the prefix holding only complete records.
    pub valid_len: u64,
}

impl ResultStore {
    /// Opens `path` for appending, creating it (and its parent) if needed.
    ///
    /// A torn trailing record left by a crash is cut off so the next append
    /// starts on a fresh line.
    pub fn open(path: impl Into<PathBuf>) -> Result<Self, CorpusError> {
        let path = path.into();
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent).map_err(|e| CorpusError::io(parent, e))?;
        }
        if path.exists() {
            let replay = replay(&path)?;
            let len = std::fs::metadata(&path)
                .map_err(|e| CorpusError::io(&path, e))?
                .len();
            if replay.valid_len != len {
                let f = OpenOptions::new()
                    .write(true)
                    .open(&path)
                    .map_err(|e| CorpusError::io(&path, e))?;
                f.set_len(replay.valid_len)
                    .map_err(|e| CorpusError::io(&path, e))?;
            }
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| CorpusError::io(&path, e))?;
        Ok(Self {
            path,
            writer: Some(Mutex::new(file)),
        })
    }

    /// Opens an existing log for replay only; appends fail.
    pub fn open_read_only(path: impl Into<PathBuf>) -> Result<Self, CorpusError> {
        let path = path.into();
        File::open(&path).map_err(|e| CorpusError::io(&path, e))?;
        Ok(Self { path, writer: None })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&self, result: &CaseResult) -> Result<(), CorpusError> {
        let Some(writer) = &self.writer else {
            return Err(CorpusError::io(
                &self.path,
                io::Error::new(io::ErrorKind::PermissionDenied, "store opened read-only"),
            ));
        };
        let mut line = serde_json::to_string(result)?;
        line.push('\n');
        let mut file = writer.lock().unwrap_or_else(|p| p.into_inner());
        file.write_all(line.as_bytes())
            .and_then(|()| file.sync_data())
            .map_err(|e| CorpusError::io(&self.path, e))
    }

    pub fn replay(&self) -> Result<Replay, CorpusError> {
        replay(&self.path)
    }
}

/// Parses a results log.
///
/// A trailing unparsable or unterminated line is treated as torn and dropped.
/// One unparsable interior line is skipped with a warning; more than one
/// makes the store corrupt.
pub fn replay(path: &Path) -> Result<Replay, CorpusError> {
    let text = match std::fs::read(path) {
        Ok(bytes) => bytes,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(Replay::default()),
        Err(e) => return Err(CorpusError::io(path, e)),
    };

    let mut out = Replay::default();
    let mut offset = 0usize;
    let mut bad_interior = 0usize;
    let segments: Vec<&[u8]> = text.split_inclusive(|&b| b == b'\n').collect();
    let count = segments.len();
    for (i, seg) in segments.into_iter().enumerate() {
        let is_last = i + 1 == count;
        let terminated = seg.ends_with(b"\n");
        let body = seg.strip_suffix(b"\n").unwrap_or(seg);
        offset += seg.len();
        if body.iter().all(u8::is_ascii_whitespace) {
            if terminated {
                out.valid_len = offset as u64;
            }
            continue;
        }
        match serde_json::from_slice::<CaseResult>(body) {
            Ok(r) if terminated => {
                out.results.push(r);
                out.valid_len = offset as u64;
            }
            Ok(_) | Err(_) if is_last => {
                warn!("{}: dropping torn trailing record", path.display());
                out.dropped_torn_tail = true;
            }
            Ok(_) => unreachable!("only the last segment can be unterminated"),
            Err(e) => {
                warn!("{}: skipping unparsable line {}: {e}", path.display(), i + 1);
                bad_interior += 1;
                out.valid_len = offset as u64;
            }
        }
    }
    if bad_interior > 1 {
        return Err(CorpusError::CorruptStore {
            path: path.to_path_buf(),
            bad_lines: bad_interior,
        });
    }
    out.skipped_lines = bad_interior;
    Ok(out)
}
