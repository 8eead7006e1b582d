//! Append-only journal and atomic snapshots.
//!
//! One entry per line: eight hex digits of CRC-32 over the JSON payload, a
//! space, the payload, a newline. Every entry carries a sequence number. A
//! snapshot records the last sequence folded into it, so replay skips
//! entries the snapshot already contains.

use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const JOURNAL_FILE: &str = "journal.log";
pub const SNAPSHOT_FILE: &str = "snapshot.json";

#[derive(Debug, Error)]
pub enum JournalError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("serialization: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{path}: corrupt snapshot: {message}")]
    BadSnapshot { path: PathBuf, message: String },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> JournalError + '_ {
    move |source| JournalError::Io { path: path.to_path_buf(), source }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Entry<T> {
    seq: u64,
    payload: T,
}

/// Why replay stopped before the end of the journal.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ReplayStop {
    /// The last line has no terminating newline: an interrupted write.
    Truncated { line: usize, offset: u64 },
    /// A complete line failed its checksum, did not parse, or broke the
    /// sequence.
    Corrupt { line: usize, offset: u64, reason: String },
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ReplayReport {
    /// Entries applied on top of the snapshot.
    pub applied: usize,
    /// Entries already contained in the snapshot.
    pub skipped: usize,
    pub stop: Option<ReplayStop>,
}

impl ReplayReport {
    pub fn is_clean(&self) -> bool {
        self.stop.is_none()
    }

    pub fn is_corrupt(&self) -> bool {
        matches!(self.stop, Some(ReplayStop::Corrupt { .. }))
    }
}

/// Entries recovered from a journal file, in order.
pub struct JournalContents<T> {
    pub entries: Vec<(u64, T)>,
    pub stop: Option<ReplayStop>,
    /// Byte length of the valid prefix.
    pub valid_len: u64,
}

fn encode_line<T: Serialize>(seq: u64, payload: &T) -> Result<Vec<u8>, JournalError> {
    let json = serde_json::to_vec(&Entry { seq, payload })?;
    let mut line = format!("{:08x} ", crc32fast::hash(&json)).into_bytes();
    line.extend_from_slice(&json);
    line.push(b'\n');
    Ok(line)
}

fn decode_line<T: DeserializeOwned>(line: &[u8]) -> Result<(u64, T), String> {
    if line.len() < 9 || line[8] != b' ' {
        return Err("missing checksum".into());
    }
    let crc = std::str::from_utf8(&line[..8])
        .ok()
        .and_then(|h| u32::from_str_radix(h, 16).ok())
        .ok_or("malformed checksum")?;
    let json = &line[9..];
    let actual = crc32fast::hash(json);
    if actual != crc {
        return Err(format!("checksum mismatch (stored {crc:08x}, computed {actual:08x})"));
    }
    let entry: Entry<T> = serde_json::from_slice(json).map_err(|e| e.to_string())?;
    Ok((entry.seq, entry.payload))
}

/// Reads every intact entry. Sequence numbers must increase by one.
pub fn read_journal<T: DeserializeOwned>(path: &Path) -> Result<JournalContents<T>, JournalError> {
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == io::ErrorKind::NotFound => {
            return Ok(JournalContents { entries: Vec::new(), stop: None, valid_len: 0 })
        }
        Err(e) => return Err(io_err(path)(e)),
    };
    let mut reader = BufReader::new(file);
    let mut entries: Vec<(u64, T)> = Vec::new();
    let mut offset = 0u64;
    let mut buf = Vec::new();
    let mut line_no = 0;
    loop {
        buf.clear();
        let n = reader.read_until(b'\n', &mut buf).map_err(io_err(path))?;
        if n == 0 {
            return Ok(JournalContents { entries, stop: None, valid_len: offset });
        }
        line_no += 1;
        if buf.last() != Some(&b'\n') {
            let stop = ReplayStop::Truncated { line: line_no, offset };
            return Ok(JournalContents { entries, stop: Some(stop), valid_len: offset });
        }
        let decoded = decode_line::<T>(&buf[..buf.len() - 1]).and_then(|(seq, payload)| match entries.last() {
            Some((prev, _)) if seq != prev + 1 => Err(format!("sequence {seq} follows {prev}")),
            _ => Ok((seq, payload)),
        });
        match decoded {
            Ok(entry) => entries.push(entry),
            Err(reason) => {
                let stop = ReplayStop::Corrupt { line: line_no, offset, reason };
                return Ok(JournalContents { entries, stop: Some(stop), valid_len: offset });
            }
        }
        offset += n as u64;
    }
}

/// Writer half of the journal. Each append is one `write` of a whole line.
pub struct Journal {
    path: PathBuf,
    file: File,
    next_seq: u64,
    sync: bool,
}

impl Journal {
    /// Opens for appending after `valid_len` bytes, dropping anything past
    /// it (a torn final line).
    pub fn open(path: &Path, valid_len: u64, next_seq: u64, sync: bool) -> Result<Self, JournalError> {
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(io_err(path))?;
        if file.metadata().map_err(io_err(path))?.len() != valid_len {
            file.set_len(valid_len).map_err(io_err(path))?;
        }
        Ok(Self { path: path.to_path_buf(), file, next_seq, sync })
    }

    pub fn next_seq(&self) -> u64 {
        self.next_seq
    }

    pub fn append<T: Serialize>(&mut self, payload: &T) -> Result<u64, JournalError> {
        let seq = self.next_seq;
        let line = encode_line(seq, payload)?;
        self.file.write_all(&line).map_err(io_err(&self.path))?;
        if self.sync {
            self.file.sync_data().map_err(io_err(&self.path))?;
        }
        self.next_seq += 1;
        Ok(seq)
    }

    pub fn flush(&mut self) -> Result<(), JournalError> {
        self.file.flush().map_err(io_err(&self.path))?;
        self.file.sync_all().map_err(io_err(&self.path))
    }

    /// Empties the file once a snapshot covers every entry.
    pub fn reset(&mut self) -> Result<(), JournalError> {
        self.file.set_len(0).map_err(io_err(&self.path))?;
        self.file.sync_all().map_err(io_err(&self.path))
    }
}

#[derive(Serialize, Deserialize)]
struct SnapshotFile<S> {
    /// Sequence of the last journal entry folded in; 0 when none.
    last_seq: u64,
    state: S,
}

pub fn read_snapshot<S: DeserializeOwned>(path: &Path) -> Result<Option<(u64, S)>, JournalError> {
    let bytes = match fs::read(path) {
        Ok(b) => b,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(None),
        Err(e) => return Err(io_err(path)(e)),
    };
    let file: SnapshotFile<S> = serde_json::from_slice(&bytes).map_err(|e| JournalError::BadSnapshot {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    Ok(Some((file.last_seq, file.state)))
}

/// Writes to a temporary sibling, syncs, then renames over the target.
pub fn write_snapshot<S: Serialize>(path: &Path, last_seq: u64, state: &S) -> Result<(), JournalError> {
    let tmp = path.with_extension("json.tmp");
    let bytes = serde_json::to_vec(&SnapshotFile { last_seq, state })?;
    {
        let mut f = File::create(&tmp).map_err(io_err(&tmp))?;
        f.write_all(&bytes).map_err(io_err(&tmp))?;
        f.sync_all().map_err(io_err(&tmp))?;
    }
    fs::rename(&tmp, path).map_err(io_err(path))?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        if let Ok(d) = File::open(dir) {
            let _ = d.sync_all();
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
    struct Op {
        n: u32,
    }

    fn write_ops(path: &Path, n: u32) {
        let mut j = Journal::open(path, 0, 1, false).unwrap();
        for i in 0..n {
            j.append(&Op { n: i }).unwrap();
        }
    }

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(JOURNAL_FILE);
        write_ops(&path, 5);
        let c = read_journal::<Op>(&path).unwrap();
        assert!(c.stop.is_none());
        assert_eq!(c.entries.iter().map(|(s, o)| (*s, o.n)).collect::<Vec<_>>(), vec![(1, 0), (2, 1), (3, 2), (4, 3), (5, 4)]);
        assert_eq!(c.valid_len, fs::metadata(&path).unwrap().len());
    }

    #[test]
    fn missing_file_is_empty() {
        let dir = tempfile::tempdir().unwrap();
        let c = read_journal::<Op>(&dir.path().join("nope")).unwrap();
        assert!(c.entries.is_empty() && c.stop.is_none() && c.valid_len == 0);
    }

    #[test]
    fn truncated_tail_is_reported_and_dropped_on_open() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(JOURNAL_FILE);
        write_ops(&path, 3);
        let full = fs::read(&path).unwrap();
        fs::write(&path, &full[..full.len() - 4]).unwrap();
        let c = read_journal::<Op>(&path).unwrap();
        assert_eq!(c.entries.len(), 2);
        assert!(matches!(c.stop, Some(ReplayStop::Truncated { line: 3, .. })));
        let mut j = Journal::open(&path, c.valid_len, 3, false).unwrap();
        j.append(&Op { n: 9 }).unwrap();
        let c = read_journal::<Op>(&path).unwrap();
        assert!(c.stop.is_none());
        assert_eq!(c.entries.last().unwrap(), &(3, Op { n: 9 }));
    }

    #[test]
    fn flipped_byte_stops_at_that_entry() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(JOURNAL_FILE);
        write_ops(&path, 4);
        let mut bytes = fs::read(&path).unwrap();
        let second = bytes.iter().position(|b| *b == b'\n').unwrap() + 1;
        let target = second + 20;
        bytes[target] ^= 0x01;
        fs::write(&path, &bytes).unwrap();
        let c = read_journal::<Op>(&path).unwrap();
        assert_eq!(c.entries.len(), 1);
        match c.stop {
            Some(ReplayStop::Corrupt { line, offset, .. }) => {
                assert_eq!(line, 2);
                assert_eq!(offset, second as u64);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn sequence_gap_is_corruption() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(JOURNAL_FILE);
        let mut bytes = encode_line(1, &Op { n: 0 }).unwrap();
        bytes.extend(encode_line(3, &Op { n: 1 }).unwrap());
        fs::write(&path, &bytes).unwrap();
        let c = read_journal::<Op>(&path).unwrap();
        assert_eq!(c.entries.len(), 1);
        assert!(matches!(c.stop, Some(ReplayStop::Corrupt { line: 2, .. })));
    }

    #[test]
    fn snapshot_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(SNAPSHOT_FILE);
        assert!(read_snapshot::<Op>(&path).unwrap().is_none());
        write_snapshot(&path, 7, &Op { n: 3 }).unwrap();
        assert_eq!(read_snapshot::<Op>(&path).unwrap(), Some((7, Op { n: 3 })));
        fs::write(&path, b"{").unwrap();
        assert!(matches!(read_snapshot::<Op>(&path), Err(JournalError::BadSnapshot { .. })));
    }
}
