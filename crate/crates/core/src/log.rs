//! Line-delimited, hash-chained event log.
//!
//! Layout (UTF-8, every line terminated by `\n`):
//!
//! ```text
//! <header json>\t<digest_0 hex>
//! <record json>\t<digest_1 hex>
//! ...
//! ```
//!
//! `digest_0 = SHA-256(header json)`, `digest_n = SHA-256(digest_{n-1} || record json)`
//! where `digest_{n-1}` is the raw 32-byte value. JSON is serde_json's compact
//! form, which never contains a literal tab. A missing final newline, a digest
//! mismatch or a sequence gap makes the whole log unreadable.

use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::event::EventRecord;
use crate::ids::HASH_ALGORITHM;

pub const LOG_FORMAT: &str = "chainstory-events";
pub const LOG_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogHeader {
    pub format: String,
    pub version: u32,
    pub hash: String,
}

impl Default for LogHeader {
    fn default() -> Self {
        Self {
            format: LOG_FORMAT.to_owned(),
            version: LOG_VERSION,
            hash: HASH_ALGORITHM.to_owned(),
        }
    }
}

type Digest32 = [u8; 32];

fn chain_digest(prev: Option<&Digest32>, json: &[u8]) -> Digest32 {
    let mut h = Sha256::new();
    if let Some(prev) = prev {
        h.update(prev);
    }
    h.update(json);
    h.finalize().into()
}

/// Anything records are committed to.
pub trait EventSink: Send {
    fn append(&mut self, rec: &EventRecord) -> Result<()>;
}

/// A byte sink that can be made durable.
pub trait SyncWrite: Write + Send {
    fn sync(&mut self) -> io::Result<()>;
}

impl SyncWrite for File {
    fn sync(&mut self) -> io::Result<()> {
        self.sync_data()
    }
}

impl SyncWrite for Vec<u8> {
    fn sync(&mut self) -> io::Result<()> {
        Ok(())
    }
}

pub struct LogWriter<W: SyncWrite> {
    out: W,
    prev: Digest32,
    next_seq: u64,
}

impl<W: SyncWrite> LogWriter<W> {
    /// Starts a new log, writing the header line.
    pub fn create(mut out: W) -> Result<Self> {
        let json = serde_json::to_string(&LogHeader::default()).expect("header serializes");
        let digest = chain_digest(None, json.as_bytes());
        out.write_all(format!("{json}\t{}\n", hex::encode(digest)).as_bytes())?;
        out.flush()?;
        out.sync()?;
        Ok(Self {
            out,
            prev: digest,
            next_seq: 1,
        })
    }

    fn resume(out: W, tail: &LogTail) -> Self {
        Self {
            out,
            prev: tail.digest,
            next_seq: tail.next_seq,
        }
    }

    pub fn next_seq(&self) -> u64 {
        self.next_seq
    }

    pub fn get_ref(&self) -> &W {
        &self.out
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

impl<W: SyncWrite> EventSink for LogWriter<W> {
    fn append(&mut self, rec: &EventRecord) -> Result<()> {
        if rec.seq != self.next_seq {
            return Err(Error::InvalidEvent(format!(
                "append of seq {} where {} was expected",
                rec.seq, self.next_seq
            )));
        }
        let json = serde_json::to_string(rec).expect("event serializes");
        let digest = chain_digest(Some(&self.prev), json.as_bytes());
        // one write per record
        let line = format!("{json}\t{}\n", hex::encode(digest));
        self.out.write_all(line.as_bytes())?;
        self.out.flush()?;
        self.out.sync()?;
        self.prev = digest;
        self.next_seq += 1;
        Ok(())
    }
}

impl<S: EventSink> EventSink for std::sync::Arc<std::sync::Mutex<S>> {
    fn append(&mut self, rec: &EventRecord) -> Result<()> {
        self.lock().expect("sink lock").append(rec)
    }
}

/// In-memory sink, for tests and memory-only stores.
impl EventSink for Vec<EventRecord> {
    fn append(&mut self, rec: &EventRecord) -> Result<()> {
        self.push(rec.clone());
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
struct LogTail {
    digest: Digest32,
    next_seq: u64,
}

/// A verified log.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LogContents {
    pub header: LogHeader,
    pub records: Vec<EventRecord>,
    tail: LogTail,
}

fn split_line(raw: &str, line_no: usize) -> Result<(&str, Digest32)> {
    let (json, hex_digest) = raw
        .rsplit_once('\t')
        .ok_or_else(|| Error::corrupt(line_no, "missing checksum field"))?;
    let mut digest = [0u8; 32];
    hex::decode_to_slice(hex_digest, &mut digest).map_err(|_| Error::corrupt(line_no, "malformed checksum"))?;
    Ok((json, digest))
}

/// Reads and verifies a complete log: header, checksums, hash chain and
/// gapless sequence numbers. Semantic validity is checked by replay.
pub fn read_log(reader: impl BufRead) -> Result<LogContents> {
    let mut header: Option<LogHeader> = None;
    let mut records = Vec::new();
    let mut prev: Option<Digest32> = None;
    let mut reader = reader;
    let mut buf = String::new();
    let mut line_no = 0;
    loop {
        buf.clear();
        if reader.read_line(&mut buf)? == 0 {
            break;
        }
        line_no += 1;
        let raw = buf
            .strip_suffix('\n')
            .ok_or_else(|| Error::corrupt(line_no, "truncated line (no terminating newline)"))?;
        let (json, digest) = split_line(raw, line_no)?;
        if chain_digest(prev.as_ref(), json.as_bytes()) != digest {
            return Err(Error::corrupt(line_no, "checksum mismatch"));
        }
        prev = Some(digest);
        if header.is_none() {
            let h: LogHeader =
                serde_json::from_str(json).map_err(|e| Error::corrupt(line_no, format!("bad header: {e}")))?;
            if h.format != LOG_FORMAT || h.version != LOG_VERSION || h.hash != HASH_ALGORITHM {
                return Err(Error::corrupt(line_no, format!("unsupported header {json}")));
            }
            header = Some(h);
            continue;
        }
        let rec: EventRecord =
            serde_json::from_str(json).map_err(|e| Error::corrupt(line_no, format!("bad record: {e}")))?;
        let expected = records.len() as u64 + 1;
        if rec.seq != expected {
            return Err(Error::corrupt(
                line_no,
                format!("sequence gap: expected {expected}, found {}", rec.seq),
            ));
        }
        records.push(rec);
    }
    let header = header.ok_or_else(|| Error::corrupt(0, "missing header"))?;
    let tail = LogTail {
        digest: prev.expect("header digest"),
        next_seq: records.len() as u64 + 1,
    };
    Ok(LogContents { header, records, tail })
}

/// Opens the log at `path`, creating it when absent or empty, and returns the
/// verified records plus a writer positioned after them.
pub fn open_log_file(path: &Path) -> Result<(Vec<EventRecord>, LogWriter<File>)> {
    let exists = path.metadata().map(|m| m.len() > 0).unwrap_or(false);
    if !exists {
        let file = OpenOptions::new().create(true).truncate(true).write(true).open(path)?;
        if let Some(dir) = path.parent() {
            // make the new directory entry durable
            if let Ok(d) = File::open(dir) {
                let _ = d.sync_all();
            }
        }
        return Ok((Vec::new(), LogWriter::create(file)?));
    }
    let contents = read_log(BufReader::new(File::open(path)?))?;
    let file = OpenOptions::new().append(true).open(path)?;
    Ok((contents.records, LogWriter::resume(file, &contents.tail)))
}
