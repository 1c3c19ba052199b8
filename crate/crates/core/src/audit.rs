//! Append-only, SHA-256 hash-chained event log and provenance tracing.
//!
//! # Log file format
//!
//! The file is a sequence of frames. Each frame is a 4-byte big-endian
//! length `n` followed by `n` bytes holding one canonical `LogEntry`:
//!
//! ```text
//! LogEntry  = record(0x41) { u64 seq, bytes payload, bytes[32] prev_hash, bytes[32] entry_hash }
//! entry_hash = SHA-256( record(0x42) { u64 seq, bytes payload, bytes[32] prev_hash } )
//! ```
//!
//! Sequence numbers start at 1 and increase by one; entry 1 carries an
//! all-zero `prev_hash`. The payload is a canonical `Event`.

use std::fs::{File, OpenOptions};
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::capability::Token;
use crate::error::{Error, Result};
use crate::governance::encoding::tag;
use crate::governance::{CanonicalDecode, CanonicalEncode, Decoder, Encoder, EncodingError, OwnerRecord};
use crate::ledger::ActionRecord;
use crate::registry::AcorpRecord;

pub type Hash32 = [u8; 32];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LogEntry {
    pub seq: u64,
    pub payload: Vec<u8>,
    pub prev_hash: Hash32,
    pub entry_hash: Hash32,
}

impl LogEntry {
    pub fn compute_hash(seq: u64, payload: &[u8], prev_hash: &Hash32) -> Hash32 {
        let mut enc = Encoder::new();
        enc.record(tag::LOG_HASH_INPUT, |e| {
            e.u64(seq);
            e.bytes(payload);
            e.bytes(prev_hash);
        });
        Sha256::digest(enc.finish()).into()
    }

    pub fn new(seq: u64, payload: Vec<u8>, prev_hash: Hash32) -> Self {
        let entry_hash = Self::compute_hash(seq, &payload, &prev_hash);
        Self {
            seq,
            payload,
            prev_hash,
            entry_hash,
        }
    }

    pub fn hash_is_valid(&self) -> bool {
        Self::compute_hash(self.seq, &self.payload, &self.prev_hash) == self.entry_hash
    }

    pub fn frame(&self) -> Vec<u8> {
        let body = self.canonical_bytes();
        let mut out = Vec::with_capacity(body.len() + 4);
        out.extend_from_slice(&(body.len() as u32).to_be_bytes());
        out.extend_from_slice(&body);
        out
    }
}

impl CanonicalEncode for LogEntry {
    fn encode_into(&self, enc: &mut Encoder) {
        enc.record(tag::LOG_ENTRY, |e| {
            e.u64(self.seq);
            e.bytes(&self.payload);
            e.bytes(&self.prev_hash);
            e.bytes(&self.entry_hash);
        });
    }
}

impl CanonicalDecode for LogEntry {
    fn decode_from(dec: &mut Decoder<'_>) -> Result<Self, EncodingError> {
        dec.record(tag::LOG_ENTRY, |d| {
            Ok(Self {
                seq: d.u64()?,
                payload: d.bytes()?,
                prev_hash: d.fixed()?,
                entry_hash: d.fixed()?,
            })
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntegrityReport {
    pub intact: bool,
    /// Sequence number of the first entry that fails to verify.
    pub first_break: Option<u64>,
    /// Sequence number of the last entry that verified. Truncating a suffix
    /// of the log is only visible by comparing this with an expected value.
    pub last_seq: u64,
}

impl CanonicalEncode for IntegrityReport {
    fn encode_into(&self, enc: &mut Encoder) {
        enc.record(tag::INTEGRITY_REPORT, |e| {
            e.bool(self.intact);
            e.option(self.first_break.as_ref());
            e.u64(self.last_seq);
        });
    }
}

impl CanonicalDecode for IntegrityReport {
    fn decode_from(dec: &mut Decoder<'_>) -> Result<Self, EncodingError> {
        dec.record(tag::INTEGRITY_REPORT, |d| {
            Ok(Self {
                intact: d.bool()?,
                first_break: d.option()?,
                last_seq: d.u64()?,
            })
        })
    }
}

/// Checks sequence continuity, back-links and entry hashes.
pub fn check_chain(entries: &[LogEntry]) -> IntegrityReport {
    let mut prev = [0u8; 32];
    for (i, entry) in entries.iter().enumerate() {
        let expected_seq = i as u64 + 1;
        if entry.seq != expected_seq || entry.prev_hash != prev || !entry.hash_is_valid() {
            return IntegrityReport {
                intact: false,
                first_break: Some(expected_seq),
                last_seq: expected_seq - 1,
            };
        }
        prev = entry.entry_hash;
    }
    IntegrityReport {
        intact: true,
        first_break: None,
        last_seq: entries.len() as u64,
    }
}

/// Parses framed log bytes, stopping at the first frame that cannot be
/// decoded, then checks the chain. Returns the parsed prefix and a report
/// covering the whole input.
pub fn scan_log_bytes(bytes: &[u8]) -> (Vec<LogEntry>, IntegrityReport) {
    let mut entries = Vec::new();
    let mut pos = 0usize;
    let mut framing_ok = true;
    while pos < bytes.len() {
        let Some(len_bytes) = bytes.get(pos..pos + 4) else {
            framing_ok = false;
            break;
        };
        let len = u32::from_be_bytes(len_bytes.try_into().unwrap()) as usize;
        let Some(body) = bytes.get(pos + 4..pos + 4 + len) else {
            framing_ok = false;
            break;
        };
        match LogEntry::from_canonical_bytes(body) {
            Ok(entry) => entries.push(entry),
            Err(_) => {
                framing_ok = false;
                break;
            }
        }
        pos += 4 + len;
    }
    let mut report = check_chain(&entries);
    if report.intact && !framing_ok {
        let broken = entries.len() as u64 + 1;
        report = IntegrityReport {
            intact: false,
            first_break: Some(broken),
            last_seq: broken - 1,
        };
    }
    if let Some(first) = report.first_break {
        entries.truncate(first as usize - 1);
    }
    (entries, report)
}

pub fn verify_log_file(path: &Path) -> std::io::Result<IntegrityReport> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    Ok(scan_log_bytes(&bytes).1)
}

#[derive(Debug)]
struct LogFile {
    path: PathBuf,
    file: File,
    fsync: bool,
}

/// The in-memory log, optionally mirrored to a file. An append is durable
/// (written and, with `fsync`, synced) before it returns.
#[derive(Debug, Default)]
pub struct AuditLog {
    entries: Vec<LogEntry>,
    sink: Option<LogFile>,
}

impl AuditLog {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Opens (or creates) a log file. Refuses files whose chain is broken.
    pub fn open(path: &Path, fsync: bool) -> Result<Self> {
        let mut bytes = Vec::new();
        if path.exists() {
            File::open(path)
                .and_then(|mut f| f.read_to_end(&mut bytes))
                .map_err(|e| Error::StorageFailure(e.to_string()))?;
        }
        let (entries, report) = scan_log_bytes(&bytes);
        if !report.intact {
            return Err(Error::StorageFailure(format!(
                "log {} broken at entry {}",
                path.display(),
                report.first_break.unwrap_or(0)
            )));
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| Error::StorageFailure(e.to_string()))?;
        Ok(Self {
            entries,
            sink: Some(LogFile {
                path: path.to_owned(),
                file,
                fsync,
            }),
        })
    }

    pub fn path(&self) -> Option<&Path> {
        self.sink.as_ref().map(|s| s.path.as_path())
    }

    pub fn entries(&self) -> &[LogEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn next_seq(&self) -> u64 {
        self.entries.len() as u64 + 1
    }

    pub fn head_hash(&self) -> Hash32 {
        self.entries.last().map(|e| e.entry_hash).unwrap_or([0; 32])
    }

    pub fn append(&mut self, payload: Vec<u8>) -> Result<&LogEntry> {
        let entry = LogEntry::new(self.next_seq(), payload, self.head_hash());
        if let Some(sink) = &mut self.sink {
            let frame = entry.frame();
            sink.file
                .write_all(&frame)
                .and_then(|_| sink.file.flush())
                .and_then(|_| if sink.fsync { sink.file.sync_data() } else { Ok(()) })
                .map_err(|e| Error::StorageFailure(e.to_string()))?;
        }
        self.entries.push(entry);
        Ok(self.entries.last().unwrap())
    }

    pub fn verify_log_integrity(&self) -> IntegrityReport {
        check_chain(&self.entries)
    }

    /// The whole log in file format.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.entries.iter().flat_map(|e| e.frame()).collect()
    }
}

/// The thin-identity answer for one action: who acted, under which chain of
/// authority, for which A-corp, owned by whom at the time.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProvenanceChain {
    pub action: ActionRecord,
    /// Acting token first, master last. Empty for sovereign sanctions.
    pub tokens: Vec<Token>,
    pub acorp: AcorpRecord,
    pub owner: OwnerRecord,
}

impl ProvenanceChain {
    pub fn master(&self) -> Option<&Token> {
        self.tokens.last()
    }
}

impl CanonicalEncode for ProvenanceChain {
    fn encode_into(&self, enc: &mut Encoder) {
        enc.record(tag::PROVENANCE_CHAIN, |e| {
            e.value(&self.action);
            e.list(self.tokens.iter());
            e.value(&self.acorp);
            e.value(&self.owner);
        });
    }
}

impl CanonicalDecode for ProvenanceChain {
    fn decode_from(dec: &mut Decoder<'_>) -> Result<Self, EncodingError> {
        dec.record(tag::PROVENANCE_CHAIN, |d| {
            Ok(Self {
                action: d.value()?,
                tokens: d.list()?,
                acorp: d.value()?,
                owner: d.value()?,
            })
        })
    }
}
