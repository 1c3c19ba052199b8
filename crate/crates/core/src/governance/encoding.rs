//! Canonical byte encoding used for every signed or logged record.
//!
//! Every value is written as a one-byte type tag, a four-byte big-endian
//! payload length, then the payload. Integers are eight-byte big-endian,
//! strings are UTF-8, records concatenate their fields in declared order and
//! sets are sorted by the canonical bytes of their elements. The same value
//! always produces the same bytes, on every platform.

use thiserror::Error;

/// Type tags. Primitive tags live below `0x20`, record kinds above.
pub mod tag {
    pub const U64: u8 = 0x01;
    pub const STR: u8 = 0x02;
    pub const BYTES: u8 = 0x03;
    pub const ENUM: u8 = 0x04;
    pub const NONE: u8 = 0x05;
    pub const LIST: u8 = 0x06;
    pub const SET: u8 = 0x07;
    pub const BOOL: u8 = 0x08;

    pub const OWNER_RECORD: u8 = 0x20;
    pub const GRANT: u8 = 0x21;
    pub const SCOPE: u8 = 0x22;
    pub const SIGNATURE_ENVELOPE: u8 = 0x23;
    pub const ACORP_RECORD: u8 = 0x24;
    pub const TOKEN: u8 = 0x25;
    pub const REVOCATION_RECORD: u8 = 0x26;
    pub const ACTION_RECORD: u8 = 0x27;
    pub const TRANSFER_PAYLOAD: u8 = 0x28;
    pub const VERDICT: u8 = 0x29;
    pub const LEDGER_ACCOUNT: u8 = 0x2A;
    pub const MASTER_KEY_RECORD: u8 = 0x2B;
    pub const CREDENTIAL: u8 = 0x2C;
    pub const REVOCATION_REQUEST: u8 = 0x2D;
    pub const PROVENANCE_CHAIN: u8 = 0x2E;
    pub const ACTION_REQUEST: u8 = 0x2F;

    pub const EVENT: u8 = 0x40;
    pub const LOG_ENTRY: u8 = 0x41;
    pub const LOG_HASH_INPUT: u8 = 0x42;
    pub const SNAPSHOT: u8 = 0x43;
    pub const LEDGER_TOTALS: u8 = 0x44;
    pub const TRACE_TOKEN: u8 = 0x45;

    pub const REGISTER_REQUEST: u8 = 0x50;
    pub const REGISTER_RESPONSE: u8 = 0x51;
    pub const VERIFY_REQUEST: u8 = 0x52;
    pub const ACTION_SUBMISSION: u8 = 0x53;
    pub const CONFISCATE_REQUEST: u8 = 0x54;
    pub const CONFISCATE_RESPONSE: u8 = 0x55;
    pub const STATUS_REQUEST: u8 = 0x56;
    pub const PAYOUT_REQUEST: u8 = 0x57;
    pub const PAYOUT_REPORT: u8 = 0x58;
    pub const DELEGATION_TREE: u8 = 0x59;
    pub const TREE_NODE: u8 = 0x5A;
    pub const INTEGRITY_REPORT: u8 = 0x5B;
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EncodingError {
    #[error("input truncated")]
    Truncated,
    #[error("expected tag {expected:#04x}, found {found:#04x}")]
    UnexpectedTag { expected: u8, found: u8 },
    #[error("unsupported record kind {0:#04x}")]
    EncodingUnsupported(u8),
    #[error("invalid utf-8 in string field")]
    InvalidUtf8,
    #[error("payload length mismatch")]
    LengthMismatch,
    #[error("{0} trailing bytes after record")]
    TrailingBytes(usize),
    #[error("non-canonical encoding: {0}")]
    NonCanonical(&'static str),
    #[error("invalid value: {0}")]
    Invalid(String),
}

pub trait CanonicalEncode {
    fn encode_into(&self, enc: &mut Encoder);

    fn canonical_bytes(&self) -> Vec<u8> {
        let mut enc = Encoder::new();
        self.encode_into(&mut enc);
        enc.finish()
    }
}

pub trait CanonicalDecode: Sized {
    fn decode_from(dec: &mut Decoder<'_>) -> Result<Self, EncodingError>;

    /// Decodes a value that must span the whole input.
    fn from_canonical_bytes(bytes: &[u8]) -> Result<Self, EncodingError> {
        let mut dec = Decoder::new(bytes);
        let value = Self::decode_from(&mut dec)?;
        dec.finish()?;
        Ok(value)
    }
}

#[derive(Debug, Default)]
pub struct Encoder {
    buf: Vec<u8>,
}

impl Encoder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn finish(self) -> Vec<u8> {
        self.buf
    }

    fn header(&mut self, tag: u8, len: usize) {
        let len = u32::try_from(len).expect("canonical payload exceeds u32::MAX bytes");
        self.buf.push(tag);
        self.buf.extend_from_slice(&len.to_be_bytes());
    }

    pub fn u64(&mut self, value: u64) {
        self.header(tag::U64, 8);
        self.buf.extend_from_slice(&value.to_be_bytes());
    }

    pub fn bool(&mut self, value: bool) {
        self.header(tag::BOOL, 1);
        self.buf.push(value as u8);
    }

    pub fn str(&mut self, value: &str) {
        self.header(tag::STR, value.len());
        self.buf.extend_from_slice(value.as_bytes());
    }

    pub fn bytes(&mut self, value: &[u8]) {
        self.header(tag::BYTES, value.len());
        self.buf.extend_from_slice(value);
    }

    pub fn enum_code(&mut self, code: u8) {
        self.header(tag::ENUM, 1);
        self.buf.push(code);
    }

    pub fn none(&mut self) {
        self.header(tag::NONE, 0);
    }

    pub fn value<T: CanonicalEncode + ?Sized>(&mut self, value: &T) {
        value.encode_into(self);
    }

    /// `None` is a zero-length NONE item; `Some(v)` is just `v`.
    pub fn option<T: CanonicalEncode>(&mut self, value: Option<&T>) {
        match value {
            Some(v) => v.encode_into(self),
            None => self.none(),
        }
    }

    /// Writes a record: tag, length, then whatever `fields` appends.
    pub fn record(&mut self, record_tag: u8, fields: impl FnOnce(&mut Encoder)) {
        let start = self.buf.len();
        self.header(record_tag, 0);
        fields(self);
        let len = u32::try_from(self.buf.len() - start - 5).expect("record too large");
        self.buf[start + 1..start + 5].copy_from_slice(&len.to_be_bytes());
    }

    pub fn list<'a, T, I>(&mut self, items: I)
    where
        T: CanonicalEncode + 'a,
        I: IntoIterator<Item = &'a T>,
    {
        self.record(tag::LIST, |enc| {
            for item in items {
                item.encode_into(enc);
            }
        });
    }

    /// Sorted by element encoding, duplicates dropped.
    pub fn set<'a, T, I>(&mut self, items: I)
    where
        T: CanonicalEncode + 'a,
        I: IntoIterator<Item = &'a T>,
    {
        let mut encoded: Vec<Vec<u8>> = items.into_iter().map(|i| i.canonical_bytes()).collect();
        encoded.sort();
        encoded.dedup();
        self.record(tag::SET, |enc| {
            for item in &encoded {
                enc.buf.extend_from_slice(item);
            }
        });
    }
}

#[derive(Debug)]
pub struct Decoder<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Decoder<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    pub fn is_empty(&self) -> bool {
        self.pos >= self.buf.len()
    }

    pub fn finish(&self) -> Result<(), EncodingError> {
        match self.buf.len() - self.pos {
            0 => Ok(()),
            n => Err(EncodingError::TrailingBytes(n)),
        }
    }

    pub fn peek_tag(&self) -> Result<u8, EncodingError> {
        self.buf.get(self.pos).copied().ok_or(EncodingError::Truncated)
    }

    fn item(&mut self) -> Result<(u8, &'a [u8]), EncodingError> {
        if self.buf.len() - self.pos < 5 {
            return Err(EncodingError::Truncated);
        }
        let tag = self.buf[self.pos];
        let len = u32::from_be_bytes(self.buf[self.pos + 1..self.pos + 5].try_into().unwrap()) as usize;
        let start = self.pos + 5;
        if self.buf.len() - start < len {
            return Err(EncodingError::Truncated);
        }
        self.pos = start + len;
        Ok((tag, &self.buf[start..start + len]))
    }

    fn expect(&mut self, expected: u8) -> Result<&'a [u8], EncodingError> {
        let found = self.peek_tag()?;
        if found != expected {
            return Err(EncodingError::UnexpectedTag { expected, found });
        }
        Ok(self.item()?.1)
    }

    pub fn u64(&mut self) -> Result<u64, EncodingError> {
        let payload = self.expect(tag::U64)?;
        let raw: [u8; 8] = payload.try_into().map_err(|_| EncodingError::LengthMismatch)?;
        Ok(u64::from_be_bytes(raw))
    }

    pub fn bool(&mut self) -> Result<bool, EncodingError> {
        match self.expect(tag::BOOL)? {
            [0] => Ok(false),
            [1] => Ok(true),
            [_] => Err(EncodingError::NonCanonical("bool must be 0 or 1")),
            _ => Err(EncodingError::LengthMismatch),
        }
    }

    pub fn str(&mut self) -> Result<String, EncodingError> {
        let payload = self.expect(tag::STR)?;
        String::from_utf8(payload.to_vec()).map_err(|_| EncodingError::InvalidUtf8)
    }

    pub fn bytes(&mut self) -> Result<Vec<u8>, EncodingError> {
        Ok(self.expect(tag::BYTES)?.to_vec())
    }

    pub fn fixed<const N: usize>(&mut self) -> Result<[u8; N], EncodingError> {
        self.expect(tag::BYTES)?
            .try_into()
            .map_err(|_| EncodingError::LengthMismatch)
    }

    pub fn enum_code(&mut self) -> Result<u8, EncodingError> {
        match self.expect(tag::ENUM)? {
            [code] => Ok(*code),
            _ => Err(EncodingError::LengthMismatch),
        }
    }

    pub fn value<T: CanonicalDecode>(&mut self) -> Result<T, EncodingError> {
        T::decode_from(self)
    }

    pub fn option<T: CanonicalDecode>(&mut self) -> Result<Option<T>, EncodingError> {
        if self.peek_tag()? == tag::NONE {
            let payload = self.item()?.1;
            if !payload.is_empty() {
                return Err(EncodingError::LengthMismatch);
            }
            Ok(None)
        } else {
            T::decode_from(self).map(Some)
        }
    }

    /// Enters a record with the given tag; `fields` must consume it exactly.
    pub fn record<T>(
        &mut self,
        record_tag: u8,
        fields: impl FnOnce(&mut Decoder<'a>) -> Result<T, EncodingError>,
    ) -> Result<T, EncodingError> {
        let payload = self.expect(record_tag)?;
        let mut inner = Decoder::new(payload);
        let value = fields(&mut inner)?;
        inner.finish()?;
        Ok(value)
    }

    pub fn list<T: CanonicalDecode>(&mut self) -> Result<Vec<T>, EncodingError> {
        self.record(tag::LIST, |inner| {
            let mut out = Vec::new();
            while !inner.is_empty() {
                out.push(T::decode_from(inner)?);
            }
            Ok(out)
        })
    }

    /// Rejects sets whose elements are not strictly ascending by encoding.
    pub fn set<T: CanonicalDecode>(&mut self) -> Result<Vec<T>, EncodingError> {
        self.record(tag::SET, |inner| {
            let mut out = Vec::new();
            let mut prev: Option<&[u8]> = None;
            while !inner.is_empty() {
                let start = inner.pos;
                out.push(T::decode_from(inner)?);
                let raw = &inner.buf[start..inner.pos];
                if prev.is_some_and(|p| p >= raw) {
                    return Err(EncodingError::NonCanonical("set elements out of order"));
                }
                prev = Some(raw);
            }
            Ok(out)
        })
    }
}

impl CanonicalEncode for u64 {
    fn encode_into(&self, enc: &mut Encoder) {
        enc.u64(*self);
    }
}

impl CanonicalDecode for u64 {
    fn decode_from(dec: &mut Decoder<'_>) -> Result<Self, EncodingError> {
        dec.u64()
    }
}

impl CanonicalEncode for String {
    fn encode_into(&self, enc: &mut Encoder) {
        enc.str(self);
    }
}

impl CanonicalDecode for String {
    fn decode_from(dec: &mut Decoder<'_>) -> Result<Self, EncodingError> {
        dec.str()
    }
}

impl CanonicalEncode for str {
    fn encode_into(&self, enc: &mut Encoder) {
        enc.str(self);
    }
}

impl<T: CanonicalEncode> CanonicalEncode for Vec<T> {
    fn encode_into(&self, enc: &mut Encoder) {
        enc.list(self.iter());
    }
}

impl<T: CanonicalDecode> CanonicalDecode for Vec<T> {
    fn decode_from(dec: &mut Decoder<'_>) -> Result<Self, EncodingError> {
        dec.list()
    }
}

/// Hex dump in 16-byte rows, the format of the golden fixtures.
pub fn hex_dump(bytes: &[u8]) -> String {
    let mut out = String::new();
    for chunk in bytes.chunks(16) {
        out.push_str(&hex::encode(chunk));
        out.push('\n');
    }
    out
}

/// Inverse of [`hex_dump`]; whitespace is ignored.
pub fn parse_hex_dump(text: &str) -> Result<Vec<u8>, EncodingError> {
    let compact: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    hex::decode(compact).map_err(|e| EncodingError::Invalid(e.to_string()))
}
