//! QTAG binary tag-stream encoding.
//!
//! ```text
//! header (16 bytes)
//!   0..4   magic "QTAG"
//!   4..6   format version, u16 LE
//!   6..8   channel count, u16 LE
//!   8..16  symbol period in ps, u64 LE
//! records (9 bytes each)
//!   0..8   timestamp in ps, u64 LE
//!   8      channel, u8
//! ```

use alloc::vec::Vec;

use crate::montecarlo::{TagRecord, TagStream};

pub const MAGIC: [u8; 4] = *b"QTAG";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 16;
pub const RECORD_LEN: usize = 9;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TagFormatError {
    #[error("truncated tag file: {len} bytes, header needs {HEADER_LEN}")]
    TruncatedHeader { len: usize },
    #[error("bad magic {found:02x?}, expected \"QTAG\"")]
    BadMagic { found: [u8; 4] },
    #[error("unsupported QTAG version {0}")]
    UnsupportedVersion(u16),
    #[error("truncated record {index} at byte offset {offset}: {available} of {RECORD_LEN} bytes present")]
    TruncatedRecord {
        index: usize,
        offset: usize,
        available: usize,
    },
    #[error("timestamp regression at record {index} (byte offset {offset}): {timestamp} ps after {previous} ps")]
    TimestampRegression {
        index: usize,
        offset: usize,
        previous: u64,
        timestamp: u64,
    },
    #[error("tags are not sorted by timestamp (record {index})")]
    Unsorted { index: usize },
}

impl TagFormatError {
    /// Byte offset of the offending data, when there is one.
    pub fn byte_offset(&self) -> Option<usize> {
        match *self {
            TagFormatError::TruncatedHeader { .. } | TagFormatError::BadMagic { .. } => Some(0),
            TagFormatError::UnsupportedVersion(_) => Some(4),
            TagFormatError::TruncatedRecord { offset, .. }
            | TagFormatError::TimestampRegression { offset, .. } => Some(offset),
            TagFormatError::Unsorted { .. } => None,
        }
    }
}

fn check_sorted(tags: &[TagRecord]) -> Result<(), TagFormatError> {
    match tags.windows(2).position(|w| w[1].timestamp < w[0].timestamp) {
        Some(i) => Err(TagFormatError::Unsorted { index: i + 1 }),
        None => Ok(()),
    }
}

pub fn encoded_len(stream: &TagStream) -> usize {
    HEADER_LEN + RECORD_LEN * stream.tags.len()
}

/// Serializes a time-sorted stream.
pub fn encode(stream: &TagStream) -> Result<Vec<u8>, TagFormatError> {
    check_sorted(&stream.tags)?;
    let mut out = Vec::with_capacity(encoded_len(stream));
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&stream.channel_count.to_le_bytes());
    out.extend_from_slice(&stream.symbol_period_ps.to_le_bytes());
    for t in &stream.tags {
        out.extend_from_slice(&t.timestamp.to_le_bytes());
        out.push(t.channel);
    }
    Ok(out)
}

pub fn decode(bytes: &[u8]) -> Result<TagStream, TagFormatError> {
    if bytes.len() < HEADER_LEN {
        if bytes.len() >= 4 && bytes[..4] != MAGIC {
            return Err(TagFormatError::BadMagic {
                found: [bytes[0], bytes[1], bytes[2], bytes[3]],
            });
        }
        return Err(TagFormatError::TruncatedHeader { len: bytes.len() });
    }
    let (header, body) = bytes.split_at(HEADER_LEN);
    let magic: [u8; 4] = header[0..4].try_into().unwrap();
    if magic != MAGIC {
        return Err(TagFormatError::BadMagic { found: magic });
    }
    let version = u16::from_le_bytes(header[4..6].try_into().unwrap());
    if version != VERSION {
        return Err(TagFormatError::UnsupportedVersion(version));
    }
    let channel_count = u16::from_le_bytes(header[6..8].try_into().unwrap());
    let symbol_period_ps = u64::from_le_bytes(header[8..16].try_into().unwrap());

    let mut chunks = body.chunks_exact(RECORD_LEN);
    let mut tags = Vec::with_capacity(body.len() / RECORD_LEN);
    let mut previous: Option<u64> = None;
    for (index, rec) in chunks.by_ref().enumerate() {
        let timestamp = u64::from_le_bytes(rec[0..8].try_into().unwrap());
        if let Some(prev) = previous {
            if timestamp < prev {
                return Err(TagFormatError::TimestampRegression {
                    index,
                    offset: HEADER_LEN + index * RECORD_LEN,
                    previous: prev,
                    timestamp,
                });
            }
        }
        previous = Some(timestamp);
        tags.push(TagRecord {
            timestamp,
            channel: rec[8],
        });
    }
    let rest = chunks.remainder();
    if !rest.is_empty() {
        let index = tags.len();
        return Err(TagFormatError::TruncatedRecord {
            index,
            offset: HEADER_LEN + index * RECORD_LEN,
            available: rest.len(),
        });
    }
    Ok(TagStream {
        symbol_period_ps,
        channel_count,
        tags,
    })
}
