//! TTAG binary time-tag files.
//!
//! Layout, all little-endian:
//!
//! | offset | size | field                          |
//! |--------|------|--------------------------------|
//! | 0      | 4    | magic `b"TTAG"`                |
//! | 4      | 2    | format version (`u16`)         |
//! | 6      | 8    | femtoseconds per tick (`u64`)  |
//! | 14     | 8    | record count (`u64`)           |
//! | 22     | 9·n  | records: channel `u8`, ticks `u64` |

use std::io::{self, Read, Write};

use thiserror::Error;

use crate::stream::{Channel, TimeTag, TimeTagStream};

pub const MAGIC: [u8; 4] = *b"TTAG";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 22;
pub const RECORD_LEN: usize = 9;

#[derive(Debug, Error)]
pub enum TtagError {
    #[error("bad magic at byte 0: expected \"TTAG\", found {found:?}")]
    BadMagic { found: [u8; 4] },
    #[error("unsupported format version {version} at byte 4")]
    UnsupportedVersion { version: u16 },
    #[error("zero tick resolution at byte 6")]
    ZeroResolution,
    #[error("truncated file: needed {needed} bytes at byte offset {offset}, found {available}")]
    Truncated {
        offset: u64,
        needed: u64,
        available: u64,
    },
    #[error("{extra} trailing bytes after the last record at byte offset {offset}")]
    TrailingBytes { offset: u64, extra: u64 },
    #[error("invalid channel {channel} in record at byte offset {offset}")]
    InvalidChannel { offset: u64, channel: u8 },
    #[error("timestamp decreases at byte offset {offset}")]
    Unsorted { offset: u64 },
    #[error("stream is not sorted at record {index}")]
    UnsortedStream { index: usize },
    #[error(transparent)]
    Io(#[from] io::Error),
}

fn record_offset(index: usize) -> u64 {
    (HEADER_LEN + index * RECORD_LEN) as u64
}

pub fn encode(stream: &TimeTagStream) -> Result<Vec<u8>, TtagError> {
    let mut out = Vec::with_capacity(HEADER_LEN + RECORD_LEN * stream.len());
    write(&mut out, stream)?;
    Ok(out)
}

pub fn write<W: Write>(mut w: W, stream: &TimeTagStream) -> Result<(), TtagError> {
    if let Some(index) = stream.first_unsorted() {
        return Err(TtagError::UnsortedStream { index });
    }
    if stream.resolution_fs == 0 {
        return Err(TtagError::ZeroResolution);
    }
    let mut header = [0u8; HEADER_LEN];
    header[0..4].copy_from_slice(&MAGIC);
    header[4..6].copy_from_slice(&VERSION.to_le_bytes());
    header[6..14].copy_from_slice(&stream.resolution_fs.to_le_bytes());
    header[14..22].copy_from_slice(&(stream.len() as u64).to_le_bytes());
    w.write_all(&header)?;

    let mut buf = Vec::with_capacity(RECORD_LEN * 4096);
    for chunk in stream.records.chunks(4096) {
        buf.clear();
        for rec in chunk {
            buf.push(rec.channel as u8);
            buf.extend_from_slice(&rec.timestamp.to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    Ok(())
}

pub fn read<R: Read>(mut r: R) -> Result<TimeTagStream, TtagError> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    decode(&bytes)
}

pub fn decode(bytes: &[u8]) -> Result<TimeTagStream, TtagError> {
    if bytes.len() < HEADER_LEN {
        // Report the first field that cannot be read.
        let offset = [4usize, 6, 14, 22]
            .iter()
            .zip([0u64, 4, 6, 14])
            .find(|(end, _)| bytes.len() < **end)
            .map(|(_, start)| start)
            .unwrap_or(0);
        return Err(TtagError::Truncated {
            offset,
            needed: HEADER_LEN as u64,
            available: bytes.len() as u64,
        });
    }
    let magic: [u8; 4] = bytes[0..4].try_into().unwrap();
    if magic != MAGIC {
        return Err(TtagError::BadMagic { found: magic });
    }
    let version = u16::from_le_bytes(bytes[4..6].try_into().unwrap());
    if version != VERSION {
        return Err(TtagError::UnsupportedVersion { version });
    }
    let resolution_fs = u64::from_le_bytes(bytes[6..14].try_into().unwrap());
    if resolution_fs == 0 {
        return Err(TtagError::ZeroResolution);
    }
    let count = u64::from_le_bytes(bytes[14..22].try_into().unwrap());

    let payload = &bytes[HEADER_LEN..];
    let complete = payload.len() / RECORD_LEN;
    if (complete as u64) < count {
        return Err(TtagError::Truncated {
            offset: record_offset(complete),
            needed: RECORD_LEN as u64,
            available: (payload.len() % RECORD_LEN) as u64,
        });
    }
    let expected_len = count as usize * RECORD_LEN;
    if payload.len() > expected_len {
        return Err(TtagError::TrailingBytes {
            offset: (HEADER_LEN + expected_len) as u64,
            extra: (payload.len() - expected_len) as u64,
        });
    }

    let mut records = Vec::with_capacity(count as usize);
    let mut last = 0u64;
    for (i, raw) in payload.chunks_exact(RECORD_LEN).enumerate() {
        let channel = Channel::from_u8(raw[0]).ok_or(TtagError::InvalidChannel {
            offset: record_offset(i),
            channel: raw[0],
        })?;
        let timestamp = u64::from_le_bytes(raw[1..9].try_into().unwrap());
        if timestamp < last {
            return Err(TtagError::Unsorted {
                offset: record_offset(i) + 1,
            });
        }
        last = timestamp;
        records.push(TimeTag { timestamp, channel });
    }
    Ok(TimeTagStream::new(resolution_fs, records))
}
