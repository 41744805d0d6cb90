//! Shared little-endian container used by cell (`PPGC`) and fingerprint
//! (`PPGF`) files.
//!
//! Layout:
//!
//! ```text
//! magic      [u8; 4]
//! version    u8
//! flags      u8
//! rows       u16 LE
//! cols       u16 LE
//! meta_len   u32 LE
//! meta       meta_len bytes, UTF-8 JSON
//! data       rows * cols * channels f32 LE, row-major
//! crc32      u32 LE over every preceding byte
//! ```
//!
//! `channels` is 3 when flag bit 1 is set, otherwise 1.

use crate::error::{Error, Result};

pub const FLAG_HAS_PSD: u8 = 0b01;
pub const FLAG_RGB: u8 = 0b10;

const HEADER_LEN: usize = 4 + 1 + 1 + 2 + 2 + 4;

#[derive(Debug, Clone, PartialEq)]
pub struct Container {
    pub magic: [u8; 4],
    pub version: u8,
    pub flags: u8,
    pub rows: u16,
    pub cols: u16,
    pub meta: Vec<u8>,
    pub data: Vec<f32>,
}

impl Container {
    pub fn channels(&self) -> usize {
        if self.flags & FLAG_RGB != 0 {
            3
        } else {
            1
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out =
            Vec::with_capacity(HEADER_LEN + self.meta.len() + self.data.len() * 4 + 4);
        out.extend_from_slice(&self.magic);
        out.push(self.version);
        out.push(self.flags);
        out.extend_from_slice(&self.rows.to_le_bytes());
        out.extend_from_slice(&self.cols.to_le_bytes());
        out.extend_from_slice(&(self.meta.len() as u32).to_le_bytes());
        out.extend_from_slice(&self.meta);
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        let crc = crc32fast::hash(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        out
    }

    pub fn decode(bytes: &[u8], magic: [u8; 4], version: u8) -> Result<Self> {
        if bytes.len() < 4 {
            return Err(Error::Truncated("missing magic".into()));
        }
        let found: [u8; 4] = bytes[..4].try_into().unwrap();
        if found != magic {
            return Err(Error::BadMagic {
                expected: magic,
                found,
            });
        }
        if bytes.len() < HEADER_LEN + 4 {
            return Err(Error::Truncated(format!("{} bytes, header needs {}", bytes.len(), HEADER_LEN + 4)));
        }
        let (body, tail) = bytes.split_at(bytes.len() - 4);
        let stored = u32::from_le_bytes(tail.try_into().unwrap());
        let found_version = body[4];
        if found_version != version {
            return Err(Error::Version {
                expected: version,
                found: found_version,
            });
        }
        let flags = body[5];
        let rows = u16::from_le_bytes([body[6], body[7]]);
        let cols = u16::from_le_bytes([body[8], body[9]]);
        let meta_len = u32::from_le_bytes(body[10..14].try_into().unwrap()) as usize;
        let channels = if flags & FLAG_RGB != 0 { 3 } else { 1 };
        let n = rows as usize * cols as usize * channels;
        let expected = HEADER_LEN + meta_len + n * 4;
        if body.len() < expected {
            return Err(Error::Truncated(format!(
                "payload is {} bytes, header declares {}",
                body.len(),
                expected
            )));
        }
        let computed = crc32fast::hash(body);
        if computed != stored {
            return Err(Error::Checksum { stored, computed });
        }
        if body.len() != expected {
            return Err(Error::invalid(format!(
                "{} trailing bytes after payload",
                body.len() - expected
            )));
        }
        let meta = body[HEADER_LEN..HEADER_LEN + meta_len].to_vec();
        let data = body[HEADER_LEN + meta_len..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(Container {
            magic,
            version,
            flags,
            rows,
            cols,
            meta,
            data,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Container {
        Container {
            magic: *b"TEST",
            version: 1,
            flags: FLAG_HAS_PSD,
            rows: 2,
            cols: 3,
            meta: br#"{"a":1}"#.to_vec(),
            data: vec![0.0, 1.0, -2.5, f32::MIN_POSITIVE, 3.25, 1e-30],
        }
    }

    #[test]
    fn round_trip() {
        let c = sample();
        let bytes = c.encode();
        assert_eq!(Container::decode(&bytes, *b"TEST", 1).unwrap(), c);
    }

    #[test]
    fn rejects_corruption() {
        let bytes = sample().encode();
        assert!(matches!(
            Container::decode(&bytes, *b"NOPE", 1),
            Err(Error::BadMagic { .. })
        ));
        assert!(matches!(
            Container::decode(&bytes, *b"TEST", 2),
            Err(Error::Version { .. })
        ));
        assert!(matches!(
            Container::decode(&bytes[..bytes.len() - 9], *b"TEST", 1),
            Err(Error::Truncated(_))
        ));
        let mut flipped = bytes.clone();
        flipped[20] ^= 0x40;
        assert!(matches!(
            Container::decode(&flipped, *b"TEST", 1),
            Err(Error::Checksum { .. })
        ));
        let mut bad_crc = bytes;
        let n = bad_crc.len();
        bad_crc[n - 1] ^= 1;
        assert!(matches!(
            Container::decode(&bad_crc, *b"TEST", 1),
            Err(Error::Checksum { .. })
        ));
    }
}
