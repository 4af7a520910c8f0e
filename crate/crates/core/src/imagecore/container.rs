//! Self-describing compressed container.
//!
//! Layout (all integers little-endian, fixed width):
//!
//! | offset | size | field                                         |
//! |--------|------|-----------------------------------------------|
//! | 0      | 4    | magic `QPRS`                                  |
//! | 4      | 2    | format version (1)                            |
//! | 6      | 2    | codec id length `n`                           |
//! | 8      | n    | codec id, UTF-8                               |
//! | 8+n    | 1    | param kind (0 = QS, 1 = SF, 2 = bpp)          |
//! | 9+n    | 8    | param value, IEEE-754 binary64                |
//! | 17+n   | 4    | width                                         |
//! | 21+n   | 4    | height                                        |
//! | 25+n   | 1    | bit depth (8 or 16)                           |
//! | 26+n   | 1    | entropy backend id                            |
//! | 27+n   | 4    | payload length `m`                            |
//! | 31+n   | m    | payload                                       |

use super::{BitDepth, ImageError};
use crate::codecs::{ControlParameter, ParamKind};

pub const CONTAINER_MAGIC: [u8; 4] = *b"QPRS";
pub const CONTAINER_VERSION: u16 = 1;

/// Lossless stage that produced the payload.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BackendId {
    /// Codec-private payload (stub and external coders).
    Opaque,
    /// Adaptive binary range coder over run/level symbols.
    Range,
    /// zlib stream over varint run/level symbols.
    Deflate,
}

impl BackendId {
    pub fn code(self) -> u8 {
        match self {
            BackendId::Opaque => 0,
            BackendId::Range => 1,
            BackendId::Deflate => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(BackendId::Opaque),
            1 => Some(BackendId::Range),
            2 => Some(BackendId::Deflate),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompressedBlob {
    pub codec_id: String,
    pub param: ControlParameter,
    pub width: usize,
    pub height: usize,
    pub bit_depth: BitDepth,
    pub backend: BackendId,
    pub payload: Vec<u8>,
}

const FIXED_HEADER: usize = 4 + 2 + 2 + 1 + 8 + 4 + 4 + 1 + 1 + 4;

impl CompressedBlob {
    pub fn header_len(&self) -> usize {
        FIXED_HEADER + self.codec_id.len()
    }

    /// Size of the serialized container.
    pub fn stored_len(&self) -> usize {
        self.header_len() + self.payload.len()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.stored_len());
        out.extend_from_slice(&CONTAINER_MAGIC);
        out.extend_from_slice(&CONTAINER_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.codec_id.len() as u16).to_le_bytes());
        out.extend_from_slice(self.codec_id.as_bytes());
        out.push(self.param.kind().code());
        out.extend_from_slice(&self.param.value().to_le_bytes());
        out.extend_from_slice(&(self.width as u32).to_le_bytes());
        out.extend_from_slice(&(self.height as u32).to_le_bytes());
        out.push(self.bit_depth.bits() as u8);
        out.push(self.backend.code());
        out.extend_from_slice(&(self.payload.len() as u32).to_le_bytes());
        out.extend_from_slice(&self.payload);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ImageError> {
        let corrupt = |msg: &str| ImageError::Container(msg.to_string());
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4).ok_or_else(|| corrupt("truncated magic"))? != CONTAINER_MAGIC {
            return Err(corrupt("bad magic"));
        }
        let version = r.u16().ok_or_else(|| corrupt("truncated header"))?;
        if version != CONTAINER_VERSION {
            return Err(ImageError::Container(format!("unsupported version {version}")));
        }
        let id_len = r.u16().ok_or_else(|| corrupt("truncated header"))? as usize;
        let codec_id = std::str::from_utf8(r.take(id_len).ok_or_else(|| corrupt("truncated codec id"))?)
            .map_err(|_| corrupt("codec id is not UTF-8"))?
            .to_string();
        let kind = ParamKind::from_code(r.u8().ok_or_else(|| corrupt("truncated header"))?)
            .ok_or_else(|| corrupt("unknown parameter kind"))?;
        let value = f64::from_le_bytes(
            r.take(8).ok_or_else(|| corrupt("truncated header"))?.try_into().unwrap(),
        );
        let param = ControlParameter::new(kind, value).map_err(|e| ImageError::Container(e.to_string()))?;
        let width = r.u32().ok_or_else(|| corrupt("truncated header"))? as usize;
        let height = r.u32().ok_or_else(|| corrupt("truncated header"))? as usize;
        if width == 0 || height == 0 {
            return Err(corrupt("zero dimension"));
        }
        let bit_depth = BitDepth::from_bits(u32::from(r.u8().ok_or_else(|| corrupt("truncated header"))?))
            .map_err(|_| corrupt("bad bit depth"))?;
        let backend = BackendId::from_code(r.u8().ok_or_else(|| corrupt("truncated header"))?)
            .ok_or_else(|| corrupt("unknown backend"))?;
        let len = r.u32().ok_or_else(|| corrupt("truncated header"))? as usize;
        let payload = r.take(len).ok_or_else(|| corrupt("truncated payload"))?.to_vec();
        if r.pos != bytes.len() {
            return Err(corrupt("trailing bytes after payload"));
        }
        Ok(CompressedBlob {
            codec_id,
            param,
            width,
            height,
            bit_depth,
            backend,
            payload,
        })
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        let end = self.pos.checked_add(n)?;
        let out = self.bytes.get(self.pos..end)?;
        self.pos = end;
        Some(out)
    }

    fn u8(&mut self) -> Option<u8> {
        self.take(1).map(|b| b[0])
    }

    fn u16(&mut self) -> Option<u16> {
        self.take(2).map(|b| u16::from_le_bytes([b[0], b[1]]))
    }

    fn u32(&mut self) -> Option<u32> {
        self.take(4).map(|b| u32::from_le_bytes(b.try_into().unwrap()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample() -> CompressedBlob {
        CompressedBlob {
            codec_id: "dct".into(),
            param: ControlParameter::new(ParamKind::QuantizationStep, 12.43).unwrap(),
            width: 3,
            height: 2,
            bit_depth: BitDepth::Sixteen,
            backend: BackendId::Range,
            payload: vec![1, 2, 3],
        }
    }

    #[test]
    fn documented_layout() {
        let bytes = sample().to_bytes();
        assert_eq!(&bytes[0..4], b"QPRS");
        assert_eq!(&bytes[4..6], &[1, 0]);
        assert_eq!(&bytes[6..8], &[3, 0]);
        assert_eq!(&bytes[8..11], b"dct");
        assert_eq!(bytes[11], 0);
        assert_eq!(&bytes[12..20], &12.43f64.to_le_bytes());
        assert_eq!(&bytes[20..24], &[3, 0, 0, 0]);
        assert_eq!(&bytes[24..28], &[2, 0, 0, 0]);
        assert_eq!(bytes[28], 16);
        assert_eq!(bytes[29], 1);
        assert_eq!(&bytes[30..34], &[3, 0, 0, 0]);
        assert_eq!(&bytes[34..], &[1, 2, 3]);
        assert_eq!(bytes.len(), sample().stored_len());
    }

    #[test]
    fn truncation_is_an_error() {
        let bytes = sample().to_bytes();
        for cut in 0..bytes.len() {
            assert!(CompressedBlob::from_bytes(&bytes[..cut]).is_err(), "cut at {cut}");
        }
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(CompressedBlob::from_bytes(&extra).is_err());
    }

    proptest! {
        #[test]
        fn header_round_trips(
            id in "[a-z0-9:._-]{0,24}",
            kind in 0u8..3,
            value in 0.001f64..8.0,
            w in 1usize..100_000,
            h in 1usize..100_000,
            payload in proptest::collection::vec(any::<u8>(), 0..64),
        ) {
            let blob = CompressedBlob {
                codec_id: id,
                param: ControlParameter::new(ParamKind::from_code(kind).unwrap(), value).unwrap(),
                width: w,
                height: h,
                bit_depth: BitDepth::Eight,
                backend: BackendId::Deflate,
                payload,
            };
            let bytes = blob.to_bytes();
            let back = CompressedBlob::from_bytes(&bytes).unwrap();
            prop_assert_eq!(&back, &blob);
            prop_assert_eq!(back.to_bytes(), bytes);
        }
    }
}
