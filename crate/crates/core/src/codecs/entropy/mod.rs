//! Lossless stage for quantized, zig-zag ordered coefficient blocks.
//!
//! Each block becomes a DC difference (against the previous block's DC)
//! followed by `(zero run, level)` pairs and an end-of-block marker. The
//! symbols are then packed by one of two backends, identified in the
//! container header.

mod range;

use crate::imagecore::BackendId;
use flate2::read::ZlibDecoder;
use flate2::write::ZlibEncoder;
use flate2::Compression;
use range::{Prob, RangeDecoder, RangeEncoder, UintModel};
use std::io::{Read, Write};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corrupt(pub String);

impl From<range::Exhausted> for Corrupt {
    fn from(_: range::Exhausted) -> Self {
        Corrupt("range-coded stream ended early".into())
    }
}

const ZONES: usize = 8;

fn zone(pos: usize) -> usize {
    // pos >= 1 for AC coefficients
    (usize::BITS - 1 - pos.leading_zeros()).min(ZONES as u32 - 1) as usize
}

/// `coeffs` holds `block_count` blocks of `block_len` zig-zag ordered levels.
pub fn encode(coeffs: &[i32], block_len: usize, backend: BackendId) -> Vec<u8> {
    match backend {
        BackendId::Range => encode_range(coeffs, block_len),
        BackendId::Deflate => encode_deflate(coeffs, block_len),
        BackendId::Opaque => unreachable!("opaque payloads are not coefficient streams"),
    }
}

pub fn decode(
    bytes: &[u8],
    block_count: usize,
    block_len: usize,
    backend: BackendId,
) -> Result<Vec<i32>, Corrupt> {
    match backend {
        BackendId::Range => decode_range(bytes, block_count, block_len),
        BackendId::Deflate => decode_deflate(bytes, block_count, block_len),
        BackendId::Opaque => Err(Corrupt("payload is not a coefficient stream".into())),
    }
}

struct Models {
    dc_zero: Prob,
    dc_sign: Prob,
    dc_mag: UintModel,
    more: [[Prob; 3]; ZONES],
    run: Vec<UintModel>,
    level: Vec<[UintModel; 3]>,
    sign: Prob,
}

impl Models {
    fn new() -> Self {
        Models {
            dc_zero: Prob::default(),
            dc_sign: Prob::default(),
            dc_mag: UintModel::default(),
            more: [[Prob::default(); 3]; ZONES],
            run: vec![UintModel::default(); ZONES],
            level: (0..ZONES).map(|_| Default::default()).collect(),
            sign: Prob::default(),
        }
    }
}

fn magnitude_ctx(prev: u32) -> usize {
    prev.min(2) as usize
}

fn encode_range(coeffs: &[i32], block_len: usize) -> Vec<u8> {
    let mut m = Models::new();
    let mut enc = RangeEncoder::new();
    let mut prev_dc = 0i64;
    for block in coeffs.chunks_exact(block_len) {
        let diff = i64::from(block[0]) - prev_dc;
        prev_dc = i64::from(block[0]);
        enc.encode(&mut m.dc_zero, diff == 0);
        if diff != 0 {
            enc.encode(&mut m.dc_sign, diff < 0);
            m.dc_mag.encode(&mut enc, (diff.unsigned_abs() - 1) as u32);
        }

        let mut pos = 1;
        let mut prev_mag = 0u32;
        for (i, &level) in block.iter().enumerate().skip(1) {
            if level == 0 {
                continue;
            }
            enc.encode(&mut m.more[zone(pos)][magnitude_ctx(prev_mag)], true);
            m.run[zone(pos)].encode(&mut enc, (i - pos) as u32);
            let mag = level.unsigned_abs();
            m.level[zone(i)][magnitude_ctx(prev_mag)].encode(&mut enc, mag - 1);
            enc.encode(&mut m.sign, level < 0);
            prev_mag = mag;
            pos = i + 1;
        }
        if pos < block_len {
            enc.encode(&mut m.more[zone(pos)][magnitude_ctx(prev_mag)], false);
        }
    }
    enc.finish()
}

fn decode_range(bytes: &[u8], block_count: usize, block_len: usize) -> Result<Vec<i32>, Corrupt> {
    let mut m = Models::new();
    let mut dec = RangeDecoder::new(bytes)?;
    let mut out = vec![0i32; block_count * block_len];
    let mut prev_dc = 0i64;
    for block in out.chunks_exact_mut(block_len) {
        let mut dc = prev_dc;
        if !dec.decode(&mut m.dc_zero)? {
            let negative = dec.decode(&mut m.dc_sign)?;
            let mag = i64::from(m.dc_mag.decode(&mut dec)?) + 1;
            dc += if negative { -mag } else { mag };
        }
        block[0] = i32::try_from(dc).map_err(|_| Corrupt("DC out of range".into()))?;
        prev_dc = dc;

        let mut pos = 1;
        let mut prev_mag = 0u32;
        while pos < block_len && dec.decode(&mut m.more[zone(pos)][magnitude_ctx(prev_mag)])? {
            let run = m.run[zone(pos)].decode(&mut dec)? as usize;
            let i = pos
                .checked_add(run)
                .filter(|&i| i < block_len)
                .ok_or_else(|| Corrupt("zero run past end of block".into()))?;
            let mag = i64::from(m.level[zone(i)][magnitude_ctx(prev_mag)].decode(&mut dec)?) + 1;
            let negative = dec.decode(&mut m.sign)?;
            block[i] = i32::try_from(if negative { -mag } else { mag })
                .map_err(|_| Corrupt("level out of range".into()))?;
            prev_mag = mag as u32;
            pos = i + 1;
        }
    }
    if !dec.fully_consumed() {
        return Err(Corrupt("trailing bytes after coefficient stream".into()));
    }
    Ok(out)
}

fn put_varint(out: &mut Vec<u8>, mut v: u64) {
    while v >= 0x80 {
        out.push((v as u8) | 0x80);
        v >>= 7;
    }
    out.push(v as u8);
}

fn zigzag_signed(v: i64) -> u64 {
    ((v << 1) ^ (v >> 63)) as u64
}

fn unzigzag_signed(v: u64) -> i64 {
    ((v >> 1) as i64) ^ -((v & 1) as i64)
}

fn encode_deflate(coeffs: &[i32], block_len: usize) -> Vec<u8> {
    let mut symbols = Vec::new();
    let mut prev_dc = 0i64;
    for block in coeffs.chunks_exact(block_len) {
        put_varint(&mut symbols, zigzag_signed(i64::from(block[0]) - prev_dc));
        prev_dc = i64::from(block[0]);
        let nonzero = block[1..].iter().filter(|&&c| c != 0).count();
        put_varint(&mut symbols, nonzero as u64);
        let mut pos = 1;
        for (i, &level) in block.iter().enumerate().skip(1) {
            if level != 0 {
                put_varint(&mut symbols, (i - pos) as u64);
                put_varint(&mut symbols, zigzag_signed(i64::from(level)));
                pos = i + 1;
            }
        }
    }
    let mut enc = ZlibEncoder::new(Vec::new(), Compression::best());
    enc.write_all(&symbols).expect("writing to a Vec cannot fail");
    enc.finish().expect("writing to a Vec cannot fail")
}

struct VarintReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl VarintReader<'_> {
    fn next(&mut self) -> Result<u64, Corrupt> {
        let mut v = 0u64;
        for shift in (0..64).step_by(7) {
            let b = *self
                .bytes
                .get(self.pos)
                .ok_or_else(|| Corrupt("symbol stream ended early".into()))?;
            self.pos += 1;
            v |= u64::from(b & 0x7F) << shift;
            if b & 0x80 == 0 {
                return Ok(v);
            }
        }
        Err(Corrupt("overlong varint".into()))
    }
}

fn decode_deflate(bytes: &[u8], block_count: usize, block_len: usize) -> Result<Vec<i32>, Corrupt> {
    let mut symbols = Vec::new();
    ZlibDecoder::new(bytes)
        .read_to_end(&mut symbols)
        .map_err(|e| Corrupt(format!("zlib: {e}")))?;
    let mut r = VarintReader {
        bytes: &symbols,
        pos: 0,
    };
    let to_i32 = |v: i64| i32::try_from(v).map_err(|_| Corrupt("coefficient out of range".into()));
    let mut out = vec![0i32; block_count * block_len];
    let mut prev_dc = 0i64;
    for block in out.chunks_exact_mut(block_len) {
        let dc = prev_dc
            .checked_add(unzigzag_signed(r.next()?))
            .ok_or_else(|| Corrupt("DC out of range".into()))?;
        block[0] = to_i32(dc)?;
        prev_dc = dc;
        let nonzero = r.next()?;
        if nonzero >= block_len as u64 {
            return Err(Corrupt("too many coefficients in block".into()));
        }
        let mut pos = 1usize;
        for _ in 0..nonzero {
            let run = r.next()?;
            let i = (pos as u64)
                .checked_add(run)
                .filter(|&i| i < block_len as u64)
                .ok_or_else(|| Corrupt("zero run past end of block".into()))? as usize;
            block[i] = to_i32(unzigzag_signed(r.next()?))?;
            pos = i + 1;
        }
    }
    if r.pos != symbols.len() {
        return Err(Corrupt("trailing symbols".into()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sparse_blocks() -> impl Strategy<Value = (usize, Vec<i32>)> {
        (prop_oneof![Just(16usize), Just(64), Just(256)], 1usize..6).prop_flat_map(|(len, count)| {
            let coeff = prop_oneof![
                6 => Just(0i32),
                3 => -5i32..5,
                1 => any::<i32>(),
            ];
            proptest::collection::vec(coeff, len * count).prop_map(move |v| (len, v))
        })
    }

    proptest! {
        #[test]
        fn both_backends_round_trip((len, coeffs) in sparse_blocks()) {
            for backend in [BackendId::Range, BackendId::Deflate] {
                let bytes = encode(&coeffs, len, backend);
                let back = decode(&bytes, coeffs.len() / len, len, backend).unwrap();
                prop_assert_eq!(&back, &coeffs);
            }
        }

        #[test]
        fn garbage_never_panics(bytes in proptest::collection::vec(any::<u8>(), 0..200)) {
            for backend in [BackendId::Range, BackendId::Deflate] {
                let _ = decode(&bytes, 4, 64, backend);
            }
        }
    }

    #[test]
    fn truncation_is_detected() {
        let coeffs: Vec<i32> = (0..64 * 20).map(|i| if i % 7 == 0 { (i % 13) - 6 } else { 0 }).collect();
        for backend in [BackendId::Range, BackendId::Deflate] {
            let bytes = encode(&coeffs, 64, backend);
            for cut in [0, 1, bytes.len() / 2, bytes.len() - 1] {
                assert!(decode(&bytes[..cut], 20, 64, backend).is_err(), "{backend:?} cut {cut}");
            }
        }
    }

    #[test]
    fn all_zero_blocks_are_tiny() {
        let coeffs = vec![0i32; 256 * 1024];
        assert!(encode(&coeffs, 256, BackendId::Range).len() < 64);
    }
}
