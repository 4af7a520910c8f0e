//! Adaptive binary range coder (LZMA-style carry propagation) and the
//! adaptive Exp-Golomb integer model built on it.

const PROB_BITS: u32 = 11;
const PROB_ONE: u16 = 1 << PROB_BITS;
const PROB_INIT: u16 = PROB_ONE / 2;
const MOVE_BITS: u32 = 5;
const TOP: u32 = 1 << 24;

#[derive(Debug, Clone, Copy)]
pub struct Prob(u16);

impl Default for Prob {
    fn default() -> Self {
        Prob(PROB_INIT)
    }
}

pub struct RangeEncoder {
    low: u64,
    range: u32,
    cache: u8,
    cache_size: u64,
    out: Vec<u8>,
}

impl RangeEncoder {
    pub fn new() -> Self {
        RangeEncoder {
            low: 0,
            range: u32::MAX,
            cache: 0,
            cache_size: 1,
            out: Vec::new(),
        }
    }

    pub fn encode(&mut self, prob: &mut Prob, bit: bool) {
        let bound = (self.range >> PROB_BITS) * u32::from(prob.0);
        if bit {
            self.low += u64::from(bound);
            self.range -= bound;
            prob.0 -= prob.0 >> MOVE_BITS;
        } else {
            self.range = bound;
            prob.0 += (PROB_ONE - prob.0) >> MOVE_BITS;
        }
        while self.range < TOP {
            self.range <<= 8;
            self.shift_low();
        }
    }

    fn shift_low(&mut self) {
        if (self.low as u32) < 0xFF00_0000 || (self.low >> 32) != 0 {
            let carry = (self.low >> 32) as u8;
            let mut pending = self.cache;
            loop {
                self.out.push(pending.wrapping_add(carry));
                pending = 0xFF;
                self.cache_size -= 1;
                if self.cache_size == 0 {
                    break;
                }
            }
            self.cache = (self.low >> 24) as u8;
        }
        self.cache_size += 1;
        self.low = (self.low & 0x00FF_FFFF) << 8;
    }

    pub fn finish(mut self) -> Vec<u8> {
        for _ in 0..5 {
            self.shift_low();
        }
        self.out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Exhausted;

pub struct RangeDecoder<'a> {
    bytes: &'a [u8],
    pos: usize,
    range: u32,
    code: u32,
}

impl<'a> RangeDecoder<'a> {
    pub fn new(bytes: &'a [u8]) -> Result<Self, Exhausted> {
        if bytes.len() < 5 || bytes[0] != 0 {
            return Err(Exhausted);
        }
        let code = u32::from_be_bytes([bytes[1], bytes[2], bytes[3], bytes[4]]);
        Ok(RangeDecoder {
            bytes,
            pos: 5,
            range: u32::MAX,
            code,
        })
    }

    pub fn decode(&mut self, prob: &mut Prob) -> Result<bool, Exhausted> {
        let bound = (self.range >> PROB_BITS) * u32::from(prob.0);
        let bit = if self.code < bound {
            self.range = bound;
            prob.0 += (PROB_ONE - prob.0) >> MOVE_BITS;
            false
        } else {
            self.code -= bound;
            self.range -= bound;
            prob.0 -= prob.0 >> MOVE_BITS;
            true
        };
        while self.range < TOP {
            let byte = *self.bytes.get(self.pos).ok_or(Exhausted)?;
            self.pos += 1;
            self.range <<= 8;
            self.code = (self.code << 8) | u32::from(byte);
        }
        Ok(bit)
    }

    pub fn fully_consumed(&self) -> bool {
        self.pos == self.bytes.len()
    }
}

const MAX_EXP: usize = 32;

/// Adaptive Exp-Golomb model for unsigned integers: unary-coded exponent
/// followed by mantissa bits, each with its own adaptive probability.
#[derive(Clone)]
pub struct UintModel {
    exponent: [Prob; MAX_EXP + 1],
    mantissa: Box<[[Prob; MAX_EXP]; MAX_EXP + 1]>,
}

impl Default for UintModel {
    fn default() -> Self {
        UintModel {
            exponent: [Prob::default(); MAX_EXP + 1],
            mantissa: Box::new([[Prob::default(); MAX_EXP]; MAX_EXP + 1]),
        }
    }
}

impl UintModel {
    pub fn encode(&mut self, enc: &mut RangeEncoder, value: u32) {
        let n = u64::from(value) + 1;
        let k = (63 - n.leading_zeros()) as usize;
        for i in 0..k {
            enc.encode(&mut self.exponent[i], true);
        }
        if k < MAX_EXP {
            enc.encode(&mut self.exponent[k], false);
        }
        for j in (0..k).rev() {
            enc.encode(&mut self.mantissa[k][j], (n >> j) & 1 == 1);
        }
    }

    pub fn decode(&mut self, dec: &mut RangeDecoder<'_>) -> Result<u32, Exhausted> {
        let mut k = 0;
        while k < MAX_EXP && dec.decode(&mut self.exponent[k])? {
            k += 1;
        }
        let mut n: u64 = 1;
        for j in (0..k).rev() {
            n = (n << 1) | u64::from(dec.decode(&mut self.mantissa[k][j])?);
        }
        u32::try_from(n - 1).map_err(|_| Exhausted)
    }
}
