//! Binary greyscale PGM (`P5`), 8- and 16-bit.

use super::{BitDepth, ImageError, RasterImage};

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn skip_whitespace_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while let Some(&c) = self.bytes.get(self.pos) {
                    self.pos += 1;
                    if c == b'\n' || c == b'\r' {
                        break;
                    }
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<u32, ImageError> {
        self.skip_whitespace_and_comments();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(ImageError::MalformedHeader(format!("missing {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| ImageError::MalformedHeader(format!("{what} out of range")))
    }
}

/// Parses a `P5` file. 16-bit samples are big-endian.
pub fn load_pgm(bytes: &[u8]) -> Result<RasterImage, ImageError> {
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        return Err(ImageError::MalformedHeader("missing P5 magic".into()));
    }
    let mut cur = Cursor { bytes, pos: 2 };
    let width = cur.number("width")? as usize;
    let height = cur.number("height")? as usize;
    let maxval = cur.number("maxval")?;
    // exactly one whitespace byte separates the header from the raster
    match bytes.get(cur.pos) {
        Some(b) if b.is_ascii_whitespace() => cur.pos += 1,
        _ => return Err(ImageError::MalformedHeader("no whitespace after maxval".into())),
    }
    let depth = match maxval {
        255 => BitDepth::Eight,
        65535 => BitDepth::Sixteen,
        other => return Err(ImageError::UnsupportedMaxval(other)),
    };
    if width == 0 || height == 0 {
        return Err(ImageError::InvalidDimensions { width, height });
    }
    let expected = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(depth.bytes_per_sample()))
        .ok_or(ImageError::InvalidDimensions { width, height })?;
    let data = &bytes[cur.pos..];
    if data.len() < expected {
        return Err(ImageError::Truncated {
            expected,
            actual: data.len(),
        });
    }
    let samples = match depth {
        BitDepth::Eight => data[..expected].iter().map(|&b| u16::from(b)).collect(),
        BitDepth::Sixteen => data[..expected]
            .chunks_exact(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]))
            .collect(),
    };
    RasterImage::new(width, height, depth, samples)
}

/// Canonical `P5` encoding: `"P5\n<w> <h>\n<maxval>\n"` followed by the raster.
pub fn store_pgm(image: &RasterImage) -> Vec<u8> {
    let header = format!(
        "P5\n{} {}\n{}\n",
        image.width(),
        image.height(),
        image.bit_depth().max_value()
    );
    let mut out = Vec::with_capacity(header.len() + image.raw_byte_len());
    out.extend_from_slice(header.as_bytes());
    match image.bit_depth() {
        BitDepth::Eight => out.extend(image.samples().iter().map(|&s| s as u8)),
        BitDepth::Sixteen => {
            for &s in image.samples() {
                out.extend_from_slice(&s.to_be_bytes());
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn decodes_minimal_file() {
        let mut bytes = b"P5\n2 2\n255\n".to_vec();
        bytes.extend_from_slice(&[0, 1, 2, 3]);
        let img = load_pgm(&bytes).unwrap();
        assert_eq!((img.width(), img.height()), (2, 2));
        assert_eq!(img.bit_depth(), BitDepth::Eight);
        assert_eq!(img.samples(), &[0, 1, 2, 3]);
        assert_eq!(store_pgm(&img), bytes);
    }

    #[test]
    fn encodes_minimal_image() {
        let img = RasterImage::new(1, 1, BitDepth::Eight, vec![0]).unwrap();
        assert_eq!(store_pgm(&img), b"P5\n1 1\n255\n\x00");
    }

    #[test]
    fn sixteen_bit_is_big_endian() {
        let img = RasterImage::new(1, 1, BitDepth::Sixteen, vec![256]).unwrap();
        let bytes = store_pgm(&img);
        assert_eq!(&bytes[bytes.len() - 2..], &[0x01, 0x00]);
        assert_eq!(load_pgm(&bytes).unwrap(), img);
    }

    #[test]
    fn accepts_comments_and_loose_whitespace() {
        let mut bytes = b"P5 # made by hand\n 3\t1 \n# depth\n255\n".to_vec();
        bytes.extend_from_slice(&[9, 8, 7]);
        assert_eq!(load_pgm(&bytes).unwrap().samples(), &[9, 8, 7]);
    }

    #[test]
    fn error_cases() {
        let mut bytes = b"P5\n2 2\n1023\n".to_vec();
        bytes.extend_from_slice(&[0; 8]);
        let err = load_pgm(&bytes).unwrap_err();
        assert_eq!(err, ImageError::UnsupportedMaxval(1023));
        assert!(err.to_string().contains("unsupported maxval"));

        assert!(matches!(
            load_pgm(b"P5\n2 2\n255\n\x00\x01"),
            Err(ImageError::Truncated { expected: 4, actual: 2 })
        ));
        assert!(matches!(load_pgm(b"P2\n1 1\n255\n0"), Err(ImageError::MalformedHeader(_))));
        assert!(matches!(load_pgm(b"P5\n1\n"), Err(ImageError::MalformedHeader(_))));
        assert!(matches!(load_pgm(b"P5\n1 1 255"), Err(ImageError::MalformedHeader(_))));
        assert!(matches!(
            load_pgm(b"P5\n99999999999999999999 1\n255\n"),
            Err(ImageError::MalformedHeader(_))
        ));
    }

    fn arb_image() -> impl Strategy<Value = RasterImage> {
        (1usize..40, 1usize..40, any::<bool>()).prop_flat_map(|(w, h, sixteen)| {
            let (depth, max) = if sixteen {
                (BitDepth::Sixteen, u16::MAX)
            } else {
                (BitDepth::Eight, 255)
            };
            proptest::collection::vec(0..=max, w * h)
                .prop_map(move |s| RasterImage::new(w, h, depth, s).unwrap())
        })
    }

    proptest! {
        #[test]
        fn round_trip_is_bit_exact(img in arb_image()) {
            let bytes = store_pgm(&img);
            let back = load_pgm(&bytes).unwrap();
            prop_assert_eq!(&back, &img);
            prop_assert_eq!(store_pgm(&back), bytes);
        }
    }
}
