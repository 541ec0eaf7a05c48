//! Binary PGM (`P5`) codec.
//!
//! Samples are 8-bit when maxval < 256 and 16-bit big-endian otherwise.

use std::io::Write;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PgmImage {
    pub width: usize,
    pub height: usize,
    pub maxval: u16,
    pub samples: Vec<u16>,
}

fn next_token<'a>(bytes: &'a [u8], pos: &mut usize) -> Result<&'a [u8]> {
    loop {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < bytes.len() && bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
            continue;
        }
        break;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    if start == *pos {
        return Err(Error::Pgm("truncated header".into()));
    }
    Ok(&bytes[start..*pos])
}

fn header_number(bytes: &[u8], pos: &mut usize, what: &str) -> Result<usize> {
    let tok = next_token(bytes, pos)?;
    std::str::from_utf8(tok)
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::Pgm(format!("bad {what} in header")))
}

pub fn decode(bytes: &[u8]) -> Result<PgmImage> {
    let mut pos = 0;
    if next_token(bytes, &mut pos)? != b"P5" {
        return Err(Error::Pgm("not a binary PGM (P5)".into()));
    }
    let width = header_number(bytes, &mut pos, "width")?;
    let height = header_number(bytes, &mut pos, "height")?;
    let maxval = header_number(bytes, &mut pos, "maxval")?;
    if maxval == 0 || maxval > 65535 {
        return Err(Error::Pgm(format!("maxval {maxval} out of range")));
    }
    // exactly one whitespace byte separates the header from the raster
    pos += 1;
    let n = width * height;
    let wide = maxval > 255;
    let need = if wide { 2 * n } else { n };
    let raster = bytes
        .get(pos..pos + need)
        .ok_or_else(|| Error::Pgm(format!("raster truncated: need {need} bytes")))?;
    let samples = if wide {
        raster
            .chunks_exact(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]))
            .collect()
    } else {
        raster.iter().map(|&b| b as u16).collect()
    };
    Ok(PgmImage {
        width,
        height,
        maxval: maxval as u16,
        samples,
    })
}

/// Encodes a 16-bit PGM with maxval 65535.
pub fn encode16(width: usize, height: usize, samples: &[u16]) -> Vec<u8> {
    assert_eq!(samples.len(), width * height);
    let mut out = Vec::with_capacity(samples.len() * 2 + 32);
    write!(out, "P5\n{width} {height}\n65535\n").expect("write to vec");
    for s in samples {
        out.extend_from_slice(&s.to_be_bytes());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sixteen_bit_is_big_endian() {
        let bytes = encode16(2, 1, &[0x0102, 65535]);
        assert!(bytes.ends_with(&[0x01, 0x02, 0xff, 0xff]));
        let img = decode(&bytes).unwrap();
        assert_eq!(img.samples, vec![0x0102, 65535]);
        assert_eq!(img.maxval, 65535);
    }

    #[test]
    fn eight_bit_with_comment() {
        let mut bytes = b"P5\n# depth\n3 1\n255\n".to_vec();
        bytes.extend_from_slice(&[1, 2, 3]);
        let img = decode(&bytes).unwrap();
        assert_eq!((img.width, img.height), (3, 1));
        assert_eq!(img.samples, vec![1, 2, 3]);
    }

    #[test]
    fn rejects_ascii_and_truncated() {
        assert!(decode(b"P2\n1 1\n255\n0\n").is_err());
        assert!(decode(b"P5\n4 4\n65535\n\x00\x01").is_err());
    }
}
