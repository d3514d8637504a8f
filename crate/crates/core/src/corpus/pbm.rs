//! Binary portable bitmap (P4). A set bit is ink.

use super::GlyphBitmap;
use crate::error::{Error, Result};

pub fn encode(bitmap: &GlyphBitmap) -> Vec<u8> {
    let (w, h) = (bitmap.width(), bitmap.height());
    let mut out = format!("P4\n{w} {h}\n").into_bytes();
    let row_bytes = w.div_ceil(8);
    for y in 0..h {
        let mut row = vec![0u8; row_bytes];
        for x in 0..w {
            if bitmap.get(x, y) != 0 {
                row[x / 8] |= 0x80 >> (x % 8);
            }
        }
        out.extend_from_slice(&row);
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<GlyphBitmap> {
    let mut pos = 0;
    let magic = next_token(bytes, &mut pos)?;
    if magic != b"P4" {
        return Err(Error::Format("not a P4 bitmap".into()));
    }
    let w = parse_dim(next_token(bytes, &mut pos)?)?;
    let h = parse_dim(next_token(bytes, &mut pos)?)?;
    // exactly one whitespace byte separates the header from the raster
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(Error::Format("truncated P4 header".into()));
    }
    pos += 1;
    let row_bytes = w.div_ceil(8);
    let data = &bytes[pos..];
    if data.len() < row_bytes * h {
        return Err(Error::Format(format!(
            "P4 raster has {} bytes, expected {}",
            data.len(),
            row_bytes * h
        )));
    }
    let mut pixels = Vec::with_capacity(w * h);
    for y in 0..h {
        let row = &data[y * row_bytes..(y + 1) * row_bytes];
        for x in 0..w {
            pixels.push((row[x / 8] >> (7 - x % 8)) & 1);
        }
    }
    GlyphBitmap::new(w, h, pixels)
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
        return Err(Error::Format("truncated P4 header".into()));
    }
    Ok(&bytes[start..*pos])
}

fn parse_dim(tok: &[u8]) -> Result<usize> {
    std::str::from_utf8(tok)
        .ok()
        .and_then(|s| s.parse::<usize>().ok())
        .filter(|&d| d > 0)
        .ok_or_else(|| Error::Format("bad P4 dimension".into()))
}
