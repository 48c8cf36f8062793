//! Binary PGM (P5, maxval 255).

use crate::error::{Error, Result};

pub fn encode(width: usize, height: usize, pixels: &[u8]) -> Vec<u8> {
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(pixels);
    out
}

/// Parses a P5 file with maxval <= 255. Returns (width, height, pixels).
pub fn decode(bytes: &[u8]) -> Result<(usize, usize, Vec<u8>)> {
    let mut pos = 0;
    let mut fields = Vec::with_capacity(4);
    while fields.len() < 4 {
        // skip whitespace and comments
        while pos < bytes.len() {
            match bytes[pos] {
                b'#' => {
                    while pos < bytes.len() && bytes[pos] != b'\n' {
                        pos += 1;
                    }
                }
                b if b.is_ascii_whitespace() => pos += 1,
                _ => break,
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() && bytes[pos] != b'#' {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Image(format!("PGM header ends early at byte offset {pos}")));
        }
        fields.push((start, String::from_utf8_lossy(&bytes[start..pos]).into_owned()));
    }
    if fields[0].1 != "P5" {
        return Err(Error::Image(format!("not a binary PGM: magic `{}` at byte offset 0", fields[0].1)));
    }
    let mut nums = [0usize; 3];
    for (i, (offset, text)) in fields[1..].iter().enumerate() {
        nums[i] = text
            .parse()
            .map_err(|_| Error::Image(format!("bad PGM header field `{text}` at byte offset {offset}")))?;
    }
    let [width, height, maxval] = nums;
    if maxval == 0 || maxval > 255 {
        return Err(Error::Image(format!("unsupported PGM maxval {maxval}")));
    }
    // exactly one whitespace byte separates the header from the raster
    pos += 1;
    let need = width * height;
    let raster = bytes.get(pos..).unwrap_or_default();
    if raster.len() != need {
        return Err(Error::Image(format!(
            "PGM raster at byte offset {pos} has {} bytes, expected {need}",
            raster.len()
        )));
    }
    Ok((width, height, raster.to_vec()))
}
