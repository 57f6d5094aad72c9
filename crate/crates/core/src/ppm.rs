//! Binary PGM/PPM (`P5`/`P6`) reading and writing. Samples map to `[0, 1]`
//! by division by `maxval`.

use std::path::Path;

use crate::error::{FormatError, Result};
use crate::image::Image;

fn malformed(msg: impl Into<String>) -> FormatError {
    FormatError::Malformed(msg.into())
}

struct Header {
    channels: usize,
    width: usize,
    height: usize,
    maxval: usize,
    data_start: usize,
}

fn parse_header(buf: &[u8]) -> Result<Header, FormatError> {
    let channels = match buf.get(..2) {
        Some(b"P5") => 1,
        Some(b"P6") => 3,
        _ => return Err(malformed("not a binary PGM/PPM (expected P5 or P6)")),
    };
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for f in &mut fields {
        loop {
            match buf.get(pos) {
                Some(b'#') => {
                    while buf.get(pos).is_some_and(|c| *c != b'\n') {
                        pos += 1;
                    }
                }
                Some(c) if c.is_ascii_whitespace() => pos += 1,
                Some(_) => break,
                None => return Err(malformed("header ends early")),
            }
        }
        let start = pos;
        while buf.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        *f = std::str::from_utf8(&buf[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| malformed("header field is not a number"))?;
    }
    if !buf.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(malformed("missing whitespace after maxval"));
    }
    let [width, height, maxval] = fields;
    if width == 0 || height == 0 {
        return Err(malformed("zero image extent"));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(malformed(format!("maxval {maxval} outside 1..=65535")));
    }
    Ok(Header {
        channels,
        width,
        height,
        maxval,
        data_start: pos + 1,
    })
}

pub fn decode_ppm(buf: &[u8]) -> Result<Image> {
    let h = parse_header(buf)?;
    let bps = if h.maxval < 256 { 1 } else { 2 };
    let n = h.width * h.height * h.channels;
    let available = buf.len() - h.data_start;
    if available < n * bps {
        return Err(FormatError::Truncated {
            offset: h.data_start,
            needed: n * bps,
            available,
        }
        .into());
    }
    let raw = &buf[h.data_start..h.data_start + n * bps];
    let m = h.maxval as f64;
    let data = if bps == 1 {
        raw.iter().map(|b| *b as f64 / m).collect()
    } else {
        raw.chunks_exact(2)
            .map(|p| u16::from_be_bytes([p[0], p[1]]) as f64 / m)
            .collect()
    };
    Image::new(h.height, h.width, h.channels, data)
}

/// 8-bit `P6` (or `P5` for one channel); values are clamped to `[0, 1]` and rounded.
pub fn encode_ppm(img: &Image) -> Result<Vec<u8>> {
    encode(img, 255)
}

/// 16-bit variant, for coefficient views that need more than 8 bits.
pub fn encode_ppm16(img: &Image) -> Result<Vec<u8>> {
    encode(img, 65535)
}

fn encode(img: &Image, maxval: u16) -> Result<Vec<u8>> {
    let (h, w, c) = img.dims();
    let magic = match c {
        1 => "P5",
        3 => "P6",
        _ => return Err(crate::error::invalid(format!("PPM output needs 1 or 3 channels, got {c}"))),
    };
    let mut out = format!("{magic}\n{w} {h}\n{maxval}\n").into_bytes();
    let m = maxval as f64;
    for v in img.data() {
        let q = (v.clamp(0.0, 1.0) * m).round() as u16;
        if maxval < 256 {
            out.push(q as u8);
        } else {
            out.extend_from_slice(&q.to_be_bytes());
        }
    }
    Ok(out)
}

pub fn read_ppm(path: &Path) -> Result<Image> {
    decode_ppm(&std::fs::read(path)?)
}

pub fn write_ppm(path: &Path, img: &Image) -> Result<()> {
    Ok(std::fs::write(path, encode_ppm(img)?)?)
}
