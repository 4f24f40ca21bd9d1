//! Binary PPM (P6) reading and writing.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::{quantize, Image, ImageShape};
use crate::error::{Error, Result};

struct Header {
    width: usize,
    height: usize,
    maxval: usize,
    data_offset: usize,
}

fn parse_header(bytes: &[u8]) -> std::result::Result<Header, String> {
    if bytes.len() < 2 || &bytes[..2] != b"P6" {
        return Err("missing P6 magic".into());
    }
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in fields.iter_mut() {
        // whitespace and comments
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                Some(_) => break,
                None => return Err("truncated header".into()),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(|b| b.is_ascii_digit()) {
            pos += 1;
        }
        if start == pos {
            return Err(format!("expected a number at byte {start}"));
        }
        let text = std::str::from_utf8(&bytes[start..pos]).map_err(|e| e.to_string())?;
        *field = text.parse().map_err(|e| format!("bad header number {text:?}: {e}"))?;
    }
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => return Err("missing whitespace after maxval".into()),
    }
    let [width, height, maxval] = fields;
    if width == 0 || height == 0 {
        return Err(format!("degenerate size {width}x{height}"));
    }
    if maxval == 0 || maxval > 255 {
        return Err(format!("unsupported maxval {maxval}"));
    }
    Ok(Header {
        width,
        height,
        maxval,
        data_offset: pos,
    })
}

pub fn read_ppm(path: &Path) -> Result<Image> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let bad = |reason: String| Error::Ppm {
        path: path.to_path_buf(),
        reason,
    };
    let header = parse_header(&bytes).map_err(bad)?;
    let shape = ImageShape::new(header.height, header.width, 3);
    let body = &bytes[header.data_offset..];
    if body.len() < shape.len() {
        return Err(bad(format!(
            "pixel data has {} bytes, expected {}",
            body.len(),
            shape.len()
        )));
    }
    let scale = header.maxval as f64;
    let data = body[..shape.len()]
        .iter()
        .map(|&b| (b as f64 / scale).min(1.0))
        .collect();
    Image::new(shape, data)
}

/// Writes a 3-channel image as P6 with maxval 255.
pub fn write_ppm(path: &Path, img: &Image) -> Result<()> {
    let shape = img.shape();
    if shape.channels != 3 {
        return Err(Error::invalid(format!(
            "P6 output needs 3 channels, image has {}",
            shape.channels
        )));
    }
    let mut buf = Vec::with_capacity(shape.len() + 32);
    write!(buf, "P6\n{} {}\n255\n", shape.width, shape.height).expect("write to Vec");
    buf.extend(img.data().iter().map(|&v| quantize(v)));
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}
