use std::path::Path;

use crate::tensor::Tensor;

use super::{DataError, Result};

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    /// Skips whitespace and `#` comments.
    fn skip_separators(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while self.bytes.get(self.pos).is_some_and(|&c| c != b'\n' && c != b'\r') {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self) -> Option<u32> {
        self.skip_separators();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        std::str::from_utf8(&self.bytes[start..self.pos]).ok()?.parse().ok()
    }
}

/// Decodes a P2 or P5 graymap into an `[H, W]` tensor scaled to [0, 1].
pub fn decode_pgm(bytes: &[u8], origin: &str) -> Result<Tensor> {
    let fail = |m: &str| DataError::Format { path: origin.to_string(), message: m.to_string() };
    let binary = match bytes.get(..2) {
        Some(b"P5") => true,
        Some(b"P2") => false,
        _ => return Err(fail("bad magic (expected P2 or P5)")),
    };
    let mut cur = Cursor { bytes, pos: 2 };
    let width = cur.number().ok_or_else(|| fail("missing width"))? as usize;
    let height = cur.number().ok_or_else(|| fail("missing height"))? as usize;
    let maxval = cur.number().ok_or_else(|| fail("missing maxval"))?;
    if width == 0 || height == 0 {
        return Err(fail("zero image extent"));
    }
    if !(1..=65535).contains(&maxval) {
        return Err(fail("maxval must lie in 1..=65535"));
    }
    let n = width.checked_mul(height).ok_or_else(|| fail("image too large"))?;
    let scale = maxval as f64;
    let mut data = Vec::with_capacity(n);
    if binary {
        // exactly one whitespace byte separates the header from the raster
        if !bytes.get(cur.pos).is_some_and(u8::is_ascii_whitespace) {
            return Err(fail("missing separator after maxval"));
        }
        let raster = &bytes[cur.pos + 1..];
        let wide = maxval > 255;
        let need = if wide { 2 * n } else { n };
        if raster.len() < need {
            return Err(fail(&format!("truncated payload: {} of {need} bytes", raster.len())));
        }
        for i in 0..n {
            let v = if wide { u16::from_be_bytes([raster[2 * i], raster[2 * i + 1]]) as u32 } else { raster[i] as u32 };
            if v > maxval {
                return Err(fail(&format!("sample {v} exceeds maxval {maxval}")));
            }
            data.push(v as f64 / scale);
        }
    } else {
        for _ in 0..n {
            let v = cur.number().ok_or_else(|| fail("truncated payload"))?;
            if v > maxval {
                return Err(fail(&format!("sample {v} exceeds maxval {maxval}")));
            }
            data.push(v as f64 / scale);
        }
    }
    Tensor::new(vec![height, width], data).map_err(|e| fail(&e.to_string()))
}

pub fn read_pgm(path: &Path) -> Result<Tensor> {
    let bytes = std::fs::read(path).map_err(|e| DataError::io(path, e))?;
    decode_pgm(&bytes, &path.display().to_string())
}

/// Encodes `[H, W]` (or `[1, H, W]`) values in [0, 1] as P5 with maxval 255.
/// Out-of-range values are clamped; NaN becomes 0.
pub fn encode_pgm(image: &Tensor) -> Result<Vec<u8>> {
    let (h, w) = match image.shape() {
        [h, w] | [1, h, w] => (*h, *w),
        other => return Err(DataError::Argument(format!("write_pgm expects [H, W], got {other:?}"))),
    };
    let mut out = format!("P5\n{w} {h}\n255\n").into_bytes();
    out.extend(image.data().iter().map(|&v| {
        let v = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
        (v * 255.0).round() as u8
    }));
    Ok(out)
}

pub fn write_pgm(image: &Tensor, path: &Path) -> Result<()> {
    let bytes = encode_pgm(image)?;
    std::fs::write(path, bytes).map_err(|e| DataError::io(path, e))
}
