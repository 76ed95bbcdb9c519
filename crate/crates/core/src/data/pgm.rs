//! 16-bit binary PGM export of magnitude images.

use std::path::Path;

use crate::data::container::atomic_write;
use crate::error::{Error, Result};
use crate::image::ComplexImage;

/// Write raw 16-bit samples as a P5 graymap (big-endian, maxval 65535).
pub fn write_pgm16(path: &Path, height: usize, width: usize, samples: &[u16]) -> Result<()> {
    if samples.len() != height * width {
        return Err(Error::Shape(format!(
            "pgm sample count {} does not match {height}x{width}",
            samples.len()
        )));
    }
    let mut bytes = format!("P5\n{width} {height}\n65535\n").into_bytes();
    for v in samples {
        bytes.extend_from_slice(&v.to_be_bytes());
    }
    atomic_write(path, &bytes)
}

/// Write the magnitude of `u` as a P5 graymap with maxval 65535, linearly
/// scaled so the largest magnitude maps to 65535. A zero image exports as
/// all zeros.
pub fn export_pgm(u: &ComplexImage, path: &Path) -> Result<()> {
    let mags = u.magnitude();
    let max = mags.iter().cloned().fold(0.0f64, f64::max);
    let samples: Vec<u16> = mags
        .iter()
        .map(|m| {
            if max > 0.0 {
                (m / max * 65535.0).round() as u16
            } else {
                0
            }
        })
        .collect();
    write_pgm16(path, u.height, u.width, &samples)
}

/// Parse a P5 16-bit graymap back; used to verify exports.
pub fn read_pgm16(path: &Path) -> Result<(usize, usize, Vec<u16>)> {
    let bytes = std::fs::read(path)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let fail = |msg: &str| Error::CorruptFile(format!("{}: {msg}", path.display()));
    // header: three whitespace-separated tokens after the magic
    let mut pos = 0usize;
    let mut token = |bytes: &[u8]| -> Result<String> {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(fail("truncated header"));
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };
    if token(&bytes)? != "P5" {
        return Err(fail("not a P5 graymap"));
    }
    let width: usize = token(&bytes)?.parse().map_err(|_| fail("bad width"))?;
    let height: usize = token(&bytes)?.parse().map_err(|_| fail("bad height"))?;
    let maxval: usize = token(&bytes)?.parse().map_err(|_| fail("bad maxval"))?;
    if maxval != 65535 {
        return Err(fail("expected 16-bit maxval"));
    }
    pos += 1; // single whitespace after maxval
    let body = &bytes[pos..];
    if body.len() != height * width * 2 {
        return Err(fail("sample count does not match dims"));
    }
    let samples = body
        .chunks_exact(2)
        .map(|c| u16::from_be_bytes([c[0], c[1]]))
        .collect();
    Ok((height, width, samples))
}
