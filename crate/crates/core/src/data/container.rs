//! The shared binary container and the file formats built on it.
//!
//! Layout: 8-byte magic `WDAEPBIN`, version u16 LE, element-type code u8
//! (0 = c128, 1 = f64, 2 = u8), ndim u8, one u32 LE per dimension, the
//! little-endian payload, and a trailing CRC-32 (LE) of the payload bytes.

use std::fs;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::ComplexImage;
use crate::kspace::{KSpaceData, MaskPattern, SamplingMask};

pub const MAGIC: [u8; 8] = *b"WDAEPBIN";
pub const VERSION: u16 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    C128(Vec<Complex64>),
    F64(Vec<f64>),
    U8(Vec<u8>),
}

impl Payload {
    fn type_code(&self) -> u8 {
        match self {
            Payload::C128(_) => 0,
            Payload::F64(_) => 1,
            Payload::U8(_) => 2,
        }
    }

    fn len(&self) -> usize {
        match self {
            Payload::C128(v) => v.len(),
            Payload::F64(v) => v.len(),
            Payload::U8(v) => v.len(),
        }
    }
}

/// Write a file through a temporary sibling so failures never leave a
/// partial output behind.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp_name = path
        .file_name()
        .ok_or_else(|| Error::Io(format!("invalid path {}", path.display())))?
        .to_os_string();
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Serialize a container into bytes.
pub fn container_bytes(dims: &[u32], payload: &Payload) -> Result<Vec<u8>> {
    let expect: u64 = dims.iter().map(|&d| d as u64).product();
    if expect != payload.len() as u64 {
        return Err(Error::Shape(format!(
            "payload length {} does not match dims {:?}",
            payload.len(),
            dims
        )));
    }
    let mut out = Vec::new();
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(payload.type_code());
    out.push(dims.len() as u8);
    for d in dims {
        out.extend_from_slice(&d.to_le_bytes());
    }
    let body_start = out.len();
    match payload {
        Payload::C128(v) => {
            for z in v {
                out.extend_from_slice(&z.re.to_le_bytes());
                out.extend_from_slice(&z.im.to_le_bytes());
            }
        }
        Payload::F64(v) => {
            for x in v {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        Payload::U8(v) => out.extend_from_slice(v),
    }
    let mut hasher = crc32fast::Hasher::new();
    hasher.update(&out[body_start..]);
    out.extend_from_slice(&hasher.finalize().to_le_bytes());
    Ok(out)
}

pub fn write_container(path: &Path, dims: &[u32], payload: &Payload) -> Result<()> {
    atomic_write(path, &container_bytes(dims, payload)?)
}

/// Parse a container from bytes; returns the dims and payload.
pub fn parse_container(bytes: &[u8]) -> Result<(Vec<u32>, Payload)> {
    let fail = |msg: &str| Error::CorruptFile(msg.to_string());
    if bytes.len() < 12 {
        return Err(fail("truncated header"));
    }
    if bytes[..8] != MAGIC {
        return Err(fail("bad magic"));
    }
    let version = u16::from_le_bytes([bytes[8], bytes[9]]);
    if version != VERSION {
        return Err(Error::VersionMismatch {
            found: version,
            expected: VERSION,
        });
    }
    let type_code = bytes[10];
    let ndim = bytes[11] as usize;
    let mut offset = 12;
    if bytes.len() < offset + 4 * ndim {
        return Err(fail("truncated dims"));
    }
    let mut dims = Vec::with_capacity(ndim);
    for _ in 0..ndim {
        dims.push(u32::from_le_bytes(
            bytes[offset..offset + 4].try_into().unwrap(),
        ));
        offset += 4;
    }
    let count: u64 = dims.iter().map(|&d| d as u64).product();
    let elem_size = match type_code {
        0 => 16,
        1 => 8,
        2 => 1,
        _ => return Err(fail("unknown element type")),
    };
    let body_len = (count * elem_size) as usize;
    if bytes.len() != offset + body_len + 4 {
        return Err(fail("payload length does not match dims"));
    }
    let body = &bytes[offset..offset + body_len];
    let stored_crc = u32::from_le_bytes(bytes[offset + body_len..].try_into().unwrap());
    let mut hasher = crc32fast::Hasher::new();
    hasher.update(body);
    if hasher.finalize() != stored_crc {
        return Err(fail("payload checksum mismatch"));
    }
    let payload = match type_code {
        0 => Payload::C128(
            body.chunks_exact(16)
                .map(|c| {
                    Complex64::new(
                        f64::from_le_bytes(c[..8].try_into().unwrap()),
                        f64::from_le_bytes(c[8..].try_into().unwrap()),
                    )
                })
                .collect(),
        ),
        1 => Payload::F64(
            body.chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect(),
        ),
        _ => Payload::U8(body.to_vec()),
    };
    Ok((dims, payload))
}

pub fn read_container(path: &Path) -> Result<(Vec<u32>, Payload)> {
    let bytes = fs::read(path)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_container(&bytes)
}

fn expect_2d(dims: &[u32], path: &Path) -> Result<(usize, usize)> {
    if dims.len() != 2 {
        return Err(Error::CorruptFile(format!(
            "{}: expected 2 dims, found {}",
            path.display(),
            dims.len()
        )));
    }
    Ok((dims[0] as usize, dims[1] as usize))
}

pub fn save_image(path: &Path, image: &ComplexImage) -> Result<()> {
    write_container(
        path,
        &[image.height as u32, image.width as u32],
        &Payload::C128(image.data.clone()),
    )
}

pub fn load_image(path: &Path) -> Result<ComplexImage> {
    let (dims, payload) = read_container(path)?;
    let (h, w) = expect_2d(&dims, path)?;
    match payload {
        Payload::C128(data) => ComplexImage::from_data(h, w, data),
        _ => Err(Error::CorruptFile(format!(
            "{}: expected complex payload",
            path.display()
        ))),
    }
}

pub fn save_kspace(path: &Path, f: &KSpaceData) -> Result<()> {
    write_container(
        path,
        &[f.height as u32, f.width as u32],
        &Payload::C128(f.data.clone()),
    )
}

pub fn load_kspace(path: &Path) -> Result<KSpaceData> {
    let (dims, payload) = read_container(path)?;
    let (h, w) = expect_2d(&dims, path)?;
    match payload {
        Payload::C128(data) => KSpaceData::from_raw(h, w, data),
        _ => Err(Error::CorruptFile(format!(
            "{}: expected complex payload",
            path.display()
        ))),
    }
}

/// Mask metadata header written as a single JSON line ahead of the
/// container bytes.
#[derive(Debug, Serialize, Deserialize)]
struct MaskHeader {
    pattern: String,
    target_r: f64,
    achieved_r: f64,
    seed: u64,
}

pub fn save_mask(path: &Path, mask: &SamplingMask) -> Result<()> {
    let header = MaskHeader {
        pattern: mask.pattern.as_str().to_string(),
        target_r: mask.target_r,
        achieved_r: mask.achieved_r,
        seed: mask.seed,
    };
    let mut bytes = serde_json::to_vec(&header).map_err(|e| Error::Io(e.to_string()))?;
    bytes.push(b'\n');
    let grid: Vec<u8> = mask.samples().iter().map(|&s| s as u8).collect();
    bytes.extend(container_bytes(
        &[mask.height as u32, mask.width as u32],
        &Payload::U8(grid),
    )?);
    atomic_write(path, &bytes)
}

pub fn load_mask(path: &Path) -> Result<SamplingMask> {
    let bytes = fs::read(path)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let nl = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::CorruptFile(format!("{}: missing mask header", path.display())))?;
    let header: MaskHeader = serde_json::from_slice(&bytes[..nl])
        .map_err(|e| Error::CorruptFile(format!("{}: bad mask header: {e}", path.display())))?;
    let (dims, payload) = parse_container(&bytes[nl + 1..])?;
    let (h, w) = expect_2d(&dims, path)?;
    let grid = match payload {
        Payload::U8(g) => g,
        _ => {
            return Err(Error::CorruptFile(format!(
                "{}: expected u8 mask payload",
                path.display()
            )))
        }
    };
    if grid.iter().any(|&b| b > 1) {
        return Err(Error::CorruptFile(format!(
            "{}: mask samples must be 0 or 1",
            path.display()
        )));
    }
    let samples: Vec<bool> = grid.iter().map(|&b| b == 1).collect();
    let mask = SamplingMask::from_samples(
        h,
        w,
        samples,
        MaskPattern::parse(&header.pattern)?,
        header.target_r,
        header.seed,
    )?;
    if (mask.achieved_r - header.achieved_r).abs() > 1e-9 {
        return Err(Error::CorruptFile(format!(
            "{}: stored achieved_r {} does not match grid ({})",
            path.display(),
            header.achieved_r,
            mask.achieved_r
        )));
    }
    Ok(mask)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kspace::mask_radial;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn random_image(h: usize, w: usize, seed: u64) -> ComplexImage {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let data = (0..h * w)
            .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect();
        ComplexImage::from_data(h, w, data).unwrap()
    }

    #[test]
    fn image_round_trip_is_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("img.bin");
        let img = random_image(9, 7, 1);
        save_image(&path, &img).unwrap();
        let back = load_image(&path).unwrap();
        assert_eq!(img, back);
    }

    #[test]
    fn corrupt_payload_byte_is_detected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("img.bin");
        save_image(&path, &random_image(4, 4, 2)).unwrap();
        let mut bytes = fs::read(&path).unwrap();
        let mid = bytes.len() / 2;
        bytes[mid] ^= 0xff;
        fs::write(&path, bytes).unwrap();
        assert!(matches!(load_image(&path), Err(Error::CorruptFile(_))));
    }

    #[test]
    fn version_mismatch_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("img.bin");
        save_image(&path, &random_image(4, 4, 3)).unwrap();
        let mut bytes = fs::read(&path).unwrap();
        bytes[8] = 9;
        fs::write(&path, bytes).unwrap();
        assert!(matches!(
            load_image(&path),
            Err(Error::VersionMismatch { found: 9, .. })
        ));
    }

    #[test]
    fn bad_magic_is_corrupt() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("img.bin");
        fs::write(&path, b"NOTMAGIC-------------").unwrap();
        assert!(matches!(load_image(&path), Err(Error::CorruptFile(_))));
    }

    #[test]
    fn mask_round_trip_preserves_metadata() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.bin");
        let mask = mask_radial(32, 32, 4.0, 11).unwrap();
        save_mask(&path, &mask).unwrap();
        let back = load_mask(&path).unwrap();
        assert_eq!(mask, back);
    }

    #[test]
    fn kspace_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.bin");
        let img = random_image(8, 8, 5);
        let f = KSpaceData::from_raw(8, 8, img.data.clone()).unwrap();
        save_kspace(&path, &f).unwrap();
        assert_eq!(load_kspace(&path).unwrap(), f);
    }
}
