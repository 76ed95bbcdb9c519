//! Aligned 8-channel patch extraction from wavelet tensors.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::prior::Tensor;
use crate::wavelet::{WaveletTensor, WAVELET_CHANNELS};

/// Crop all patches on a stride grid; with `max_count` the grid positions
/// are shuffled by the seed and truncated, otherwise they come back in
/// row-major order.
pub fn extract_patches(
    t: &WaveletTensor,
    patch: usize,
    stride: usize,
    max_count: Option<usize>,
    seed: u64,
) -> Result<Vec<Tensor>> {
    if patch == 0 || stride == 0 {
        return Err(Error::Config("patch and stride must be positive".into()));
    }
    if patch > t.height || patch > t.width {
        return Err(Error::Config(format!(
            "patch {patch} does not fit in a {}x{} tensor",
            t.height, t.width
        )));
    }
    let mut positions = Vec::new();
    let mut row = 0;
    while row + patch <= t.height {
        let mut col = 0;
        while col + patch <= t.width {
            positions.push((row, col));
            col += stride;
        }
        row += stride;
    }
    if let Some(k) = max_count {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        positions.shuffle(&mut rng);
        positions.truncate(k);
    }

    let mut out = Vec::with_capacity(positions.len());
    for (row, col) in positions {
        let mut p = Tensor::zeros(1, WAVELET_CHANNELS, patch, patch);
        for c in 0..WAVELET_CHANNELS {
            let src = t.channel(c);
            let dst = p.plane_mut(0, c);
            for i in 0..patch {
                let s = (row + i) * t.width + col;
                dst[i * patch..(i + 1) * patch].copy_from_slice(&src[s..s + patch]);
            }
        }
        out.push(p);
    }
    Ok(out)
}

/// Seeded shuffle-and-truncate for a patch pool assembled across images.
pub fn shuffle_truncate(patches: &mut Vec<Tensor>, max_count: usize, seed: u64) {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    patches.shuffle(&mut rng);
    patches.truncate(max_count);
}
