//! The MRI forward model: unitary centered 2D Fourier transform, partial
//! encoding, zero-filled adjoint, and the sampling-mask generators.

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::image::ComplexImage;

/// Full k-space spectrum with DC at the grid center `(h/2, w/2)`.
pub type KSpaceGrid = ComplexImage;

/// Measured k-space samples; exact zeros wherever the mask is false.
#[derive(Debug, Clone, PartialEq)]
pub struct KSpaceData {
    pub height: usize,
    pub width: usize,
    pub data: Vec<Complex64>,
}

impl KSpaceData {
    /// Restrict a full spectrum to the sampled locations.
    pub fn from_grid(grid: &KSpaceGrid, mask: &SamplingMask) -> Result<KSpaceData> {
        if grid.height != mask.height || grid.width != mask.width {
            return Err(Error::Shape(format!(
                "k-space grid {}x{} vs mask {}x{}",
                grid.height, grid.width, mask.height, mask.width
            )));
        }
        let data = grid
            .data
            .iter()
            .zip(mask.samples())
            .map(|(z, &s)| if s { *z } else { Complex64::new(0.0, 0.0) })
            .collect();
        Ok(KSpaceData {
            height: grid.height,
            width: grid.width,
            data,
        })
    }

    pub fn from_raw(height: usize, width: usize, data: Vec<Complex64>) -> Result<KSpaceData> {
        if data.len() != height * width {
            return Err(Error::Shape(format!(
                "k-space data length {} does not match {height}x{width}",
                data.len()
            )));
        }
        Ok(KSpaceData { height, width, data })
    }

    pub fn as_grid(&self) -> KSpaceGrid {
        ComplexImage {
            height: self.height,
            width: self.width,
            data: self.data.clone(),
        }
    }

    pub fn inner(&self, other: &KSpaceData) -> Complex64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a * b.conj())
            .sum()
    }
}

/// Circular roll helper shared by fftshift/ifftshift.
fn roll(u: &ComplexImage, down: usize, right: usize) -> ComplexImage {
    u.circshift(down, right)
}

/// Move DC from index (0,0) to the grid center.
pub fn fftshift(u: &ComplexImage) -> ComplexImage {
    roll(u, u.height / 2, u.width / 2)
}

/// Inverse of [`fftshift`].
pub fn ifftshift(u: &ComplexImage) -> ComplexImage {
    roll(u, u.height - u.height / 2, u.width - u.width / 2)
}

fn fft2_raw(u: &ComplexImage, inverse: bool) -> ComplexImage {
    let (h, w) = (u.height, u.width);
    let mut planner = FftPlanner::new();
    let row_fft = if inverse {
        planner.plan_fft_inverse(w)
    } else {
        planner.plan_fft_forward(w)
    };
    let col_fft = if inverse {
        planner.plan_fft_inverse(h)
    } else {
        planner.plan_fft_forward(h)
    };

    let mut buf = u.data.clone();
    row_fft.process(&mut buf);

    // transpose, run columns as rows, transpose back
    let mut t = vec![Complex64::new(0.0, 0.0); h * w];
    for i in 0..h {
        for j in 0..w {
            t[j * h + i] = buf[i * w + j];
        }
    }
    col_fft.process(&mut t);
    for i in 0..h {
        for j in 0..w {
            buf[i * w + j] = t[j * h + i];
        }
    }

    let scale = 1.0 / ((h * w) as f64).sqrt();
    for z in &mut buf {
        *z *= scale;
    }
    ComplexImage {
        height: h,
        width: w,
        data: buf,
    }
}

/// Unitary 2D DFT with DC at the grid center.
pub fn fft2_unitary(u: &ComplexImage) -> KSpaceGrid {
    fftshift(&fft2_raw(u, false))
}

/// Unitary inverse of [`fft2_unitary`].
pub fn ifft2_unitary(k: &KSpaceGrid) -> ComplexImage {
    fft2_raw(&ifftshift(k), true)
}

/// Sampling pattern of a mask.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaskPattern {
    Cartesian1d,
    Radial,
    Random2d,
}

impl MaskPattern {
    pub fn as_str(&self) -> &'static str {
        match self {
            MaskPattern::Cartesian1d => "cartesian1d",
            MaskPattern::Radial => "radial",
            MaskPattern::Random2d => "random2d",
        }
    }

    pub fn parse(s: &str) -> Result<MaskPattern> {
        match s {
            "cartesian1d" => Ok(MaskPattern::Cartesian1d),
            "radial" => Ok(MaskPattern::Radial),
            "random2d" => Ok(MaskPattern::Random2d),
            _ => Err(Error::Config(format!("unknown mask pattern '{s}'"))),
        }
    }
}

/// Boolean k-space sampling pattern, stored with DC at the grid center.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingMask {
    pub height: usize,
    pub width: usize,
    samples: Vec<bool>,
    pub pattern: MaskPattern,
    pub target_r: f64,
    pub achieved_r: f64,
    pub seed: u64,
}

/// Relative tolerance on the achieved acceleration factor.
pub const ACCELERATION_TOLERANCE: f64 = 0.05;

impl SamplingMask {
    /// Wrap an explicit sample grid; recomputes the achieved acceleration.
    pub fn from_samples(
        height: usize,
        width: usize,
        samples: Vec<bool>,
        pattern: MaskPattern,
        target_r: f64,
        seed: u64,
    ) -> Result<SamplingMask> {
        if samples.len() != height * width {
            return Err(Error::Shape(format!(
                "mask sample length {} does not match {height}x{width}",
                samples.len()
            )));
        }
        let count = samples.iter().filter(|&&s| s).count();
        if count == 0 {
            return Err(Error::Mask("mask samples nothing".into()));
        }
        let achieved_r = (height * width) as f64 / count as f64;
        Ok(SamplingMask {
            height,
            width,
            samples,
            pattern,
            target_r,
            achieved_r,
            seed,
        })
    }

    pub fn samples(&self) -> &[bool] {
        &self.samples
    }

    #[inline]
    pub fn at(&self, row: usize, col: usize) -> bool {
        self.samples[row * self.width + col]
    }

    pub fn count_sampled(&self) -> usize {
        self.samples.iter().filter(|&&s| s).count()
    }

    /// Grid-center (DC) coordinates.
    pub fn center(&self) -> (usize, usize) {
        (self.height / 2, self.width / 2)
    }
}

fn check_tolerance(mask: SamplingMask) -> Result<SamplingMask> {
    let rel = (mask.achieved_r - mask.target_r).abs() / mask.target_r;
    if rel > ACCELERATION_TOLERANCE {
        return Err(Error::Mask(format!(
            "achieved acceleration {:.4} misses target {:.4} by {:.1}% (> {:.0}%)",
            mask.achieved_r,
            mask.target_r,
            rel * 100.0,
            ACCELERATION_TOLERANCE * 100.0
        )));
    }
    Ok(mask)
}

/// Apply the partial Fourier encoding `m .* F u`.
pub fn encode(u: &ComplexImage, mask: &SamplingMask) -> Result<KSpaceData> {
    if u.height != mask.height || u.width != mask.width {
        return Err(Error::Shape(format!(
            "image {}x{} vs mask {}x{}",
            u.height, u.width, mask.height, mask.width
        )));
    }
    KSpaceData::from_grid(&fft2_unitary(u), mask)
}

/// Zero-filled adjoint reconstruction `F^T (m .* f)`, the solver's initializer.
pub fn zero_filled(f: &KSpaceData, mask: &SamplingMask) -> Result<ComplexImage> {
    if f.height != mask.height || f.width != mask.width {
        return Err(Error::Shape(format!(
            "k-space {}x{} vs mask {}x{}",
            f.height, f.width, mask.height, mask.width
        )));
    }
    let masked = KSpaceData::from_grid(&f.as_grid(), mask)?;
    Ok(ifft2_unitary(&masked.as_grid()))
}

/// Add complex Gaussian noise to the sampled entries; `std` is the standard
/// deviation per complex sample (each component gets `std / sqrt(2)`).
pub fn add_measurement_noise(f: &mut KSpaceData, mask: &SamplingMask, std: f64, seed: u64) {
    if std <= 0.0 {
        return;
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let comp = std / std::f64::consts::SQRT_2;
    for (z, &s) in f.data.iter_mut().zip(mask.samples()) {
        // fixed draw order keeps the noise deterministic per seed
        let (re, im): (f64, f64) = (
            rng.sample(rand_distr::StandardNormal),
            rng.sample(rand_distr::StandardNormal),
        );
        if s {
            *z += Complex64::new(comp * re, comp * im);
        }
    }
}

/// 1D Cartesian mask: full rows are sampled or skipped.
pub fn mask_cartesian1d(
    height: usize,
    width: usize,
    target_r: f64,
    center_fraction: f64,
    seed: u64,
) -> Result<SamplingMask> {
    if target_r <= 1.0 {
        return Err(Error::Config(format!(
            "target acceleration must exceed 1, got {target_r}"
        )));
    }
    if !(0.0..=1.0).contains(&center_fraction) {
        return Err(Error::Config(format!(
            "center_fraction must be in [0, 1], got {center_fraction}"
        )));
    }
    let hf = height as f64;
    if center_fraction * hf > hf / target_r {
        return Err(Error::Config(format!(
            "center_fraction {center_fraction} exceeds the line budget 1/target_r"
        )));
    }
    let n_lines = (hf / target_r).round() as usize;
    let n_center = (center_fraction * hf).round() as usize;
    if n_lines == 0 || n_center > n_lines {
        return Err(Error::Config(format!(
            "infeasible line counts: {n_lines} lines, {n_center} center lines"
        )));
    }

    let dc_row = height / 2;
    let center_start = dc_row - n_center / 2;
    let mut row_sampled = vec![false; height];
    for r in center_start..center_start + n_center {
        row_sampled[r] = true;
    }

    let mut rest: Vec<usize> = (0..height).filter(|r| !row_sampled[*r]).collect();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    // partial Fisher-Yates: the first n_lines - n_center entries are a
    // uniform draw without replacement
    let need = n_lines - n_center;
    for i in 0..need {
        let j = i + rng.random_range(0..rest.len() - i);
        rest.swap(i, j);
        row_sampled[rest[i]] = true;
    }

    let mut samples = vec![false; height * width];
    for r in 0..height {
        if row_sampled[r] {
            samples[r * width..(r + 1) * width].fill(true);
        }
    }
    check_tolerance(SamplingMask::from_samples(
        height,
        width,
        samples,
        MaskPattern::Cartesian1d,
        target_r,
        seed,
    )?)
}

/// Pseudo-radial mask: equiangular spokes through the DC sample, with the
/// spoke count searched so the achieved acceleration lands within tolerance.
pub fn mask_radial(height: usize, width: usize, target_r: f64, seed: u64) -> Result<SamplingMask> {
    if target_r <= 1.0 {
        return Err(Error::Config(format!(
            "target acceleration must exceed 1, got {target_r}"
        )));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let offset = rng.random::<f64>() * std::f64::consts::PI;

    let cy = (height / 2) as f64;
    let cx = (width / 2) as f64;
    let t_max = ((height * height + width * width) as f64).sqrt() / 2.0 + 1.0;

    let rasterize = |spokes: usize| -> Vec<bool> {
        let mut samples = vec![false; height * width];
        let mut set = |py: i64, px: i64| {
            if py >= 0 && py < height as i64 && px >= 0 && px < width as i64 {
                samples[py as usize * width + px as usize] = true;
            }
        };
        for k in 0..spokes {
            let theta = offset + k as f64 * std::f64::consts::PI / spokes as f64;
            let (dy, dx) = (theta.sin(), theta.cos());
            let mut t = 0.0;
            while t <= t_max {
                let py = (cy + t * dy).round() as i64;
                let px = (cx + t * dx).round() as i64;
                set(py, px);
                // mirrored twin keeps the mask point-symmetric about DC
                set(2 * (height as i64 / 2) - py, 2 * (width as i64 / 2) - px);
                t += 0.25;
            }
        }
        samples
    };
    let achieved = |samples: &[bool]| -> f64 {
        (height * width) as f64 / samples.iter().filter(|&&s| s).count() as f64
    };

    // achieved R decreases (weakly) as spokes increase; bracket then bisect
    let mut hi = 1usize;
    let limit = 8 * (height + width);
    while achieved(&rasterize(hi)) > target_r {
        hi *= 2;
        if hi > limit {
            return Err(Error::Mask(format!(
                "target acceleration {target_r} unreachable with radial spokes on {height}x{width}"
            )));
        }
    }
    let mut lo = hi / 2;
    if lo == 0 {
        lo = 1;
    }
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if achieved(&rasterize(mid)) > target_r {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // pick the closer of the two bracketing counts
    let mut best: Option<(f64, usize, Vec<bool>)> = None;
    for s in [lo, hi] {
        let samples = rasterize(s);
        let r = achieved(&samples);
        let rel = (r - target_r).abs() / target_r;
        if best.as_ref().map_or(true, |(b, _, _)| rel < *b) {
            best = Some((rel, s, samples));
        }
    }
    let (_, _, samples) = best.unwrap();
    check_tolerance(SamplingMask::from_samples(
        height,
        width,
        samples,
        MaskPattern::Radial,
        target_r,
        seed,
    )?)
}

/// Variable-density 2D random mask with a fully sampled center disk and
/// exact sample count. Inclusion probability falls off as
/// `(1 + r / r_max)^(-decay_power)`.
pub fn mask_random2d(
    height: usize,
    width: usize,
    target_r: f64,
    decay_power: f64,
    center_fraction: f64,
    seed: u64,
) -> Result<SamplingMask> {
    if target_r <= 1.0 {
        return Err(Error::Config(format!(
            "target acceleration must exceed 1, got {target_r}"
        )));
    }
    if decay_power < 0.0 {
        return Err(Error::Config(format!(
            "decay_power must be nonnegative, got {decay_power}"
        )));
    }
    if !(0.0..=1.0).contains(&center_fraction) {
        return Err(Error::Config(format!(
            "center_fraction must be in [0, 1], got {center_fraction}"
        )));
    }
    let n = height * width;
    let n_target = ((n as f64) / target_r).round() as usize;
    if n_target == 0 {
        return Err(Error::Config("target sample count rounds to zero".into()));
    }

    let (cy, cx) = ((height / 2) as f64, (width / 2) as f64);
    let disk_radius = center_fraction * (height.min(width) as f64) / 2.0;
    let mut r_max: f64 = 0.0;
    let mut radius = vec![0.0; n];
    for i in 0..height {
        for j in 0..width {
            let r = ((i as f64 - cy).powi(2) + (j as f64 - cx).powi(2)).sqrt();
            radius[i * width + j] = r;
            r_max = r_max.max(r);
        }
    }
    if r_max == 0.0 {
        r_max = 1.0;
    }

    let disk: Vec<bool> = radius.iter().map(|&r| r <= disk_radius).collect();
    let n_disk = disk.iter().filter(|&&d| d).count();
    if n_disk > n_target {
        return Err(Error::Config(format!(
            "center disk holds {n_disk} samples but the budget is {n_target}"
        )));
    }

    let density: Vec<f64> = radius
        .iter()
        .map(|&r| (1.0 + r / r_max).powf(-decay_power))
        .collect();
    let free_mass: f64 = density
        .iter()
        .zip(&disk)
        .filter(|(_, &d)| !d)
        .map(|(p, _)| *p)
        .sum();
    let scale = (n_target - n_disk) as f64 / free_mass;

    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut samples = disk.clone();
    let mut prob = vec![0.0; n];
    for idx in 0..n {
        let q = (scale * density[idx]).min(1.0);
        prob[idx] = q;
        // one draw per pixel regardless of disk membership keeps the
        // stream aligned across parameter changes
        let draw = rng.random::<f64>();
        if !disk[idx] && draw < q {
            samples[idx] = true;
        }
    }

    // enforce the exact sample count deterministically
    let mut count = samples.iter().filter(|&&s| s).count();
    if count > n_target {
        let mut included: Vec<usize> = (0..n).filter(|&i| samples[i] && !disk[i]).collect();
        included.sort_by(|&a, &b| prob[a].partial_cmp(&prob[b]).unwrap().then(a.cmp(&b)));
        for &idx in included.iter().take(count - n_target) {
            samples[idx] = false;
        }
    } else if count < n_target {
        let mut excluded: Vec<usize> = (0..n).filter(|&i| !samples[i]).collect();
        excluded.sort_by(|&a, &b| {
            prob[b]
                .partial_cmp(&prob[a])
                .unwrap()
                .then(a.cmp(&b))
        });
        for &idx in excluded.iter().take(n_target - count) {
            samples[idx] = true;
        }
    }
    count = samples.iter().filter(|&&s| s).count();
    debug_assert_eq!(count, n_target);

    check_tolerance(SamplingMask::from_samples(
        height,
        width,
        samples,
        MaskPattern::Random2d,
        target_r,
        seed,
    )?)
}
