//! Image-quality metrics on magnitude images: PSNR, SSIM, and the
//! high-frequency error norm computed with a 15x15 sigma=1.5 LoG kernel.

use crate::error::{Error, Result};
use crate::image::ComplexImage;

/// Rotationally symmetric Laplacian-of-Gaussian kernel, mean-subtracted so
/// the taps sum to zero.
#[derive(Debug, Clone)]
pub struct LogKernel {
    pub size: usize,
    pub sigma: f64,
    taps: Vec<f64>,
}

impl LogKernel {
    pub fn new(size: usize, sigma: f64) -> LogKernel {
        assert!(size % 2 == 1, "LoG kernel size must be odd");
        let half = (size / 2) as isize;
        let s2 = sigma * sigma;
        let mut gauss = vec![0.0; size * size];
        let mut gsum = 0.0;
        for i in -half..=half {
            for j in -half..=half {
                let r2 = (i * i + j * j) as f64;
                let g = (-r2 / (2.0 * s2)).exp();
                gauss[((i + half) * size as isize + (j + half)) as usize] = g;
                gsum += g;
            }
        }
        let mut taps = vec![0.0; size * size];
        for i in -half..=half {
            for j in -half..=half {
                let idx = ((i + half) * size as isize + (j + half)) as usize;
                let r2 = (i * i + j * j) as f64;
                taps[idx] = gauss[idx] * (r2 - 2.0 * s2) / (s2 * s2 * gsum);
            }
        }
        let mean = taps.iter().sum::<f64>() / taps.len() as f64;
        for t in &mut taps {
            *t -= mean;
        }
        LogKernel { size, sigma, taps }
    }

    /// The paper's kernel: 15x15 taps, sigma 1.5 pixels.
    pub fn default_paper() -> LogKernel {
        LogKernel::new(15, 1.5)
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.taps[i * self.size + j]
    }
}

/// Symmetric (half-sample mirror) index for filtering near borders.
#[inline]
fn mirror(idx: isize, n: usize) -> usize {
    let n = n as isize;
    let mut i = idx;
    loop {
        if i < 0 {
            i = -i - 1;
        } else if i >= n {
            i = 2 * n - 1 - i;
        } else {
            return i as usize;
        }
    }
}

/// 2D correlation with symmetric boundary padding.
fn filter_symmetric(plane: &[f64], h: usize, w: usize, kernel: &LogKernel) -> Vec<f64> {
    let half = (kernel.size / 2) as isize;
    let mut out = vec![0.0; h * w];
    for i in 0..h {
        for j in 0..w {
            let mut acc = 0.0;
            for ki in -half..=half {
                let src_i = mirror(i as isize + ki, h);
                for kj in -half..=half {
                    let src_j = mirror(j as isize + kj, w);
                    acc += kernel.at((ki + half) as usize, (kj + half) as usize)
                        * plane[src_i * w + src_j];
                }
            }
            out[i * w + j] = acc;
        }
    }
    out
}

fn check_dims(u: &ComplexImage, reference: &ComplexImage) -> Result<()> {
    if !u.same_dims(reference) {
        return Err(Error::Shape(format!(
            "image {}x{} vs reference {}x{}",
            u.height, u.width, reference.height, reference.width
        )));
    }
    Ok(())
}

/// Peak signal-to-noise ratio in dB: `20 log10(max(ref) / rmse)`.
/// Exact matches return the `+inf` sentinel.
pub fn psnr(u: &ComplexImage, reference: &ComplexImage) -> Result<f64> {
    check_dims(u, reference)?;
    let um = u.magnitude();
    let rm = reference.magnitude();
    let mse = um
        .iter()
        .zip(&rm)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / um.len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    let peak = rm.iter().fold(0.0f64, |m, &v| m.max(v));
    Ok(20.0 * (peak / mse.sqrt()).log10())
}

/// Global-statistics structural similarity with the standard constants
/// `c1 = (0.01 L)^2`, `c2 = (0.03 L)^2`, `L = max(ref)`.
pub fn ssim(u: &ComplexImage, reference: &ComplexImage) -> Result<f64> {
    check_dims(u, reference)?;
    let um = u.magnitude();
    let rm = reference.magnitude();
    let n = um.len() as f64;
    let mu_u = um.iter().sum::<f64>() / n;
    let mu_r = rm.iter().sum::<f64>() / n;
    let var_u = um.iter().map(|v| v * v).sum::<f64>() / n - mu_u * mu_u;
    let var_r = rm.iter().map(|v| v * v).sum::<f64>() / n - mu_r * mu_r;
    let cov = um.iter().zip(&rm).map(|(a, b)| a * b).sum::<f64>() / n - mu_u * mu_r;
    let peak = rm.iter().fold(0.0f64, |m, &v| m.max(v));
    let c1 = (0.01 * peak) * (0.01 * peak);
    let c2 = (0.03 * peak) * (0.03 * peak);
    Ok(((2.0 * mu_u * mu_r + c1) * (2.0 * cov + c2))
        / ((mu_u * mu_u + mu_r * mu_r + c1) * (var_u + var_r + c2)))
}

/// Windowed SSIM cross-check: 11x11 Gaussian window (sigma 1.5), mean over
/// all fully interior window positions.
pub fn ssim_windowed(u: &ComplexImage, reference: &ComplexImage) -> Result<f64> {
    check_dims(u, reference)?;
    const WIN: usize = 11;
    const WSIGMA: f64 = 1.5;
    if u.height < WIN || u.width < WIN {
        return Err(Error::Dimension(format!(
            "windowed SSIM needs at least {WIN}x{WIN}, got {}x{}",
            u.height, u.width
        )));
    }
    let mut weights = vec![0.0; WIN * WIN];
    let half = (WIN / 2) as isize;
    let mut wsum = 0.0;
    for i in -half..=half {
        for j in -half..=half {
            let g = (-((i * i + j * j) as f64) / (2.0 * WSIGMA * WSIGMA)).exp();
            weights[((i + half) * WIN as isize + (j + half)) as usize] = g;
            wsum += g;
        }
    }
    for wgt in &mut weights {
        *wgt /= wsum;
    }

    let um = u.magnitude();
    let rm = reference.magnitude();
    let peak = rm.iter().fold(0.0f64, |m, &v| m.max(v));
    let c1 = (0.01 * peak) * (0.01 * peak);
    let c2 = (0.03 * peak) * (0.03 * peak);
    let (h, w) = (u.height, u.width);
    let mut total = 0.0;
    let mut count = 0usize;
    for top in 0..=(h - WIN) {
        for left in 0..=(w - WIN) {
            let (mut mu_u, mut mu_r) = (0.0, 0.0);
            for wi in 0..WIN {
                for wj in 0..WIN {
                    let wgt = weights[wi * WIN + wj];
                    mu_u += wgt * um[(top + wi) * w + left + wj];
                    mu_r += wgt * rm[(top + wi) * w + left + wj];
                }
            }
            let (mut var_u, mut var_r, mut cov) = (0.0, 0.0, 0.0);
            for wi in 0..WIN {
                for wj in 0..WIN {
                    let wgt = weights[wi * WIN + wj];
                    let du = um[(top + wi) * w + left + wj] - mu_u;
                    let dr = rm[(top + wi) * w + left + wj] - mu_r;
                    var_u += wgt * du * du;
                    var_r += wgt * dr * dr;
                    cov += wgt * du * dr;
                }
            }
            total += ((2.0 * mu_u * mu_r + c1) * (2.0 * cov + c2))
                / ((mu_u * mu_u + mu_r * mu_r + c1) * (var_u + var_r + c2));
            count += 1;
        }
    }
    Ok(total / count as f64)
}

/// High-frequency error norm: `||LoG(u) - LoG(ref)||_F^2 / ||LoG(ref)||_F^2`.
pub fn hfen(u: &ComplexImage, reference: &ComplexImage) -> Result<f64> {
    check_dims(u, reference)?;
    let kernel = LogKernel::default_paper();
    let lu = filter_symmetric(&u.magnitude(), u.height, u.width, &kernel);
    let lr = filter_symmetric(&reference.magnitude(), u.height, u.width, &kernel);
    let den: f64 = lr.iter().map(|v| v * v).sum();
    // a constant reference only leaves the kernel's ~1e-17 zero-sum residue
    let taps_l1: f64 = kernel.taps().iter().map(|t| t.abs()).sum();
    let ref_l2 = reference.l2_norm();
    let floor = (1e-12 * taps_l1 * ref_l2).powi(2);
    if den <= floor {
        return Err(Error::DegenerateReference);
    }
    let num: f64 = lu
        .iter()
        .zip(&lr)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(num / den)
}

/// The paper's metric triple.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricReport {
    pub psnr: f64,
    pub ssim: f64,
    pub hfen: f64,
}

pub fn report(u: &ComplexImage, reference: &ComplexImage) -> Result<MetricReport> {
    Ok(MetricReport {
        psnr: psnr(u, reference)?,
        ssim: ssim(u, reference)?,
        hfen: hfen(u, reference)?,
    })
}
