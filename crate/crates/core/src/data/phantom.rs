//! Synthetic complex-valued phantoms: random ellipse compositions with a
//! smooth polynomial phase, normalized to unit maximum magnitude.

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::image::ComplexImage;

struct Ellipse {
    cy: f64,
    cx: f64,
    semi_y: f64,
    semi_x: f64,
    angle: f64,
    intensity: f64,
}

impl Ellipse {
    fn contains(&self, y: f64, x: f64) -> bool {
        let dy = y - self.cy;
        let dx = x - self.cx;
        let (sin, cos) = self.angle.sin_cos();
        let ry = dy * cos - dx * sin;
        let rx = dy * sin + dx * cos;
        (ry / self.semi_y).powi(2) + (rx / self.semi_x).powi(2) <= 1.0
    }
}

/// Generate a phantom: a fixed centered disk plus `n_ellipses - 1` seeded
/// random ellipses summed onto it, carried on a low-order polynomial phase.
pub fn make_phantom(
    height: usize,
    width: usize,
    n_ellipses: usize,
    seed: u64,
) -> Result<ComplexImage> {
    if n_ellipses == 0 {
        return Err(Error::Config("phantom needs at least one ellipse".into()));
    }
    if height < 4 || width < 4 {
        return Err(Error::Config(format!(
            "phantom dims {height}x{width} too small"
        )));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let gcy = (height - 1) as f64 / 2.0;
    let gcx = (width - 1) as f64 / 2.0;
    let base_r = 0.4 * height.min(width) as f64;

    let mut ellipses = vec![Ellipse {
        cy: gcy,
        cx: gcx,
        semi_y: base_r,
        semi_x: base_r,
        angle: 0.0,
        intensity: 0.8,
    }];
    for _ in 1..n_ellipses {
        ellipses.push(Ellipse {
            cy: gcy + (rng.random::<f64>() - 0.5) * 0.9 * base_r,
            cx: gcx + (rng.random::<f64>() - 0.5) * 0.9 * base_r,
            semi_y: (0.05 + 0.25 * rng.random::<f64>()) * height as f64 / 2.0,
            semi_x: (0.05 + 0.25 * rng.random::<f64>()) * width as f64 / 2.0,
            angle: rng.random::<f64>() * std::f64::consts::PI,
            intensity: -0.4 + 1.1 * rng.random::<f64>(),
        });
    }
    // quadratic phase map bounded inside (-pi, pi]
    let coeff: Vec<f64> = (0..6)
        .map(|_| (rng.random::<f64>() - 0.5) * std::f64::consts::PI / 4.0)
        .collect();

    let mut out = ComplexImage::zeros(height, width);
    for i in 0..height {
        for j in 0..width {
            let mut mag = 0.0;
            for e in &ellipses {
                if e.contains(i as f64, j as f64) {
                    mag += e.intensity;
                }
            }
            mag = mag.max(0.0);
            let ny = 2.0 * i as f64 / (height - 1) as f64 - 1.0;
            let nx = 2.0 * j as f64 / (width - 1) as f64 - 1.0;
            let phase = coeff[0]
                + coeff[1] * nx
                + coeff[2] * ny
                + coeff[3] * nx * nx
                + coeff[4] * nx * ny
                + coeff[5] * ny * ny;
            *out.at_mut(i, j) = Complex64::from_polar(mag, phase);
        }
    }
    out.normalize_to_unit_max();
    Ok(out)
}
