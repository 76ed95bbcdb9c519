//! Row-major complex-valued 2D images, the reconstruction variable.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// A row-major complex image of `height * width` double-precision samples.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexImage {
    pub height: usize,
    pub width: usize,
    pub data: Vec<Complex64>,
}

impl ComplexImage {
    pub fn zeros(height: usize, width: usize) -> Self {
        ComplexImage {
            height,
            width,
            data: vec![Complex64::new(0.0, 0.0); height * width],
        }
    }

    pub fn from_data(height: usize, width: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != height * width {
            return Err(Error::Shape(format!(
                "image data length {} does not match {height}x{width}",
                data.len()
            )));
        }
        Ok(ComplexImage { height, width, data })
    }

    #[inline]
    pub fn at(&self, row: usize, col: usize) -> Complex64 {
        self.data[row * self.width + col]
    }

    #[inline]
    pub fn at_mut(&mut self, row: usize, col: usize) -> &mut Complex64 {
        &mut self.data[row * self.width + col]
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn same_dims(&self, other: &ComplexImage) -> bool {
        self.height == other.height && self.width == other.width
    }

    /// Per-pixel magnitudes.
    pub fn magnitude(&self) -> Vec<f64> {
        self.data.iter().map(|z| z.norm()).collect()
    }

    pub fn max_magnitude(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Rescale so the maximum magnitude is exactly 1; a zero image is left unchanged.
    pub fn normalize_to_unit_max(&mut self) {
        let m = self.max_magnitude();
        if m > 0.0 {
            for z in &mut self.data {
                *z /= m;
            }
        }
    }

    pub fn l2_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Complex inner product `sum_i a_i * conj(b_i)`.
    pub fn inner(&self, other: &ComplexImage) -> Complex64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a * b.conj())
            .sum()
    }

    pub fn sub(&self, other: &ComplexImage) -> ComplexImage {
        debug_assert!(self.same_dims(other));
        ComplexImage {
            height: self.height,
            width: self.width,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    /// Circularly shift by (`down`, `right`) pixels.
    pub fn circshift(&self, down: usize, right: usize) -> ComplexImage {
        let mut out = ComplexImage::zeros(self.height, self.width);
        for i in 0..self.height {
            for j in 0..self.width {
                let ti = (i + down) % self.height;
                let tj = (j + right) % self.width;
                *out.at_mut(ti, tj) = self.at(i, j);
            }
        }
        out
    }
}
