//! Dense NCHW tensor of f64 used by the network and trainer.

use rand::Rng;
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::wavelet::{WaveletTensor, WAVELET_CHANNELS};

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub n: usize,
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(n: usize, c: usize, h: usize, w: usize) -> Tensor {
        Tensor {
            n,
            c,
            h,
            w,
            data: vec![0.0; n * c * h * w],
        }
    }

    pub fn from_data(n: usize, c: usize, h: usize, w: usize, data: Vec<f64>) -> Result<Tensor> {
        if data.len() != n * c * h * w {
            return Err(Error::Shape(format!(
                "tensor data length {} does not match {n}x{c}x{h}x{w}",
                data.len()
            )));
        }
        Ok(Tensor { n, c, h, w, data })
    }

    #[inline]
    pub fn plane(&self, n: usize, c: usize) -> &[f64] {
        let sz = self.h * self.w;
        let start = (n * self.c + c) * sz;
        &self.data[start..start + sz]
    }

    #[inline]
    pub fn plane_mut(&mut self, n: usize, c: usize) -> &mut [f64] {
        let sz = self.h * self.w;
        let start = (n * self.c + c) * sz;
        &mut self.data[start..start + sz]
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn same_shape(&self, other: &Tensor) -> bool {
        self.n == other.n && self.c == other.c && self.h == other.h && self.w == other.w
    }

    pub fn l2_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn add_scaled(&mut self, other: &Tensor, factor: f64) {
        debug_assert!(self.same_shape(other));
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += factor * b;
        }
    }

    /// Fill with i.i.d. Gaussian draws of the given standard deviation.
    pub fn fill_gaussian(&mut self, sigma: f64, rng: &mut ChaCha12Rng) {
        for v in &mut self.data {
            let z: f64 = rng.sample(rand_distr::StandardNormal);
            *v = sigma * z;
        }
    }

    /// View a single-image wavelet tensor as a batch-of-one network input.
    pub fn from_wavelet(t: &WaveletTensor) -> Tensor {
        Tensor {
            n: 1,
            c: WAVELET_CHANNELS,
            h: t.height,
            w: t.width,
            data: t.data().to_vec(),
        }
    }

    /// Convert back to a wavelet tensor; requires a batch of one with
    /// exactly the 8 wavelet channels.
    pub fn to_wavelet(&self) -> Result<WaveletTensor> {
        if self.n != 1 || self.c != WAVELET_CHANNELS {
            return Err(Error::Shape(format!(
                "expected 1x{WAVELET_CHANNELS}xHxW tensor, got {}x{}x{}x{}",
                self.n, self.c, self.h, self.w
            )));
        }
        WaveletTensor::from_channels(self.h, self.w, self.data.clone())
    }
}
