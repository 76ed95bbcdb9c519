//! One-level undecimated (a trous) 2D wavelet analysis and synthesis.
//!
//! Filters are normalized as a Parseval tight frame: each orthonormal 1D
//! filter is rescaled by 1/sqrt(2), so the 2D one-level operator `W`
//! satisfies `W^T W = I` and the adjoint is an exact inverse. Boundaries
//! are periodic, which keeps `W` shift-covariant and exactly linear.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::image::ComplexImage;

/// Channels of the transform of a complex image: 4 subbands x {re, im}.
pub const WAVELET_CHANNELS: usize = 8;

const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

// Orthonormal scaling filters; high-pass follows from the alternating-flip
// relation g[n] = (-1)^n h[L-1-n]. db4 is the extremal-phase factorization,
// sym4 the near-symmetric one; both computed by 60-digit spectral
// factorization and rounded to f64.
const DB4_LOW: [f64; 8] = [
    -0.010597401785069032,
    0.0328830116668852,
    0.030841381835560764,
    -0.18703481171909309,
    -0.027983769416859854,
    0.6308807679298589,
    0.7148465705529157,
    0.2303778133088965,
];

const SYM4_LOW: [f64; 8] = [
    -0.07576571478950221,
    -0.029635527646002493,
    0.497618667632775,
    0.8037387518051321,
    0.29785779560530606,
    -0.09921954357663353,
    -0.012603967262031304,
    0.032223100604051466,
];

/// Analysis filter pair for the undecimated transform.
///
/// Synthesis filters are the time-reversed analysis filters; with the
/// Parseval rescale they are never stored separately because the adjoint
/// is applied as a circular correlation with the analysis filters.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterBank {
    name: String,
    analysis_low: Vec<f64>,
    analysis_high: Vec<f64>,
}

impl FilterBank {
    /// Look up a built-in bank by name.
    pub fn named(name: &str) -> Result<FilterBank> {
        // haar's Parseval rescale is exact in binary; write it directly
        if name == "haar" {
            return FilterBank::from_coefficients(name, vec![0.5, 0.5], vec![0.5, -0.5]);
        }
        let low: Vec<f64> = match name {
            "db4" => DB4_LOW.to_vec(),
            "sym4" => SYM4_LOW.to_vec(),
            _ => return Err(Error::UnsupportedWavelet(name.to_string())),
        };
        let high = alternating_flip(&low);
        // Parseval rescale: one 1/sqrt(2) per 1D stage.
        let scale = FRAC_1_SQRT_2;
        FilterBank::from_coefficients(
            name,
            low.iter().map(|c| c * scale).collect(),
            high.iter().map(|c| c * scale).collect(),
        )
    }

    /// Build a bank from explicit (already Parseval-scaled) coefficients.
    /// The shorter filter is zero-padded to the length of the longer one.
    pub fn from_coefficients(
        name: &str,
        mut analysis_low: Vec<f64>,
        mut analysis_high: Vec<f64>,
    ) -> Result<FilterBank> {
        if analysis_low.is_empty() || analysis_high.is_empty() {
            return Err(Error::Config(format!(
                "filter bank '{name}' must have nonempty analysis filters"
            )));
        }
        let len = analysis_low.len().max(analysis_high.len());
        analysis_low.resize(len, 0.0);
        analysis_high.resize(len, 0.0);
        let energy: f64 = analysis_low.iter().map(|c| c * c).sum::<f64>()
            + analysis_high.iter().map(|c| c * c).sum::<f64>();
        if (energy - 1.0).abs() > 1e-10 {
            return Err(Error::Config(format!(
                "filter bank '{name}' is not Parseval-normalized: \
                 sum of squared coefficients is {energy:.12}, expected 1"
            )));
        }
        Ok(FilterBank {
            name: name.to_string(),
            analysis_low,
            analysis_high,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn analysis_low(&self) -> &[f64] {
        &self.analysis_low
    }

    pub fn analysis_high(&self) -> &[f64] {
        &self.analysis_high
    }

    pub fn len(&self) -> usize {
        self.analysis_low.len()
    }

    pub fn is_empty(&self) -> bool {
        self.analysis_low.is_empty()
    }
}

fn alternating_flip(low: &[f64]) -> Vec<f64> {
    let n = low.len();
    (0..n)
        .map(|k| {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            sign * low[n - 1 - k]
        })
        .collect()
}

/// Undecimated transform of a complex image: 8 real planes of the source
/// size, ordered `[LL_re, LL_im, LH_re, LH_im, HL_re, HL_im, HH_re, HH_im]`.
/// The first letter is the filter applied along rows (width), the second
/// the filter applied along columns (height).
#[derive(Debug, Clone, PartialEq)]
pub struct WaveletTensor {
    pub height: usize,
    pub width: usize,
    data: Vec<f64>,
}

impl WaveletTensor {
    pub fn zeros(height: usize, width: usize) -> Self {
        WaveletTensor {
            height,
            width,
            data: vec![0.0; WAVELET_CHANNELS * height * width],
        }
    }

    /// Build from raw channel-major data; errors unless exactly 8 planes.
    pub fn from_channels(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != WAVELET_CHANNELS * height * width {
            return Err(Error::Shape(format!(
                "wavelet tensor needs {WAVELET_CHANNELS} planes of {height}x{width}, \
                 got {} values",
                data.len()
            )));
        }
        Ok(WaveletTensor { height, width, data })
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        let plane = self.height * self.width;
        &self.data[c * plane..(c + 1) * plane]
    }

    pub fn channel_mut(&mut self, c: usize) -> &mut [f64] {
        let plane = self.height * self.width;
        &mut self.data[c * plane..(c + 1) * plane]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn l2_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Real inner product over all channels.
    pub fn inner(&self, other: &WaveletTensor) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }
}

/// Circular convolution along each row: `out[j] = sum_k h[k] in[(j-k) mod w]`.
fn conv_rows(plane: &[f64], h: usize, w: usize, filter: &[f64], out: &mut [f64]) {
    for i in 0..h {
        let row = &plane[i * w..(i + 1) * w];
        let orow = &mut out[i * w..(i + 1) * w];
        for j in 0..w {
            let mut acc = 0.0;
            for (k, &c) in filter.iter().enumerate() {
                let src = (j + w - (k % w)) % w;
                acc += c * row[src];
            }
            orow[j] = acc;
        }
    }
}

/// Adjoint of `conv_rows`: circular correlation, `out[j] = sum_k h[k] in[(j+k) mod w]`.
fn corr_rows(plane: &[f64], h: usize, w: usize, filter: &[f64], out: &mut [f64]) {
    for i in 0..h {
        let row = &plane[i * w..(i + 1) * w];
        let orow = &mut out[i * w..(i + 1) * w];
        for j in 0..w {
            let mut acc = 0.0;
            for (k, &c) in filter.iter().enumerate() {
                let src = (j + k) % w;
                acc += c * row[src];
            }
            orow[j] = acc;
        }
    }
}

fn conv_cols(plane: &[f64], h: usize, w: usize, filter: &[f64], out: &mut [f64]) {
    for j in 0..w {
        for i in 0..h {
            let mut acc = 0.0;
            for (k, &c) in filter.iter().enumerate() {
                let src = (i + h - (k % h)) % h;
                acc += c * plane[src * w + j];
            }
            out[i * w + j] = acc;
        }
    }
}

fn corr_cols(plane: &[f64], h: usize, w: usize, filter: &[f64], out: &mut [f64]) {
    for j in 0..w {
        for i in 0..h {
            let mut acc = 0.0;
            for (k, &c) in filter.iter().enumerate() {
                let src = (i + k) % h;
                acc += c * plane[src * w + j];
            }
            out[i * w + j] = acc;
        }
    }
}

fn check_dims(u: &ComplexImage, fb: &FilterBank) -> Result<()> {
    if u.height < fb.len() || u.width < fb.len() {
        return Err(Error::Dimension(format!(
            "image {}x{} is smaller than the {}-tap '{}' filter",
            u.height,
            u.width,
            fb.len(),
            fb.name()
        )));
    }
    Ok(())
}

/// Forward undecimated transform `W u` of a complex image.
pub fn uwt_forward(u: &ComplexImage, fb: &FilterBank) -> Result<WaveletTensor> {
    check_dims(u, fb)?;
    let (h, w) = (u.height, u.width);
    let plane = h * w;
    let re: Vec<f64> = u.data.iter().map(|z| z.re).collect();
    let im: Vec<f64> = u.data.iter().map(|z| z.im).collect();

    let mut out = WaveletTensor::zeros(h, w);
    let mut row_pass = vec![0.0; plane];
    // subband order (row filter, col filter): LL, LH, HL, HH
    let bands = [
        (fb.analysis_low(), fb.analysis_low()),
        (fb.analysis_low(), fb.analysis_high()),
        (fb.analysis_high(), fb.analysis_low()),
        (fb.analysis_high(), fb.analysis_high()),
    ];
    for (part, src) in [(0usize, &re), (1usize, &im)] {
        for (band, (row_f, col_f)) in bands.iter().enumerate() {
            conv_rows(src, h, w, row_f, &mut row_pass);
            conv_cols(&row_pass, h, w, col_f, out.channel_mut(2 * band + part));
        }
    }
    Ok(out)
}

/// Adjoint `W^T t`; with the Parseval normalization this is also the exact
/// inverse, so it serves both synthesis and gradient transposition.
pub fn uwt_inverse(t: &WaveletTensor, fb: &FilterBank) -> Result<ComplexImage> {
    let (h, w) = (t.height, t.width);
    if h < fb.len() || w < fb.len() {
        return Err(Error::Dimension(format!(
            "tensor {}x{} is smaller than the {}-tap '{}' filter",
            h,
            w,
            fb.len(),
            fb.name()
        )));
    }
    let plane = h * w;
    let mut re = vec![0.0; plane];
    let mut im = vec![0.0; plane];
    let mut col_pass = vec![0.0; plane];
    let mut band_out = vec![0.0; plane];
    let bands = [
        (fb.analysis_low(), fb.analysis_low()),
        (fb.analysis_low(), fb.analysis_high()),
        (fb.analysis_high(), fb.analysis_low()),
        (fb.analysis_high(), fb.analysis_high()),
    ];
    for (part, dst) in [(0usize, &mut re), (1usize, &mut im)] {
        for (band, (row_f, col_f)) in bands.iter().enumerate() {
            // adjoint of conv_cols(conv_rows(.)) is corr_rows(corr_cols(.))
            corr_cols(t.channel(2 * band + part), h, w, col_f, &mut col_pass);
            corr_rows(&col_pass, h, w, row_f, &mut band_out);
            for (d, b) in dst.iter_mut().zip(&band_out) {
                *d += b;
            }
        }
    }
    let data = re
        .into_iter()
        .zip(im)
        .map(|(r, i)| Complex64::new(r, i))
        .collect();
    ComplexImage::from_data(h, w, data)
}
