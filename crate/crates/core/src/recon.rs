//! The iterative solver: alternate the wavelet-domain prior gradient step
//! with the closed-form per-frequency least-squares update.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::image::ComplexImage;
use crate::kspace::{fft2_unitary, ifft2_unitary, zero_filled, KSpaceData, SamplingMask};
use crate::metrics;
use crate::prior::{DaeNetwork, Tensor};
use crate::wavelet::{uwt_forward, uwt_inverse, FilterBank};

/// How the network input relates to the injected noise during
/// reconstruction: `FreshNoise` adds a new draw to the wavelet tensor each
/// iteration (matching the training distribution); `CleanInput` feeds the
/// clean tensor and uses the draw only inside the residual term.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseMode {
    FreshNoise,
    CleanInput,
}

impl NoiseMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            NoiseMode::FreshNoise => "fresh_noise",
            NoiseMode::CleanInput => "clean_input",
        }
    }

    pub fn parse(s: &str) -> Result<NoiseMode> {
        match s {
            "fresh_noise" => Ok(NoiseMode::FreshNoise),
            "clean_input" => Ok(NoiseMode::CleanInput),
            _ => Err(Error::Config(format!("unknown noise mode '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReconConfig {
    /// Regularization weight; 0 selects the prior-off limit.
    pub lambda: f64,
    /// Proximal step size; the solver is derived with beta = 1.
    pub beta: f64,
    pub iterations: usize,
    /// Noise standard deviation in normalized-intensity units.
    pub sigma_eta: f64,
    pub noise_mode: NoiseMode,
    pub seed: u64,
    /// Relative iterate-change threshold for early stopping; 0 disables.
    pub stop_tol: f64,
    pub filter_bank: String,
}

impl Default for ReconConfig {
    fn default() -> Self {
        ReconConfig {
            lambda: 0.1,
            beta: 1.0,
            iterations: 100,
            sigma_eta: 25.0 / 255.0,
            noise_mode: NoiseMode::FreshNoise,
            seed: 0,
            stop_tol: 1e-5,
            filter_bank: "haar".into(),
        }
    }
}

impl ReconConfig {
    fn validate(&self) -> Result<()> {
        if self.lambda < 0.0 {
            return Err(Error::Config(format!(
                "lambda must be nonnegative, got {}",
                self.lambda
            )));
        }
        if self.beta <= 0.0 {
            return Err(Error::Config(format!(
                "beta must be positive, got {}",
                self.beta
            )));
        }
        if self.iterations == 0 {
            return Err(Error::Config("iterations must be at least 1".into()));
        }
        if self.sigma_eta < 0.0 {
            return Err(Error::Config("sigma_eta must be nonnegative".into()));
        }
        if self.stop_tol < 0.0 {
            return Err(Error::Config("stop_tol must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Per-iteration record; metric fields are present when a reference was
/// supplied.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceEntry {
    pub iteration: usize,
    pub rel_change: f64,
    pub psnr: Option<f64>,
    pub ssim: Option<f64>,
    pub hfen: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReconResult {
    pub image: ComplexImage,
    pub trace: Vec<TraceEntry>,
    pub converged: bool,
    pub iterations_run: usize,
}

/// Core of the gradient step once the residual `r = D(x) - eta` is known:
/// `v = u - beta * W^T (dD^T(x) r)`.
pub fn prior_update_with_residual(
    u: &ComplexImage,
    net: &DaeNetwork,
    x: &Tensor,
    residual: &Tensor,
    fb: &FilterBank,
    beta: f64,
) -> Result<ComplexImage> {
    let back = net.vjp(x, residual)?;
    let correction = uwt_inverse(&back.to_wavelet()?, fb)?;
    if !correction.same_dims(u) {
        return Err(Error::Shape(format!(
            "prior correction {}x{} vs image {}x{}",
            correction.height, correction.width, u.height, u.width
        )));
    }
    let data = u
        .data
        .iter()
        .zip(&correction.data)
        .map(|(a, c)| a - beta * c)
        .collect();
    ComplexImage::from_data(u.height, u.width, data)
}

/// One gradient step on the network prior: transform, add noise per the
/// configured mode, form the residual, and pull the backward output back to
/// the image domain.
pub fn prior_gradient_step(
    u: &ComplexImage,
    net: &DaeNetwork,
    fb: &FilterBank,
    cfg: &ReconConfig,
    rng: &mut ChaCha12Rng,
) -> Result<ComplexImage> {
    cfg.validate()?;
    let wt = uwt_forward(u, fb)?;
    let mut x = Tensor::from_wavelet(&wt);
    let mut eta = Tensor::zeros(x.n, x.c, x.h, x.w);
    eta.fill_gaussian(cfg.sigma_eta, rng);
    if cfg.noise_mode == NoiseMode::FreshNoise {
        x.add_scaled(&eta, 1.0);
    }
    let mut residual = net.forward(&x)?;
    residual.add_scaled(&eta, -1.0);
    prior_update_with_residual(u, net, &x, &residual, fb, cfg.beta)
}

/// Exact minimizer of `||F_p u - f||^2 + lambda ||u - v||^2` per frequency:
/// `u_hat = (m f + lambda v_hat) / (m + lambda)`. At `lambda = 0` the
/// limit rule applies: sampled frequencies copy `f`, unsampled copy `v_hat`.
pub fn data_consistency(
    v: &ComplexImage,
    f: &KSpaceData,
    mask: &SamplingMask,
    lambda: f64,
) -> Result<ComplexImage> {
    if lambda < 0.0 {
        return Err(Error::Config(format!(
            "lambda must be nonnegative, got {lambda}"
        )));
    }
    if v.height != f.height
        || v.width != f.width
        || v.height != mask.height
        || v.width != mask.width
    {
        return Err(Error::Shape(format!(
            "image {}x{}, k-space {}x{}, mask {}x{} must agree",
            v.height, v.width, f.height, f.width, mask.height, mask.width
        )));
    }
    let mut vhat = fft2_unitary(v);
    for (idx, z) in vhat.data.iter_mut().enumerate() {
        let sampled = mask.samples()[idx];
        *z = if lambda == 0.0 {
            if sampled {
                f.data[idx]
            } else {
                *z
            }
        } else {
            let m = if sampled { 1.0 } else { 0.0 };
            (f.data[idx].scale(m) + z.scale(lambda)) / (m + lambda)
        };
    }
    Ok(ifft2_unitary(&vhat))
}

/// Run the full solver from the zero-filled initializer.
pub fn reconstruct(
    f: &KSpaceData,
    mask: &SamplingMask,
    net: &DaeNetwork,
    cfg: &ReconConfig,
    reference: Option<&ComplexImage>,
) -> Result<ReconResult> {
    cfg.validate()?;
    if (net.sigma_eta() - cfg.sigma_eta).abs() > 1e-9 {
        eprintln!(
            "warning: network was trained at sigma_eta {:.6} but reconstruction uses {:.6}",
            net.sigma_eta(),
            cfg.sigma_eta
        );
    }
    let fb = FilterBank::named(&cfg.filter_bank)?;
    let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);
    let mut u = zero_filled(f, mask)?;
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations_run = 0;

    for k in 1..=cfg.iterations {
        let v = if cfg.lambda == 0.0 {
            // prior-off limit: the gradient step is skipped entirely
            u.clone()
        } else {
            prior_gradient_step(&u, net, &fb, cfg, &mut rng)?
        };
        let lambda_eff = cfg.lambda / cfg.beta;
        let next = data_consistency(&v, f, mask, lambda_eff)?;

        let diff = next.sub(&u).l2_norm();
        let base = u.l2_norm();
        let rel_change = if base > 0.0 {
            diff / base
        } else if diff == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        let (psnr, ssim, hfen) = match reference {
            Some(r) => (
                Some(metrics::psnr(&next, r)?),
                Some(metrics::ssim(&next, r)?),
                Some(metrics::hfen(&next, r)?),
            ),
            None => (None, None, None),
        };
        trace.push(TraceEntry {
            iteration: k,
            rel_change,
            psnr,
            ssim,
            hfen,
        });
        u = next;
        iterations_run = k;
        if cfg.stop_tol > 0.0 && rel_change < cfg.stop_tol {
            converged = true;
            break;
        }
    }

    Ok(ReconResult {
        image: u,
        trace,
        converged,
        iterations_run,
    })
}
