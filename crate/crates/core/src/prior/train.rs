//! Seeded, deterministic training loop for the noise-predicting network.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::prior::network::{DaeNetwork, Grads, Mode};
use crate::prior::tensor::Tensor;

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TrainConfig {
    pub patch_size: usize,
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    /// Noise standard deviation in normalized-intensity units.
    pub sigma_eta: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            patch_size: 40,
            batch_size: 128,
            epochs: 20,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            sigma_eta: 25.0 / 255.0,
            seed: 0,
        }
    }
}

/// Adaptive-moment optimizer state, one slot per trainable tensor.
struct Adam {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    step: u64,
}

impl Adam {
    fn new(sizes: &[usize]) -> Adam {
        Adam {
            m: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            v: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            step: 0,
        }
    }

    fn update(&mut self, params: Vec<&mut Vec<f64>>, grads: &Grads, cfg: &TrainConfig) {
        self.step += 1;
        let t = self.step as f64;
        let bc1 = 1.0 - cfg.beta1.powf(t);
        let bc2 = 1.0 - cfg.beta2.powf(t);
        for ((p, g), (m, v)) in params
            .into_iter()
            .zip(grads.slots())
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            for i in 0..p.len() {
                m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
                v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
                let mh = m[i] / bc1;
                let vh = v[i] / bc2;
                p[i] -= cfg.learning_rate * mh / (vh.sqrt() + cfg.adam_eps);
            }
        }
    }
}

/// Train the network to predict the injected noise: fresh Gaussian noise is
/// drawn for every example presentation and the squared-error loss
/// `||D(x + eta) - eta||^2` is minimized. Returns the per-epoch mean loss.
///
/// Fully deterministic for a fixed `(net, dataset, cfg)`: shuffling and
/// noise share one seeded stream and gradients are reduced in a fixed order.
pub fn train_dae(
    net: &mut DaeNetwork,
    dataset: &[Tensor],
    cfg: &TrainConfig,
) -> Result<Vec<f64>> {
    if dataset.is_empty() {
        return Err(Error::Data("training dataset is empty".into()));
    }
    for (i, p) in dataset.iter().enumerate() {
        if p.n != 1 || p.c != net.input_channels() || p.h != cfg.patch_size || p.w != cfg.patch_size
        {
            return Err(Error::Shape(format!(
                "patch {i} has shape {}x{}x{}x{}, expected 1x{}x{}x{}",
                p.n,
                p.c,
                p.h,
                p.w,
                net.input_channels(),
                cfg.patch_size,
                cfg.patch_size
            )));
        }
    }
    if cfg.batch_size == 0 || cfg.epochs == 0 {
        return Err(Error::Config("batch_size and epochs must be positive".into()));
    }
    if cfg.sigma_eta < 0.0 {
        return Err(Error::Config("sigma_eta must be nonnegative".into()));
    }

    let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);
    let mut adam = Adam::new(&net.param_sizes());
    let mut grads = Grads::zeros_for(net);
    let channels = net.input_channels();
    let patch = cfg.patch_size;

    net.set_mode(Mode::Train);
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    for _epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut sq_sum = 0.0;
        let mut count = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let b = chunk.len();
            let mut clean = Tensor::zeros(b, channels, patch, patch);
            for (bi, &idx) in chunk.iter().enumerate() {
                let src = &dataset[idx];
                let sz = channels * patch * patch;
                clean.data[bi * sz..(bi + 1) * sz].copy_from_slice(&src.data);
            }
            let mut noise = Tensor::zeros(b, channels, patch, patch);
            noise.fill_gaussian(cfg.sigma_eta, &mut rng);
            let mut noisy = clean;
            noisy.add_scaled(&noise, 1.0);

            let (out, trace) = net.forward_traced(&noisy)?;
            net.update_running_stats(&trace);

            let elems = out.data.len() as f64;
            let mut cotangent = out;
            let mut batch_sq = 0.0;
            for (o, e) in cotangent.data.iter_mut().zip(&noise.data) {
                let r = *o - e;
                batch_sq += r * r;
                *o = 2.0 * r / elems;
            }
            sq_sum += batch_sq;
            count += elems as usize;

            grads.zero();
            net.backward(&trace, &cotangent, Some(&mut grads))?;
            adam.update(net.params_mut(), &grads, cfg);
        }
        history.push(sq_sum / count as f64);
    }
    net.set_mode(Mode::Inference);
    net.set_sigma_eta(cfg.sigma_eta);
    Ok(history)
}
