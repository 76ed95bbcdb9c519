//! The residual noise-predicting network: stacked 3x3 convolutions with
//! batch normalization, ReLU, and skip connections, plus the exact
//! vector-Jacobian product used by the reconstruction gradient step.

use rand::Rng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::prior::tensor::Tensor;

/// Whether batch normalization uses batch or running statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Inference,
}

/// 3x3 (or any odd) convolution with zero padding and stride 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv2d {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    /// `[out][in][k][k]`, row-major.
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Conv2d {
    pub fn zeros(in_channels: usize, out_channels: usize, kernel: usize) -> Conv2d {
        assert!(kernel % 2 == 1, "kernel must be odd");
        Conv2d {
            in_channels,
            out_channels,
            kernel,
            weight: vec![0.0; out_channels * in_channels * kernel * kernel],
            bias: vec![0.0; out_channels],
        }
    }

    /// Fan-in-scaled uniform init with an adjustable gain, biases zero.
    pub fn init(&mut self, rng: &mut ChaCha12Rng, gain: f64) {
        let fan_in = (self.in_channels * self.kernel * self.kernel) as f64;
        let bound = gain * (6.0 / fan_in).sqrt();
        for w in &mut self.weight {
            *w = (rng.random::<f64>() * 2.0 - 1.0) * bound;
        }
        for b in &mut self.bias {
            *b = 0.0;
        }
    }

    #[inline]
    fn w(&self, oc: usize, ic: usize, ki: usize, kj: usize) -> f64 {
        self.weight[((oc * self.in_channels + ic) * self.kernel + ki) * self.kernel + kj]
    }

    fn forward(&self, x: &Tensor) -> Tensor {
        let (n, h, w) = (x.n, x.h, x.w);
        let k = self.kernel;
        let half = (k / 2) as isize;
        let mut out = Tensor::zeros(n, self.out_channels, h, w);
        let plane = h * w;
        out.data
            .par_chunks_mut(plane)
            .enumerate()
            .for_each(|(p, oplane)| {
                let ni = p / self.out_channels;
                let oc = p % self.out_channels;
                oplane.fill(self.bias[oc]);
                for ic in 0..self.in_channels {
                    let xplane = x.plane(ni, ic);
                    for ki in 0..k {
                        let di = ki as isize - half;
                        for kj in 0..k {
                            let dj = kj as isize - half;
                            let wv = self.w(oc, ic, ki, kj);
                            if wv == 0.0 {
                                continue;
                            }
                            shift_accumulate(oplane, xplane, h, w, di, dj, wv);
                        }
                    }
                }
            });
        out
    }

    /// Gradient with respect to the input (transpose convolution).
    fn backward_input(&self, dy: &Tensor) -> Tensor {
        let (n, h, w) = (dy.n, dy.h, dy.w);
        let k = self.kernel;
        let half = (k / 2) as isize;
        let mut dx = Tensor::zeros(n, self.in_channels, h, w);
        let plane = h * w;
        dx.data
            .par_chunks_mut(plane)
            .enumerate()
            .for_each(|(p, xplane)| {
                let ni = p / self.in_channels;
                let ic = p % self.in_channels;
                for oc in 0..self.out_channels {
                    let dyplane = dy.plane(ni, oc);
                    for ki in 0..k {
                        let di = ki as isize - half;
                        for kj in 0..k {
                            let dj = kj as isize - half;
                            let wv = self.w(oc, ic, ki, kj);
                            if wv == 0.0 {
                                continue;
                            }
                            // adjoint shifts in the opposite direction
                            shift_accumulate(xplane, dyplane, h, w, -di, -dj, wv);
                        }
                    }
                }
            });
        dx
    }

    /// Accumulate weight/bias gradients into the given slices.
    fn backward_params(&self, x: &Tensor, dy: &Tensor, dw: &mut [f64], db: &mut [f64]) {
        let (n, h, w) = (x.n, x.h, x.w);
        let k = self.kernel;
        let half = (k / 2) as isize;
        let per_oc = self.in_channels * k * k;
        dw.par_chunks_mut(per_oc)
            .zip(db.par_iter_mut())
            .enumerate()
            .for_each(|(oc, (dw_oc, db_oc))| {
                for ni in 0..n {
                    let dyplane = dy.plane(ni, oc);
                    for v in dyplane {
                        *db_oc += v;
                    }
                    for ic in 0..self.in_channels {
                        let xplane = x.plane(ni, ic);
                        for ki in 0..k {
                            let di = ki as isize - half;
                            for kj in 0..k {
                                let dj = kj as isize - half;
                                dw_oc[(ic * k + ki) * k + kj] +=
                                    shifted_dot(dyplane, xplane, h, w, di, dj);
                            }
                        }
                    }
                }
            });
    }
}

/// `out[i][j] += factor * src[i + di][j + dj]` over the in-bounds window.
#[inline]
fn shift_accumulate(
    out: &mut [f64],
    src: &[f64],
    h: usize,
    w: usize,
    di: isize,
    dj: isize,
    factor: f64,
) {
    let i_lo = (-di).max(0) as usize;
    let i_hi = (h as isize - di.max(0)).max(0) as usize;
    let j_lo = (-dj).max(0) as usize;
    let j_hi = (w as isize - dj.max(0)).max(0) as usize;
    if i_hi <= i_lo || j_hi <= j_lo {
        return;
    }
    for i in i_lo..i_hi {
        let si = (i as isize + di) as usize;
        let orow = &mut out[i * w + j_lo..i * w + j_hi];
        let srow = &src[si * w + (j_lo as isize + dj) as usize..];
        for (o, s) in orow.iter_mut().zip(srow) {
            *o += factor * s;
        }
    }
}

/// `sum_{i,j} a[i][j] * b[i + di][j + dj]` over the in-bounds window.
#[inline]
fn shifted_dot(a: &[f64], b: &[f64], h: usize, w: usize, di: isize, dj: isize) -> f64 {
    let i_lo = (-di).max(0) as usize;
    let i_hi = (h as isize - di.max(0)).max(0) as usize;
    let j_lo = (-dj).max(0) as usize;
    let j_hi = (w as isize - dj.max(0)).max(0) as usize;
    if i_hi <= i_lo || j_hi <= j_lo {
        return 0.0;
    }
    let mut acc = 0.0;
    for i in i_lo..i_hi {
        let si = (i as isize + di) as usize;
        let arow = &a[i * w + j_lo..i * w + j_hi];
        let brow = &b[si * w + (j_lo as isize + dj) as usize..];
        for (x, y) in arow.iter().zip(brow) {
            acc += x * y;
        }
    }
    acc
}

/// Per-channel batch normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm2d {
    pub channels: usize,
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    pub eps: f64,
    pub momentum: f64,
}

impl BatchNorm2d {
    pub fn new(channels: usize) -> BatchNorm2d {
        BatchNorm2d {
            channels,
            gamma: vec![1.0; channels],
            beta: vec![0.0; channels],
            running_mean: vec![0.0; channels],
            running_var: vec![1.0; channels],
            eps: 1e-5,
            momentum: 0.1,
        }
    }

    /// Batch mean and (biased) variance per channel.
    fn batch_stats(&self, x: &Tensor) -> (Vec<f64>, Vec<f64>) {
        let m = (x.n * x.h * x.w) as f64;
        let mut mean = vec![0.0; self.channels];
        let mut var = vec![0.0; self.channels];
        for c in 0..self.channels {
            let mut sum = 0.0;
            for ni in 0..x.n {
                for v in x.plane(ni, c) {
                    sum += v;
                }
            }
            mean[c] = sum / m;
            let mut sq = 0.0;
            for ni in 0..x.n {
                for v in x.plane(ni, c) {
                    let d = v - mean[c];
                    sq += d * d;
                }
            }
            var[c] = sq / m;
        }
        (mean, var)
    }

    fn forward(&self, x: &Tensor, mean: &[f64], var: &[f64]) -> Tensor {
        let mut out = x.clone();
        for c in 0..self.channels {
            let scale = self.gamma[c] / (var[c] + self.eps).sqrt();
            let shift = self.beta[c] - mean[c] * scale;
            for ni in 0..x.n {
                for v in out.plane_mut(ni, c) {
                    *v = *v * scale + shift;
                }
            }
        }
        out
    }

    /// Backward through batch statistics (train mode).
    fn backward_batch(
        &self,
        x: &Tensor,
        dy: &Tensor,
        mean: &[f64],
        var: &[f64],
        dgamma: &mut [f64],
        dbeta: &mut [f64],
    ) -> Tensor {
        let m = (x.n * x.h * x.w) as f64;
        let mut dx = Tensor::zeros(x.n, x.c, x.h, x.w);
        for c in 0..self.channels {
            let s = (var[c] + self.eps).sqrt();
            let mut sum_dy = 0.0;
            let mut sum_dy_xhat = 0.0;
            for ni in 0..x.n {
                let xp = x.plane(ni, c);
                let gp = dy.plane(ni, c);
                for (xv, gv) in xp.iter().zip(gp) {
                    let xhat = (xv - mean[c]) / s;
                    sum_dy += gv;
                    sum_dy_xhat += gv * xhat;
                }
            }
            dgamma[c] += sum_dy_xhat;
            dbeta[c] += sum_dy;
            let scale = self.gamma[c] / s;
            for ni in 0..x.n {
                let xp = x.plane(ni, c);
                // split borrows: gather dy first, then write dx
                let gp: Vec<f64> = dy.plane(ni, c).to_vec();
                let dp = dx.plane_mut(ni, c);
                for i in 0..xp.len() {
                    let xhat = (xp[i] - mean[c]) / s;
                    dp[i] = scale * (gp[i] - sum_dy / m - xhat * sum_dy_xhat / m);
                }
            }
        }
        dx
    }

    /// Backward with frozen running statistics (inference mode): the layer
    /// is an affine map per channel.
    fn backward_frozen(
        &self,
        x: &Tensor,
        dy: &Tensor,
        mean: &[f64],
        var: &[f64],
        dgamma: &mut [f64],
        dbeta: &mut [f64],
    ) -> Tensor {
        let mut dx = Tensor::zeros(x.n, x.c, x.h, x.w);
        for c in 0..self.channels {
            let s = (var[c] + self.eps).sqrt();
            let scale = self.gamma[c] / s;
            let mut sum_dy = 0.0;
            let mut sum_dy_xhat = 0.0;
            for ni in 0..x.n {
                let xp = x.plane(ni, c);
                let gp: Vec<f64> = dy.plane(ni, c).to_vec();
                let dp = dx.plane_mut(ni, c);
                for i in 0..xp.len() {
                    sum_dy += gp[i];
                    sum_dy_xhat += gp[i] * (xp[i] - mean[c]) / s;
                    dp[i] = scale * gp[i];
                }
            }
            dgamma[c] += sum_dy_xhat;
            dbeta[c] += sum_dy;
        }
        dx
    }
}

/// One step of the layer tape.
#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    Conv(Conv2d),
    BatchNorm(BatchNorm2d),
    Relu,
    /// Remember the current activation for a later skip-add.
    ResidualBegin,
    /// Add the remembered activation back in.
    ResidualEnd,
}

/// Architecture descriptor: first conv+relu, optional plain conv+bn+relu
/// head layers, residual blocks whose skip spans first conv to last batch
/// norm, and a final conv back to the input channel count.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct NetSpec {
    pub input_channels: usize,
    pub width: usize,
    pub residual_blocks: usize,
    pub convs_per_block: usize,
    pub head_layers: usize,
}

impl Default for NetSpec {
    fn default() -> Self {
        NetSpec {
            input_channels: 8,
            width: 16,
            residual_blocks: 1,
            convs_per_block: 2,
            head_layers: 0,
        }
    }
}

/// The denoiser network together with its trained noise level.
#[derive(Debug, Clone, PartialEq)]
pub struct DaeNetwork {
    layers: Vec<Layer>,
    input_channels: usize,
    output_channels: usize,
    sigma_eta: f64,
    mode: Mode,
}

pub(crate) struct Trace {
    /// Input to each layer, in order.
    inputs: Vec<Tensor>,
    /// Statistics each batch-norm layer actually used.
    bn_stats: Vec<Option<(Vec<f64>, Vec<f64>)>>,
}

impl DaeNetwork {
    /// Build a freshly initialized network from a descriptor.
    pub fn from_spec(spec: &NetSpec, sigma_eta: f64, rng: &mut ChaCha12Rng) -> Result<DaeNetwork> {
        if spec.width == 0 || spec.convs_per_block == 0 {
            return Err(Error::Config(
                "network width and convs_per_block must be positive".into(),
            ));
        }
        let w = spec.width;
        let mut layers = Vec::new();
        let conv = |inc: usize, outc: usize, gain: f64, rng: &mut ChaCha12Rng| {
            let mut c = Conv2d::zeros(inc, outc, 3);
            c.init(rng, gain);
            Layer::Conv(c)
        };
        layers.push(conv(spec.input_channels, w, 1.0, rng));
        layers.push(Layer::Relu);
        for _ in 0..spec.head_layers {
            layers.push(conv(w, w, 1.0, rng));
            layers.push(Layer::BatchNorm(BatchNorm2d::new(w)));
            layers.push(Layer::Relu);
        }
        for _ in 0..spec.residual_blocks {
            layers.push(Layer::ResidualBegin);
            for ci in 0..spec.convs_per_block {
                layers.push(conv(w, w, 1.0, rng));
                layers.push(Layer::BatchNorm(BatchNorm2d::new(w)));
                if ci + 1 < spec.convs_per_block {
                    layers.push(Layer::Relu);
                }
            }
            layers.push(Layer::ResidualEnd);
            layers.push(Layer::Relu);
        }
        // a noise predictor should start near the zero map so training
        // fits structure instead of first unlearning the init
        layers.push(conv(w, spec.input_channels, 0.05, rng));
        DaeNetwork::from_layers(layers, sigma_eta)
    }

    /// [`DaeNetwork::from_spec`] with the generator seeded from an integer.
    pub fn from_spec_seeded(spec: &NetSpec, sigma_eta: f64, seed: u64) -> Result<DaeNetwork> {
        use rand::SeedableRng;
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        DaeNetwork::from_spec(spec, sigma_eta, &mut rng)
    }

    /// Assemble a network from an explicit layer tape.
    pub fn from_layers(layers: Vec<Layer>, sigma_eta: f64) -> Result<DaeNetwork> {
        let input_channels = match layers.iter().find_map(|l| match l {
            Layer::Conv(c) => Some(c.in_channels),
            _ => None,
        }) {
            Some(c) => c,
            None => return Err(Error::Config("network has no convolution layers".into())),
        };
        let output_channels = layers
            .iter()
            .rev()
            .find_map(|l| match l {
                Layer::Conv(c) => Some(c.out_channels),
                _ => None,
            })
            .unwrap();
        Ok(DaeNetwork {
            layers,
            input_channels,
            output_channels,
            sigma_eta,
            mode: Mode::Inference,
        })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn input_channels(&self) -> usize {
        self.input_channels
    }

    pub fn output_channels(&self) -> usize {
        self.output_channels
    }

    pub fn sigma_eta(&self) -> f64 {
        self.sigma_eta
    }

    pub fn set_sigma_eta(&mut self, sigma: f64) {
        self.sigma_eta = sigma;
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn set_mode(&mut self, mode: Mode) {
        self.mode = mode;
    }

    /// Set every trainable parameter and running statistic to zero.
    pub fn zero_parameters(&mut self) {
        for layer in &mut self.layers {
            match layer {
                Layer::Conv(c) => {
                    c.weight.fill(0.0);
                    c.bias.fill(0.0);
                }
                Layer::BatchNorm(b) => {
                    b.gamma.fill(0.0);
                    b.beta.fill(0.0);
                    b.running_mean.fill(0.0);
                    b.running_var.fill(1.0);
                }
                _ => {}
            }
        }
    }

    fn check_input(&self, x: &Tensor) -> Result<()> {
        if x.c != self.input_channels {
            return Err(Error::Shape(format!(
                "network expects {} input channels, got {}",
                self.input_channels, x.c
            )));
        }
        Ok(())
    }

    fn forward_pass(&self, x: &Tensor, collect: bool) -> Result<(Tensor, Option<Trace>)> {
        self.check_input(x)?;
        let mut cur = x.clone();
        let mut inputs = Vec::new();
        let mut bn_stats = Vec::new();
        let mut skip_stack: Vec<Tensor> = Vec::new();
        for layer in &self.layers {
            if collect {
                inputs.push(cur.clone());
            }
            let mut used_stats = None;
            cur = match layer {
                Layer::Conv(c) => c.forward(&cur),
                Layer::BatchNorm(b) => {
                    let (mean, var) = match self.mode {
                        Mode::Train => b.batch_stats(&cur),
                        Mode::Inference => (b.running_mean.clone(), b.running_var.clone()),
                    };
                    let out = b.forward(&cur, &mean, &var);
                    used_stats = Some((mean, var));
                    out
                }
                Layer::Relu => {
                    let mut out = cur;
                    for v in &mut out.data {
                        if *v < 0.0 {
                            *v = 0.0;
                        }
                    }
                    out
                }
                Layer::ResidualBegin => {
                    skip_stack.push(cur.clone());
                    cur
                }
                Layer::ResidualEnd => {
                    let skip = skip_stack
                        .pop()
                        .expect("unmatched ResidualEnd in layer tape");
                    let mut out = cur;
                    out.add_scaled(&skip, 1.0);
                    out
                }
            };
            if collect {
                bn_stats.push(used_stats);
            }
        }
        let trace = if collect {
            Some(Trace { inputs, bn_stats })
        } else {
            None
        };
        Ok((cur, trace))
    }

    /// Noise estimate `D(x)`; pure in both modes (running statistics are
    /// only updated through [`DaeNetwork::update_running_stats`]).
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        Ok(self.forward_pass(x, false)?.0)
    }

    pub(crate) fn forward_traced(&self, x: &Tensor) -> Result<(Tensor, Trace)> {
        let (out, trace) = self.forward_pass(x, true)?;
        Ok((out, trace.unwrap()))
    }

    /// Fold the batch statistics recorded in a training-mode trace into the
    /// running statistics.
    pub(crate) fn update_running_stats(&mut self, trace: &Trace) {
        for (layer, stats) in self.layers.iter_mut().zip(&trace.bn_stats) {
            if let (Layer::BatchNorm(b), Some((mean, var))) = (layer, stats) {
                for c in 0..b.channels {
                    b.running_mean[c] =
                        (1.0 - b.momentum) * b.running_mean[c] + b.momentum * mean[c];
                    b.running_var[c] =
                        (1.0 - b.momentum) * b.running_var[c] + b.momentum * var[c];
                }
            }
        }
    }

    /// Vector-Jacobian product `dD^T(x) r`: the gradient of `<D(x), r>`
    /// with respect to `x`, with `r` held fixed.
    pub fn vjp(&self, x: &Tensor, cotangent: &Tensor) -> Result<Tensor> {
        let (out, trace) = self.forward_traced(x)?;
        if !out.same_shape(cotangent) {
            return Err(Error::Shape(format!(
                "cotangent {}x{}x{}x{} does not match network output {}x{}x{}x{}",
                cotangent.n, cotangent.c, cotangent.h, cotangent.w, out.n, out.c, out.h, out.w
            )));
        }
        self.backward(&trace, cotangent, None)
    }

    /// Backpropagate a cotangent through the tape; optionally accumulates
    /// parameter gradients (in trainable-parameter order).
    pub(crate) fn backward(
        &self,
        trace: &Trace,
        cotangent: &Tensor,
        mut grads: Option<&mut Grads>,
    ) -> Result<Tensor> {
        let slot_of_layer = self.grad_slot_indices();
        let mut g = cotangent.clone();
        let mut skip_stack: Vec<Tensor> = Vec::new();
        for (li, layer) in self.layers.iter().enumerate().rev() {
            let x = &trace.inputs[li];
            g = match layer {
                Layer::Conv(c) => {
                    if let Some(gr) = grads.as_deref_mut() {
                        let slot = slot_of_layer[li].unwrap();
                        let (dw, db) = gr.pair_mut(slot);
                        c.backward_params(x, &g, dw, db);
                    }
                    c.backward_input(&g)
                }
                Layer::BatchNorm(b) => {
                    let stats = trace.bn_stats[li]
                        .as_ref()
                        .expect("batch-norm layer missing statistics in trace");
                    let mut scratch_gamma = vec![0.0; b.channels];
                    let mut scratch_beta = vec![0.0; b.channels];
                    let (dgamma, dbeta): (&mut [f64], &mut [f64]) =
                        if let Some(gr) = grads.as_deref_mut() {
                            let slot = slot_of_layer[li].unwrap();
                            let (a, bslice) = gr.pair_mut(slot);
                            (a, bslice)
                        } else {
                            (&mut scratch_gamma, &mut scratch_beta)
                        };
                    match self.mode {
                        Mode::Train => b.backward_batch(x, &g, &stats.0, &stats.1, dgamma, dbeta),
                        Mode::Inference => {
                            b.backward_frozen(x, &g, &stats.0, &stats.1, dgamma, dbeta)
                        }
                    }
                }
                Layer::Relu => {
                    let mut out = g;
                    for (gv, xv) in out.data.iter_mut().zip(&x.data) {
                        if *xv <= 0.0 {
                            *gv = 0.0;
                        }
                    }
                    out
                }
                Layer::ResidualEnd => {
                    skip_stack.push(g.clone());
                    g
                }
                Layer::ResidualBegin => {
                    let skip = skip_stack
                        .pop()
                        .expect("unmatched ResidualBegin in backward pass");
                    let mut out = g;
                    out.add_scaled(&skip, 1.0);
                    out
                }
            };
        }
        Ok(g)
    }

    /// First gradient-slot index for each layer (two slots per conv or
    /// batch-norm layer), used to align `Grads` with the tape.
    fn grad_slot_indices(&self) -> Vec<Option<usize>> {
        let mut out = Vec::with_capacity(self.layers.len());
        let mut next = 0;
        for layer in &self.layers {
            match layer {
                Layer::Conv(_) | Layer::BatchNorm(_) => {
                    out.push(Some(next));
                    next += 2;
                }
                _ => out.push(None),
            }
        }
        out
    }

    /// Sizes of the trainable parameter slots, in order.
    pub(crate) fn param_sizes(&self) -> Vec<usize> {
        let mut out = Vec::new();
        for layer in &self.layers {
            match layer {
                Layer::Conv(c) => {
                    out.push(c.weight.len());
                    out.push(c.bias.len());
                }
                Layer::BatchNorm(b) => {
                    out.push(b.gamma.len());
                    out.push(b.beta.len());
                }
                _ => {}
            }
        }
        out
    }

    /// Mutable views of the trainable parameters, aligned with `Grads`.
    pub(crate) fn params_mut(&mut self) -> Vec<&mut Vec<f64>> {
        let mut out = Vec::new();
        for layer in &mut self.layers {
            match layer {
                Layer::Conv(c) => {
                    out.push(&mut c.weight);
                    out.push(&mut c.bias);
                }
                Layer::BatchNorm(b) => {
                    out.push(&mut b.gamma);
                    out.push(&mut b.beta);
                }
                _ => {}
            }
        }
        out
    }
}

/// Parameter gradients, one slot per trainable tensor.
pub(crate) struct Grads {
    slots: Vec<Vec<f64>>,
}

impl Grads {
    pub fn zeros_for(net: &DaeNetwork) -> Grads {
        Grads {
            slots: net.param_sizes().iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    pub fn zero(&mut self) {
        for s in &mut self.slots {
            s.fill(0.0);
        }
    }

    pub fn slots(&self) -> &[Vec<f64>] {
        &self.slots
    }

    /// Mutable access to the two consecutive slots of one layer.
    fn pair_mut(&mut self, first: usize) -> (&mut [f64], &mut [f64]) {
        let (a, b) = self.slots.split_at_mut(first + 1);
        (&mut a[first], &mut b[0])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn random_tensor(n: usize, c: usize, h: usize, w: usize, seed: u64) -> Tensor {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let data = (0..n * c * h * w)
            .map(|_| rng.random::<f64>() * 2.0 - 1.0)
            .collect();
        Tensor::from_data(n, c, h, w, data).unwrap()
    }

    fn tiny_net(seed: u64) -> DaeNetwork {
        let spec = NetSpec {
            input_channels: 8,
            width: 6,
            residual_blocks: 1,
            convs_per_block: 2,
            head_layers: 0,
        };
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        DaeNetwork::from_spec(&spec, 25.0 / 255.0, &mut rng).unwrap()
    }

    #[test]
    fn zero_network_outputs_zero() {
        let mut net = tiny_net(1);
        net.zero_parameters();
        let x = random_tensor(1, 8, 6, 6, 2);
        let y = net.forward(&x).unwrap();
        assert_eq!(y.l2_norm(), 0.0);
        let r = random_tensor(1, 8, 6, 6, 3);
        let g = net.vjp(&x, &r).unwrap();
        assert_eq!(g.l2_norm(), 0.0);
    }

    #[test]
    fn delta_kernel_with_relu_is_elementwise_relu() {
        let mut conv = Conv2d::zeros(8, 8, 3);
        for c in 0..8 {
            conv.weight[((c * 8 + c) * 3 + 1) * 3 + 1] = 1.0;
        }
        let net =
            DaeNetwork::from_layers(vec![Layer::Conv(conv), Layer::Relu], 0.1).unwrap();
        let x = random_tensor(2, 8, 5, 5, 4);
        let y = net.forward(&x).unwrap();
        for (yv, xv) in y.data.iter().zip(&x.data) {
            assert_eq!(*yv, xv.max(0.0));
        }
    }

    #[test]
    fn channel_mismatch_is_rejected() {
        let net = tiny_net(5);
        let x = random_tensor(1, 4, 6, 6, 6);
        assert!(matches!(net.forward(&x), Err(Error::Shape(_))));
        let x8 = random_tensor(1, 8, 6, 6, 7);
        let bad_r = random_tensor(1, 4, 6, 6, 8);
        assert!(matches!(net.vjp(&x8, &bad_r), Err(Error::Shape(_))));
    }

    #[test]
    fn vjp_is_linear_in_cotangent() {
        let net = tiny_net(9);
        let x = random_tensor(1, 8, 6, 6, 10);
        let r1 = random_tensor(1, 8, 6, 6, 11);
        let r2 = random_tensor(1, 8, 6, 6, 12);
        let (a, b) = (0.7, -1.3);
        let mut combo = r1.clone();
        for i in 0..combo.data.len() {
            combo.data[i] = a * r1.data[i] + b * r2.data[i];
        }
        let v1 = net.vjp(&x, &r1).unwrap();
        let v2 = net.vjp(&x, &r2).unwrap();
        let vc = net.vjp(&x, &combo).unwrap();
        let err = vc
            .data
            .iter()
            .zip(v1.data.iter().zip(&v2.data))
            .map(|(c, (p, q))| (c - (a * p + b * q)).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-12, "{err}");
    }

    /// Central finite differences of `<D(x), r>` with respect to `x`.
    fn fd_gradient(net: &DaeNetwork, x: &Tensor, r: &Tensor, step: f64) -> Tensor {
        let mut g = Tensor::zeros(x.n, x.c, x.h, x.w);
        for i in 0..x.data.len() {
            let mut xp = x.clone();
            xp.data[i] += step;
            let mut xm = x.clone();
            xm.data[i] -= step;
            let fp: f64 = net
                .forward(&xp)
                .unwrap()
                .data
                .iter()
                .zip(&r.data)
                .map(|(a, b)| a * b)
                .sum();
            let fm: f64 = net
                .forward(&xm)
                .unwrap()
                .data
                .iter()
                .zip(&r.data)
                .map(|(a, b)| a * b)
                .sum();
            g.data[i] = (fp - fm) / (2.0 * step);
        }
        g
    }

    #[test]
    fn vjp_matches_finite_differences_inference() {
        let net = tiny_net(13);
        let x = random_tensor(1, 8, 4, 4, 14);
        let r = random_tensor(1, 8, 4, 4, 15);
        let got = net.vjp(&x, &r).unwrap();
        let fd = fd_gradient(&net, &x, &r, 1e-6);
        let num = got
            .data
            .iter()
            .zip(&fd.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let den = fd.l2_norm();
        assert!(num / den < 1e-5, "relative error {}", num / den);
    }

    #[test]
    fn vjp_matches_finite_differences_train_mode() {
        let mut net = tiny_net(16);
        net.set_mode(Mode::Train);
        let x = random_tensor(2, 8, 4, 4, 17);
        let r = random_tensor(2, 8, 4, 4, 18);
        let got = net.vjp(&x, &r).unwrap();
        let fd = fd_gradient(&net, &x, &r, 1e-6);
        let num = got
            .data
            .iter()
            .zip(&fd.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let den = fd.l2_norm();
        assert!(num / den < 1e-5, "relative error {}", num / den);
    }

    #[test]
    fn weight_gradients_match_finite_differences() {
        let mut net = tiny_net(19);
        net.set_mode(Mode::Train);
        let x = random_tensor(2, 8, 4, 4, 20);
        let r = random_tensor(2, 8, 4, 4, 21);
        let (_, trace) = net.forward_traced(&x).unwrap();
        let mut grads = Grads::zeros_for(&net);
        net.backward(&trace, &r, Some(&mut grads)).unwrap();

        // probe a few parameters in every slot
        let loss = |net: &DaeNetwork| -> f64 {
            net.forward(&x)
                .unwrap()
                .data
                .iter()
                .zip(&r.data)
                .map(|(a, b)| a * b)
                .sum()
        };
        let step = 1e-6;
        let sizes = net.param_sizes();
        for slot in 0..sizes.len() {
            for &pi in &[0usize, sizes[slot] / 2, sizes[slot] - 1] {
                let base = {
                    let mut params = net.params_mut();
                    params[slot][pi]
                };
                {
                    let mut params = net.params_mut();
                    params[slot][pi] = base + step;
                }
                let fp = loss(&net);
                {
                    let mut params = net.params_mut();
                    params[slot][pi] = base - step;
                }
                let fm = loss(&net);
                {
                    let mut params = net.params_mut();
                    params[slot][pi] = base;
                }
                let fd = (fp - fm) / (2.0 * step);
                let an = grads.slots()[slot][pi];
                // conv biases feeding a train-mode batch norm have an exactly
                // zero gradient; finite differences only sees roundoff there
                let noise_floor = 5e-9;
                assert!(
                    (fd - an).abs() < 1e-4 * fd.abs().max(an.abs()) + noise_floor,
                    "slot {slot} param {pi}: fd {fd} vs {an}"
                );
            }
        }
    }

    #[test]
    fn inference_forward_is_deterministic() {
        let net = tiny_net(22);
        let x = random_tensor(1, 8, 6, 6, 23);
        let y1 = net.forward(&x).unwrap();
        let y2 = net.forward(&x).unwrap();
        assert_eq!(y1.data, y2.data);
    }
}
