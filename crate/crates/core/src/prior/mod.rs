//! The learned regularizer: a residual noise-predicting network over
//! 8-channel wavelet tensors, its trainer, and the analytic Gaussian-mixture
//! oracles for the optimal denoiser.

pub mod gmm;
pub mod network;
pub mod tensor;
pub mod train;

pub use gmm::{analytic_dae, analytic_score, quadrature_dae, GmmComponent, GmmDensity, QuadratureGrid};
pub use network::{BatchNorm2d, Conv2d, DaeNetwork, Layer, Mode, NetSpec};
pub use tensor::Tensor;
pub use train::{train_dae, TrainConfig};
