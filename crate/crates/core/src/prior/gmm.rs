//! Isotropic Gaussian-mixture densities with the closed-form optimal
//! denoiser, used as analytic ground truth for the learned prior.
//!
//! Smoothing a mixture with an isotropic Gaussian of variance `sigma^2`
//! yields another mixture with component variances `s_i^2 + sigma^2`, so
//! the optimal denoiser and its mean-shift vector have closed forms. An
//! independent trapezoid-quadrature evaluation of the defining ratio of
//! integrals is provided for 1D and 2D as a cross-check.

use rand::Rng;
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct GmmComponent {
    pub weight: f64,
    pub mean: Vec<f64>,
    /// Isotropic component variance `s_i^2`.
    pub variance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GmmDensity {
    components: Vec<GmmComponent>,
    dimension: usize,
}

impl GmmDensity {
    pub fn new(components: Vec<GmmComponent>) -> Result<GmmDensity> {
        if components.is_empty() {
            return Err(Error::Config("mixture needs at least one component".into()));
        }
        let dimension = components[0].mean.len();
        let mut total = 0.0;
        for c in &components {
            if c.mean.len() != dimension {
                return Err(Error::Shape(
                    "mixture components have inconsistent dimensions".into(),
                ));
            }
            if c.variance <= 0.0 {
                return Err(Error::Config(format!(
                    "component variance must be positive, got {}",
                    c.variance
                )));
            }
            if c.weight < 0.0 {
                return Err(Error::Config(format!(
                    "component weight must be nonnegative, got {}",
                    c.weight
                )));
            }
            total += c.weight;
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Config(format!(
                "component weights sum to {total}, expected 1"
            )));
        }
        Ok(GmmDensity {
            components,
            dimension,
        })
    }

    /// Convenience constructor for a single isotropic Gaussian.
    pub fn single(mean: Vec<f64>, variance: f64) -> Result<GmmDensity> {
        GmmDensity::new(vec![GmmComponent {
            weight: 1.0,
            mean,
            variance,
        }])
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn components(&self) -> &[GmmComponent] {
        &self.components
    }

    /// Density value at a point.
    pub fn pdf(&self, u: &[f64]) -> f64 {
        self.components
            .iter()
            .map(|c| {
                let d2: f64 = u
                    .iter()
                    .zip(&c.mean)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                let norm =
                    (2.0 * std::f64::consts::PI * c.variance).powf(self.dimension as f64 / 2.0);
                c.weight * (-d2 / (2.0 * c.variance)).exp() / norm
            })
            .sum()
    }

    /// Draw one sample.
    pub fn sample(&self, rng: &mut ChaCha12Rng) -> Vec<f64> {
        let pick = rng.random::<f64>();
        let mut acc = 0.0;
        let mut chosen = &self.components[self.components.len() - 1];
        for c in &self.components {
            acc += c.weight;
            if pick < acc {
                chosen = c;
                break;
            }
        }
        let s = chosen.variance.sqrt();
        chosen
            .mean
            .iter()
            .map(|m| {
                let z: f64 = rng.sample(rand_distr::StandardNormal);
                m + s * z
            })
            .collect()
    }
}

fn check_dim(q: &GmmDensity, u: &[f64]) -> Result<()> {
    if u.len() != q.dimension() {
        return Err(Error::Shape(format!(
            "point has dimension {}, mixture has {}",
            u.len(),
            q.dimension()
        )));
    }
    Ok(())
}

/// Mean-shift vector `sigma^2 grad log (g_sigma * q)(u)` of the smoothed
/// density, computed with log-sum-exp stabilized responsibilities.
pub fn analytic_score(q: &GmmDensity, sigma_eta: f64, u: &[f64]) -> Result<Vec<f64>> {
    check_dim(q, u)?;
    let sig2 = sigma_eta * sigma_eta;
    let d = q.dimension() as f64;
    // log weights of the smoothed mixture at u
    let logs: Vec<f64> = q
        .components()
        .iter()
        .map(|c| {
            let v = c.variance + sig2;
            let d2: f64 = u
                .iter()
                .zip(&c.mean)
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            c.weight.max(f64::MIN_POSITIVE).ln()
                - 0.5 * d * (2.0 * std::f64::consts::PI * v).ln()
                - d2 / (2.0 * v)
        })
        .collect();
    let max_log = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let denom: f64 = logs.iter().map(|l| (l - max_log).exp()).sum();
    let mut score = vec![0.0; u.len()];
    for (c, l) in q.components().iter().zip(&logs) {
        let resp = (l - max_log).exp() / denom;
        let v = c.variance + sig2;
        for (sc, (m, x)) in score.iter_mut().zip(c.mean.iter().zip(u)) {
            *sc += resp * (m - x) / v;
        }
    }
    for sc in &mut score {
        *sc *= sig2;
    }
    Ok(score)
}

/// Closed-form optimal denoiser `A(u) = u + analytic_score(u)`.
pub fn analytic_dae(q: &GmmDensity, sigma_eta: f64, u: &[f64]) -> Result<Vec<f64>> {
    let score = analytic_score(q, sigma_eta, u)?;
    Ok(u.iter().zip(&score).map(|(a, s)| a + s).collect())
}

/// Quadrature grid for the integral-form oracle.
#[derive(Debug, Clone, Copy)]
pub struct QuadratureGrid {
    /// Half-width of the integration box in units of `sigma_eta`.
    pub radius: f64,
    pub points_per_dim: usize,
}

impl Default for QuadratureGrid {
    fn default() -> Self {
        QuadratureGrid {
            radius: 8.0,
            points_per_dim: 2001,
        }
    }
}

/// Trapezoid-rule evaluation of the optimal denoiser's ratio of integrals
/// over the noise variable. Supports dimensions 1 and 2 only.
pub fn quadrature_dae(
    q: &GmmDensity,
    sigma_eta: f64,
    u: &[f64],
    grid: QuadratureGrid,
) -> Result<Vec<f64>> {
    check_dim(q, u)?;
    let d = q.dimension();
    if d > 2 {
        return Err(Error::UnsupportedDimension(d));
    }
    if sigma_eta <= 0.0 {
        return Err(Error::Config("quadrature needs sigma_eta > 0".into()));
    }
    let n = grid.points_per_dim;
    let half = grid.radius * sigma_eta;
    let h = 2.0 * half / (n - 1) as f64;
    let coord = |k: usize| -half + k as f64 * h;
    let trap = |k: usize| if k == 0 || k == n - 1 { 0.5 } else { 1.0 };
    let gauss = |eta_sq: f64| (-eta_sq / (2.0 * sigma_eta * sigma_eta)).exp();

    let mut num = vec![0.0; d];
    let mut den = 0.0;
    match d {
        1 => {
            for k in 0..n {
                let eta = coord(k);
                let wgt = trap(k) * gauss(eta * eta) * q.pdf(&[u[0] - eta]);
                den += wgt;
                num[0] += wgt * eta;
            }
        }
        2 => {
            for ka in 0..n {
                let ea = coord(ka);
                for kb in 0..n {
                    let eb = coord(kb);
                    let wgt = trap(ka)
                        * trap(kb)
                        * gauss(ea * ea + eb * eb)
                        * q.pdf(&[u[0] - ea, u[1] - eb]);
                    den += wgt;
                    num[0] += wgt * ea;
                    num[1] += wgt * eb;
                }
            }
        }
        _ => unreachable!(),
    }
    if den == 0.0 {
        return Err(Error::Config(
            "quadrature denominator vanished; enlarge the grid radius".into(),
        ));
    }
    Ok(u.iter()
        .zip(&num)
        .map(|(x, nu)| x - nu / den)
        .collect())
}
