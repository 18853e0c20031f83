//! Observation log-likelihoods.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Smallest admissible degrees of freedom for the noise distribution.
pub const NU_MIN: f64 = 3.0;

/// Student-t noise: variance inflation `sigma2` and degrees of freedom `nu`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TLikParams {
    pub sigma2: f64,
    pub nu: f64,
}

impl TLikParams {
    pub fn new(sigma2: f64, nu: f64) -> Result<Self> {
        if !(sigma2 > 0.0 && sigma2.is_finite()) {
            return Err(Error::invalid(format!("sigma2 must be positive, got {sigma2}")));
        }
        if !(nu >= NU_MIN && nu.is_finite()) {
            return Err(Error::invalid(format!("nu must be at least {NU_MIN}, got {nu}")));
        }
        Ok(Self { sigma2, nu })
    }

    /// Per-observation normalizing constant of the t density.
    fn log_norm(&self) -> f64 {
        ln_gamma(0.5 * (self.nu + 1.0)) - ln_gamma(0.5 * self.nu) - 0.5 * (PI * self.nu * self.sigma2).ln()
    }

    /// Variance of the noise, `sigma2 * nu / (nu - 2)`.
    pub fn variance(&self) -> f64 {
        self.sigma2 * self.nu / (self.nu - 2.0)
    }
}

/// Log density of a single residual.
pub fn t_logpdf(r: f64, params: &TLikParams) -> f64 {
    params.log_norm() - 0.5 * (params.nu + 1.0) * (r * r / (params.nu * params.sigma2)).ln_1p()
}

/// Residuals `y - (z - 2pi k)`.
pub fn residuals(y: &[f64], z: &[f64], k: &[i64]) -> Vec<f64> {
    y.iter()
        .zip(z)
        .zip(k)
        .map(|((yi, zi), ki)| yi - (zi - TAU * *ki as f64))
        .collect()
}

/// Student-t log-likelihood of residuals.
pub fn t_loglik_residuals(r: &[f64], params: &TLikParams) -> f64 {
    let c = params.nu * params.sigma2;
    let tail: f64 = r.iter().map(|ri| (ri * ri / c).ln_1p()).sum();
    r.len() as f64 * params.log_norm() - 0.5 * (params.nu + 1.0) * tail
}

/// Student-t log-likelihood of wrapped responses given latent values and
/// wrapping numbers.
pub fn t_loglik(y: &[f64], z: &[f64], k: &[i64], params: &TLikParams) -> f64 {
    debug_assert!(y.len() == z.len() && z.len() == k.len());
    let c = params.nu * params.sigma2;
    let tail: f64 = y
        .iter()
        .zip(z)
        .zip(k)
        .map(|((yi, zi), ki)| {
            let r = yi - (zi - TAU * *ki as f64);
            (r * r / c).ln_1p()
        })
        .sum();
    y.len() as f64 * params.log_norm() - 0.5 * (params.nu + 1.0) * tail
}

/// Slopes given the latent log-mean: `sum_i log phi((beta_i - e^delta_i) / s) - m log s`.
pub fn hier_loglik(delta: &[f64], beta: &[f64], sigma_beta: f64) -> f64 {
    debug_assert_eq!(delta.len(), beta.len());
    let m = delta.len() as f64;
    let sq: f64 = delta
        .iter()
        .zip(beta)
        .map(|(d, b)| {
            let u = (b - d.exp()) / sigma_beta;
            u * u
        })
        .sum();
    -0.5 * m * TAU.ln() - 0.5 * sq - m * sigma_beta.ln()
}
