//! Conditional updates for the mean, scale, lengthscale and noise parameters,
//! plus the slope-prior preprocessing.

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Gamma as GammaDist};

use crate::error::{Error, Result};
use crate::gp::{CovMatrix, KernelParams, DEFAULT_JITTER};
use crate::likelihood::{t_loglik_residuals, TLikParams, NU_MIN};
use crate::partition::mh_accept;

/// Linear mean `alpha + beta x` of the latent process.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanParams {
    pub alpha: f64,
    pub beta: f64,
}

impl MeanParams {
    pub fn at(&self, x: f64) -> f64 {
        self.alpha + self.beta * x
    }

    /// `z - alpha - beta x` elementwise.
    pub fn residuals(&self, x: &[f64], z: &[f64]) -> Vec<f64> {
        x.iter().zip(z).map(|(xi, zi)| zi - self.at(*xi)).collect()
    }
}

/// Gamma distribution in the shape/rate parameterization.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GammaPrior {
    pub shape: f64,
    pub rate: f64,
}

impl GammaPrior {
    /// Log density up to a constant.
    pub fn log_kernel(&self, v: f64) -> f64 {
        (self.shape - 1.0) * v.ln() - self.rate * v
    }

    pub fn median(&self) -> f64 {
        GammaDist::new(self.shape, self.rate)
            .map(|g| g.inverse_cdf(0.5))
            .unwrap_or(self.shape / self.rate)
    }
}

/// Scale prior written as `IGa(a0, b0)` in the form whose conditional is
/// `IGa((a0 + n) / 2, (b0 + e' S^-1 e) / 2)`. The implied density on the
/// scale is the inverse gamma with shape `a0 / 2` and rate `b0 / 2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalePrior {
    pub a0: f64,
    pub b0: f64,
}

impl ScalePrior {
    pub fn posterior(&self, n: usize, quad: f64) -> (f64, f64) {
        (0.5 * (self.a0 + n as f64), 0.5 * (self.b0 + quad))
    }

    /// Median of the nominal `IGa(a0, b0)`, used as a starting value.
    pub fn median(&self) -> f64 {
        1.0 / GammaPrior {
            shape: self.a0,
            rate: self.b0,
        }
        .median()
    }
}

/// Prior hyperparameters for the single-dataset model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriorConfig {
    pub intercept_mean: f64,
    pub intercept_var: f64,
    /// Slope prior mean; usually set by `slope_prior_mean`.
    pub slope_mean: f64,
    pub slope_var: f64,
    pub tau2: ScalePrior,
    pub lengthscale: GammaPrior,
    pub sigma2: GammaPrior,
    /// Rate of the exponential prior on the degrees of freedom.
    pub nu_rate: f64,
    pub nu_min: f64,
    /// Contiguous group size for the local slope fits; `None` picks
    /// `max(5, ceil(n / 10))`.
    pub group_size: Option<usize>,
}

impl Default for PriorConfig {
    fn default() -> Self {
        Self {
            intercept_mean: 0.0,
            intercept_var: 10.0,
            slope_mean: 0.0,
            slope_var: 10.0,
            tau2: ScalePrior { a0: 1.0, b0: 1.0 },
            lengthscale: GammaPrior { shape: 2.5, rate: 1.5 },
            sigma2: GammaPrior { shape: 0.5, rate: 0.5 },
            nu_rate: 1.0 / 30.0,
            nu_min: NU_MIN,
            group_size: None,
        }
    }
}

impl PriorConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("intercept_var", self.intercept_var),
            ("slope_var", self.slope_var),
            ("tau2.a0", self.tau2.a0),
            ("tau2.b0", self.tau2.b0),
            ("lengthscale.shape", self.lengthscale.shape),
            ("lengthscale.rate", self.lengthscale.rate),
            ("sigma2.shape", self.sigma2.shape),
            ("sigma2.rate", self.sigma2.rate),
            ("nu_rate", self.nu_rate),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("prior {name} must be positive, got {v}")));
            }
        }
        if !(self.nu_min >= NU_MIN) {
            return Err(Error::invalid(format!("nu_min must be at least {NU_MIN}")));
        }
        if matches!(self.group_size, Some(g) if g < 2) {
            return Err(Error::invalid("group_size must be at least 2"));
        }
        Ok(())
    }

    /// Median of the truncated exponential prior on `nu`.
    pub fn nu_median(&self) -> f64 {
        self.nu_min + std::f64::consts::LN_2 / self.nu_rate
    }

    pub fn nu_log_prior(&self, nu: f64) -> f64 {
        if nu < self.nu_min {
            f64::NEG_INFINITY
        } else {
            -self.nu_rate * nu
        }
    }
}

/// Random-walk step sizes on the log scale.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepSizes {
    pub lengthscale: f64,
    pub sigma2: f64,
    pub nu: f64,
}

impl Default for StepSizes {
    fn default() -> Self {
        Self {
            lengthscale: 0.3,
            sigma2: 0.3,
            nu: 0.5,
        }
    }
}

pub fn default_group_size(n: usize) -> usize {
    5.max(n.div_ceil(10))
}

/// Least-squares slope of one group, or `None` with zero input variance.
fn ols_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if !(sxx > 0.0) {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    Some(sxy / sxx)
}

/// Mean of the non-negative parts of the local least-squares slopes over
/// contiguous groups of `group` sorted points. The last group may be short;
/// a trailing single point is folded into the previous group.
pub fn slope_prior_mean(x: &[f64], y: &[f64], group: usize) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::invalid("slope preprocessing: x and y differ in length"));
    }
    if group < 2 || x.len() < group {
        return Err(Error::invalid(format!(
            "slope preprocessing needs n >= group size >= 2 (n = {}, group = {group})",
            x.len()
        )));
    }
    let n = x.len();
    let mut bounds = Vec::new();
    let mut start = 0;
    while start < n {
        let end = (start + group).min(n);
        bounds.push((start, end));
        start = end;
    }
    if let [.., prev, last] = bounds.as_mut_slice() {
        if last.1 - last.0 < 2 {
            prev.1 = last.1;
            bounds.pop();
        }
    }
    let mut slopes = Vec::with_capacity(bounds.len());
    for (j, (a, b)) in bounds.into_iter().enumerate() {
        match ols_slope(&x[a..b], &y[a..b]) {
            Some(s) => slopes.push(s.max(0.0)),
            None => log::warn!("slope preprocessing: group {j} has zero input variance, skipped"),
        }
    }
    if slopes.is_empty() {
        return Err(Error::DegenerateGroup);
    }
    Ok(slopes.iter().sum::<f64>() / slopes.len() as f64)
}

/// Unit-scale correlation factor `R_theta(X) + nugget I` with the solves the
/// conjugate mean update reuses.
#[derive(Clone, Debug)]
pub struct CorrFactor {
    pub lengthscale: f64,
    pub nugget: f64,
    cov: CovMatrix,
    inv_one: Vec<f64>,
    inv_x: Vec<f64>,
}

impl CorrFactor {
    pub fn new(x: &[f64], lengthscale: f64, nugget: f64) -> Result<Self> {
        let cov = CovMatrix::from_kernel(x, &KernelParams::correlation(lengthscale), nugget, DEFAULT_JITTER)?;
        let inv_one = cov.solve(&vec![1.0; x.len()]);
        let inv_x = cov.solve(x);
        Ok(Self {
            lengthscale,
            nugget,
            cov,
            inv_one,
            inv_x,
        })
    }

    pub fn cov(&self) -> &CovMatrix {
        &self.cov
    }

    pub fn into_cov(self) -> CovMatrix {
        self.cov
    }

    /// Log density of `e ~ N(0, tau2 R)`.
    pub fn logpdf(&self, e: &[f64], tau2: f64) -> f64 {
        let zeros = vec![0.0; e.len()];
        self.cov.mvn_logpdf(e, &zeros, tau2)
    }
}

/// Conditional precision and linear term of `(alpha, beta)`.
pub fn mean_posterior(
    z: &[f64],
    x: &[f64],
    factor: &CorrFactor,
    tau2: f64,
    prior: &PriorConfig,
) -> ([f64; 3], [f64; 2]) {
    let inv_z = factor.cov.solve(z);
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(u, v)| u * v).sum::<f64>();
    let a11 = factor.inv_one.iter().sum::<f64>() / tau2 + 1.0 / prior.intercept_var;
    let a12 = factor.inv_x.iter().sum::<f64>() / tau2;
    let a22 = dot(x, &factor.inv_x) / tau2 + 1.0 / prior.slope_var;
    let b1 = inv_z.iter().sum::<f64>() / tau2 + prior.intercept_mean / prior.intercept_var;
    let b2 = dot(x, &inv_z) / tau2 + prior.slope_mean / prior.slope_var;
    ([a11, a12, a22], [b1, b2])
}

/// Draws `(alpha, beta) ~ N(A^-1 b, A^-1)` from the conjugate conditional.
pub fn gibbs_mean<R: Rng + ?Sized>(
    z: &[f64],
    x: &[f64],
    factor: &CorrFactor,
    tau2: f64,
    prior: &PriorConfig,
    rng: &mut R,
) -> Result<MeanParams> {
    let ([a11, a12, a22], [b1, b2]) = mean_posterior(z, x, factor, tau2, prior);
    let det = a11 * a22 - a12 * a12;
    if !(det > 0.0 && det.is_finite()) {
        return Err(Error::CholeskyFailure { dim: 2, jitter: 0.0 });
    }
    let m1 = (a22 * b1 - a12 * b2) / det;
    let m2 = (a11 * b2 - a12 * b1) / det;
    // Covariance A^-1 = [[a22, -a12], [-a12, a11]] / det, factored directly.
    let c11 = a22 / det;
    let c12 = -a12 / det;
    let c22 = a11 / det;
    let l11 = c11.sqrt();
    let l21 = c12 / l11;
    let l22 = (c22 - l21 * l21).max(0.0).sqrt();
    let u1: f64 = rng.sample(StandardNormal);
    let u2: f64 = rng.sample(StandardNormal);
    Ok(MeanParams {
        alpha: m1 + l11 * u1,
        beta: m2 + l21 * u1 + l22 * u2,
    })
}

/// Draws from `IGa(shape, rate)`.
pub fn inv_gamma_draw<R: Rng + ?Sized>(shape: f64, rate: f64, rng: &mut R) -> f64 {
    let g = Gamma::new(shape, 1.0 / rate).expect("inverse gamma parameters are positive");
    1.0 / g.sample(rng)
}

/// Draws the output scale from its conditional given residuals
/// `e = z - alpha - beta x`.
pub fn gibbs_tau2<R: Rng + ?Sized>(e: &[f64], factor: &CorrFactor, prior: &ScalePrior, rng: &mut R) -> f64 {
    let (a, b) = prior.posterior(e.len(), factor.cov.quad_form(e));
    inv_gamma_draw(a, b, rng)
}

/// Outcome of a single-parameter Metropolis-Hastings step.
#[derive(Clone, Debug)]
pub struct MhStep<T> {
    pub value: f64,
    pub accepted: bool,
    /// Anything the step computed for the accepted value and can hand back.
    pub cache: Option<T>,
}

fn log_rw<R: Rng + ?Sized>(current: f64, step: f64, rng: &mut R) -> f64 {
    let eta: f64 = rng.sample(StandardNormal);
    current * (step * eta).exp()
}

/// Lengthscale update with a log random walk. The target is the Gaussian
/// density of the residuals times the gamma prior; the proposal is rejected
/// when its covariance cannot be factored. Returns the new factor on accept.
#[allow(clippy::too_many_arguments)]
pub fn mh_lengthscale<R: Rng + ?Sized>(
    current: &CorrFactor,
    e: &[f64],
    x: &[f64],
    tau2: f64,
    prior: &GammaPrior,
    step: f64,
    rng: &mut R,
) -> MhStep<CorrFactor> {
    let theta = current.lengthscale;
    let proposal = log_rw(theta, step, rng);
    let Ok(factor) = CorrFactor::new(x, proposal, current.nugget) else {
        return MhStep {
            value: theta,
            accepted: false,
            cache: None,
        };
    };
    let log_ratio = factor.logpdf(e, tau2) - current.logpdf(e, tau2) + prior.log_kernel(proposal)
        - prior.log_kernel(theta)
        + (proposal / theta).ln();
    if mh_accept(log_ratio, rng) {
        MhStep {
            value: proposal,
            accepted: true,
            cache: Some(factor),
        }
    } else {
        MhStep {
            value: theta,
            accepted: false,
            cache: None,
        }
    }
}

/// Nugget (relative Gaussian noise) update, same scheme as the lengthscale.
#[allow(clippy::too_many_arguments)]
pub fn mh_nugget<R: Rng + ?Sized>(
    current: &CorrFactor,
    e: &[f64],
    x: &[f64],
    tau2: f64,
    prior: &GammaPrior,
    step: f64,
    rng: &mut R,
) -> MhStep<CorrFactor> {
    let g = current.nugget;
    let proposal = log_rw(g, step, rng);
    let Ok(factor) = CorrFactor::new(x, current.lengthscale, proposal) else {
        return MhStep {
            value: g,
            accepted: false,
            cache: None,
        };
    };
    let log_ratio = factor.logpdf(e, tau2) - current.logpdf(e, tau2) + prior.log_kernel(proposal) - prior.log_kernel(g)
        + (proposal / g).ln();
    if mh_accept(log_ratio, rng) {
        MhStep {
            value: proposal,
            accepted: true,
            cache: Some(factor),
        }
    } else {
        MhStep {
            value: g,
            accepted: false,
            cache: None,
        }
    }
}

/// Variance-inflation update against the t likelihood of the observation
/// residuals `y - (z - 2pi k)`.
pub fn mh_sigma2<R: Rng + ?Sized>(
    sigma2: f64,
    r: &[f64],
    nu: f64,
    prior: &GammaPrior,
    step: f64,
    rng: &mut R,
) -> MhStep<f64> {
    let proposal = log_rw(sigma2, step, rng);
    let cur = t_loglik_residuals(r, &TLikParams { sigma2, nu });
    let new = t_loglik_residuals(r, &TLikParams { sigma2: proposal, nu });
    let log_ratio = new - cur + prior.log_kernel(proposal) - prior.log_kernel(sigma2) + (proposal / sigma2).ln();
    let accepted = mh_accept(log_ratio, rng);
    MhStep {
        value: if accepted { proposal } else { sigma2 },
        accepted,
        cache: accepted.then_some(new),
    }
}

/// Degrees-of-freedom update; proposals below `prior.nu_min` are rejected.
pub fn mh_nu<R: Rng + ?Sized>(
    nu: f64,
    r: &[f64],
    sigma2: f64,
    prior: &PriorConfig,
    step: f64,
    rng: &mut R,
) -> MhStep<f64> {
    let proposal = log_rw(nu, step, rng);
    if proposal < prior.nu_min {
        // Consume the uniform anyway so the stream does not depend on
        // where the proposal landed.
        let _: f64 = rng.random();
        return MhStep {
            value: nu,
            accepted: false,
            cache: None,
        };
    }
    let cur = t_loglik_residuals(r, &TLikParams { sigma2, nu });
    let new = t_loglik_residuals(r, &TLikParams { sigma2, nu: proposal });
    let log_ratio = new - cur + prior.nu_log_prior(proposal) - prior.nu_log_prior(nu) + (proposal / nu).ln();
    let accepted = mh_accept(log_ratio, rng);
    MhStep {
        value: if accepted { proposal } else { nu },
        accepted,
        cache: accepted.then_some(new),
    }
}
