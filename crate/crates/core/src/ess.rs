//! Elliptical slice sampling for a latent vector with a Gaussian prior.

use std::f64::consts::TAU;

use rand::Rng;

use crate::error::{Error, Result};
use crate::gp::{scaled_mvn_draw, CovMatrix};

/// Prior `N(mean, scale * cov)` paired with an arbitrary log-likelihood.
pub struct EssTarget<'a, F> {
    pub mean: &'a [f64],
    pub cov: &'a CovMatrix,
    pub scale: f64,
    pub loglik: F,
}

#[derive(Clone, Debug)]
pub struct EssStep {
    pub state: Vec<f64>,
    pub loglik: f64,
    /// Slice threshold the returned state cleared.
    pub threshold: f64,
    /// Number of bracket shrinks before acceptance.
    pub shrinks: usize,
}

/// Point on the ellipse through `current` and `mean + aux` at angle `gamma`:
/// `mean + (current - mean) cos(gamma) + aux sin(gamma)`.
pub fn ellipse_point(current: &[f64], mean: &[f64], aux: &[f64], gamma: f64) -> Vec<f64> {
    let (s, c) = gamma.sin_cos();
    current
        .iter()
        .zip(mean)
        .zip(aux)
        .map(|((x, m), a)| m + (x - m) * c + a * s)
        .collect()
}

/// One elliptical slice sampling transition. Rejection-free: the bracket
/// shrinks towards the current state until a candidate clears the threshold.
pub fn ess_step<R, F>(current: &[f64], target: &mut EssTarget<'_, F>, rng: &mut R) -> Result<EssStep>
where
    R: Rng + ?Sized,
    F: FnMut(&[f64]) -> f64,
{
    let current_ll = (target.loglik)(current);
    if !current_ll.is_finite() {
        return Err(Error::NonFiniteLoglik(current_ll));
    }
    let zeros = vec![0.0; current.len()];
    let aux = scaled_mvn_draw(&zeros, target.cov, target.scale, rng);
    let u: f64 = rng.random();
    let threshold = current_ll + u.ln();

    let mut gamma = TAU * rng.random::<f64>();
    let mut lo = gamma - TAU;
    let mut hi = gamma;
    let mut shrinks = 0;
    loop {
        let candidate = ellipse_point(current, target.mean, &aux, gamma);
        let ll = (target.loglik)(&candidate);
        if ll > threshold {
            return Ok(EssStep {
                state: candidate,
                loglik: ll,
                threshold,
                shrinks,
            });
        }
        if gamma < 0.0 {
            lo = gamma;
        } else {
            hi = gamma;
        }
        shrinks += 1;
        if hi - lo < 1e-12 {
            // The bracket has collapsed onto the current state.
            return Ok(EssStep {
                state: current.to_vec(),
                loglik: current_ll,
                threshold,
                shrinks,
            });
        }
        gamma = lo + (hi - lo) * rng.random::<f64>();
    }
}
