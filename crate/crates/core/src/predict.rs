//! Pointwise posterior predictive summaries from a trace.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::wrap_angle;
use crate::error::{Error, Result};
use crate::fit::{Method, Noise, SampleRecord, Trace};
use crate::gp::{KernelParams, Kriging};
use crate::hyper::CorrFactor;

/// Per-input predictive summaries plus the retained draws.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionResult {
    /// Inputs in original units.
    pub x: Vec<f64>,
    pub mean_wrapped: Vec<f64>,
    pub mean_unwrapped: Vec<f64>,
    pub var: Vec<f64>,
    pub lo95: Vec<f64>,
    pub hi95: Vec<f64>,
    pub k_mean: Vec<f64>,
    pub k_var: Vec<f64>,
    /// `samples[j][t]`: wrapped predictive draw of the response at input `j`
    /// from kept sample `t`, noise included.
    pub samples: Vec<Vec<f64>>,
    pub k_samples: Vec<Vec<i64>>,
}

impl PredictionResult {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Maps predictions made on reflected responses back to the original
    /// orientation. Wrapping numbers are left in the fitted orientation.
    pub fn negated(mut self) -> Self {
        let flip = |v: &mut Vec<f64>| v.iter_mut().for_each(|a| *a = wrap_angle(-*a));
        flip(&mut self.mean_wrapped);
        self.mean_unwrapped.iter_mut().for_each(|a| *a = -*a);
        std::mem::swap(&mut self.lo95, &mut self.hi95);
        flip(&mut self.lo95);
        flip(&mut self.hi95);
        self.samples.iter_mut().for_each(flip);
        self
    }
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let h = p.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

struct SampleDraw {
    /// Unwrapped latent prediction `z' - 2pi k'` (or `z'` for the baselines).
    u: Vec<f64>,
    k: Vec<i64>,
    /// `u` plus a noise draw.
    y: Vec<f64>,
    noise_var: f64,
}

fn draw_for_sample(
    method: Method,
    rec: &SampleRecord,
    x: &[f64],
    xnew: &[f64],
    bounds: (f64, f64),
    rng: &mut ChaCha8Rng,
) -> Result<SampleDraw> {
    let nugget = rec.noise.nugget();
    let factor = CorrFactor::new(x, rec.theta, nugget)?;
    let params = KernelParams::new(rec.theta, rec.tau2)?;
    let krig = Kriging::with_factor(x, &rec.z, rec.alpha, rec.beta, params, factor.into_cov());
    let partition = match method {
        Method::Wgp => Some(rec.partition(bounds)?),
        _ => None,
    };
    let t_noise = match rec.noise {
        Noise::StudentT { sigma2, nu } => Some((
            StudentT::new(nu).map_err(|e| Error::invalid(e.to_string()))?,
            sigma2.sqrt(),
        )),
        Noise::Gaussian { .. } => None,
    };
    let noise_var = rec.noise.variance(rec.tau2);
    let mut out = SampleDraw {
        u: Vec::with_capacity(xnew.len()),
        k: Vec::with_capacity(xnew.len()),
        y: Vec::with_capacity(xnew.len()),
        noise_var,
    };
    for &xs in xnew {
        let (m, v) = krig.at(xs);
        let zn: f64 = rng.sample(StandardNormal);
        let z = m + v.sqrt() * zn;
        let (k, u) = match &partition {
            Some(p) => {
                let k = p.eval_k(xs);
                (k, z - TAU * k as f64)
            }
            None if method == Method::Coupled => ((z / TAU).floor() as i64, z),
            None => (0, z),
        };
        let eps = match &t_noise {
            Some((t, sd)) => sd * t.sample(rng),
            None => noise_var.sqrt() * rng.sample::<f64, _>(StandardNormal),
        };
        out.u.push(u);
        out.k.push(k);
        out.y.push(u + eps);
    }
    Ok(out)
}

/// Predictive moments at `xnew` (original input units). Every kept sample
/// gets its own random substream of `seed`, so the result does not depend on
/// how the work is scheduled.
pub fn predict(trace: &Trace, xnew: &[f64], seed: u64) -> Result<PredictionResult> {
    if trace.is_empty() {
        return Err(Error::invalid("cannot predict from an empty trace"));
    }
    let rescale = trace.data.rescale();
    let x = trace.data.scaled_x();
    let xs: Vec<f64> = xnew.iter().map(|&v| rescale.to_unit(v)).collect();
    let bounds = trace.bounds();
    let method = trace.meta.method;

    let draws: Vec<SampleDraw> = trace
        .samples
        .par_iter()
        .enumerate()
        .map(|(t, rec)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(t as u64);
            draw_for_sample(method, rec, &x, &xs, bounds, &mut rng)
        })
        .collect::<Result<_>>()?;

    let big_t = draws.len();
    let tf = big_t as f64;
    let noise_term = draws.iter().map(|d| d.noise_var).sum::<f64>() / tf;
    let mut out = PredictionResult {
        x: xnew.to_vec(),
        mean_wrapped: Vec::with_capacity(xnew.len()),
        mean_unwrapped: Vec::with_capacity(xnew.len()),
        var: Vec::with_capacity(xnew.len()),
        lo95: Vec::with_capacity(xnew.len()),
        hi95: Vec::with_capacity(xnew.len()),
        k_mean: Vec::with_capacity(xnew.len()),
        k_var: Vec::with_capacity(xnew.len()),
        samples: Vec::with_capacity(xnew.len()),
        k_samples: Vec::with_capacity(xnew.len()),
    };
    for j in 0..xnew.len() {
        let u: Vec<f64> = draws.iter().map(|d| d.u[j]).collect();
        let mean = u.iter().sum::<f64>() / tf;
        let spread = if big_t > 1 {
            u.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (tf - 1.0)
        } else {
            0.0
        };
        let mut y: Vec<f64> = draws.iter().map(|d| d.y[j]).collect();
        let wrapped: Vec<f64> = y.iter().map(|&v| wrap_angle(v)).collect();
        y.sort_by(f64::total_cmp);
        let ks: Vec<i64> = draws.iter().map(|d| d.k[j]).collect();
        let k_mean = ks.iter().map(|&k| k as f64).sum::<f64>() / tf;
        let k_var = ks.iter().map(|&k| (k as f64 - k_mean).powi(2)).sum::<f64>() / tf;

        out.mean_unwrapped.push(mean);
        out.mean_wrapped.push(wrap_angle(mean));
        out.var.push(noise_term + spread);
        out.lo95.push(wrap_angle(quantile_sorted(&y, 0.025)));
        out.hi95.push(wrap_angle(quantile_sorted(&y, 0.975)));
        out.k_mean.push(k_mean);
        out.k_var.push(k_var);
        out.samples.push(wrapped);
        out.k_samples.push(ks);
    }
    Ok(out)
}

/// `n` evenly spaced points over the training input range.
pub fn grid(trace: &Trace, n: usize) -> Vec<f64> {
    let x = trace.data.x();
    linspace(x[0], x[x.len() - 1], n)
}

pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.5 * (lo + hi)],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}
