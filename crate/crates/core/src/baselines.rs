//! Comparators: a coupled wrapped GP that samples each wrapping number from
//! its truncated discrete conditional with `z = y + 2pi k`, and an ordinary GP
//! that ignores the wrapping. Both use Gaussian noise, expressed as a nugget
//! relative to the output scale.

use std::f64::consts::TAU;

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::fit::{
    check_training_size, initialize, Acceptance, FitConfig, Method, Noise, SampleRecord, Trace, TraceMeta,
    SCHEMA_VERSION,
};
use crate::hyper::{
    gibbs_mean, gibbs_tau2, mh_lengthscale, mh_nugget, CorrFactor, GammaPrior, MeanParams, PriorConfig,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineConfig {
    pub fit: FitConfig,
    /// Half-width of the wrapping-number window around each current value.
    pub window: usize,
    pub nugget_prior: GammaPrior,
    pub nugget_step: f64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            fit: FitConfig::default(),
            window: 3,
            nugget_prior: GammaPrior { shape: 0.5, rate: 0.5 },
            nugget_step: 0.3,
        }
    }
}

impl BaselineConfig {
    pub fn from_fit(fit: FitConfig) -> Self {
        Self { fit, ..Self::default() }
    }
}

struct GaussianState {
    z: Vec<f64>,
    k: Vec<i64>,
    mean: MeanParams,
    tau2: f64,
    factor: CorrFactor,
}

impl GaussianState {
    fn record(&self, iteration: usize, k_min: i64) -> SampleRecord {
        SampleRecord {
            iteration,
            locations: Vec::new(),
            k_min,
            k: self.k.clone(),
            z: self.z.clone(),
            alpha: self.mean.alpha,
            beta: self.mean.beta,
            tau2: self.tau2,
            theta: self.factor.lengthscale,
            noise: Noise::Gaussian {
                nugget: self.factor.nugget,
            },
        }
    }
}

/// Precision `(tau2 (R + g I))^-1`.
fn precision(factor: &CorrFactor, tau2: f64) -> DMatrix<f64> {
    factor.cov().inverse() / tau2
}

/// One systematic sweep of the wrapping numbers. Each `k_i` is drawn from its
/// conditional over `k_i - window ..= k_i + window` given the others, under
/// the Gaussian density of `z = y + 2pi k`.
fn sweep_k<R: Rng + ?Sized>(
    y: &[f64],
    x: &[f64],
    s: &mut GaussianState,
    window: usize,
    acceptance: &mut Acceptance,
    rng: &mut R,
) {
    if window == 0 {
        return;
    }
    let q_mat = precision(&s.factor, s.tau2);
    let e = s.mean.residuals(x, &s.z);
    // q = Q e, maintained as z changes.
    let mut q: Vec<f64> = (0..e.len())
        .map(|i| q_mat.row(i).iter().zip(&e).map(|(a, b)| a * b).sum())
        .collect();
    let w = window as i64;
    let mut logp = Vec::with_capacity(2 * window + 1);
    for i in 0..y.len() {
        let qii = q_mat[(i, i)];
        logp.clear();
        for c in -w..=w {
            let d = TAU * c as f64;
            logp.push(-(d * q[i] + 0.5 * d * d * qii));
        }
        let top = logp.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let weights: Vec<f64> = logp.iter().map(|l| (l - top).exp()).collect();
        let total: f64 = weights.iter().sum();
        let mut u = rng.random::<f64>() * total;
        let mut pick = weights.len() - 1;
        for (j, wt) in weights.iter().enumerate() {
            if u < *wt {
                pick = j;
                break;
            }
            u -= wt;
        }
        let c = pick as i64 - w;
        acceptance.k.record(c != 0);
        if c != 0 {
            let d = TAU * c as f64;
            s.k[i] += c;
            s.z[i] = y[i] + TAU * s.k[i] as f64;
            for (qj, col) in q.iter_mut().zip(q_mat.column(i).iter()) {
                *qj += d * col;
            }
        }
    }
}

/// Conjugate mean and scale updates followed by lengthscale and nugget steps.
fn sweep_hyper<R: Rng + ?Sized>(
    x: &[f64],
    s: &mut GaussianState,
    prior: &PriorConfig,
    config: &BaselineConfig,
    acceptance: &mut Acceptance,
    rng: &mut R,
) -> Result<()> {
    s.mean = gibbs_mean(&s.z, x, &s.factor, s.tau2, prior, rng)?;
    let e = s.mean.residuals(x, &s.z);
    s.tau2 = gibbs_tau2(&e, &s.factor, &prior.tau2, rng);
    let mh = mh_lengthscale(
        &s.factor,
        &e,
        x,
        s.tau2,
        &prior.lengthscale,
        config.fit.steps.lengthscale,
        rng,
    );
    acceptance.lengthscale.record(mh.accepted);
    if let Some(f) = mh.cache {
        s.factor = f;
    }
    let mh = mh_nugget(&s.factor, &e, x, s.tau2, &config.nugget_prior, config.nugget_step, rng);
    acceptance.nugget.record(mh.accepted);
    if let Some(f) = mh.cache {
        s.factor = f;
    }
    Ok(())
}

fn validate(config: &BaselineConfig) -> Result<()> {
    config.fit.validate()?;
    let g = config.nugget_prior;
    if !(g.shape > 0.0 && g.rate > 0.0 && config.nugget_step >= 0.0) {
        return Err(Error::invalid(
            "nugget prior must be positive and its step non-negative",
        ));
    }
    Ok(())
}

fn run<R, F>(data: &Dataset, config: &BaselineConfig, method: Method, rng: &mut R, mut k_step: F) -> Result<Trace>
where
    R: Rng + ?Sized,
    F: FnMut(&[f64], &[f64], &mut GaussianState, &mut Acceptance, &mut R),
{
    validate(config)?;
    check_training_size(data)?;
    let fit = &config.fit;
    let prior = fit.resolved_prior(data)?;
    let x = data.scaled_x();
    let y = data.y();
    let init = initialize(data, &prior, fit.k_min_init)?;
    let (z, k, k_min) = match method {
        Method::Ordinary => (y.to_vec(), vec![0; y.len()], 0),
        _ => (init.z, init.k, init.partition.k_min()),
    };
    let mut state = GaussianState {
        z,
        k,
        mean: init.mean,
        tau2: init.tau2,
        factor: CorrFactor::new(&x, init.theta, config.nugget_prior.median())?,
    };
    let mut acceptance = Acceptance::default();
    let mut samples = Vec::with_capacity(fit.kept_count());
    for t in 1..=fit.iterations {
        k_step(y, &x, &mut state, &mut acceptance, rng);
        sweep_hyper(&x, &mut state, &prior, config, &mut acceptance, rng).map_err(|e| e.at_iteration(t))?;
        if fit.keeps(t) {
            let k_min = state.k.iter().copied().min().unwrap_or(k_min);
            samples.push(state.record(t, k_min));
        }
    }
    Ok(Trace {
        meta: TraceMeta {
            schema_version: SCHEMA_VERSION,
            method,
            seed: fit.seed,
            iterations: fit.iterations,
            burnin: fit.burnin,
            thin: fit.thin,
            reset_iteration: None,
            prior,
            steps: fit.steps,
            acceptance,
            negated: false,
        },
        data: data.clone(),
        samples,
    })
}

/// Coupled baseline seeded from `config.fit.seed`.
pub fn fit_coupled(data: &Dataset, config: &BaselineConfig) -> Result<Trace> {
    fit_coupled_with_rng(data, config, &mut config.fit.rng())
}

pub fn fit_coupled_with_rng<R: Rng + ?Sized>(data: &Dataset, config: &BaselineConfig, rng: &mut R) -> Result<Trace> {
    let window = config.window;
    run(data, config, Method::Coupled, rng, |y, x, s, acc, rng| {
        sweep_k(y, x, s, window, acc, rng)
    })
}

/// Ordinary GP on the raw angles, seeded from `config.fit.seed`.
pub fn fit_ordinary(data: &Dataset, config: &BaselineConfig) -> Result<Trace> {
    fit_ordinary_with_rng(data, config, &mut config.fit.rng())
}

pub fn fit_ordinary_with_rng<R: Rng + ?Sized>(data: &Dataset, config: &BaselineConfig, rng: &mut R) -> Result<Trace> {
    run(data, config, Method::Ordinary, rng, |_, _, _, _, _| {})
}
