//! The full sampler for the wrapped GP: partition moves, elliptical slice
//! updates of the latent values, and the hyperparameter steps, with burn-in,
//! thinning and the one-off `k_min` re-anchoring.

use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::ess::{ess_step, EssTarget};
use crate::hyper::{
    default_group_size, gibbs_mean, gibbs_tau2, mh_lengthscale, mh_nu, mh_sigma2, slope_prior_mean, CorrFactor,
    MeanParams, PriorConfig, StepSizes,
};
use crate::likelihood::{residuals, t_loglik, TLikParams};
use crate::partition::{mh_update, reset_kmin, MoveCounts, WrapPartition};

/// Version of the serialized trace layout.
pub const SCHEMA_VERSION: u32 = 1;

/// Smallest training set the samplers accept.
pub const MIN_TRAINING_SIZE: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Wgp,
    Coupled,
    Ordinary,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Wgp, Method::Coupled, Method::Ordinary];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Wgp => "wgp",
            Method::Coupled => "coupled",
            Method::Ordinary => "ordinary",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "wgp" => Ok(Method::Wgp),
            "coupled" => Ok(Method::Coupled),
            "ordinary" => Ok(Method::Ordinary),
            other => Err(Error::invalid(format!("unknown method '{other}'"))),
        }
    }
}

/// Observation noise of a sample.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Noise {
    StudentT {
        sigma2: f64,
        nu: f64,
    },
    /// Gaussian noise with variance `nugget * tau2`.
    Gaussian {
        nugget: f64,
    },
}

impl Noise {
    pub fn variance(&self, tau2: f64) -> f64 {
        match *self {
            Noise::StudentT { sigma2, nu } => TLikParams { sigma2, nu }.variance(),
            Noise::Gaussian { nugget } => nugget * tau2,
        }
    }

    /// Nugget added to the unit correlation of the training covariance.
    pub fn nugget(&self) -> f64 {
        match *self {
            Noise::StudentT { .. } => 0.0,
            Noise::Gaussian { nugget } => nugget,
        }
    }
}

/// One state of the wrapped GP chain.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelState {
    pub partition: WrapPartition,
    pub k: Vec<i64>,
    pub z: Vec<f64>,
    pub mean: MeanParams,
    pub tau2: f64,
    pub theta: f64,
    pub lik: TLikParams,
}

/// A kept state as stored in a trace. Locations are in scaled input units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub iteration: usize,
    pub locations: Vec<f64>,
    pub k_min: i64,
    pub k: Vec<i64>,
    pub z: Vec<f64>,
    pub alpha: f64,
    pub beta: f64,
    pub tau2: f64,
    pub theta: f64,
    pub noise: Noise,
}

impl SampleRecord {
    pub fn partition(&self, bounds: (f64, f64)) -> Result<WrapPartition> {
        WrapPartition::new(self.locations.clone(), self.k_min, bounds.0, bounds.1)
    }

    pub fn mean(&self) -> MeanParams {
        MeanParams {
            alpha: self.alpha,
            beta: self.beta,
        }
    }
}

/// Accepted/proposed tallies for one update block.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Tally {
    pub accepted: u64,
    pub proposed: u64,
}

impl Tally {
    pub fn record(&mut self, accepted: bool) {
        self.proposed += 1;
        self.accepted += u64::from(accepted);
    }

    pub fn rate(&self) -> Option<f64> {
        (self.proposed > 0).then(|| self.accepted as f64 / self.proposed as f64)
    }
}

/// Per-block acceptance counts over the whole run (burn-in included).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Acceptance {
    pub shift: Tally,
    pub grow: Tally,
    pub shrink: Tally,
    pub lengthscale: Tally,
    pub sigma2: Tally,
    pub nu: Tally,
    pub nugget: Tally,
    /// Discrete wrapping-number moves of the coupled baseline.
    pub k: Tally,
}

impl Acceptance {
    fn add_moves(&mut self, m: &MoveCounts) {
        self.shift.accepted += m.shift_accepted;
        self.shift.proposed += m.shift_proposed;
        self.grow.accepted += m.grow_accepted;
        self.grow.proposed += m.grow_proposed;
        self.shrink.accepted += m.shrink_accepted;
        self.shrink.proposed += m.shrink_proposed;
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceMeta {
    pub schema_version: u32,
    pub method: Method,
    pub seed: u64,
    pub iterations: usize,
    pub burnin: usize,
    pub thin: usize,
    pub reset_iteration: Option<usize>,
    pub prior: PriorConfig,
    pub steps: StepSizes,
    pub acceptance: Acceptance,
    /// Responses were reflected (`y -> -y mod 2pi`) before fitting.
    #[serde(default)]
    pub negated: bool,
}

/// Thinned post-burn-in samples with the training data they were fitted to.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub meta: TraceMeta,
    pub data: Dataset,
    pub samples: Vec<SampleRecord>,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Scaled-input domain of the wrapping partitions.
    pub fn bounds(&self) -> (f64, f64) {
        let x = self.data.scaled_x();
        (x[0], x[x.len() - 1])
    }

    /// Applies the global relabelling `z + 2pi s`, `k + s`, `k_min + s`,
    /// `alpha + 2pi s` to every sample. The likelihood and the wrapped
    /// predictions are unchanged by it.
    pub fn shifted(&self, s: i64) -> Trace {
        let mut out = self.clone();
        let dz = TAU * s as f64;
        for rec in &mut out.samples {
            rec.z.iter_mut().for_each(|z| *z += dz);
            rec.k.iter_mut().for_each(|k| *k += s);
            rec.k_min += s;
            rec.alpha += dz;
        }
        out
    }
}

/// Run lengths, priors and step sizes for a fit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub iterations: usize,
    pub burnin: usize,
    pub thin: usize,
    pub seed: u64,
    /// Iteration (1-based) at which `k_min` is re-anchored; `None` disables it.
    pub reset_iteration: Option<usize>,
    pub k_min_init: i64,
    pub prior: PriorConfig,
    /// Replace `prior.slope_mean` with the local-slope preprocessing estimate.
    pub auto_slope: bool,
    pub steps: StepSizes,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            iterations: 10_000,
            burnin: 5_000,
            thin: 10,
            seed: 0,
            reset_iteration: Some(1_000),
            k_min_init: -2,
            prior: PriorConfig::default(),
            auto_slope: true,
            steps: StepSizes::default(),
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::invalid("iterations must be positive"));
        }
        if self.burnin >= self.iterations {
            return Err(Error::invalid(format!(
                "burn-in ({}) must be smaller than the number of iterations ({})",
                self.burnin, self.iterations
            )));
        }
        if self.thin == 0 {
            return Err(Error::invalid("thin must be at least 1"));
        }
        for (name, s) in [
            ("lengthscale", self.steps.lengthscale),
            ("sigma2", self.steps.sigma2),
            ("nu", self.steps.nu),
        ] {
            if !(s >= 0.0 && s.is_finite()) {
                return Err(Error::invalid(format!("step size for {name} must be non-negative")));
            }
        }
        self.prior.validate()
    }

    /// Whether 1-based iteration `t` is kept.
    pub fn keeps(&self, t: usize) -> bool {
        t > self.burnin && (t - self.burnin) % self.thin == 0
    }

    pub fn kept_count(&self) -> usize {
        (self.iterations - self.burnin) / self.thin
    }

    /// Priors with the slope mean filled in from the data when requested.
    pub fn resolved_prior(&self, data: &Dataset) -> Result<PriorConfig> {
        let mut prior = self.prior.clone();
        if self.auto_slope {
            let group = prior.group_size.unwrap_or_else(|| default_group_size(data.len()));
            prior.slope_mean = slope_prior_mean(&data.scaled_x(), data.y(), group.min(data.len()))?;
        }
        Ok(prior)
    }

    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }
}

pub(crate) fn check_training_size(data: &Dataset) -> Result<()> {
    if data.len() < MIN_TRAINING_SIZE {
        return Err(Error::invalid(format!(
            "need at least {MIN_TRAINING_SIZE} training points, got {}",
            data.len()
        )));
    }
    Ok(())
}

/// Starting state: intercept at its prior centre, slope at the prior mean,
/// wrapping locations from the jump scan, `z = y + 2pi k`, and the remaining
/// parameters at their prior medians.
pub fn initialize(data: &Dataset, prior: &PriorConfig, k_min: i64) -> Result<ModelState> {
    let x = data.scaled_x();
    let y = data.y();
    let partition = WrapPartition::from_jumps(&x, y, k_min)?;
    let k = partition.induce(&x);
    let z = y.iter().zip(&k).map(|(yi, ki)| yi + TAU * *ki as f64).collect();
    Ok(ModelState {
        partition,
        k,
        z,
        mean: MeanParams {
            alpha: prior.intercept_mean,
            beta: prior.slope_mean,
        },
        tau2: prior.tau2.median(),
        theta: prior.lengthscale.median(),
        lik: TLikParams::new(prior.sigma2.median(), prior.nu_median())?,
    })
}

/// A running wrapped GP chain over one dataset.
pub struct Chain {
    x: Vec<f64>,
    y: Vec<f64>,
    state: ModelState,
    factor: CorrFactor,
    prior: PriorConfig,
    steps: StepSizes,
    acceptance: Acceptance,
}

impl Chain {
    pub fn new(data: &Dataset, prior: PriorConfig, steps: StepSizes, k_min: i64) -> Result<Self> {
        let state = initialize(data, &prior, k_min)?;
        Self::from_state(data, state, prior, steps)
    }

    pub fn from_state(data: &Dataset, state: ModelState, prior: PriorConfig, steps: StepSizes) -> Result<Self> {
        let x = data.scaled_x();
        let factor = CorrFactor::new(&x, state.theta, 0.0)?;
        Ok(Self {
            x,
            y: data.y().to_vec(),
            state,
            factor,
            prior,
            steps,
            acceptance: Acceptance::default(),
        })
    }

    pub fn state(&self) -> &ModelState {
        &self.state
    }

    pub fn prior(&self) -> &PriorConfig {
        &self.prior
    }

    pub fn prior_mut(&mut self) -> &mut PriorConfig {
        &mut self.prior
    }

    pub fn acceptance(&self) -> &Acceptance {
        &self.acceptance
    }

    pub fn loglik(&self) -> f64 {
        t_loglik(&self.y, &self.state.z, &self.state.k, &self.state.lik)
    }

    /// One pass over every block in order: partition, latent values,
    /// mean, scale, lengthscale, variance inflation, degrees of freedom.
    pub fn sweep<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        let y = &self.y;
        let x = &self.x;
        let s = &mut self.state;

        let current = t_loglik(y, &s.z, &s.k, &s.lik);
        if !current.is_finite() {
            return Err(Error::NonFiniteLoglik(current));
        }
        let update = {
            let z = &s.z;
            let lik = s.lik;
            mh_update(&s.partition, x, current, |k| t_loglik(y, z, k, &lik), rng)
        };
        self.acceptance.add_moves(&update.moves);
        s.partition = update.partition;
        s.k = update.k;

        let prior_mean: Vec<f64> = x.iter().map(|&xi| s.mean.at(xi)).collect();
        let step = {
            let k = &s.k;
            let lik = s.lik;
            let mut target = EssTarget {
                mean: &prior_mean,
                cov: self.factor.cov(),
                scale: s.tau2,
                loglik: |z: &[f64]| t_loglik(y, z, k, &lik),
            };
            ess_step(&s.z, &mut target, rng)?
        };
        s.z = step.state;

        s.mean = gibbs_mean(&s.z, x, &self.factor, s.tau2, &self.prior, rng)?;
        let e = s.mean.residuals(x, &s.z);
        s.tau2 = gibbs_tau2(&e, &self.factor, &self.prior.tau2, rng);
        let mh = mh_lengthscale(
            &self.factor,
            &e,
            x,
            s.tau2,
            &self.prior.lengthscale,
            self.steps.lengthscale,
            rng,
        );
        self.acceptance.lengthscale.record(mh.accepted);
        if let Some(f) = mh.cache {
            self.factor = f;
        }
        s.theta = mh.value;

        let r = residuals(y, &s.z, &s.k);
        let mh = mh_sigma2(s.lik.sigma2, &r, s.lik.nu, &self.prior.sigma2, self.steps.sigma2, rng);
        self.acceptance.sigma2.record(mh.accepted);
        s.lik.sigma2 = mh.value;
        let mh = mh_nu(s.lik.nu, &r, s.lik.sigma2, &self.prior, self.steps.nu, rng);
        self.acceptance.nu.record(mh.accepted);
        s.lik.nu = mh.value;
        Ok(())
    }

    /// Re-anchors `k_min` at `floor(min z / 2pi)`. The latent values and the
    /// intercept move by the same multiple of 2pi, so every residual
    /// `y - (z - 2pi k)` is unchanged.
    pub fn reset_kmin(&mut self) {
        let s = &mut self.state;
        let anchored = reset_kmin(&s.partition, &s.z);
        let shift = anchored.k_min() - s.partition.k_min();
        if shift == 0 {
            return;
        }
        log::debug!("re-anchoring k_min by {shift}");
        let dz = TAU * shift as f64;
        s.partition = anchored;
        s.k.iter_mut().for_each(|k| *k += shift);
        s.z.iter_mut().for_each(|z| *z += dz);
        s.mean.alpha += dz;
    }

    pub fn record(&self, iteration: usize) -> SampleRecord {
        let s = &self.state;
        SampleRecord {
            iteration,
            locations: s.partition.locations().to_vec(),
            k_min: s.partition.k_min(),
            k: s.k.clone(),
            z: s.z.clone(),
            alpha: s.mean.alpha,
            beta: s.mean.beta,
            tau2: s.tau2,
            theta: s.theta,
            noise: Noise::StudentT {
                sigma2: s.lik.sigma2,
                nu: s.lik.nu,
            },
        }
    }
}

/// Runs the wrapped GP sampler seeded from `config.seed`.
pub fn fit(data: &Dataset, config: &FitConfig) -> Result<Trace> {
    fit_with_rng(data, config, &mut config.rng())
}

pub fn fit_with_rng<R: Rng + ?Sized>(data: &Dataset, config: &FitConfig, rng: &mut R) -> Result<Trace> {
    config.validate()?;
    check_training_size(data)?;
    let prior = config.resolved_prior(data)?;
    let mut chain = Chain::new(data, prior.clone(), config.steps, config.k_min_init)?;
    let mut samples = Vec::with_capacity(config.kept_count());
    for t in 1..=config.iterations {
        chain.sweep(rng).map_err(|e| e.at_iteration(t))?;
        if config.reset_iteration == Some(t) {
            chain.reset_kmin();
        }
        if config.keeps(t) {
            samples.push(chain.record(t));
        }
    }
    Ok(Trace {
        meta: TraceMeta {
            schema_version: SCHEMA_VERSION,
            method: Method::Wgp,
            seed: config.seed,
            iterations: config.iterations,
            burnin: config.burnin,
            thin: config.thin,
            reset_iteration: config.reset_iteration,
            prior,
            steps: config.steps,
            acceptance: *chain.acceptance(),
            negated: false,
        },
        data: data.clone(),
        samples,
    })
}
