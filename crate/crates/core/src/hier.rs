//! Hierarchical model over several tests: each test has its own wrapped GP,
//! and their slopes share a prior `N(exp(delta_i), sigma_beta^2)` where `delta`
//! is a zero-mean GP over the (rescaled) test distances.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::{common_rescale, Dataset, Rescale, TestGroup};
use crate::error::{Error, Result};
use crate::ess::{ess_step, EssTarget};
use crate::fit::{check_training_size, Chain, FitConfig, Method, Trace, TraceMeta, SCHEMA_VERSION};
use crate::gp::{KernelParams, Kriging};
use crate::hyper::{gibbs_tau2, mh_lengthscale, CorrFactor, GammaPrior, ScalePrior};
use crate::likelihood::hier_loglik;
use crate::predict::quantile_sorted;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HierConfig {
    /// Run lengths, test-level priors and step sizes. The slope prior of each
    /// test is replaced by the hierarchical one.
    pub fit: FitConfig,
    pub sigma_beta2: f64,
    pub delta_tau2: ScalePrior,
    pub delta_lengthscale: GammaPrior,
    pub delta_step: f64,
}

impl Default for HierConfig {
    fn default() -> Self {
        let fit = FitConfig::default();
        Self {
            sigma_beta2: 0.1,
            delta_tau2: fit.prior.tau2,
            delta_lengthscale: fit.prior.lengthscale,
            delta_step: 0.3,
            fit,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeltaSample {
    pub iteration: usize,
    pub delta: Vec<f64>,
    pub tau2: f64,
    pub theta: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HierTrace {
    pub schema_version: u32,
    pub config: HierConfig,
    pub test_ids: Vec<String>,
    /// Distances in original units, in test order.
    pub distances: Vec<f64>,
    pub distance_rescale: Rescale,
    pub frequency_rescale: Rescale,
    /// Per-test traces; their samples line up with `delta`.
    pub tests: Vec<Trace>,
    pub delta: Vec<DeltaSample>,
    pub delta_acceptance: crate::fit::Tally,
}

impl HierTrace {
    /// Posterior mean of each test's slope per unit of rescaled input.
    pub fn slope_means(&self) -> Vec<f64> {
        self.tests
            .iter()
            .map(|t| t.samples.iter().map(|s| s.beta).sum::<f64>() / t.len() as f64)
            .collect()
    }

    /// Posterior mean of `exp(delta_i)` per test.
    pub fn exp_delta_means(&self) -> Vec<f64> {
        let m = self.distances.len();
        let t = self.delta.len() as f64;
        (0..m)
            .map(|i| self.delta.iter().map(|s| s.delta[i].exp()).sum::<f64>() / t)
            .collect()
    }
}

fn check_groups(groups: &[TestGroup]) -> Result<()> {
    if groups.len() < 2 {
        return Err(Error::invalid("the hierarchical model needs at least two tests"));
    }
    let mut d: Vec<f64> = groups.iter().map(|g| g.distance).collect();
    d.sort_by(f64::total_cmp);
    if d.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::invalid("test distances must be distinct"));
    }
    Ok(())
}

/// Runs the hierarchical sampler. Test `i` draws from random stream `i + 1`
/// of the seed and the distance-level updates from stream 0, so results do
/// not depend on the order the tests are visited in.
pub fn hier_fit(groups: &[TestGroup], config: &HierConfig) -> Result<HierTrace> {
    check_groups(groups)?;
    let fit = &config.fit;
    fit.validate()?;
    if !(config.sigma_beta2 > 0.0) {
        return Err(Error::invalid("sigma_beta2 must be positive"));
    }
    let frequency_rescale = common_rescale(groups)?;
    let datasets: Vec<Dataset> = groups
        .iter()
        .enumerate()
        .map(|(i, g)| {
            let d = g.to_dataset(frequency_rescale).map_err(|e| e.in_test(i))?;
            check_training_size(&d).map_err(|e| e.in_test(i))?;
            Ok(d)
        })
        .collect::<Result<_>>()?;
    let distances: Vec<f64> = groups.iter().map(|g| g.distance).collect();
    let distance_rescale = Rescale::spanning(&distances)?;
    let d_unit: Vec<f64> = distances.iter().map(|&d| distance_rescale.to_unit(d)).collect();
    let m = groups.len();

    let mut chains = Vec::with_capacity(m);
    let mut delta = Vec::with_capacity(m);
    for (i, data) in datasets.iter().enumerate() {
        let mut prior = fit.resolved_prior(data).map_err(|e| e.in_test(i))?;
        delta.push(prior.slope_mean.max(0.05).ln());
        prior.slope_var = config.sigma_beta2;
        chains.push(Chain::new(data, prior, fit.steps, fit.k_min_init).map_err(|e| e.in_test(i))?);
    }
    let mut rngs: Vec<ChaCha8Rng> = (0..m)
        .map(|i| {
            let mut r = ChaCha8Rng::seed_from_u64(fit.seed);
            r.set_stream(i as u64 + 1);
            r
        })
        .collect();
    let mut top_rng = ChaCha8Rng::seed_from_u64(fit.seed);

    let sigma_beta = config.sigma_beta2.sqrt();
    let mut factor = CorrFactor::new(&d_unit, config.delta_lengthscale.median(), 0.0)?;
    let mut delta_acceptance = crate::fit::Tally::default();
    let mut samples: Vec<Vec<_>> = vec![Vec::with_capacity(fit.kept_count()); m];
    let mut delta_samples = Vec::with_capacity(fit.kept_count());

    for t in 1..=fit.iterations {
        for (i, chain) in chains.iter_mut().enumerate() {
            chain.prior_mut().slope_mean = delta[i].exp();
            chain.sweep(&mut rngs[i]).map_err(|e| e.in_test(i).at_iteration(t))?;
            if fit.reset_iteration == Some(t) {
                chain.reset_kmin();
            }
        }
        let beta: Vec<f64> = chains.iter().map(|c| c.state().mean.beta).collect();

        let tau2 = gibbs_tau2(&delta, &factor, &config.delta_tau2, &mut top_rng);
        let mh = mh_lengthscale(
            &factor,
            &delta,
            &d_unit,
            tau2,
            &config.delta_lengthscale,
            config.delta_step,
            &mut top_rng,
        );
        delta_acceptance.record(mh.accepted);
        if let Some(f) = mh.cache {
            factor = f;
        }
        let zeros = vec![0.0; m];
        let mut target = EssTarget {
            mean: &zeros,
            cov: factor.cov(),
            scale: tau2,
            loglik: |d: &[f64]| hier_loglik(d, &beta, sigma_beta),
        };
        delta = ess_step(&delta, &mut target, &mut top_rng)
            .map_err(|e| e.at_iteration(t))?
            .state;

        if fit.keeps(t) {
            for (i, chain) in chains.iter().enumerate() {
                samples[i].push(chain.record(t));
            }
            delta_samples.push(DeltaSample {
                iteration: t,
                delta: delta.clone(),
                tau2,
                theta: factor.lengthscale,
            });
        }
    }

    let tests = chains
        .iter()
        .zip(samples)
        .zip(datasets)
        .map(|((chain, samples), data)| Trace {
            meta: TraceMeta {
                schema_version: SCHEMA_VERSION,
                method: Method::Wgp,
                seed: fit.seed,
                iterations: fit.iterations,
                burnin: fit.burnin,
                thin: fit.thin,
                reset_iteration: fit.reset_iteration,
                prior: chain.prior().clone(),
                steps: fit.steps,
                acceptance: *chain.acceptance(),
                negated: false,
            },
            data,
            samples,
        })
        .collect();
    Ok(HierTrace {
        schema_version: SCHEMA_VERSION,
        config: config.clone(),
        test_ids: groups.iter().map(|g| g.test_id.clone()).collect(),
        distances,
        distance_rescale,
        frequency_rescale,
        tests,
        delta: delta_samples,
        delta_acceptance,
    })
}

/// Predictive summaries of the latent log-slope and of its exponential.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeltaPrediction {
    pub distance: Vec<f64>,
    pub delta_mean: Vec<f64>,
    pub delta_var: Vec<f64>,
    pub exp_mean: Vec<f64>,
    pub exp_var: Vec<f64>,
    pub exp_lo95: Vec<f64>,
    pub exp_hi95: Vec<f64>,
}

/// Draws per posterior sample used for the interval of `exp(delta)`.
const DELTA_DRAWS: usize = 64;

/// Kriges `delta` at new distances for every kept sample. Moments of
/// `exp(delta)` combine the per-sample log-normal moments across samples;
/// the interval comes from Monte Carlo draws.
pub fn predict_delta(trace: &HierTrace, dnew: &[f64], seed: u64) -> Result<DeltaPrediction> {
    if trace.delta.is_empty() {
        return Err(Error::invalid("cannot predict from an empty hierarchical trace"));
    }
    let d_unit: Vec<f64> = trace
        .distances
        .iter()
        .map(|&d| trace.distance_rescale.to_unit(d))
        .collect();
    let xs: Vec<f64> = dnew.iter().map(|&d| trace.distance_rescale.to_unit(d)).collect();
    let big_t = trace.delta.len() as f64;
    let n = dnew.len();
    let mut means = vec![Vec::with_capacity(trace.delta.len()); n];
    let mut vars = vec![Vec::with_capacity(trace.delta.len()); n];
    let mut draws = vec![Vec::with_capacity(trace.delta.len() * DELTA_DRAWS); n];
    for (t, s) in trace.delta.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(t as u64);
        let krig = Kriging::new(&d_unit, &s.delta, 0.0, 0.0, KernelParams::new(s.theta, s.tau2)?, 0.0)?;
        for (j, &x) in xs.iter().enumerate() {
            let (m, v) = krig.at(x);
            means[j].push(m);
            vars[j].push(v);
            for _ in 0..DELTA_DRAWS {
                let u: f64 = rng.sample(StandardNormal);
                draws[j].push((m + v.sqrt() * u).exp());
            }
        }
    }
    let mut out = DeltaPrediction {
        distance: dnew.to_vec(),
        delta_mean: Vec::with_capacity(n),
        delta_var: Vec::with_capacity(n),
        exp_mean: Vec::with_capacity(n),
        exp_var: Vec::with_capacity(n),
        exp_lo95: Vec::with_capacity(n),
        exp_hi95: Vec::with_capacity(n),
    };
    for j in 0..n {
        let m = &means[j];
        let v = &vars[j];
        let dm = m.iter().sum::<f64>() / big_t;
        let dv = v.iter().sum::<f64>() / big_t + m.iter().map(|a| (a - dm).powi(2)).sum::<f64>() / big_t;
        // Log-normal moments per sample, then the mixture's.
        let em: Vec<f64> = m.iter().zip(v).map(|(a, b)| (a + 0.5 * b).exp()).collect();
        let ev: Vec<f64> = m.iter().zip(v).map(|(a, b)| b.exp_m1() * (2.0 * a + b).exp()).collect();
        let mix_mean = em.iter().sum::<f64>() / big_t;
        let mix_var = ev.iter().sum::<f64>() / big_t + em.iter().map(|a| (a - mix_mean).powi(2)).sum::<f64>() / big_t;
        let mut dr = std::mem::take(&mut draws[j]);
        dr.sort_by(f64::total_cmp);
        out.delta_mean.push(dm);
        out.delta_var.push(dv);
        out.exp_mean.push(mix_mean);
        out.exp_var.push(mix_var);
        out.exp_lo95.push(quantile_sorted(&dr, 0.025));
        out.exp_hi95.push(quantile_sorted(&dr, 0.975));
    }
    Ok(out)
}
